import numpy as np
import pytest

from geolatent.nn import Adam, Mlp, load_mlp, save_mlp, time_embedding


def sq_loss(net, z, t, y):
    out = net(z, t)
    return np.sum((out - y) ** 2)


def grad_check(net, z, t, y, h=1e-5):
    out, cache = net.forward(z, t, return_cache=True)
    grads = net.backward(cache, 2 * (out - y))
    worst = 0.0
    for p, g in zip(net.params, grads):
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = sq_loss(net, z, t, y)
            p[idx] = old - h
            down = sq_loss(net, z, t, y)
            p[idx] = old
            fd[idx] = (up - down) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - g) / max(np.linalg.norm(fd), 1e-12))
    return worst


@pytest.mark.parametrize("activation", ["tanh", "gelu"])
@pytest.mark.parametrize("n_freq", [0, 3])
def test_backward_matches_finite_differences(rng, activation, n_freq):
    net = Mlp(2, hidden=(16,), activation=activation, n_freq=n_freq, seed=1)
    z = rng.standard_normal((8, 2))
    t = rng.random(8)
    y = rng.standard_normal((8, 2))
    assert grad_check(net, z, t, y) < 1e-4


def test_deep_backward_matches_finite_differences(rng):
    net = Mlp(3, hidden=(7, 5, 6), n_freq=2, seed=4)
    z, t, y = rng.standard_normal((5, 3)), rng.random(5), rng.standard_normal((5, 3))
    assert grad_check(net, z, t, y) < 1e-4


def test_zero_weights_give_zero_output(rng):
    net = Mlp(4, hidden=(8, 8))
    for p in net.params:
        p[...] = 0
    out = net(rng.standard_normal((3, 4)), 0.5)
    assert out.shape == (3, 4)
    assert np.all(out == 0)


def test_output_shape_single_vector():
    net = Mlp(5, hidden=(4,))
    assert net(np.ones(5), 0.2).shape == (1, 5)


def test_small_perturbation_changes_output_little(rng):
    net = Mlp(4, hidden=(32, 32), seed=3)
    bound = np.prod([np.linalg.norm(W, 2) for W in net.params[::2]])
    for _ in range(20):
        z = rng.standard_normal((1, 4))
        dz = 1e-8 * rng.standard_normal((1, 4))
        change = np.linalg.norm(net(z + dz, 0.3) - net(z, 0.3))
        assert change <= bound * np.linalg.norm(dz) * (1 + 1e-6)
        assert change <= 1e-4 * bound


def test_gradient_vanishes_at_perfect_fit(rng):
    net = Mlp(2, hidden=(16,), seed=0)
    z, t = rng.standard_normal((6, 2)), rng.random(6)
    out, cache = net.forward(z, t, return_cache=True)
    grads = net.backward(cache, 2 * (out - out))
    assert max(np.abs(g).max() for g in grads) < 1e-10


def test_duplicated_batch_doubles_gradient(rng):
    net = Mlp(2, hidden=(16,), seed=0)
    z, t, y = rng.standard_normal((6, 2)), rng.random(6), rng.standard_normal((6, 2))
    out, cache = net.forward(z, t, return_cache=True)
    g1 = net.backward(cache, 2 * (out - y))
    z2, t2, y2 = np.concatenate([z, z]), np.concatenate([t, t]), np.concatenate([y, y])
    out2, cache2 = net.forward(z2, t2, return_cache=True)
    g2 = net.backward(cache2, 2 * (out2 - y2))
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-14)


def test_backward_rejects_bad_shape(rng):
    net = Mlp(2, hidden=(4,))
    _, cache = net.forward(rng.standard_normal((3, 2)), 0.1, return_cache=True)
    with pytest.raises(ValueError):
        net.backward(cache, np.zeros((3, 3)))


def test_time_embedding_layout():
    emb = time_embedding(np.array([0.0, 0.5]), n_freq=16)
    assert emb.shape == (2, 32)
    np.testing.assert_array_equal(emb[0, :16], 0.0)
    np.testing.assert_array_equal(emb[0, 16:], 1.0)


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    opt = Adam(p, lr=0.1)
    opt.step([np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_first_step_is_signed_lr():
    p = [np.array([1.0, -2.0, 0.5])]
    g = np.array([3.0, -1e-3, 250.0])
    opt = Adam(p, lr=0.01)
    opt.step([g])
    np.testing.assert_allclose(p[0], [1.0, -2.0, 0.5] - 0.01 * np.sign(g), atol=1e-7)


def test_adam_converges_on_quadratic_bowl():
    A = np.array([[3.0, 0.5], [0.5, 1.0]])
    x = [np.array([2.0, -1.5])]
    opt = Adam(x, lr=1e-2)
    for _ in range(2000):
        opt.step([2 * A @ x[0]])
    assert x[0] @ A @ x[0] < 1e-6


def test_adam_moment_shapes():
    params = [np.zeros((3, 2)), np.zeros(4)]
    opt = Adam(params)
    assert [m.shape for m in opt.m] == [(3, 2), (4,)]
    assert [v.shape for v in opt.v] == [(3, 2), (4,)]


def test_training_is_bit_reproducible(rng):
    def run():
        net = Mlp(2, hidden=(8,), seed=7)
        opt = Adam(net.params, lr=1e-2)
        data = np.random.default_rng(1)
        trace = []
        for _ in range(50):
            z, t, y = data.standard_normal((16, 2)), data.random(16), data.standard_normal((16, 2))
            out, cache = net.forward(z, t, return_cache=True)
            trace.append(np.sum((out - y) ** 2))
            opt.step(net.backward(cache, 2 * (out - y)))
        return np.array(trace)
    assert run().tobytes() == run().tobytes()


@pytest.mark.parametrize("activation", ["tanh", "gelu"])
def test_checkpoint_round_trip(tmp_path, rng, activation):
    net = Mlp(3, hidden=(5, 4), activation=activation, n_freq=4, fmin=2.0, fmax=50.0, seed=2)
    path = tmp_path / "net.mlp"
    save_mlp(path, net)
    assert path.read_bytes()[:4] == b"MLP1"
    back = load_mlp(path)
    assert back.dims == net.dims and back.activation == activation
    z, t = rng.standard_normal((4, 3)), rng.random(4)
    np.testing.assert_array_equal(back(z, t), net(z, t))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.mlp"
    path.write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        load_mlp(path)
