"""Small float64 MLP with hand-written backprop, plus Adam."""
import struct

import numpy as np

_GELU_C = np.sqrt(2.0 / np.pi)


def _tanh(x):
    return np.tanh(x)


def _tanh_grad(x, y):
    return 1.0 - y * y


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x ** 3)))


def _gelu_grad(x, y):
    u = _GELU_C * (x + 0.044715 * x ** 3)
    th = np.tanh(u)
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du


ACTIVATIONS = {
    "tanh": (_tanh, _tanh_grad),
    "gelu": (_gelu, _gelu_grad),
}
_ACT_CODES = {"tanh": 0, "gelu": 1}


def time_embedding(t, n_freq=16, fmin=1.0, fmax=1000.0):
    """Sinusoidal features ``[sin(f t), cos(f t)]`` for geometric ``f``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if n_freq == 0:
        return np.zeros(t.shape + (0,))
    freqs = np.geomspace(fmin, fmax, n_freq)
    arg = t[..., None] * freqs
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=-1)


class Mlp:
    """Map ``(z, t) -> R^d``: time features concatenated to ``z``, then dense layers.

    ``params`` is a flat list ``[W0, b0, W1, b1, ...]`` with ``W`` of shape
    ``(fan_in, fan_out)``.  The last layer is linear.
    """

    def __init__(self, d, hidden=(256, 256, 256), activation="tanh",
                 n_freq=16, fmin=1.0, fmax=1000.0, seed=0):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.d = d
        self.hidden = tuple(hidden)
        self.activation = activation
        self.n_freq, self.fmin, self.fmax = n_freq, float(fmin), float(fmax)
        rng = np.random.default_rng(seed)
        self.params = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            self.params.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            self.params.append(np.zeros(fan_out))

    @property
    def dims(self):
        return (self.d + 2 * self.n_freq,) + self.hidden + (self.d,)

    def _input(self, z, t):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (z.shape[0],))
        emb = time_embedding(t, self.n_freq, self.fmin, self.fmax)
        return np.concatenate([z, emb], axis=1)

    def forward(self, z, t, return_cache=False):
        """Evaluate on a batch ``z`` of shape ``(B, d)`` and times ``t`` (scalar or ``(B,)``)."""
        act, _ = ACTIVATIONS[self.activation]
        h = self._input(z, t)
        cache = [h]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            pre = h @ W + b
            if i < n_layers - 1:
                h = act(pre)
                cache.append((pre, h))
            else:
                h = pre
        return (h, cache) if return_cache else h

    __call__ = forward

    def backward(self, cache, grad_out):
        """Parameter gradients of ``sum(grad_out * out)`` over the batch."""
        _, act_grad = ACTIVATIONS[self.activation]
        n_layers = len(self.params) // 2
        if grad_out.shape != (cache[0].shape[0], self.d):
            raise ValueError(f"upstream gradient has shape {grad_out.shape}")
        grads = [None] * len(self.params)
        g = grad_out
        for i in reversed(range(n_layers)):
            h_in = cache[0] if i == 0 else cache[i][1]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                pre, post = cache[i]
                g = (g @ self.params[2 * i].T) * act_grad(pre, post)
        return grads

    def copy(self):
        other = object.__new__(Mlp)
        other.__dict__.update(self.__dict__)
        other.params = [p.copy() for p in self.params]
        return other


class Adam:
    """Bias-corrected Adam updating a list of arrays in place."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return self.params


# -- checkpoint --------------------------------------------------------------

MLP_MAGIC = b"MLP1"


def save_mlp(path, net):
    """Binary checkpoint: magic, u32 layer dims, time-embedding config, f64 tensors."""
    dims = net.dims
    with open(path, "wb") as f:
        f.write(MLP_MAGIC)
        f.write(struct.pack("<I", len(dims)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        f.write(struct.pack("<II", _ACT_CODES[net.activation], net.n_freq))
        f.write(struct.pack("<dd", net.fmin, net.fmax))
        for p in net.params:
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_mlp(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MLP_MAGIC:
        raise ValueError(f"{path}: not an MLP1 checkpoint")
    off = 4
    (k,) = struct.unpack_from("<I", raw, off)
    off += 4
    dims = struct.unpack_from(f"<{k}I", raw, off)
    off += 4 * k
    act_code, n_freq = struct.unpack_from("<II", raw, off)
    off += 8
    fmin, fmax = struct.unpack_from("<dd", raw, off)
    off += 16
    activation = {v: a for a, v in _ACT_CODES.items()}[act_code]
    d = dims[-1]
    if dims[0] != d + 2 * n_freq:
        raise ValueError(f"{path}: inconsistent input width {dims[0]}")
    net = Mlp(d, hidden=dims[1:-1], activation=activation, n_freq=n_freq,
              fmin=fmin, fmax=fmax, seed=0)
    for i, p in enumerate(net.params):
        size = p.size * 8
        if off + size > len(raw):
            raise ValueError(f"{path}: truncated checkpoint")
        net.params[i] = np.frombuffer(raw, dtype="<f8", count=p.size, offset=off).reshape(p.shape).copy()
        off += size
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return net
