"""Sampling: integrate the learned latent ODE, decode, round."""
import numpy as np

from .datasets import OneHotDataset
from .gpca import NumericalError, reconstruct

METHODS = ("euler", "rk4")


def integrate(field, z0, steps=100, method="rk4", trajectory=True):
    """Fixed-step integration of ``dz/dt = field(z, t)`` on ``[0, 1]``.

    ``field`` is a callable ``(z, t) -> dz`` or anything with a
    ``velocity`` method.  Returns the ``steps + 1`` states (or only the end
    state when ``trajectory`` is false).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    f = getattr(field, "velocity", field)
    z = np.array(z0, dtype=np.float64)
    h = 1.0 / steps
    states = [z.copy()] if trajectory else None
    for i in range(steps):
        t = i * h
        if method == "euler":
            z = z + h * f(z, t)
        else:
            k1 = f(z, t)
            k2 = f(z + 0.5 * h * k1, t + 0.5 * h)
            k3 = f(z + 0.5 * h * k2, t + 0.5 * h)
            k4 = f(z + h * k3, t + h)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite state after integration step {i + 1}")
        if trajectory:
            states.append(z.copy())
    return np.stack(states) if trajectory else z


def generate(model, count, steps=100, seed=0, method="rk4", return_points=False):
    """Draw ``count`` discrete samples from a trained flow model.

    Starting points are standard normal in latent coordinates.  With
    ``return_points`` the decoded simplex points are returned as well.
    """
    latent = model.latent
    rng = np.random.default_rng(seed)
    z0 = rng.standard_normal((count, latent.d))
    if count:
        z1 = integrate(model, z0, steps, method, trajectory=False)
    else:
        z1 = z0
    points, labels = reconstruct(latent, z1)
    data = OneHotDataset(labels.reshape(count, latent.n), latent.c)
    return (data, points) if return_points else data


def write_trajectory_csv(path, traj):
    """Dump a ``(steps+1, B, d)`` trajectory as rows ``sample,step,t,z_1..z_d``."""
    traj = np.asarray(traj)
    if traj.ndim == 2:
        traj = traj[:, None, :]
    steps = traj.shape[0] - 1
    d = traj.shape[2]
    with open(path, "w") as f:
        f.write("sample,step,t," + ",".join(f"z{k + 1}" for k in range(d)) + "\n")
        for b in range(traj.shape[1]):
            for i in range(steps + 1):
                f.write(f"{b},{i},{i / steps!r}," + ",".join(repr(float(v)) for v in traj[i, b]) + "\n")
