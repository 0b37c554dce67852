"""Conditional flow matching in GPCA latent coordinates.

With an orthonormal basis the e-geodesic between two decoded latent points
is the straight line between their coefficients, and the e-norm of a
tangent vector on the data manifold equals the Euclidean norm of its
coefficients.  Training therefore regresses ``z1 - z0`` at ``(1-t) z0 + t z1``.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import geometry
from .gpca import NumericalError
from .nn import Adam, Mlp


@dataclass
class FlowConfig:
    steps: int = 20000
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    hidden: tuple = (256, 256, 256)
    activation: str = "tanh"
    n_freq: int = 16
    fmin: float = 1.0
    fmax: float = 1000.0
    # verify the latent/simplex commuting square on every batch
    debug: bool = False


class FlowModel:
    """A velocity network over the latent coefficients of a finalized GPCA model."""

    def __init__(self, net, latent):
        if net.d != latent.d:
            raise ValueError(f"net acts on R^{net.d}, latent dimension is {latent.d}")
        if not latent.is_orthonormal():
            raise ValueError("flow matching needs an orthonormal GPCA basis")
        self.net = net
        self.latent = latent

    @classmethod
    def create(cls, latent, config=None):
        config = config or FlowConfig()
        net = Mlp(latent.d, hidden=config.hidden, activation=config.activation,
                  n_freq=config.n_freq, fmin=config.fmin, fmax=config.fmax, seed=config.seed)
        return cls(net, latent)

    @property
    def d(self):
        return self.latent.d

    def velocity(self, z, t):
        return self.net(z, t)

    def copy(self):
        return FlowModel(self.net.copy(), self.latent)


class CouplingSampler:
    """Independent coupling of a reference measure and the empirical GPCA coefficients.

    ``source`` is ``"normal"`` (standard normal in R^d) or a fixed point of
    shape ``(d,)``.
    """

    def __init__(self, Z, seed=0, source="normal"):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[0] == 0:
            raise ValueError("need a non-empty (N, d) coefficient matrix")
        self.Z = Z
        self.source = source if isinstance(source, str) else np.asarray(source, dtype=np.float64)
        if isinstance(self.source, str) and self.source != "normal":
            raise ValueError(f"unknown source {source!r}")
        self.rng = np.random.default_rng(seed)

    @property
    def d(self):
        return self.Z.shape[1]

    def sample_source(self, count):
        if isinstance(self.source, str):
            return self.rng.standard_normal((count, self.d))
        return np.broadcast_to(self.source, (count, self.d)).copy()

    def sample_pairs(self, count):
        z0 = self.sample_source(count)
        z1 = self.Z[self.rng.integers(0, self.Z.shape[0], size=count)]
        return z0, z1

    def sample_pair(self):
        z0, z1 = self.sample_pairs(1)
        return z0[0], z1[0]


def interpolant(z0, z1, t):
    """Point ``(1-t) z0 + t z1`` and its constant velocity ``z1 - z0``."""
    z0, z1 = np.asarray(z0, dtype=np.float64), np.asarray(z1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim:
        t = t[..., None]
    return (1.0 - t) * z0 + t * z1, z1 - z0


def cfm_loss(net, z0, z1, t, return_grads=False):
    """Mean of ``|net(z_t, t) - (z1 - z0)|^2`` over the batch."""
    zt, target = interpolant(z0, z1, t)
    out, cache = net.forward(zt, t, return_cache=True)
    resid = out - np.atleast_2d(target)
    B = resid.shape[0]
    loss = float(np.sum(resid * resid) / B)
    if not return_grads:
        return loss
    return loss, net.backward(cache, 2.0 * resid / B)


def simplex_cfm_loss(model, z0, z1, t):
    """The same objective measured on the simplex with the e-norm.

    Decodes both endpoints, forms the e-geodesic velocity and the pushed
    forward network field at ``s_t``, and averages the squared e-norm of
    their difference.
    """
    V = model.latent
    s0, s1 = geometry.decode(V.theta(z0)), geometry.decode(V.theta(z1))
    t = np.asarray(t, dtype=np.float64)
    st = geometry.e_geodesic(s0, s1, t)
    zt, _ = interpolant(z0, z1, t)
    v_theta = V.theta(model.net(zt, t))
    v = geometry.push_theta_to_tangent(geometry.encode(st), v_theta)
    dst = geometry.geodesic_velocity(s0, s1, t)
    return float(np.mean(geometry.e_norm(st, v - dst) ** 2))


def commuting_square_error(latent, z0, z1, t):
    """Max deviation between decoded latent interpolation and the simplex geodesic."""
    zt, _ = interpolant(z0, z1, t)
    via_latent = geometry.decode(latent.theta(zt))
    via_simplex = geometry.e_geodesic(geometry.decode(latent.theta(z0)),
                                      geometry.decode(latent.theta(z1)), t)
    return float(np.max(np.abs(via_latent - via_simplex)))


def train(model, sampler, config=None):
    """Adam on the CFM loss; returns ``(trained copy, per-step losses)``."""
    config = config or FlowConfig()
    if sampler.d != model.d:
        raise ValueError("sampler and model latent dimensions differ")
    model = model.copy()
    opt = Adam(model.net.params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    trace = []
    for step in range(config.steps):
        z0, z1 = sampler.sample_pairs(config.batch_size)
        t = rng.random(config.batch_size)
        if config.debug:
            err = commuting_square_error(model.latent, z0, z1, t)
            if err > 1e-10:
                raise AssertionError(f"commuting square violated by {err:g} at step {step}")
        loss, grads = cfm_loss(model.net, z0, z1, t, return_grads=True)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite flow-matching loss at step {step}")
        opt.step(grads)
        trace.append(loss)
    return model, trace


@dataclass
class BudgetReport:
    sq_errors: np.ndarray
    max_sq_error: float
    epsilon: float
    epsilon_met: bool
    multiplier: float
    additive: float
    bound: float = None

    def bound_for(self, subspace_loss):
        return self.multiplier * subspace_loss + self.additive


def subspace_error_budget(full_thetas, approx_thetas, epsilon, subspace_loss=None):
    """Check ``max_i |theta_i - theta_hat_i|^2 <= epsilon`` and evaluate the loss budget.

    The full-space flow-matching loss is bounded by
    ``(1 + sqrt(eps)) * L_hat + 4 eps + 4 sqrt(eps)`` where ``L_hat`` is the
    loss against the subspace approximations.
    """
    full = np.asarray(full_thetas, dtype=np.float64)
    approx = np.asarray(approx_thetas, dtype=np.float64)
    if full.shape != approx.shape:
        raise ValueError(f"shape mismatch {full.shape} vs {approx.shape}")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    diff = (full - approx).reshape(full.shape[0], -1)
    sq = np.sum(diff * diff, axis=1)
    max_sq = float(sq.max()) if sq.size else 0.0
    root = math.sqrt(epsilon)
    report = BudgetReport(sq, max_sq, epsilon, max_sq <= epsilon, 1.0 + root, 4 * epsilon + 4 * root)
    if subspace_loss is not None:
        report.bound = report.bound_for(subspace_loss)
    return report
