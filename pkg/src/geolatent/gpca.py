"""Geometric PCA: a linear subspace of natural parameters fitting categorical data.

Each sample ``x_i`` is approximated by natural parameters ``theta_i = V z_i``
(row-stacked, length ``n * (c - 1)``).  ``V`` and ``Z`` are fitted by
alternating Adam steps on the categorical cross-entropy, then ``V`` is
orthonormalised so Euclidean lengths in ``z`` equal e-lengths on the
subspace.
"""
from dataclasses import dataclass, field
import math
import struct

import numpy as np

from . import geometry
from .datasets import OneHotDataset
from .nn import Adam

GPCA_MAGIC = b"GPCA1"


class NumericalError(FloatingPointError):
    """Optimisation produced a non-finite value."""


@dataclass
class GpcaConfig:
    max_steps: int = 30000
    # stopping needs Hamming 0 and max e-distance to smoothed targets <= epsilon
    epsilon: float = math.inf
    alpha: float = 0.02
    # smoothing of the objective's labels; 0 fits the raw one-hot data
    label_smoothing: float = 0.0
    lr_z: float = 1e-2
    lr_v: float = 1e-3
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    steps_per_phase: int = 10
    full_batch_below: int = 4096
    batch_size: int = 1024
    seed: int = 0


@dataclass
class FitReport:
    steps_run: int
    final_hamming: int
    final_max_e_distance: float
    epsilon_met: bool
    trace: list = field(default_factory=list)  # (step, loss, hamming) per round

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write("step,loss,hamming\n")
            for step, loss, ham in self.trace:
                f.write(f"{step},{loss!r},{ham}\n")


@dataclass
class LatentModel:
    """Basis ``V`` of shape ``(n*(c-1), d)`` and coefficients ``Z`` of shape ``(N, d)``."""
    V: np.ndarray
    Z: np.ndarray
    n: int
    c: int
    alpha: float = 0.02

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=np.float64)
        self.Z = np.asarray(self.Z, dtype=np.float64).reshape(-1, self.V.shape[1])
        if self.V.shape[0] != self.n * (self.c - 1):
            raise ValueError(f"V has {self.V.shape[0]} rows, expected n*(c-1) = {self.n * (self.c - 1)}")

    @property
    def d(self):
        return self.V.shape[1]

    @property
    def N(self):
        return self.Z.shape[0]

    def theta(self, z):
        """Natural parameters ``(..., n, c-1)`` of coefficients ``z`` of shape ``(..., d)``."""
        z = np.asarray(z, dtype=np.float64)
        return (z @ self.V.T).reshape(z.shape[:-1] + (self.n, self.c - 1))

    def is_orthonormal(self, tol=1e-10):
        gram = self.V.T @ self.V
        return bool(np.max(np.abs(gram - np.eye(self.d))) < tol)

    def save(self, path):
        """Archive: magic, u32 ``n c d N``, f64 ``alpha``, then row-major f64 ``V`` and ``Z``."""
        with open(path, "wb") as f:
            f.write(GPCA_MAGIC)
            f.write(struct.pack("<IIIId", self.n, self.c, self.d, self.N, self.alpha))
            f.write(np.ascontiguousarray(self.V, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(self.Z, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            raw = f.read()
        if raw[:5] != GPCA_MAGIC:
            raise ValueError(f"{path}: not a GPCA1 archive")
        n, c, d, N, alpha = struct.unpack_from("<IIIId", raw, 5)
        off = 5 + struct.calcsize("<IIIId")
        D = n * (c - 1)
        if len(raw) != off + 8 * (D * d + N * d):
            raise ValueError(f"{path}: archive size does not match header")
        V = np.frombuffer(raw, "<f8", D * d, off).reshape(D, d).copy()
        Z = np.frombuffer(raw, "<f8", N * d, off + 8 * D * d).reshape(N, d).copy()
        return cls(V, Z, n, c, alpha)


def smooth_dataset(data, alpha):
    """Natural parameters of ``(1 - alpha) * onehot + alpha / c``, shape ``(N, n*(c-1))``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    probs = (1.0 - alpha) * data.one_hot() + alpha / data.c
    return geometry.encode(probs).reshape(data.N, -1)


def predict_labels(theta):
    """Per-factor argmax of the augmented logits; ties go to the lowest index."""
    return np.argmax(geometry.augment(theta), axis=-1)


def reconstruct(model, z):
    """Decoded point and rounded labels for coefficients ``z`` of shape ``(..., d)``."""
    theta = model.theta(z)
    return geometry.decode(theta), predict_labels(theta)


def hamming_per_sample(model, data, Z=None):
    Z = model.Z if Z is None else np.asarray(Z)
    _check_shapes(model, data, Z)
    return np.sum(predict_labels(model.theta(Z)) != data.labels, axis=1)


def reconstruction_error(model, data, Z=None):
    """Total Hamming distance between the data and its rounded reconstructions."""
    return int(hamming_per_sample(model, data, Z).sum())


def max_e_distance(model, data, Z=None, alpha=None):
    Z = model.Z if Z is None else np.asarray(Z)
    alpha = model.alpha if alpha is None else alpha
    targets = smooth_dataset(data, alpha)
    return float(np.max(np.linalg.norm(targets - Z @ model.V.T, axis=1))) if len(Z) else 0.0


def _check_shapes(model, data, Z):
    if data.n != model.n or data.c != model.c:
        raise ValueError(f"data has (n, c) = ({data.n}, {data.c}), model ({model.n}, {model.c})")
    if Z.shape != (data.N, model.d):
        raise ValueError(f"coefficients have shape {Z.shape}, expected ({data.N}, {model.d})")


def _soft_targets(data, smoothing):
    y = data.one_hot()
    if smoothing:
        y = (1.0 - smoothing) * y + smoothing / data.c
    return y


def loss_and_grads(V, Z, targets, want_v=True, want_z=True):
    """Cross-entropy ``-sum targets * log decode(V z_i)`` and its gradients.

    ``targets`` has shape ``(N, n, c)`` (one-hot or smoothed rows).
    Returns ``(loss, dV, dZ)``; skipped gradients are ``None``.
    """
    N, n, c = targets.shape
    theta = (Z @ V.T).reshape(N, n, c - 1)
    logp = geometry.log_decode(theta)
    loss = -float(np.sum(targets * logp))
    # d loss / d theta_k = p_k - y_k for the non-reference categories
    g = np.ascontiguousarray((np.exp(logp) - targets)[..., :-1]).reshape(N, -1)
    dV = g.T @ Z if want_v else None
    dZ = g @ V if want_z else None
    return loss, dV, dZ


def _chunks(N, config):
    if N < config.full_batch_below:
        return [slice(0, N)]
    return [slice(i, min(i + config.batch_size, N)) for i in range(0, N, config.batch_size)]


def _evaluate(V, Z, targets, chunks, want_v, want_z):
    # chunked sums reproduce the full-batch gradient since Z rows are independent
    loss, dV, dZ = 0.0, None, np.empty_like(Z) if want_z else None
    for sl in chunks:
        l_, gV, gZ = loss_and_grads(V, Z[sl], targets[sl], want_v, want_z)
        loss += l_
        if want_v:
            dV = gV if dV is None else dV + gV
        if want_z:
            dZ[sl] = gZ
    return loss, dV, dZ


def _optimize(data, V, Z, config, update_v):
    targets = _soft_targets(data, config.label_smoothing)
    smoothed = smooth_dataset(data, config.alpha)
    chunks = _chunks(data.N, config)
    opt_z = Adam([Z], lr=config.lr_z, betas=config.betas, eps=config.adam_eps)
    opt_v = Adam([V], lr=config.lr_v, betas=config.betas, eps=config.adam_eps) if update_v else None
    trace = []

    def status():
        theta = Z @ V.T
        ham = int(np.sum(predict_labels(theta.reshape(data.N, data.n, data.c - 1)) != data.labels))
        max_e = float(np.max(np.linalg.norm(smoothed - theta, axis=1)))
        return ham, max_e

    step = 0
    ham, max_e = status()
    while not (ham == 0 and max_e <= config.epsilon) and step < config.max_steps:
        phases = [("z", min(config.steps_per_phase, config.max_steps - step))]
        if update_v:
            budget = config.max_steps - step - phases[0][1]
            phases.append(("v", min(config.steps_per_phase, budget)))
        for which, count in phases:
            for _ in range(count):
                loss, dV, dZ = _evaluate(V, Z, targets, chunks, which == "v", which == "z")
                if not math.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss at step {step}; lower the learning rates")
                if which == "z":
                    opt_z.step([dZ])
                else:
                    opt_v.step([dV])
                step += 1
        ham, max_e = status()
        trace.append((step, loss, ham))
    return step, ham, max_e, trace


def fit(data, d, config=None):
    """Fit a ``d``-dimensional GPCA model to ``data``.

    Returns ``(LatentModel, FitReport)``.  The returned basis is
    orthonormal.
    """
    config = config or GpcaConfig()
    D = data.n * (data.c - 1)
    if data.N < 1:
        raise ValueError("need at least one sample")
    if not 1 <= d <= D:
        raise ValueError(f"latent dimension {d} outside [1, n*(c-1) = {D}]")
    rng = np.random.default_rng(config.seed)
    V = rng.standard_normal((D, d)) / np.sqrt(D)
    Z = np.zeros((data.N, d))
    steps, _, _, trace = _optimize(data, V, Z, config, update_v=True)
    model = finalize(LatentModel(V, Z, data.n, data.c, config.alpha))
    ham = reconstruction_error(model, data)
    max_e = max_e_distance(model, data)
    report = FitReport(steps, ham, max_e, ham == 0 and max_e <= config.epsilon, trace)
    return model, report


def finalize(model):
    """Orthonormalise ``V`` by thin QR while keeping every ``V z_i`` fixed."""
    Q, R = np.linalg.qr(model.V)
    return LatentModel(Q, model.Z @ R.T, model.n, model.c, model.alpha)


def encode_with_fixed_basis(model, data, config=None, init=None):
    """Fit coefficients for new data with ``V`` frozen.

    ``init`` warm-starts the coefficients (zeros by default).
    """
    config = config or GpcaConfig()
    if data.n != model.n or data.c != model.c:
        raise ValueError(f"data has (n, c) = ({data.n}, {data.c}), model ({model.n}, {model.c})")
    if not model.is_orthonormal():
        raise ValueError("model basis is not orthonormal; call finalize first")
    Z = np.zeros((data.N, model.d)) if init is None else np.array(init, dtype=np.float64)
    if Z.shape != (data.N, model.d):
        raise ValueError(f"init has shape {Z.shape}, expected ({data.N}, {model.d})")
    if data.N:
        _optimize(data, model.V.copy(), Z, config, update_v=False)
    return Z
