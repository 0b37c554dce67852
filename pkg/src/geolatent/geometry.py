"""e-geometry of the open product simplex.

Points of the product simplex are arrays of shape ``(..., n, c)`` whose rows
are strictly positive probability vectors.  Natural parameters are arrays of
shape ``(..., n, c - 1)`` holding log-ratios against the last category, so
the chart is ``theta[j, k] = log(s[j, k] / s[j, c - 1])``.  All functions
broadcast over leading batch axes.
"""
import numpy as np

#: Probabilities at or below this value are treated as boundary points.
INTERIOR_TOL = 1e-300


class DomainError(ValueError):
    """A point lies on (or outside) the boundary of the simplex."""

    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


def _check_interior(s):
    s = np.asarray(s, dtype=np.float64)
    if s.ndim < 2:
        raise ValueError(f"expected shape (..., n, c), got {s.shape}")
    if s.shape[-1] < 2:
        raise ValueError("need at least c = 2 categories")
    bad = ~(s > INTERIOR_TOL)
    if bad.any():
        # factor index within the trailing (n, c) block
        factor = int(np.argwhere(bad.any(axis=-1))[0][-1])
        raise DomainError(
            f"factor {factor} has a probability <= {INTERIOR_TOL:g}; "
            "encode needs strictly interior points", factor=factor)
    return s


def as_product_point(probs, normalize=True):
    """Validate ``probs`` as a product simplex point.

    With ``normalize`` the rows are rescaled to sum to one; otherwise rows
    that are off by more than 1e-12 raise ``ValueError``.
    """
    s = _check_interior(probs)
    sums = s.sum(axis=-1, keepdims=True)
    if normalize:
        return s / sums
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise ValueError("rows do not sum to one")
    return s


def encode(s):
    """Natural parameters of a product simplex point.

    Raises
    ------
    DomainError
        If any probability is not strictly positive.
    """
    s = _check_interior(s)
    logs = np.log(s)
    return logs[..., :-1] - logs[..., -1:]


def augment(theta):
    """Append the zero logit of the reference category."""
    theta = np.asarray(theta, dtype=np.float64)
    zeros = np.zeros(theta.shape[:-1] + (1,))
    return np.concatenate([theta, zeros], axis=-1)


def _max_last(a):
    # looping over the (short) category axis beats numpy's strided reductions
    m = a[..., 0].copy()
    for k in range(1, a.shape[-1]):
        np.maximum(m, a[..., k], out=m)
    return m[..., None]


def _sum_last(a):
    total = a[..., 0].copy()
    for k in range(1, a.shape[-1]):
        total += a[..., k]
    return total[..., None]


def decode(theta):
    """Inverse chart: softmax of the augmented logits ``(theta, 0)``.

    The per-factor maximum is subtracted before exponentiating, so finite
    inputs never overflow.
    """
    logits = augment(theta)
    logits -= _max_last(logits)
    e = np.exp(logits)
    return e / _sum_last(e)


def log_decode(theta):
    """Log-probabilities of :func:`decode`, computed without underflow."""
    logits = augment(theta)
    m = _max_last(logits)
    lse = m + np.log(_sum_last(np.exp(logits - m)))
    return logits - lse


def _frobenius(a):
    return np.sqrt(np.sum(a * a, axis=(-2, -1)))


def e_distance(s0, s1):
    """Distance of the e-metric: Euclidean distance of natural parameters."""
    return _frobenius(encode(s0) - encode(s1))


def push_tangent_to_theta(s, q):
    """Differential of :func:`encode` at ``s`` applied to the tangent ``q``.

    ``q`` has the ambient shape ``(..., n, c)`` with zero row sums; the
    result has shape ``(..., n, c - 1)`` and entries
    ``q[k] / s[k] - q[c-1] / s[c-1]``.
    """
    s = _check_interior(s)
    r = np.asarray(q, dtype=np.float64) / s
    return r[..., :-1] - r[..., -1:]


def push_theta_to_tangent(theta, dtheta):
    """Differential of :func:`decode` at ``theta`` applied to ``dtheta``.

    Returns the ambient tangent vector ``s * (a - <s, a>)`` with
    ``a = (dtheta, 0)`` and ``s = decode(theta)``.  Rows sum to zero.
    """
    s = decode(theta)
    a = augment(dtheta)
    return s * (a - np.sum(s * a, axis=-1, keepdims=True))


def e_norm(s, q):
    """Length of the tangent vector ``q`` at ``s`` in the e-metric."""
    return _frobenius(push_tangent_to_theta(s, q))


def e_metric(s):
    """Per-factor Gram matrices of the e-metric in ambient coordinates.

    Returns an array of shape ``(..., n, c, c)``; for tangent vectors
    ``q, r`` at ``s`` the inner product is
    ``sum_j q[j] @ G[j] @ r[j]``.  The matrix is ``J.T @ J`` for the
    Jacobian ``J`` of the per-factor log-ratio chart.
    """
    s = _check_interior(s)
    c = s.shape[-1]
    inv = 1.0 / s
    # J[k, m] = delta_km / s_k - delta_{m, c-1} / s_{c-1}, k < c - 1
    jac = np.zeros(s.shape[:-1] + (c - 1, c))
    idx = np.arange(c - 1)
    jac[..., idx, idx] = inv[..., :-1]
    jac[..., :, -1] = -inv[..., -1:]
    return np.swapaxes(jac, -1, -2) @ jac


def e_geodesic(s0, s1, t):
    """Point at time ``t`` on the e-geodesic from ``s0`` to ``s1``.

    The geodesic is the straight line in natural parameters.  Values of
    ``t`` outside ``[0, 1]`` extrapolate along the same line, which is
    well-defined because the chart is global.
    """
    theta0, theta1 = encode(s0), encode(s1)
    t = np.asarray(t, dtype=np.float64)[..., None, None]
    return decode((1.0 - t) * theta0 + t * theta1)


def geodesic_velocity(s0, s1, t):
    """Time derivative of :func:`e_geodesic` as an ambient tangent vector."""
    theta0, theta1 = encode(s0), encode(s1)
    t = np.asarray(t, dtype=np.float64)[..., None, None]
    theta_t = (1.0 - t) * theta0 + t * theta1
    return push_theta_to_tangent(theta_t, theta1 - theta0)
