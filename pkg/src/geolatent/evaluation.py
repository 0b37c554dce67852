"""Evaluation: reconstruction curves, joint histograms, TV distance, nearest neighbours."""
import numpy as np

from . import gpca
from .datasets import make_toy


def hamming_curve(data, dims, config=None):
    """Fit GPCA for each ``d`` in ``dims`` and collect reconstruction errors.

    Returns rows ``(d, total, min, mean, max)`` where min/mean/max are
    per-sample Hamming errors.
    """
    dims = list(dims)
    if dims != sorted(dims):
        raise ValueError("dims must be sorted ascending")
    config = config or gpca.GpcaConfig()
    rows = []
    for d in dims:
        model, _ = gpca.fit(data, d, config)
        per = gpca.hamming_per_sample(model, data)
        rows.append((d, int(per.sum()), int(per.min()), float(per.mean()), int(per.max())))
    return rows


def write_curve_csv(path, rows):
    with open(path, "w") as f:
        f.write("d,total_error,min,mean,max\n")
        for d, total, lo, mean, hi in rows:
            f.write(f"{d},{total},{lo},{mean!r},{hi}\n")


def normalized_hamming(total, data):
    return total / (data.N * data.n)


def joint_histogram(data):
    """``c x c`` counts of label pairs for two-variable data."""
    if data.n != 2:
        raise ValueError(f"joint histogram needs n = 2 variables, got {data.n}")
    hist = np.zeros((data.c, data.c), dtype=np.int64)
    np.add.at(hist, (data.labels[:, 0], data.labels[:, 1]), 1)
    return hist


def tv_distance(h1, h2):
    h1, h2 = np.asarray(h1, dtype=np.float64), np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise ValueError(f"histogram shapes differ: {h1.shape} vs {h2.shape}")
    t1, t2 = h1.sum(), h2.sum()
    if t1 <= 0 or t2 <= 0:
        raise ValueError("histogram with zero total")
    return 0.5 * float(np.abs(h1 / t1 - h2 / t2).sum())


def calibration_tv(spec, seeds=(1, 2)):
    """TV distance between two independent draws of the same toy configuration."""
    a = make_toy(_reseed(spec, seeds[0]))
    b = make_toy(_reseed(spec, seeds[1]))
    return tv_distance(joint_histogram(a), joint_histogram(b))


def _reseed(spec, seed):
    from dataclasses import replace
    return replace(spec, seed=seed)


def nearest_training(sample, data, k=5):
    """Indices and Hamming distances of the ``k`` closest training samples.

    Ties are broken by lower index.
    """
    sample = np.asarray(sample)
    if sample.shape != (data.n,):
        raise ValueError(f"sample has shape {sample.shape}, expected ({data.n},)")
    if not 1 <= k <= data.N:
        raise ValueError(f"k must lie in [1, {data.N}]")
    dist = np.sum(data.labels != sample, axis=1)
    order = np.argsort(dist, kind="stable")[:k]
    return order, dist[order]


def write_histogram_csv(path, hist):
    np.savetxt(path, hist, fmt="%d", delimiter=",")


def write_pgm(path, hist):
    """8-bit binary PGM scaled so the largest count is white."""
    hist = np.asarray(hist)
    peak = hist.max()
    img = np.zeros(hist.shape, dtype=np.uint8) if peak == 0 else \
        np.round(255.0 * hist / peak).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        f.write(img.tobytes())
