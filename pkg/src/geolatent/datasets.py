"""Discrete datasets: toy generators, IDX images, sequences, native text.

Labels are stored 0-based in memory (``0 .. c-1``); every text format on
disk uses 1-based category indices.
"""
from dataclasses import dataclass
import struct

import numpy as np

TOY_KINDS = ("gaussian-mixture", "pinwheel", "two-moons")
TOY_BOX = 4.0
IDX_UBYTE_3D = 0x00000803


class DatasetError(ValueError):
    """Malformed input data."""


class IdxMagicError(DatasetError):
    pass


class IdxTruncatedError(DatasetError):
    pass


class IdxDimensionError(DatasetError):
    pass


@dataclass(frozen=True)
class OneHotDataset:
    """``N`` discrete samples of ``n`` categorical variables over ``c`` labels.

    ``labels`` is an integer array of shape ``(N, n)`` with values in
    ``[0, c)``.
    """
    labels: np.ndarray
    c: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DatasetError(f"labels must be 2-D, got shape {labels.shape}")
        if self.c < 2:
            raise DatasetError("need c >= 2 categories")
        if labels.size and (labels.min() < 0 or labels.max() >= self.c):
            raise DatasetError(f"labels outside [0, {self.c})")
        labels = labels.astype(np.int64, copy=False)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def N(self):
        return self.labels.shape[0]

    @property
    def n(self):
        return self.labels.shape[1]

    def one_hot(self):
        """Float array of shape ``(N, n, c)``."""
        return np.eye(self.c)[self.labels]

    def subset(self, index):
        return OneHotDataset(self.labels[index], self.c)


def empty_dataset(n, c):
    return OneHotDataset(np.zeros((0, n), dtype=np.int64), c)


# -- native text format ------------------------------------------------------

def save_dataset(path, data):
    """Write header ``n c N`` then one line of 1-based indices per sample."""
    with open(path, "w") as f:
        f.write(f"{data.n} {data.c} {data.N}\n")
        for row in data.labels + 1:
            f.write(" ".join(map(str, row)) + "\n")


def load_dataset(path):
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    try:
        n, c, N = (int(v) for v in lines[0].split())
    except ValueError:
        raise DatasetError(f"{path}: bad header {lines[0]!r}") from None
    if len(lines) - 1 != N:
        raise DatasetError(f"{path}: header says {N} samples, found {len(lines) - 1}")
    if N == 0:
        return empty_dataset(n, c)
    try:
        labels = np.array([[int(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if labels.ndim != 2 or labels.shape[1] != n:
        raise DatasetError(f"{path}: rows do not all have {n} entries")
    if labels.min() < 1 or labels.max() > c:
        raise DatasetError(f"{path}: index outside [1, {c}]")
    return OneHotDataset(labels - 1, c)


# -- toy distributions -------------------------------------------------------

@dataclass(frozen=True)
class ToySpec:
    kind: str
    N: int
    c: int = 92
    seed: int = 0
    # gaussian-mixture
    components: int = 8
    ring_radius: float = 2.5
    sigma: float = 0.3
    # pinwheel
    arms: int = 5
    radial_std: float = 0.3
    tangential_std: float = 0.1
    rate: float = 0.25
    # two-moons
    moon_radius: float = 2.0
    moon_noise: float = 0.1

    def __post_init__(self):
        if self.kind not in TOY_KINDS:
            raise ValueError(f"unknown toy kind {self.kind!r}; choose from {TOY_KINDS}")
        if self.c < 2:
            raise ValueError("c must be >= 2")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def _gaussian_mixture(spec, rng):
    angles = 2 * np.pi * np.arange(spec.components) / spec.components
    centers = spec.ring_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    which = rng.integers(0, spec.components, size=spec.N)
    return centers[which] + spec.sigma * rng.standard_normal((spec.N, 2))


def _pinwheel(spec, rng):
    rads = np.linspace(0, 2 * np.pi, spec.arms, endpoint=False)
    feats = rng.standard_normal((spec.N, 2)) * np.array([spec.radial_std, spec.tangential_std])
    feats[:, 0] += 1.0
    arm = rng.integers(0, spec.arms, size=spec.N)
    angles = rads[arm] + spec.rate * np.exp(feats[:, 0])
    cos, sin = np.cos(angles), np.sin(angles)
    x = feats[:, 0] * cos - feats[:, 1] * sin
    y = feats[:, 0] * sin + feats[:, 1] * cos
    return 2.0 * np.stack([x, y], axis=1)


def _two_moons(spec, rng):
    upper = rng.random(spec.N) < 0.5
    phi = np.pi * rng.random(spec.N)
    x = np.where(upper, np.cos(phi), 1.0 - np.cos(phi))
    y = np.where(upper, np.sin(phi), 0.5 - np.sin(phi))
    pts = np.stack([x - 0.5, y - 0.25], axis=1) * spec.moon_radius
    return pts + spec.moon_noise * rng.standard_normal((spec.N, 2))


_GENERATORS = {
    "gaussian-mixture": _gaussian_mixture,
    "pinwheel": _pinwheel,
    "two-moons": _two_moons,
}


def toy_points(spec):
    """Continuous 2-D samples of the toy distribution, before binning."""
    rng = np.random.default_rng(spec.seed)
    return _GENERATORS[spec.kind](spec, rng)


def discretize(points, c, box=TOY_BOX):
    """Map ``[-box, box]^2`` affinely onto ``[0, c)`` and floor into bins."""
    bins = np.floor((np.asarray(points) + box) / (2 * box) * c).astype(np.int64)
    return np.clip(bins, 0, c - 1)


def make_toy(spec):
    return OneHotDataset(discretize(toy_points(spec), spec.c), spec.c)


# -- IDX images --------------------------------------------------------------

def load_idx_images(path, threshold=128, pad_to=None):
    """Load an IDX ``ubyte`` image file as a binary dataset.

    Pixels ``>= threshold`` become label 1 (the second category), others
    label 0.  With ``pad_to=(H, W)`` images are zero-padded symmetrically,
    e.g. MNIST 28x28 to 32x32.  Features are ordered row-major.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != IDX_UBYTE_3D:
        raise IdxMagicError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_UBYTE_3D:08x}")
    if len(raw) < 16:
        raise IdxTruncatedError(f"{path}: truncated header")
    count, rows, cols = struct.unpack(">III", raw[4:16])
    expected = count * rows * cols
    payload = raw[16:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{path}: expected {expected} pixel bytes, found {len(payload)}")
    if len(payload) > expected:
        raise IdxDimensionError(
            f"{path}: {len(payload)} pixel bytes do not match dims {count}x{rows}x{cols}")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
    if pad_to is not None:
        H, W = pad_to
        if H < rows or W < cols:
            raise IdxDimensionError(f"{path}: cannot pad {rows}x{cols} images to {H}x{W}")
        top, left = (H - rows) // 2, (W - cols) // 2
        padded = np.zeros((count, H, W), dtype=np.uint8)
        padded[:, top:top + rows, left:left + cols] = images
        images = padded
    labels = (images >= threshold).astype(np.int64).reshape(count, -1)
    return OneHotDataset(labels, 2)


def save_idx_images(path, data, shape):
    """Write a binary dataset as IDX images (label 0 -> 0, label 1 -> 255)."""
    rows, cols = shape
    if data.c != 2 or data.n != rows * cols:
        raise IdxDimensionError(f"dataset with n={data.n}, c={data.c} is not {rows}x{cols} binary")
    pixels = (data.labels * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_UBYTE_3D, data.N, rows, cols))
        f.write(pixels.tobytes())


# -- sequences ---------------------------------------------------------------

def load_sequences(path, alphabet="ACGT"):
    """One sequence per line; categories follow the order of ``alphabet``."""
    lookup = {ch: i for i, ch in enumerate(alphabet)}
    with open(path) as f:
        lines = [ln.strip() for ln in f]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DatasetError(f"{path}: no sequences")
    length = len(lines[0])
    rows = []
    for lineno, seq in enumerate(lines, start=1):
        if len(seq) != length:
            raise DatasetError(
                f"{path}: line {lineno} has length {len(seq)}, expected {length}")
        row = []
        for col, ch in enumerate(seq, start=1):
            if ch not in lookup:
                raise DatasetError(
                    f"{path}: line {lineno}, column {col}: {ch!r} not in alphabet {alphabet!r}")
            row.append(lookup[ch])
        rows.append(row)
    return OneHotDataset(np.array(rows), len(alphabet))


def save_sequences(path, data, alphabet="ACGT"):
    if data.c != len(alphabet):
        raise DatasetError(f"alphabet {alphabet!r} does not have {data.c} letters")
    letters = np.array(list(alphabet))
    with open(path, "w") as f:
        for row in data.labels:
            f.write("".join(letters[row]) + "\n")
