"""Dataset generation, IDX/CSV ingestion, and forget/retain split management."""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Base class for IDX ingestion failures."""


class IdxBadMagic(IdxError):
    pass


class IdxTruncated(IdxError):
    pass


class IdxCountMismatch(IdxError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, n_in) float64
    labels: np.ndarray  # (N,) int64
    name: str
    class_count: int

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("inputs must be a non-empty (N, n_in) matrix")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must be one per sample")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise ValueError("label outside [0, class_count)")
        if not np.isfinite(self.inputs).all():
            raise ValueError("non-finite feature values")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def take(self, indices):
        """New Dataset with the given rows (copies)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx].copy(), self.labels[idx].copy(),
                       self.name, self.class_count)


@dataclass
class SplitSpec:
    """Forget/retain partition of [0, N). Retain is always the complement."""

    forget_indices: np.ndarray
    total: int
    mode: str  # "sample_wise" | "class_wise"
    seed: int
    forget_fraction: float = None
    forget_classes: tuple = None
    retain_indices: np.ndarray = field(init=False)

    def __post_init__(self):
        forget = np.unique(np.asarray(self.forget_indices, dtype=np.int64))
        if forget.size and (forget[0] < 0 or forget[-1] >= self.total):
            raise ValueError("forget index out of range")
        self.forget_indices = forget
        mask = np.ones(self.total, dtype=bool)
        mask[forget] = False
        self.retain_indices = np.nonzero(mask)[0].astype(np.int64)

    def to_dict(self):
        d = {
            "mode": self.mode,
            "seed": self.seed,
            "total": self.total,
            "forget_indices": self.forget_indices.tolist(),
        }
        if self.forget_fraction is not None:
            d["forget_fraction"] = self.forget_fraction
        if self.forget_classes is not None:
            d["forget_classes"] = list(self.forget_classes)
        return d


def _count_floor(x):
    # floor with protection against float dust (e.g. 0.29*100 = 28.999...96)
    return int(math.floor(round(x, 9)))


def _count_ceil(x):
    # ceil with protection against float dust (e.g. 0.03*100 = 3.000...04)
    return int(math.ceil(round(x, 9)))


def gen_blobs(classes, per_class, dim, spread, seed):
    """Gaussian clusters with unit-spaced means on a seeded random frame.

    Class means sit on a circle of chord length 1 between neighbours, embedded
    in a random orthonormal 2-D subspace (a random signed direction for
    dim=1), so adjacent classes are exactly one unit apart for any class
    count. Samples are grouped by class in the output.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be positive")
    if dim < 1:
        raise ValueError("dim must be positive")
    if spread <= 0:
        raise ValueError("spread must be positive")

    rng = np.random.default_rng(seed)
    frame = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(frame)
    q = q * np.sign(np.diag(r))  # canonical QR so the frame is seed-stable

    if dim == 1:
        means = (np.arange(classes, dtype=np.float64) * q[0, 0])[:, None]
    else:
        radius = 1.0 / (2.0 * np.sin(np.pi / classes))
        angles = 2.0 * np.pi * np.arange(classes) / classes
        means = radius * (np.outer(np.cos(angles), q[:, 0]) + np.outer(np.sin(angles), q[:, 1]))

    inputs = np.empty((classes * per_class, dim), dtype=np.float64)
    labels = np.empty(classes * per_class, dtype=np.int64)
    for c in range(classes):
        lo = c * per_class
        inputs[lo:lo + per_class] = means[c] + spread * rng.standard_normal((per_class, dim))
        labels[lo:lo + per_class] = c
    return Dataset(inputs, labels, f"blobs{classes}x{per_class}", classes)


def carve_test_per_class(ds, test_per_class):
    """Split off the last `test_per_class` samples of every class as a test set."""
    if test_per_class < 1:
        raise ValueError("test_per_class must be positive")
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    if (counts <= test_per_class).any():
        raise ValueError("test_per_class leaves an empty training class")
    keep_until = counts - test_per_class
    seen = np.zeros(ds.class_count, dtype=np.int64)
    train_mask = np.empty(len(ds), dtype=bool)
    for i, lab in enumerate(ds.labels):
        train_mask[i] = seen[lab] < keep_until[lab]
        seen[lab] += 1
    train = ds.take(np.nonzero(train_mask)[0])
    test = ds.take(np.nonzero(~train_mask)[0])
    test.name = ds.name + ":test"
    return train, test


# ---------------------------------------------------------------------------
# IDX ingestion (MNIST file family, big-endian)
# ---------------------------------------------------------------------------

def _read_exact(f, n, path):
    buf = f.read(n)
    if len(buf) != n:
        raise IdxTruncated(f"{path}: expected {n} more bytes, got {len(buf)}")
    return buf


def load_idx(images_path, labels_path, class_count=None):
    """Load an IDX image/label file pair; pixels scaled to [0, 1]."""
    with open(images_path, "rb") as f:
        magic, n_images = struct.unpack(">II", _read_exact(f, 8, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxBadMagic(f"{images_path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
        rows, cols = struct.unpack(">II", _read_exact(f, 8, images_path))
        raw = _read_exact(f, n_images * rows * cols, images_path)
    with open(labels_path, "rb") as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise IdxBadMagic(f"{labels_path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
        lab_raw = _read_exact(f, n_labels, labels_path)
    if n_images != n_labels:
        raise IdxCountMismatch(f"{n_images} images vs {n_labels} labels")

    inputs = np.frombuffer(raw, dtype=np.uint8).astype(np.float64).reshape(n_images, rows * cols) / 255.0
    labels = np.frombuffer(lab_raw, dtype=np.uint8).astype(np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if n_labels else 1
    return Dataset(inputs, labels, "idx", class_count)


def save_idx(ds, images_path, labels_path, rows=None, cols=None):
    """Write a Dataset in the IDX file pair format (features quantized to u8)."""
    if rows is None or cols is None:
        rows, cols = 1, ds.n_features
    if rows * cols != ds.n_features:
        raise ValueError("rows*cols must equal the feature count")
    pixels = np.clip(np.rint(ds.inputs * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(ds), rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(ds)))
        f.write(ds.labels.astype(np.uint8).tobytes())


def load_csv(path, class_count=None):
    """Load `label,f0,f1,...` CSV (header required)."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith("label"):
            raise ValueError(f"{path}: expected header starting with 'label'")
        rows = [line.strip().split(",") for line in f if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    inputs = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    if class_count is None:
        class_count = int(labels.max()) + 1
    return Dataset(inputs, labels, "csv", class_count)


# ---------------------------------------------------------------------------
# forget/retain splits
# ---------------------------------------------------------------------------

def make_split(ds, mode, fraction_or_classes, seed):
    """Partition [0, N) into forget and retain index sets."""
    n = len(ds)
    if mode == "sample_wise":
        fraction = float(fraction_or_classes)
        if not 0.0 < fraction < 1.0:
            raise ValueError("forget fraction must lie in (0, 1)")
        m = _count_floor(fraction * n)
        rng = np.random.default_rng(seed)
        forget = np.sort(rng.choice(n, size=m, replace=False))
        return SplitSpec(forget, n, mode, seed, forget_fraction=fraction)
    if mode == "class_wise":
        classes = tuple(int(c) for c in fraction_or_classes)
        if not classes:
            raise ValueError("class_wise split needs at least one class")
        unknown = [c for c in classes if not 0 <= c < ds.class_count]
        if unknown:
            raise ValueError(f"unknown class(es) {unknown}")
        forget = np.nonzero(np.isin(ds.labels, classes))[0]
        return SplitSpec(forget, n, mode, seed, forget_classes=classes)
    raise ValueError(f"unknown split mode {mode!r}")


def subsample_forget(split, p, seed):
    """Draw ceil(p * |forget|) forget indices without replacement, sorted."""
    if not 0.0 < p <= 1.0:
        raise ValueError("subset ratio must lie in (0, 1]")
    n = split.forget_indices.size
    m = _count_ceil(p * n)
    if m >= n:
        return split.forget_indices.copy()
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(split.forget_indices, size=m, replace=False))
