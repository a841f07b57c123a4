"""Per-parameter sensitivity scores over a data batch.

Two scorers with the same output shape:

* `exact_scores`: loss drop from zeroing each parameter in turn. Costs d+1
  loss evaluations over the batch, so it is only for small models and tests.
* `approx_scores`: first-order surrogate, batch-mean gradient times the
  parameter value. One gradient sweep regardless of d.

Ranking downstream consumes |score| by default; the raw signed scores are
kept so signed ranking stays available.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

SIDECAR_MAGIC = b"UFSL"


@dataclass
class SaliencyVector:
    scores: np.ndarray  # (d,) float64, signed
    kind: str  # "exact" | "approx"
    batch_fingerprint: str

    def __post_init__(self):
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if not np.isfinite(self.scores).all():
            raise ValueError("non-finite sensitivity scores")


def batch_fingerprint(x, y):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(x, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    return h.hexdigest()


def exact_scores(net, params, x, y):
    """score_j = loss(params) - loss(params with j zeroed), for every j."""
    base = net.loss(params, x, y)
    scores = np.empty(net.num_params, dtype=np.float64)
    for j in range(net.num_params):
        scores[j] = base - net.masked_loss(params, j, x, y)
    return SaliencyVector(scores, "exact", batch_fingerprint(x, y))


def approx_scores(net, params, x, y):
    """score_j = (batch-mean gradient)_j * params_j, from a single sweep."""
    grad = net.grad(params, x, y)
    return SaliencyVector(grad * params, "approx", batch_fingerprint(x, y))


def save_scores(path, sv):
    """Binary sidecar: magic, kind, fingerprint, then d little-endian f64."""
    kind_code = {"exact": 0, "approx": 1}[sv.kind]
    fp = sv.batch_fingerprint.encode("ascii")
    with open(path, "wb") as f:
        f.write(SIDECAR_MAGIC)
        f.write(struct.pack("<BH", kind_code, len(fp)))
        f.write(fp)
        f.write(struct.pack("<Q", sv.scores.size))
        f.write(sv.scores.astype("<f8").tobytes())


def load_scores(path):
    with open(path, "rb") as f:
        if f.read(4) != SIDECAR_MAGIC:
            raise ValueError(f"{path}: not a sensitivity sidecar file")
        kind_code, fp_len = struct.unpack("<BH", f.read(3))
        fp = f.read(fp_len).decode("ascii")
        (d,) = struct.unpack("<Q", f.read(8))
        scores = np.frombuffer(f.read(d * 8), dtype="<f8").copy()
    if scores.size != d:
        raise ValueError(f"{path}: truncated score block")
    return SaliencyVector(scores, {0: "exact", 1: "approx"}[kind_code], fp)
