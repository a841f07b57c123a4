"""Trimming: re-initialize the top-k percent of parameters by sensitivity."""

import math
from dataclasses import dataclass

import numpy as np

INIT_STRATEGIES = ("uniform", "gaussian", "zeros", "ones")


@dataclass
class TrimPlan:
    selected: np.ndarray  # sorted unique parameter indices
    k: float  # percentile in [0, 100)
    strategy: str
    seed: int

    def __post_init__(self):
        self.selected = np.unique(np.asarray(self.selected, dtype=np.int64))
        if self.strategy not in INIT_STRATEGIES:
            raise ValueError(f"unknown init strategy {self.strategy!r}")

    def to_dict(self):
        return {
            "k": self.k,
            "strategy": self.strategy,
            "seed": self.seed,
            "selected": self.selected.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["selected"], dtype=np.int64), d["k"], d["strategy"], d["seed"])


def _select(scores, count):
    # stable argsort on -|s| keeps lower indices first among ties
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:count])


def rank_top_k(scores, k, strategy="uniform", seed=0, signed=False, exclude=None):
    """Select the ceil((k/100)*pool) indices with largest |score|.

    `signed=True` ranks on the raw signed score instead. `exclude` is an
    optional boolean mask of indices never selected (e.g. biases); the count
    is then taken against the reduced pool.
    """
    if not 0.0 <= k < 100.0:
        raise ValueError("k must lie in [0, 100)")
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    key = scores if signed else np.abs(scores)
    if exclude is not None:
        pool = np.nonzero(~np.asarray(exclude, dtype=bool))[0]
        count = int(math.ceil(round(k / 100.0 * pool.size, 9)))
        selected = pool[_select(key[pool], count)]
    else:
        count = int(math.ceil(round(k / 100.0 * scores.size, 9)))
        selected = _select(key, count)
    return TrimPlan(selected, k, strategy, seed)


def rank_top_k_per_layer(scores, k, net, strategy="uniform", seed=0, signed=False):
    """Per-layer variant: an independent top-k quota inside every layer."""
    if not 0.0 <= k < 100.0:
        raise ValueError("k must lie in [0, 100)")
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    key = scores if signed else np.abs(scores)
    picks = []
    for l in range(len(net.spec.layer_sizes) - 1):
        idx = np.nonzero(net.layer_of == l)[0]
        count = int(math.ceil(round(k / 100.0 * idx.size, 9)))
        picks.append(idx[_select(key[idx], count)])
    return TrimPlan(np.concatenate(picks), k, strategy, seed)


def apply_trim(params, plan, net):
    """Replace the selected entries; everything else is bit-unchanged.

    uniform: U(-1/sqrt(fan_in), +1/sqrt(fan_in)) of the owning layer
    gaussian: N(0, 1/fan_in)
    zeros / ones: the constant
    """
    sel = plan.selected
    if sel.size and sel[-1] >= params.size:
        raise IndexError("trim plan index out of range")
    out = np.array(params, dtype=np.float64, copy=True)
    if sel.size == 0:
        return out
    if plan.strategy == "zeros":
        out[sel] = 0.0
        return out
    if plan.strategy == "ones":
        out[sel] = 1.0
        return out
    rng = np.random.default_rng(plan.seed)
    scale = 1.0 / np.sqrt(net.fan_in_per_param[sel].astype(np.float64))
    if plan.strategy == "uniform":
        out[sel] = (2.0 * rng.random(sel.size) - 1.0) * scale
    else:  # gaussian
        out[sel] = rng.standard_normal(sel.size) * scale
    return out
