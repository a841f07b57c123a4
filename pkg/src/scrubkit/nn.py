"""Deterministic feed-forward classifier engine over a flat parameter vector.

Everything is float64 and fully seeded: the same (spec, seed, data) always
reproduces bit-identical parameters, losses and gradients on a given kernel
backend. Gradients are exact analytic backprop, not autodiff.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels

ACTIVATIONS = {"relu": _kernels.ACT_RELU, "tanh": _kernels.ACT_TANH}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture: layer widths (input, hidden..., classes), activation, init seed."""

    layer_sizes: tuple
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output widths")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def num_params(self):
        return sum((fi + 1) * fo for fi, fo in zip(self.layer_sizes, self.layer_sizes[1:]))

    @property
    def class_count(self):
        return self.layer_sizes[-1]


class Network:
    """Engine bound to one ModelSpec; parameters travel as flat float64 vectors.

    Flat layout per layer l: the (in_l x out_l) weight matrix row-major, then
    the out_l biases. `fan_in_per_param` and `is_bias` describe every flat
    index, and `describe(j)` decodes one index for debugging and reports.
    """

    def __init__(self, spec):
        self.spec = spec
        self._sizes = np.asarray(spec.layer_sizes, dtype=np.int64)
        self._act = ACTIVATIONS[spec.activation]
        self.num_params = spec.num_params

        fan_in = np.empty(self.num_params, dtype=np.int64)
        is_bias = np.zeros(self.num_params, dtype=bool)
        layer_of = np.empty(self.num_params, dtype=np.int64)
        off = 0
        for l, (fi, fo) in enumerate(zip(spec.layer_sizes, spec.layer_sizes[1:])):
            fan_in[off:off + (fi + 1) * fo] = fi
            layer_of[off:off + (fi + 1) * fo] = l
            is_bias[off + fi * fo:off + (fi + 1) * fo] = True
            off += (fi + 1) * fo
        self.fan_in_per_param = fan_in
        self.is_bias = is_bias
        self.layer_of = layer_of
        self._layer_offsets = np.concatenate(
            ([0], np.cumsum([(fi + 1) * fo for fi, fo in zip(spec.layer_sizes, spec.layer_sizes[1:])]))
        )

    # -- parameters ---------------------------------------------------------

    def init_params(self):
        """Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero."""
        rng = np.random.default_rng(self.spec.seed)
        params = np.zeros(self.num_params, dtype=np.float64)
        off = 0
        for fi, fo in zip(self.spec.layer_sizes, self.spec.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fi)
            params[off:off + fi * fo] = rng.uniform(-bound, bound, size=fi * fo)
            off += (fi + 1) * fo  # biases stay zero
        return params

    def describe(self, j):
        """Decode flat index j -> (layer, 'weight'|'bias', row, col)."""
        if not 0 <= j < self.num_params:
            raise IndexError(f"parameter index {j} out of range [0, {self.num_params})")
        l = int(np.searchsorted(self._layer_offsets, j, side="right") - 1)
        fi = self.spec.layer_sizes[l]
        fo = self.spec.layer_sizes[l + 1]
        rel = j - int(self._layer_offsets[l])
        if rel < fi * fo:
            return l, "weight", rel // fo, rel % fo
        return l, "bias", 0, rel - fi * fo

    # -- evaluation ---------------------------------------------------------

    def _check(self, params, x, y=None):
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {params.shape}")
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.layer_sizes[0]:
            raise ValueError(f"inputs must be (B, {self.spec.layer_sizes[0]}), got {x.shape}")
        if x.shape[0] < 1:
            raise ValueError("batch is empty")
        if y is None:
            return params, x, None
        y = np.ascontiguousarray(y, dtype=np.int64)
        if y.shape != (x.shape[0],):
            raise ValueError("labels must match batch size")
        if y.min() < 0 or y.max() >= self.spec.class_count:
            raise ValueError("label out of range for class count")
        return params, x, y

    def logits(self, params, x):
        params, x, _ = self._check(params, x)
        return _kernels.forward_logits(params, self._sizes, self._act, x)

    def loss(self, params, x, y):
        params, x, y = self._check(params, x, y)
        return float(_kernels.ce_loss(params, self._sizes, self._act, x, y))

    def per_sample_loss(self, params, x, y):
        params, x, y = self._check(params, x, y)
        return _kernels.per_sample_ce(params, self._sizes, self._act, x, y)

    def loss_and_grad(self, params, x, y):
        params, x, y = self._check(params, x, y)
        loss, grad = _kernels.ce_loss_grad(params, self._sizes, self._act, x, y)
        return float(loss), grad

    def grad(self, params, x, y):
        return self.loss_and_grad(params, x, y)[1]

    def masked_loss(self, params, j, x, y):
        """Loss with parameter j zeroed; the input vector is left untouched."""
        if not 0 <= j < self.num_params:
            raise IndexError(f"parameter index {j} out of range [0, {self.num_params})")
        masked = np.array(params, dtype=np.float64, copy=True)
        masked[j] = 0.0
        return self.loss(masked, x, y)

    def accuracy(self, params, x, y):
        """Fraction of argmax predictions matching labels; ties go to the lowest class."""
        params, x, y = self._check(params, x, y)
        pred = np.argmax(self.logits(params, x), axis=1)
        return float((pred == y).mean())
