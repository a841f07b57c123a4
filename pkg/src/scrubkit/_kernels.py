"""Numeric kernels for the MLP engine.

Two interchangeable lanes compute the same quantities:

* a vectorized pure-numpy lane (``*_np``), always available;
* a numba ``@njit`` lane (``*_nb``), compiled lazily and cached on disk.

The active lane is chosen once at import time. Setting the environment
variable ``SCRUBKIT_NO_NUMBA=1`` (or numba failing to import) selects the
numpy lane. Results of the two lanes agree to float rounding but are not
guaranteed bit-identical, so reproducibility claims hold per lane.

All kernels operate on a flat float64 parameter vector. The layer layout is
described by ``sizes`` (int64 array ``[n_in, hidden..., n_classes]``): layer
``l`` stores its ``(sizes[l], sizes[l+1])`` weight matrix row-major, followed
by its ``sizes[l+1]`` biases. Hidden activations are relu (``act=0``) or tanh
(``act=1``); the output layer is linear and losses are softmax cross-entropy
stabilized with log-sum-exp.
"""

import os

import numpy as np

ACT_RELU = 0
ACT_TANH = 1

_env = os.environ.get("SCRUBKIT_NO_NUMBA", "").strip().lower()
_numba_wanted = _env not in ("1", "true", "yes")

NUMBA_AVAILABLE = False
if _numba_wanted:
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - environment without numba
        pass


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _unpack(params, sizes):
    """Yield (W, b, last_layer_flag) views over the flat vector."""
    off = 0
    n_layers = len(sizes) - 1
    for l in range(n_layers):
        fi = int(sizes[l])
        fo = int(sizes[l + 1])
        w = params[off:off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = params[off:off + fo]
        off += fo
        yield w, b, l == n_layers - 1


def forward_logits_np(params, sizes, act, x):
    h = x
    for w, b, last in _unpack(params, sizes):
        h = h @ w + b
        if not last:
            h = np.maximum(h, 0.0) if act == ACT_RELU else np.tanh(h)
    return h


def _logsumexp_rows(z):
    m = z.max(axis=1)
    return m + np.log(np.exp(z - m[:, None]).sum(axis=1))


def per_sample_ce_np(params, sizes, act, x, y):
    z = forward_logits_np(params, sizes, act, x)
    return _logsumexp_rows(z) - z[np.arange(z.shape[0]), y]


def ce_loss_np(params, sizes, act, x, y):
    return float(per_sample_ce_np(params, sizes, act, x, y).mean())


def ce_loss_grad_np(params, sizes, act, x, y):
    n_layers = len(sizes) - 1
    b_count = x.shape[0]

    acts = [x]
    layers = list(_unpack(params, sizes))
    h = x
    for w, b, last in layers:
        h = h @ w + b
        if not last:
            h = np.maximum(h, 0.0) if act == ACT_RELU else np.tanh(h)
        acts.append(h)

    z = acts[-1]
    lse = _logsumexp_rows(z)
    rows = np.arange(b_count)
    loss = float((lse - z[rows, y]).mean())

    delta = np.exp(z - lse[:, None]) / b_count
    delta[rows, y] -= 1.0 / b_count

    grad = np.zeros_like(params)
    off_end = params.shape[0]
    for l in range(n_layers - 1, -1, -1):
        w, _, _ = layers[l]
        fi = int(sizes[l])
        fo = int(sizes[l + 1])
        off = off_end - (fi + 1) * fo
        grad[off:off + fi * fo] = (acts[l].T @ delta).reshape(fi * fo)
        grad[off + fi * fo:off_end] = delta.sum(axis=0)
        off_end = off
        if l > 0:
            delta = delta @ w.T
            if act == ACT_RELU:
                delta = delta * (acts[l] > 0.0)
            else:
                delta = delta * (1.0 - acts[l] ** 2)
    return loss, grad


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

def _build_numba_lane():
    @njit(cache=True)
    def _offsets(sizes):
        n_layers = sizes.shape[0] - 1
        offs = np.empty(n_layers + 1, dtype=np.int64)
        offs[0] = 0
        for l in range(n_layers):
            offs[l + 1] = offs[l] + (sizes[l] + 1) * sizes[l + 1]
        return offs

    @njit(cache=True)
    def _forward_acts(params, sizes, act, x):
        n_layers = sizes.shape[0] - 1
        offs = _offsets(sizes)
        acts = [x]
        for l in range(n_layers):
            fi = sizes[l]
            fo = sizes[l + 1]
            w = np.ascontiguousarray(params[offs[l]:offs[l] + fi * fo]).reshape(fi, fo)
            b = params[offs[l] + fi * fo:offs[l + 1]]
            z = np.dot(acts[l], w)
            for i in range(z.shape[0]):
                for j in range(fo):
                    z[i, j] += b[j]
            if l < n_layers - 1:
                if act == ACT_RELU:
                    for i in range(z.shape[0]):
                        for j in range(fo):
                            if z[i, j] < 0.0:
                                z[i, j] = 0.0
                else:
                    z = np.tanh(z)
            acts.append(z)
        return acts

    @njit(cache=True)
    def forward_logits_nb(params, sizes, act, x):
        acts = _forward_acts(params, sizes, act, x)
        return acts[len(acts) - 1]

    @njit(cache=True)
    def per_sample_ce_nb(params, sizes, act, x, y):
        z = forward_logits_nb(params, sizes, act, x)
        b_count = z.shape[0]
        c = z.shape[1]
        out = np.empty(b_count)
        for i in range(b_count):
            m = z[i, 0]
            for j in range(1, c):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for j in range(c):
                s += np.exp(z[i, j] - m)
            out[i] = m + np.log(s) - z[i, y[i]]
        return out

    @njit(cache=True)
    def ce_loss_nb(params, sizes, act, x, y):
        per = per_sample_ce_nb(params, sizes, act, x, y)
        total = 0.0
        for i in range(per.shape[0]):
            total += per[i]
        return total / per.shape[0]

    @njit(cache=True)
    def ce_loss_grad_nb(params, sizes, act, x, y):
        n_layers = sizes.shape[0] - 1
        offs = _offsets(sizes)
        acts = _forward_acts(params, sizes, act, x)
        z = acts[n_layers]
        b_count = z.shape[0]
        c = z.shape[1]

        loss = 0.0
        delta = np.empty((b_count, c))
        for i in range(b_count):
            m = z[i, 0]
            for j in range(1, c):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for j in range(c):
                s += np.exp(z[i, j] - m)
            lse = m + np.log(s)
            loss += lse - z[i, y[i]]
            for j in range(c):
                delta[i, j] = np.exp(z[i, j] - lse) / b_count
            delta[i, y[i]] -= 1.0 / b_count
        loss /= b_count

        grad = np.zeros_like(params)
        for l in range(n_layers - 1, -1, -1):
            fi = sizes[l]
            fo = sizes[l + 1]
            h = acts[l]
            gw = np.dot(np.ascontiguousarray(h.T), delta)
            grad[offs[l]:offs[l] + fi * fo] = gw.reshape(fi * fo)
            for j in range(fo):
                s = 0.0
                for i in range(b_count):
                    s += delta[i, j]
                grad[offs[l] + fi * fo + j] = s
            if l > 0:
                w = np.ascontiguousarray(params[offs[l]:offs[l] + fi * fo]).reshape(fi, fo)
                delta = np.dot(delta, np.ascontiguousarray(w.T))
                if act == ACT_RELU:
                    for i in range(b_count):
                        for j in range(fi):
                            if h[i, j] <= 0.0:
                                delta[i, j] = 0.0
                else:
                    for i in range(b_count):
                        for j in range(fi):
                            delta[i, j] *= 1.0 - h[i, j] * h[i, j]
        return loss, grad

    return forward_logits_nb, per_sample_ce_nb, ce_loss_nb, ce_loss_grad_nb


if NUMBA_AVAILABLE:
    (forward_logits_nb, per_sample_ce_nb,
     ce_loss_nb, ce_loss_grad_nb) = _build_numba_lane()
    forward_logits = forward_logits_nb
    per_sample_ce = per_sample_ce_nb
    ce_loss = ce_loss_nb
    ce_loss_grad = ce_loss_grad_nb
    BACKEND = "numba"
else:
    forward_logits = forward_logits_np
    per_sample_ce = per_sample_ce_np
    ce_loss = ce_loss_np
    ce_loss_grad = ce_loss_grad_np
    BACKEND = "numpy"


def active_backend():
    """Name of the kernel lane selected at import time."""
    return BACKEND
