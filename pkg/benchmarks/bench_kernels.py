"""Benchmark the numba kernel lane against the pure-numpy lane.

Runs the fused loss+gradient kernel and the loss-only kernel across a few
model/batch sizes and prints per-call times plus the speedup. Run from the
repository root:

    python3 benchmarks/bench_kernels.py

The numba lane must be enabled (do not set SCRUBKIT_NO_NUMBA).
"""

import time

import numpy as np

from scrubkit import _kernels
from scrubkit.nn import ModelSpec, Network

CASES = [
    ((2, 32, 5), 128),
    ((16, 64, 64, 10), 256),
    ((64, 128, 128, 10), 512),
]


def bench(fn, args, repeats):
    fn(*args)  # warm up (numba compiles here)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    if not _kernels.NUMBA_AVAILABLE:
        print("numba lane unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"{'model':>22} {'batch':>6} {'kernel':>10} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for layer_sizes, batch in CASES:
        spec = ModelSpec(layer_sizes, "relu", seed=0)
        net = Network(spec)
        params = net.init_params()
        x = rng.standard_normal((batch, layer_sizes[0]))
        y = rng.integers(0, layer_sizes[-1], batch).astype(np.int64)
        args = (params, net._sizes, net._act, x, y)
        repeats = max(20, int(2e6 / (batch * spec.num_params)))

        for name, fn_np, fn_nb in (
            ("loss", _kernels.ce_loss_np, _kernels.ce_loss_nb),
            ("loss+grad", _kernels.ce_loss_grad_np, _kernels.ce_loss_grad_nb),
        ):
            t_np = bench(fn_np, args, repeats)
            t_nb = bench(fn_nb, args, repeats)
            print(f"{str(layer_sizes):>22} {batch:>6} {name:>10} "
                  f"{t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
