"""Time the numba kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--resolution 14] [--repeat 3]

Each kernel is run once per backend to warm up (compilation is excluded),
then timed ``--repeat`` times; the best time is reported together with the
largest absolute difference between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dyadicw import _kernels
from dyadicw._config import jit_mode
from dyadicw.linalg import half_directions
from dyadicw.weights import make_power_weight


def _best(fn, repeat: int) -> tuple[float, object]:
    out = fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))


def cases(L: int):
    W = make_power_weight(0.3, -0.3, 3.0, L)
    P = np.asarray(W.power(1.0 / 3.0))
    Q = np.asarray(W.power(-1.0 / 3.0))
    E = half_directions(2, 256)
    rho = _kernels.power_sums(P, E, 3.0, L - 2) ** (1.0 / 3.0)
    Ys = E[None, :, :] / rho[:, :, None]
    rng = np.random.default_rng(0)
    G = rng.standard_normal((4096, 3, 3))
    S = G @ np.swapaxes(G, 1, 2)
    lvl = max(L - 10, 0)
    return {
        "power_sums": lambda: _kernels.power_sums(P, E, 3.0, L - 2),
        "mvee_batch": lambda: _kernels.mvee_batch(Ys[:256])[:3],
        "ap_integral_level": lambda: _kernels.ap_integral_level(P, Q, 3.0, lvl),
        "sym_eig": lambda: _kernels.sym_eig(S)[0],
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=14)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases(args.resolution).items():
        with jit_mode(True):
            tj, oj = _best(fn, args.repeat)
        with jit_mode(False):
            tn, on = _best(fn, args.repeat)
        print(f"{name:<20}{tj:>12.4f}{tn:>12.4f}{tn / tj:>10.1f}{_diff(oj, on):>14.2e}")


if __name__ == "__main__":
    main()
