#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy twins.

Run:
    python benchmarks/bench_kernels.py [--repeats N]

Times both implementations of every hot kernel on workloads shaped like the
acceptance suite, checks they agree, and prints a speedup table. Requires
numba (without it there is nothing to compare; the package itself still
works through the numpy path, see PROBEVOLUME_BACKEND).
"""

import argparse
import math
import time

import numpy as np

from probevolume import kernels
from probevolume.speed_model import load_distribution


def best_of(fn, repeats):
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - t0)
    return min(timings)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    park = load_distribution("park-i35")
    dist_args = (park._means, park._sds, park._norms)
    cdf_args = (park._means, park._sds, park._cdf_lo, park._cdf_w)
    rng = np.random.default_rng(42)

    s_big = rng.uniform(0.0, 41.0, 2_000_000)
    speeds = rng.uniform(0.5, 40.0, 8_000_000)
    offsets = rng.uniform(0.0, 4.0, 8_000_000)
    band_args = (
        park._means, park._sds, park._norms, park._cdf_lo, park._cdf_w,
        park.lower, park.upper, 300.0, 4.0, 1e-3, 2001, 2000,
    )
    x34 = rng.uniform(0.5, 120.0, 34)
    y34 = rng.uniform(5.0, 900.0, 34)
    w34 = rng.uniform(0.01, 60.0, 34)

    cases = [
        (
            "mixture_pdf (2e6 points)",
            lambda: kernels._mixture_pdf_np(s_big, *dist_args, 0.0, 40.0),
            lambda: kernels._mixture_pdf_nb(s_big, *dist_args, 0.0, 40.0),
        ),
        (
            "mixture_cdf (2e6 points)",
            lambda: kernels._mixture_cdf_np(s_big, *cdf_args, 0.0, 40.0),
            lambda: kernels._mixture_cdf_nb(s_big, *cdf_args, 0.0, 40.0),
        ),
        (
            "pass_counts (8e6 passes)",
            lambda: kernels._pass_counts_np(speeds, offsets, 300.0, 4.0),
            lambda: kernels._pass_counts_nb(speeds, offsets, 300.0, 4.0),
        ),
        (
            "band_masses (scenario 1 grid)",
            lambda: kernels._band_masses_np(*band_args),
            lambda: kernels._band_masses_nb(*band_args),
        ),
        (
            "all_pairs_mape (34 sites x 200 trials)",
            lambda: [kernels._all_pairs_mape_np(x34, y34, w34) for _ in range(200)],
            lambda: [kernels._all_pairs_mape_nb(x34, y34, w34) for _ in range(200)],
        ),
    ]

    print(f"{'kernel':<40} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    print("-" * 73)
    for name, np_fn, nb_fn in cases:
        nb_fn()  # jit warm-up outside the timed region
        t_np = best_of(np_fn, args.repeats)
        t_nb = best_of(nb_fn, args.repeats)
        print(f"{name:<40} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>8.2f}x")

    # agreement spot checks
    a = kernels._pass_counts_np(speeds[:100_000], offsets[:100_000], 300.0, 4.0)
    b = kernels._pass_counts_nb(speeds[:100_000], offsets[:100_000], 300.0, 4.0)
    assert np.array_equal(a, b)
    m_np, at_np = kernels._band_masses_np(*band_args)
    m_nb, at_nb = kernels._band_masses_nb(*band_args)
    assert np.allclose(m_np, m_nb, rtol=1e-10, atol=1e-16) and math.isclose(
        at_np, at_nb, abs_tol=1e-14
    )
    print("agreement checks passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
