"""Benchmark the Monte Carlo trial kernels: numba vs pure numpy.

Runs the reference scenario (qubit element with eta = 1/2 probed at
g = pi/4, N = 12790 per setting) through both backends at increasing
trial counts and reports throughput.  Usage::

    python benchmarks/bench_backends.py [--statistics poisson|multinomial]
"""

import argparse
import time

import numpy as np

from povmdt import EntryScenario, make_parametric_element
from povmdt._kernels import (
    HAS_NUMBA,
    multinomial_trials_numpy,
    poisson_trials_numpy,
)
from povmdt.estimator import tables_to_flat

if HAS_NUMBA:
    from povmdt._kernels import multinomial_trials_numba, poisson_trials_numba


def scenario_inputs():
    scn = EntryScenario(make_parametric_element(0.0, 0.5, 0.0), 1, 0, np.pi / 4, scale=0.5)
    coeffs = scn.coeffs()
    cells = np.maximum(tables_to_flat(scn.exact_tables()), 0.0).reshape(9, 4)
    w_re = coeffs.cell_re / scn.scale
    w_im = coeffs.cell_im / scn.scale
    return cells, w_re, w_im


def timed(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--statistics", choices=("poisson", "multinomial"), default="poisson")
    args = parser.parse_args()

    cells, w_re, w_im = scenario_inputs()
    n = 12790
    if args.statistics == "poisson":
        rates = cells.reshape(-1) * n
        np_fn = lambda trials: poisson_trials_numpy(rates, w_re, w_im, n, trials, 1)
        nb_fn = (lambda trials: poisson_trials_numba(rates, w_re, w_im, n, trials, 1)) if HAS_NUMBA else None
        grids = (1000, 10000, 100000, 1000000)
    else:
        np_fn = lambda trials: multinomial_trials_numpy(cells, w_re, w_im, n, trials, 1)
        nb_fn = (lambda trials: multinomial_trials_numba(cells, w_re, w_im, n, trials, 1)) if HAS_NUMBA else None
        grids = (1000, 10000, 100000)

    if nb_fn is not None:
        nb_fn(10)  # trigger compilation outside the timed region
    else:
        print("numba not installed; benchmarking the numpy path only")
    if args.statistics == "multinomial":
        print("note: production dispatch pins multinomial to the numpy path; "
              "this benchmark is the reason why")

    print(f"\nstatistics = {args.statistics}, n_per_setting = {n}")
    header = f"{'trials':>9} {'numpy [s]':>12} {'numba [s]':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for trials in grids:
        t_np = timed(np_fn, trials)
        if nb_fn is not None:
            t_nb = timed(nb_fn, trials)
            print(f"{trials:>9} {t_np:>12.4f} {t_nb:>12.4f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{trials:>9} {t_np:>12.4f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
