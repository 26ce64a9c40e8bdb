"""Hot sampling loops with a numba backend and a pure-numpy fallback.

The Monte Carlo trial loop is the only part of the package where runtime
is dominated by an inner numeric loop, so it is the only part with two
implementations:

* ``numba``: per-trial loops compiled with ``@njit``, using numba's
  MT19937 generator seeded inside the kernel;
* ``numpy``: vectorized sampling with ``numpy.random.Generator`` (PCG64).

The active backend is chosen by the ``POVMDT_BACKEND`` environment
variable ("numba" or "numpy"); unset, numba is used when importable.
Each backend is deterministic for a given seed, but the two draw from
different generators, so streams are not identical across backends.
``benchmarks/bench_backends.py`` compares their throughput.

Exception: multinomial statistics always run the numpy sampler -- numba's
multinomial costs O(n) per draw and loses by ~80x at realistic particle
numbers (the benchmark demonstrates this).
"""

from __future__ import annotations

import os

import numpy as np

ENV_VAR = "POVMDT_BACKEND"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via POVMDT_BACKEND=numpy
    HAS_NUMBA = False


def active_backend() -> str:
    """Resolve the backend name from the environment, validating the choice."""
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice == "":
        return "numba" if HAS_NUMBA else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    return choice


def rng_name(backend: str | None = None) -> str:
    """Documented generator algorithm for the given (or active) backend."""
    b = backend or active_backend()
    return "numba-mt19937" if b == "numba" else "numpy-pcg64"


def effective_backend(statistics: str = "poisson") -> str:
    """Backend that will actually run for the given statistics.

    Multinomial sampling always uses the vectorized numpy path: numba's
    multinomial draw costs O(n) per setting, which is ~80x slower than
    numpy's samplers at realistic particle numbers (see
    benchmarks/bench_backends.py).
    """
    if statistics == "multinomial":
        return "numpy"
    return active_backend()


# --- pure-numpy implementations ------------------------------------------------


def poisson_trials_numpy(rates, w_re, w_im, n, trials, seed):
    """Per-trial (re, im) estimates under independent Poisson cell counts.

    ``rates`` are the expected counts n * W per cell; estimates are
    weights . counts / n.
    """
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rates, size=(trials, rates.shape[0])).astype(np.float64)
    counts /= n
    return counts @ w_re, counts @ w_im


def multinomial_trials_numpy(cells, w_re, w_im, n, trials, seed):
    """Per-trial estimates with exactly n particles per setting.

    ``cells`` is (settings, 4) of joint probabilities; the per-setting
    remainder 1 - sum(cells) is the rejected (other-outcome) bucket.
    """
    rng = np.random.default_rng(seed)
    n_settings = cells.shape[0]
    counts = np.empty((trials, n_settings * 4))
    for s in range(n_settings):
        p = np.empty(5)
        p[:4] = cells[s]
        p[4] = max(1.0 - cells[s].sum(), 0.0)
        p /= p.sum()
        draws = rng.multinomial(n, p, size=trials)
        counts[:, s * 4 : s * 4 + 4] = draws[:, :4]
    counts /= n
    return counts @ w_re, counts @ w_im


# --- numba implementations -------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _poisson_trials_numba(rates, w_re, w_im, n, trials, seed):
        np.random.seed(seed)
        out_re = np.empty(trials)
        out_im = np.empty(trials)
        n_cells = rates.shape[0]
        for t in range(trials):
            acc_re = 0.0
            acc_im = 0.0
            for c in range(n_cells):
                w = np.random.poisson(rates[c]) / n
                acc_re += w_re[c] * w
                acc_im += w_im[c] * w
            out_re[t] = acc_re
            out_im[t] = acc_im
        return out_re, out_im

    @njit(cache=True)
    def _multinomial_trials_numba(cells, w_re, w_im, n, trials, seed):
        # n particles per setting over the 4 cells plus a rejected bucket
        np.random.seed(seed)
        n_settings = cells.shape[0]
        probs = np.empty((n_settings, 5))
        for s in range(n_settings):
            total = 0.0
            for c in range(4):
                probs[s, c] = cells[s, c]
                total += cells[s, c]
            probs[s, 4] = max(1.0 - total, 0.0)
            norm = probs[s].sum()
            for c in range(5):
                probs[s, c] /= norm
        out_re = np.empty(trials)
        out_im = np.empty(trials)
        for t in range(trials):
            acc_re = 0.0
            acc_im = 0.0
            for s in range(n_settings):
                counts = np.random.multinomial(n, probs[s])
                for c in range(4):
                    w = counts[c] / n
                    idx = s * 4 + c
                    acc_re += w_re[idx] * w
                    acc_im += w_im[idx] * w
            out_re[t] = acc_re
            out_im[t] = acc_im
        return out_re, out_im

    def poisson_trials_numba(rates, w_re, w_im, n, trials, seed):
        # numba's seed is a 32-bit quantity
        return _poisson_trials_numba(rates, w_re, w_im, float(n), trials, int(seed) % 2**32)

    def multinomial_trials_numba(cells, w_re, w_im, n, trials, seed):
        return _multinomial_trials_numba(cells, w_re, w_im, int(n), trials, int(seed) % 2**32)


def trial_estimates(cells, w_re, w_im, n, trials, seed, statistics="poisson"):
    """Dispatch a trial loop to the active backend.

    ``cells`` is the (settings, 4) array of exact joint probabilities.
    Returns per-trial arrays (re, im) of raw (unscaled) entry estimates.
    """
    cells = np.ascontiguousarray(np.maximum(cells, 0.0), dtype=np.float64)
    w_re = np.ascontiguousarray(w_re, dtype=np.float64)
    w_im = np.ascontiguousarray(w_im, dtype=np.float64)
    backend = effective_backend(statistics)
    if statistics == "poisson":
        rates = cells.reshape(-1) * n
        if backend == "numba":
            return poisson_trials_numba(rates, w_re, w_im, n, trials, seed)
        return poisson_trials_numpy(rates, w_re, w_im, n, trials, seed)
    if statistics == "multinomial":
        return multinomial_trials_numpy(cells, w_re, w_im, n, trials, seed)
    raise ValueError(f"statistics must be 'poisson' or 'multinomial', got {statistics!r}")
