"""Finite-statistics sampling, repeated-trial studies and parameter sweeps.

Counting noise enters through the meter distributions: with n particles
per basis setting, the observed cell frequencies fluctuate around the
exact W tables (Poisson counts by default, exact-n multinomial as an
alternative).  Everything stochastic is a pure function of (scenario,
seed); per-use seeds are derived from the scenario seed with numpy's
SeedSequence, and the trial loops run on the backend selected in
:mod:`povmdt._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .estimator import (
    EntryEstimate,
    RtCoefficients,
    analytic_variance,
    completeness_refine,
    error_transfer_variance,
    estimate_from_tables,
    flat_to_tables,
    rt_coefficients,
    tables_to_flat,
)
from .linalg import asoperator
from .noise import apply_dephasing, apply_phase_rotation
from .povm import Povm, make_parametric_element
from .protocol import CouplingConfig, exact_entry_tables

AXES = ("g", "theta", "xi", "phi")


@dataclass(frozen=True)
class ShotModel:
    """Counting statistics: n particles per basis setting, seeded stream."""

    n_per_setting: int
    statistics: str = "poisson"
    seed: int = 0

    def __post_init__(self):
        if self.n_per_setting < 1:
            raise ValueError(f"n_per_setting must be >= 1, got {self.n_per_setting}")
        if self.statistics not in ("poisson", "multinomial"):
            raise ValueError(
                f"statistics must be 'poisson' or 'multinomial', got {self.statistics!r}"
            )


@dataclass(frozen=True)
class EntryScenario:
    """One entry-measurement scenario: element, entry indices, coupling.

    ``scale`` divides the raw entry estimate; set it to the element
    efficiency to work with efficiency-normalized entries (the convention
    of the closed-form variance law).
    """

    pi_l: np.ndarray
    j: int
    k: int
    g: float
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pi_l", asoperator(self.pi_l))
        if self.j == self.k:
            raise ValueError("entry scenarios target off-diagonal entries; need j != k")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def coeffs(self) -> RtCoefficients:
        return rt_coefficients(self.pi_l.shape[0], self.g)

    def exact_tables(self) -> dict:
        return exact_entry_tables(self.pi_l, self.j, self.k, CouplingConfig.symmetric(self.g))

    def exact_value(self) -> complex:
        return complex(self.pi_l[self.j, self.k]) / self.scale


@dataclass(frozen=True)
class TrialSummary:
    """Repeated-trial statistics for one scenario.

    ``predicted_var`` is the error-transfer total variance evaluated at the
    exact tables.  Sample variances are NaN for fewer than two trials (no
    degrees of freedom).  ``backend``/``rng`` record how the stream was
    generated so the summary is reproducible across machines.
    """

    mean: complex
    sample_var_re: float
    sample_var_im: float
    predicted_var: float
    trials: int
    backend: str = ""
    rng: str = ""


@dataclass(frozen=True)
class SweepSpec:
    """A one-axis sweep of the measurement-precision study.

    axis "g" or "theta" sweeps the qubit element eta*[[cos^2 t, e01], ...]
    with the other angle fixed; axis "xi"/"phi" applies dephasing/rotation
    to a fixed element of ``povm`` and sweeps the noise parameter.  Angles
    are radians.
    """

    axis: str
    grid: tuple
    trials: int
    shot: ShotModel
    theta: float = 0.0
    eta: float = 0.5
    e01: complex = 0.0
    g: float = math.pi / 4
    povm: Povm | None = None
    label: int = 1
    j: int = 1
    k: int = 0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if len(self.grid) == 0:
            raise ValueError("sweep grid must be non-empty")
        if self.axis == "g":
            bad = [g for g in self.grid if not 0 < g < math.pi / 2]
            if bad:
                raise ValueError(f"g grid must lie strictly inside (0, pi/2); offending {bad}")
        if self.axis in ("xi", "phi") and self.povm is None:
            raise ValueError(f"axis {self.axis!r} sweeps need a povm")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")


def _child_seeds(seed: int, count: int) -> np.ndarray:
    """Deterministic per-use 32-bit seeds derived from one scenario seed."""
    return np.random.SeedSequence(seed).generate_state(count)


def sample_counts(tables: dict, shot: ShotModel) -> dict:
    """One noisy realization of the nine W tables.

    Poisson mode draws each cell count independently with mean n*W;
    multinomial mode distributes exactly n particles per setting over the
    four cells and a rejected bucket.  Returns counts/n as empirical
    tables, deterministic for a given (tables, shot).
    """
    flat = tables_to_flat(tables)
    if flat.min() < -1e-9:
        raise ValueError(f"negative probability cell: {flat.min():.3e}")
    flat = np.maximum(flat, 0.0)
    rng = np.random.default_rng(shot.seed)
    n = shot.n_per_setting
    if shot.statistics == "poisson":
        counts = rng.poisson(flat * n).astype(float)
    else:
        counts = np.empty_like(flat)
        for s in range(9):
            cells = flat[s * 4 : s * 4 + 4]
            p = np.append(cells, max(1.0 - cells.sum(), 0.0))
            p /= p.sum()
            counts[s * 4 : s * 4 + 4] = rng.multinomial(n, p)[:4]
    return flat_to_tables(counts / n)


def trial_estimate_arrays(
    scenario: EntryScenario, shot: ShotModel, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial (re, im) estimate arrays for a scenario (backend kernels)."""
    tables = scenario.exact_tables()
    coeffs = scenario.coeffs()
    flat = tables_to_flat(tables)
    if flat.min() < -1e-9:
        raise ValueError(f"negative probability cell: {flat.min():.3e}")
    cells = np.maximum(flat, 0.0).reshape(9, 4)
    re, im = _kernels.trial_estimates(
        cells,
        coeffs.cell_re / scenario.scale,
        coeffs.cell_im / scenario.scale,
        shot.n_per_setting,
        trials,
        shot.seed,
        shot.statistics,
    )
    return re, im


def run_trials(scenario: EntryScenario, shot: ShotModel, trials: int) -> TrialSummary:
    """Sample-and-estimate ``trials`` times and summarize.

    The predicted variance is the error-transfer value at the exact tables,
    so predicted-vs-sample comparison is meaningful per scenario.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    tables = scenario.exact_tables()
    coeffs = scenario.coeffs()
    vr, vi = error_transfer_variance(tables, coeffs, shot.n_per_setting, scenario.scale)
    re, im = trial_estimate_arrays(scenario, shot, trials)
    if trials >= 2:
        svr, svi = float(re.var(ddof=1)), float(im.var(ddof=1))
    else:
        svr = svi = float("nan")
    backend = _kernels.effective_backend(shot.statistics)
    return TrialSummary(
        mean=complex(re.mean(), im.mean()),
        sample_var_re=svr,
        sample_var_im=svi,
        predicted_var=vr + vi,
        trials=trials,
        backend=backend,
        rng=_kernels.rng_name(backend),
    )


def _scenario_at(spec: SweepSpec, value: float) -> EntryScenario:
    """Materialize the scenario at one grid point of the sweep axis."""
    if spec.axis in ("g", "theta"):
        theta = value if spec.axis == "theta" else spec.theta
        g = value if spec.axis == "g" else spec.g
        elem = make_parametric_element(theta, spec.eta, spec.e01)
        return EntryScenario(elem, 1, 0, g, scale=spec.eta)
    if spec.axis == "xi":
        noisy = apply_dephasing(spec.povm, value, spec.j, spec.k)
    else:
        noisy = apply_phase_rotation(spec.povm, value, spec.j, spec.k)
    return EntryScenario(noisy.element(spec.label), spec.j, spec.k, spec.g)


def _analytic_for(scenario: EntryScenario, spec: SweepSpec, n: int) -> float:
    """Closed-form variance in the scenario's estimand scale (NaN if d > 2)."""
    d = scenario.pi_l.shape[0]
    if d != 2:
        return float("nan")
    eta = float(np.trace(scenario.pi_l).real)
    if not 0 < eta <= 1:
        return float("nan")
    cos2 = float(scenario.pi_l[scenario.k, scenario.k].real) / eta
    theta = math.acos(math.sqrt(min(max(cos2, 0.0), 1.0)))
    law = analytic_variance(theta, scenario.g, eta, n)
    # the law is stated for the efficiency-normalized entry (scale = eta)
    return law * (eta / scenario.scale) ** 2


def variance_sweep(spec: SweepSpec) -> list[dict]:
    """Evaluate analytic, error-transfer and empirical variances on a grid.

    Returns one row per grid point with keys: axis_value, var_analytic,
    var_transfer, var_empirical, mean_re, mean_im, trials, seed.  All three
    variances are expressed in the scenario's estimand scale.  With
    trials = 0 the empirical columns are NaN.
    """
    seeds = _child_seeds(spec.shot.seed, len(spec.grid))
    rows = []
    for i, value in enumerate(spec.grid):
        scenario = _scenario_at(spec, float(value))
        tables = scenario.exact_tables()
        coeffs = scenario.coeffs()
        n = spec.shot.n_per_setting
        vr, vi = error_transfer_variance(tables, coeffs, n, scenario.scale)
        row = {
            "axis_value": float(value),
            "var_analytic": _analytic_for(scenario, spec, n),
            "var_transfer": vr + vi,
            "var_empirical": float("nan"),
            "mean_re": float("nan"),
            "mean_im": float("nan"),
            "trials": spec.trials,
            "seed": int(seeds[i]),
        }
        if spec.trials > 0:
            shot = replace(spec.shot, seed=int(seeds[i]))
            summary = run_trials(scenario, shot, spec.trials)
            row["var_empirical"] = summary.sample_var_re + summary.sample_var_im
            row["mean_re"] = summary.mean.real
            row["mean_im"] = summary.mean.imag
        rows.append(row)
    return rows


@dataclass(frozen=True)
class RefinementStudy:
    """Raw vs sum-rule-refined statistics for every outcome of a POVM."""

    labels: tuple
    raw: dict          # label -> EntryEstimate (predicted variances)
    refined: dict      # label -> EntryEstimate
    raw_sample_var: dict      # label -> (var_re, var_im) over trials
    refined_sample_var: dict  # label -> (var_re, var_im) over trials
    trials: int


def refinement_trials(
    povm: Povm, j: int, k: int, g: float, shot: ShotModel, trials: int
) -> RefinementStudy:
    """Monte Carlo study of the completeness-refinement gain.

    Every outcome is sampled in its own independent post-selection channel;
    per trial, each entry estimate is refined against the complement built
    from the other outcomes with inverse-variance weights fixed at the
    predicted (exact-table) variances.
    """
    labels = list(povm.labels)
    coeffs = rt_coefficients(povm.dim, g)
    seeds = _child_seeds(shot.seed, len(labels))
    n = shot.n_per_setting

    raw_est = {}
    arrays_re, arrays_im = {}, {}
    for i, lab in enumerate(labels):
        scenario = EntryScenario(povm.element(lab), j, k, g)
        tables = scenario.exact_tables()
        vr, vi = error_transfer_variance(tables, coeffs, n)
        raw_est[lab] = EntryEstimate(scenario.exact_value(), vr, vi, n, "exact")
        re, im = trial_estimate_arrays(scenario, replace(shot, seed=int(seeds[i])), trials)
        arrays_re[lab], arrays_im[lab] = re, im

    refined_pred = completeness_refine([raw_est[lab] for lab in labels])
    refined_est = dict(zip(labels, refined_pred))

    raw_sv, ref_sv = {}, {}
    sum_re = sum(arrays_re.values())
    sum_im = sum(arrays_im.values())
    for lab in labels:
        own_re, own_im = arrays_re[lab], arrays_im[lab]
        comp_re = -(sum_re - own_re)
        comp_im = -(sum_im - own_im)
        raw_sv[lab] = (float(own_re.var(ddof=1)), float(own_im.var(ddof=1)))
        ref_re = _combine(own_re, comp_re, raw_est, labels, lab, "var_re")
        ref_im = _combine(own_im, comp_im, raw_est, labels, lab, "var_im")
        ref_sv[lab] = (float(ref_re.var(ddof=1)), float(ref_im.var(ddof=1)))
    return RefinementStudy(
        tuple(labels), raw_est, refined_est, raw_sv, ref_sv, trials
    )


def _combine(own, comp, raw_est, labels, lab, attr):
    own_var = getattr(raw_est[lab], attr)
    total = sum(getattr(raw_est[u], attr) for u in labels)
    comp_var = total - own_var
    w = (1 / own_var) / (1 / own_var + 1 / comp_var)
    return w * own + (1 - w) * comp
