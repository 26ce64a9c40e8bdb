"""Command-line scenario runner.

Subcommands::

    povmdt oracle-check   --config cfg.yaml [--out DIR]
    povmdt scan           --config cfg.yaml --out DIR [--refine]
    povmdt variance-sweep --config cfg.yaml --out DIR
    povmdt calibrate      --config cfg.yaml --out DIR [--refine]

Common flags: ``--seed`` overrides the config seed, ``--format csv|json``
selects the artifact format.  Exit codes: 0 success, 1 tolerance or
assertion failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .config import ConfigError, ScenarioConfig, parse_config
from .estimator import (
    estimate_record,
    EntryEstimate,
    completeness_refine,
    error_transfer_variance,
    estimate_from_tables,
    rt_coefficients,
    tables_to_flat,
)
from .montecarlo import ShotModel, sample_counts
from .noise import apply_dephasing, apply_phase_rotation, calibrate_phase, calibrate_xi, wavepacket_overlap
from .povm import matrix_entry_oracle
from .protocol import CouplingConfig, exact_entry_tables, prepare_entry_state, exact_rt_expectation
from ._kernels import effective_backend
from .reports import (
    run_metadata,
    write_csv,
    write_json_report,
    write_meter_distribution_csv,
)


class ToleranceFailure(RuntimeError):
    """A requested numerical check failed (CLI exit code 1)."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povmdt",
        description="Direct characterization of POVM matrix entries: scenario runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("oracle-check", "exact pipeline vs ground-truth entries"),
        ("scan", "noise-evolution scan of an off-diagonal entry"),
        ("variance-sweep", "analytic / error-transfer / empirical variance curves"),
        ("calibrate", "simulated overlap and phase calibrations"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML scenario config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--refine", action="store_true",
                       help="also apply the completeness sum-rule refinement")
    return parser


def _entry_list(cfg: ScenarioConfig, povm) -> list[tuple[int, int, int]]:
    """Resolve the (label, j, k) entries a command operates on."""
    d = povm.dim
    if cfg.entry is None:
        return [(lab, j, k) for lab in povm.labels for j in range(d) for k in range(d) if j != k]
    j, k = cfg.entry["j"], cfg.entry["k"]
    if not (0 <= j < d and 0 <= k < d):
        raise ConfigError(f"entry: indices ({j}, {k}) out of range for dimension {d}")
    if cfg.entry["l"] == "all":
        return [(lab, j, k) for lab in povm.labels]
    lab = cfg.entry["l"]
    if lab not in povm.labels:
        raise ConfigError(f"entry.l: no outcome labelled {lab}; labels are {povm.labels}")
    return [(lab, j, k)]


def _out_dir(cfg: ScenarioConfig, args, required: bool = True) -> str | None:
    out = args.out or cfg.out_dir
    if out is None and required:
        raise ConfigError("an output directory is required (output.dir or --out)")
    return out


def _fmt(cfg: ScenarioConfig, args) -> str:
    return args.format or cfg.out_format


# --- oracle-check ---------------------------------------------------------------


def run_oracle_check(cfg: ScenarioConfig) -> tuple[list[dict], float, list[dict]]:
    """Exact-pipeline reconstruction vs the entry oracle for every entry."""
    povm = cfg.povm()
    coupling = CouplingConfig.symmetric(cfg.g)
    coeffs = rt_coefficients(povm.dim, cfg.g)
    rows, dists = [], []
    max_err = 0.0
    for lab, j, k in _entry_list(cfg, povm):
        truth = matrix_entry_oracle(povm, lab, j, k)
        tables = exact_entry_tables(povm.element(lab), j, k, coupling)
        est = estimate_from_tables(tables, coeffs)
        js = prepare_entry_state(povm.dim, j, k, coupling)
        rt = exact_rt_expectation(js, povm.element(lab), coupling)
        err = max(abs(est - truth), abs(rt - truth))
        max_err = max(max_err, err)
        rows.append(
            {
                "l": lab, "j": j, "k": k,
                "est_re": est.real, "est_im": est.imag,
                "true_re": truth.real, "true_im": truth.imag,
                "abs_err": err,
            }
        )
        dists.append({"l": lab, "tables": tables})
    return rows, max_err, dists


def cmd_oracle_check(cfg: ScenarioConfig, args) -> int:
    t0 = time.perf_counter()
    rows, max_err, dists = run_oracle_check(cfg)
    ok = max_err < cfg.tolerance
    elapsed = round(time.perf_counter() - t0, 6)
    out = _out_dir(cfg, args, required=False)
    if out is not None:
        meta = run_metadata("oracle-check", cfg.resolved_echo(), cfg.seed, backend="numpy")
        meta["max_abs_err"] = max_err
        meta["tolerance"] = cfg.tolerance
        if _fmt(cfg, args) == "json":
            # wall clock lives only in the JSON run report; CSV artifacts stay
            # byte-identical across reruns
            write_json_report(
                f"{out}/oracle_check.json",
                dict(meta, wall_clock_s=elapsed),
                {"entries": rows, "passed": ok},
            )
        else:
            write_csv(
                f"{out}/oracle_check.csv",
                ["l", "j", "k", "est_re", "est_im", "true_re", "true_im", "abs_err"],
                rows, meta,
            )
        write_meter_distribution_csv(f"{out}/distributions.csv", dists, meta)
    print(f"oracle-check: {len(rows)} entries, max |error| = {max_err:.3e} "
          f"(tolerance {cfg.tolerance:.1e}) in {elapsed:.2f} s -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# --- scan -----------------------------------------------------------------------


def run_scan(cfg: ScenarioConfig, refine: bool = False) -> list[dict]:
    """Noise-evolution scan: sampled entry estimates along a noise grid.

    One noisy realization per (grid point, outcome) at the configured shot
    model, with predicted error-transfer variances and the transformed
    ground truth.  With ``refine`` the sum-rule refinement is applied
    across outcomes at each grid point.
    """
    if cfg.noise is None:
        raise ConfigError("scan requires a noise block")
    if cfg.entry is None:
        raise ConfigError("scan requires an entry block (one (j, k) slot)")
    povm = cfg.povm()
    shot = cfg.shot_model()
    entries = _entry_list(cfg, povm)
    j, k = entries[0][1], entries[0][2]
    if any((jj, kk) != (j, k) for _, jj, kk in entries):
        raise ConfigError("scan: all outcomes must target the same (j, k) slot")
    labels = [lab for lab, _, _ in entries]
    if refine:
        labels = list(povm.labels)  # the sum rule needs every outcome

    kind = cfg.noise["type"]
    if kind == "dephasing":
        if "xi" in cfg.noise:
            grid = [("xi", x, x) for x in cfg.noise["xi"]]
        else:
            grid = [
                ("epsilon", e, wavepacket_overlap(e, cfg.noise["coherence_length"]))
                for e in cfg.noise["epsilon"]
            ]
    else:
        grid = [("phi", p, p) for p in cfg.noise["phi"]]

    coupling = CouplingConfig.symmetric(cfg.g)
    coeffs = rt_coefficients(povm.dim, cfg.g)
    seeds = np.random.SeedSequence(shot.seed).generate_state(len(grid) * len(labels))
    rows = []
    for gi, (axis, axis_value, param) in enumerate(grid):
        noisy = (
            apply_dephasing(povm, param, j, k)
            if kind == "dephasing"
            else apply_phase_rotation(povm, param, j, k)
        )
        point_estimates = {}
        for li, lab in enumerate(labels):
            elem = noisy.element(lab)
            truth = complex(elem[j, k])
            tables = exact_entry_tables(elem, j, k, coupling)
            var_re, var_im = error_transfer_variance(tables, coeffs, shot.n_per_setting)
            sampled = sample_counts(tables, ShotModel(
                shot.n_per_setting, shot.statistics, int(seeds[gi * len(labels) + li])
            ))
            est = estimate_from_tables(sampled, coeffs)
            point_estimates[lab] = EntryEstimate(est, var_re, var_im, shot.n_per_setting, "sampled")
            rows.append(
                {
                    "l": lab, "j": j, "k": k, "axis": axis, "axis_value": axis_value,
                    "est_re": est.real, "est_im": est.imag,
                    "var_re": var_re, "var_im": var_im,
                    "true_re": truth.real, "true_im": truth.imag,
                    "n": shot.n_per_setting, "seed": int(seeds[gi * len(labels) + li]),
                    "method": "sampled",
                }
            )
        if refine:
            refined = completeness_refine([point_estimates[lab] for lab in labels])
            for lab, est in zip(labels, refined):
                truth = complex(noisy.element(lab)[j, k])
                rows.append(
                    {
                        "l": lab, "j": j, "k": k, "axis": axis, "axis_value": axis_value,
                        "est_re": est.value.real, "est_im": est.value.imag,
                        "var_re": est.var_re, "var_im": est.var_im,
                        "true_re": truth.real, "true_im": truth.imag,
                        "n": shot.n_per_setting, "seed": -1,
                        "method": "refined",
                    }
                )
    return rows


SCAN_COLUMNS = [
    "l", "j", "k", "axis", "axis_value", "est_re", "est_im", "var_re", "var_im",
    "true_re", "true_im", "n", "seed", "method",
]


def cmd_scan(cfg: ScenarioConfig, args) -> int:
    t0 = time.perf_counter()
    rows = run_scan(cfg, refine=args.refine)
    elapsed = round(time.perf_counter() - t0, 6)
    out = _out_dir(cfg, args)
    meta = run_metadata("scan", cfg.resolved_echo(), cfg.seed, backend="numpy")
    if _fmt(cfg, args) == "json":
        records = [
            estimate_record(
                EntryEstimate(complex(r["est_re"], r["est_im"]), r["var_re"], r["var_im"],
                              r["n"], r["method"]),
                r["l"], r["j"], r["k"], cfg.g, r["seed"],
            )
            for r in rows
        ]
        write_json_report(
            f"{out}/scan.json", dict(meta, wall_clock_s=elapsed),
            {"rows": rows, "estimates": records},
        )
    else:
        write_csv(f"{out}/scan.csv", SCAN_COLUMNS, rows, meta)
    print(f"scan: wrote {len(rows)} rows to {out} in {elapsed:.2f} s")
    return 0


# --- variance-sweep ---------------------------------------------------------------


SWEEP_COLUMNS = [
    "axis_value", "var_analytic", "var_transfer", "var_empirical",
    "mean_re", "mean_im", "trials", "seed",
]


def run_variance_sweep(cfg: ScenarioConfig) -> list[dict]:
    from .montecarlo import SweepSpec, variance_sweep

    if cfg.sweep is None:
        raise ConfigError("variance-sweep requires a sweep block")
    sw = cfg.sweep
    kwargs = dict(
        axis=sw["axis"], grid=tuple(sw["grid"]), trials=sw["trials"],
        shot=cfg.shot_model(), theta=sw["theta"], eta=sw["eta"],
        e01=sw["e01"], g=sw["g"],
    )
    if sw["axis"] in ("xi", "phi"):
        if cfg.entry is None or cfg.entry["l"] == "all":
            raise ConfigError("sweep over xi/phi needs an entry block with a single l")
        kwargs.update(
            povm=cfg.povm(), label=cfg.entry["l"], j=cfg.entry["j"], k=cfg.entry["k"],
        )
    try:
        spec = SweepSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None
    return variance_sweep(spec)


def cmd_variance_sweep(cfg: ScenarioConfig, args) -> int:
    t0 = time.perf_counter()
    rows = run_variance_sweep(cfg)
    elapsed = round(time.perf_counter() - t0, 6)
    out = _out_dir(cfg, args)
    meta = run_metadata(
        "variance-sweep", cfg.resolved_echo(), cfg.seed,
        backend=effective_backend(cfg.shot_model().statistics),
    )
    if _fmt(cfg, args) == "json":
        write_json_report(
            f"{out}/variance_sweep.json", dict(meta, wall_clock_s=elapsed), {"rows": rows}
        )
    else:
        write_csv(f"{out}/variance_sweep.csv", SWEEP_COLUMNS, rows, meta)
    print(f"variance-sweep: wrote {len(rows)} rows to {out} in {elapsed:.2f} s")
    return 0


# --- calibrate --------------------------------------------------------------------


def run_calibrate(cfg: ScenarioConfig) -> dict:
    """Simulated calibrations: overlap grid and phase anchor inputs."""
    if cfg.calibration is None and cfg.noise is None:
        raise ConfigError("calibrate requires a calibration (or noise) block")
    calib = cfg.calibration or {}
    samples = calib.get("samples", 100000)

    xi_points = []
    if "xi_grid" in calib:
        xi_points = [(x, x) for x in calib["xi_grid"]]
    elif "epsilon" in calib:
        xi_points = [
            (e, wavepacket_overlap(e, calib["coherence_length"])) for e in calib["epsilon"]
        ]
    elif cfg.noise is not None and cfg.noise["type"] == "dephasing":
        if "xi" in cfg.noise:
            xi_points = [(x, x) for x in cfg.noise["xi"]]
        else:
            xi_points = [
                (e, wavepacket_overlap(e, cfg.noise["coherence_length"]))
                for e in cfg.noise["epsilon"]
            ]

    seeds = np.random.SeedSequence(cfg.seed).generate_state(max(len(xi_points), 1))
    xi_rows = [
        {
            "axis_value": ax, "xi_true": xi,
            "xi_hat": calibrate_xi(xi, samples, int(seeds[i])),
            "samples": samples, "seed": int(seeds[i]),
        }
        for i, (ax, xi) in enumerate(xi_points)
    ]

    phase_rows = []
    for delta in calib.get("phase_inputs", []):
        phase_rows.append(
            {
                "p_h_minus_p_v": delta,
                "phi_hat": calibrate_phase((1 + delta) / 2, (1 - delta) / 2),
            }
        )
    return {"xi": xi_rows, "phase": phase_rows, "samples": samples}


def run_refinement_demo(cfg: ScenarioConfig) -> list[dict]:
    """Per-outcome raw vs refined predicted variances for the scenario POVM."""
    povm = cfg.povm()
    shot = cfg.shot_model()
    entries = _entry_list(cfg, povm)
    j, k = entries[0][1], entries[0][2]
    coupling = CouplingConfig.symmetric(cfg.g)
    coeffs = rt_coefficients(povm.dim, cfg.g)
    raw = []
    for lab in povm.labels:
        tables = exact_entry_tables(povm.element(lab), j, k, coupling)
        vr, vi = error_transfer_variance(tables, coeffs, shot.n_per_setting)
        raw.append(EntryEstimate(matrix_entry_oracle(povm, lab, j, k), vr, vi,
                                 shot.n_per_setting, "exact"))
    refined = completeness_refine(raw)
    rows = []
    for lab, r, f in zip(povm.labels, raw, refined):
        rows.append(
            {
                "l": lab, "j": j, "k": k,
                "var_raw": r.total_variance, "var_refined": f.total_variance,
                "n": shot.n_per_setting,
            }
        )
    return rows


def cmd_calibrate(cfg: ScenarioConfig, args) -> int:
    t0 = time.perf_counter()
    results = run_calibrate(cfg)
    out = _out_dir(cfg, args)
    meta = run_metadata("calibrate", cfg.resolved_echo(), cfg.seed, backend="numpy")
    refine_rows = run_refinement_demo(cfg) if args.refine else None
    elapsed = round(time.perf_counter() - t0, 6)
    if _fmt(cfg, args) == "json":
        payload = dict(results)
        if refine_rows is not None:
            payload["refinement"] = refine_rows
        write_json_report(f"{out}/calibrate.json", dict(meta, wall_clock_s=elapsed), payload)
    else:
        if results["xi"]:
            write_csv(f"{out}/calibration_xi.csv",
                      ["axis_value", "xi_true", "xi_hat", "samples", "seed"],
                      results["xi"], meta)
        if results["phase"]:
            write_csv(f"{out}/calibration_phase.csv",
                      ["p_h_minus_p_v", "phi_hat"], results["phase"], meta)
        if refine_rows is not None:
            write_csv(f"{out}/refinement.csv",
                      ["l", "j", "k", "var_raw", "var_refined", "n"],
                      refine_rows, meta)
    print(f"calibrate: {len(results['xi'])} overlap points, "
          f"{len(results['phase'])} phase points -> {out}")
    return 0


COMMANDS = {
    "oracle-check": cmd_oracle_check,
    "scan": cmd_scan,
    "variance-sweep": cmd_variance_sweep,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, seed_override=args.seed)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ToleranceFailure as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
