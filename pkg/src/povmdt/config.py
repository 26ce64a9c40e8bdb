"""Scenario configuration: YAML schema, validation, resolution.

Configs are plain YAML with nested blocks.  Every angle is written in
units of pi (``g: 0.25`` means pi/4) to avoid decimal-pi transcription
slips.  Unknown keys are rejected everywhere; validation errors carry the
dotted path of the offending key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .montecarlo import ShotModel
from .povm import Povm, load_povm, make_sic_povm, povm_from_walk, random_povm

POVM_SOURCES = ("builtin:sic", "random", "file", "walk")
NOISE_TYPES = ("dephasing", "rotation")
SWEEP_AXES = ("g", "theta", "xi", "phi")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Configuration file is malformed or inconsistent (CLI exit code 2)."""


def _require(block: dict, path: str, allowed: dict) -> dict:
    """Validate a mapping against {key: required} and reject unknown keys."""
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(block).__name__}")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    missing = sorted(k for k, req in allowed.items() if req and k not in block)
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {missing}")
    return block


def _number(block: dict, path: str, key: str, default=None, integer=False):
    if key not in block:
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _angle(block: dict, path: str, key: str, default=None):
    """Angle in units of pi -> radians."""
    v = _number(block, path, key, default=None)
    if v is None:
        return default
    return v * math.pi


def _number_list(value, path: str, scale: float = 1.0) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}[{i}]: expected a number, got {v!r}")
        out.append(float(v) * scale)
    return out


@dataclass
class ScenarioConfig:
    """Validated, resolved configuration for one CLI invocation."""

    raw: dict
    seed: int
    povm_block: dict | None = None
    entry: dict | None = None
    g: float = math.pi / 4
    shots: ShotModel | None = None
    noise: dict | None = None
    sweep: dict | None = None
    calibration: dict | None = None
    out_dir: str | None = None
    out_format: str = "csv"
    tolerance: float = 1e-9
    _povm_cache: Povm | None = field(default=None, repr=False)

    def resolved_echo(self) -> str:
        """Canonical JSON echo of the raw config plus the effective seed."""
        echo = dict(self.raw)
        echo["seed"] = self.seed
        return json.dumps(echo, sort_keys=True, default=str)

    def povm(self) -> Povm:
        if self.povm_block is None:
            raise ConfigError("povm: block is required for this command")
        if self._povm_cache is None:
            self._povm_cache = _build_povm(self.povm_block, self.seed)
        return self._povm_cache

    def shot_model(self, seed: int | None = None) -> ShotModel:
        if self.shots is None:
            raise ConfigError("shots: block is required for this command")
        if seed is None:
            return self.shots
        return ShotModel(self.shots.n_per_setting, self.shots.statistics, seed)


def _build_povm(block: dict, global_seed: int) -> Povm:
    source = block["source"]
    if source == "builtin:sic":
        return make_sic_povm()
    if source == "random":
        return random_povm(block["d"], block["outcomes"], block.get("seed", global_seed))
    if source == "file":
        try:
            return load_povm(block["path"], check_complete=False)
        except FileNotFoundError:
            raise ConfigError(f"povm.path: file not found: {block['path']}") from None
    if source == "walk":
        try:
            with open(block["unitary"]) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"povm.unitary: file not found: {block['unitary']}") from None
        for key in ("n_positions", "coin_dim", "matrix"):
            if key not in data:
                raise ConfigError(f"walk unitary file: missing key {key!r}")
        u = np.array([[complex(re, im) for re, im in row] for row in data["matrix"]])
        return povm_from_walk(u, int(data["n_positions"]), int(data["coin_dim"]))
    raise ConfigError(f"povm.source: unhandled source {source!r}")  # pragma: no cover


def parse_config(path: str, seed_override: int | None = None) -> ScenarioConfig:
    """Load, validate and resolve a YAML config file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    _require(
        raw,
        "config",
        {
            "seed": False, "povm": False, "entry": False, "coupling": False,
            "shots": False, "noise": False, "sweep": False, "calibration": False,
            "output": False, "tolerance": False,
        },
    )

    seed = seed_override
    if seed is None:
        seed = _number(raw, "config", "seed", default=0, integer=True)

    cfg = ScenarioConfig(raw=raw, seed=int(seed))

    if "povm" in raw:
        block = _require(
            raw["povm"], "povm",
            {"source": True, "d": False, "outcomes": False, "seed": False,
             "path": False, "unitary": False},
        )
        source = block.get("source")
        if source not in POVM_SOURCES:
            raise ConfigError(f"povm.source: expected one of {POVM_SOURCES}, got {source!r}")
        if source == "random":
            for key in ("d", "outcomes"):
                if _number(block, "povm", key, integer=True) is None:
                    raise ConfigError(f"povm.{key}: required for source 'random'")
        if source == "file" and not isinstance(block.get("path"), str):
            raise ConfigError("povm.path: required (string) for source 'file'")
        if source == "walk" and not isinstance(block.get("unitary"), str):
            raise ConfigError("povm.unitary: required (string) for source 'walk'")
        cfg.povm_block = block

    if "entry" in raw:
        block = _require(raw["entry"], "entry", {"l": False, "j": True, "k": True})
        j = _number(block, "entry", "j", integer=True)
        k = _number(block, "entry", "k", integer=True)
        l = block.get("l", "all")
        if l != "all":
            l = _number(block, "entry", "l", integer=True)
        if j == k:
            raise ConfigError("entry: j and k must differ (off-diagonal entry)")
        cfg.entry = {"l": l, "j": j, "k": k}

    if "coupling" in raw:
        block = _require(raw["coupling"], "coupling", {"g": True})
        g = _angle(block, "coupling", "g")
        if not 0 < g < math.pi / 2:
            raise ConfigError(
                f"coupling.g: {block['g']!r} (units of pi) must lie strictly in (0, 0.5)"
            )
        cfg.g = g

    if "shots" in raw:
        block = _require(
            raw["shots"], "shots",
            {"n_per_setting": True, "statistics": False, "seed": False},
        )
        stats = block.get("statistics", "poisson")
        if stats not in ("poisson", "multinomial"):
            raise ConfigError(
                f"shots.statistics: expected 'poisson' or 'multinomial', got {stats!r}"
            )
        try:
            cfg.shots = ShotModel(
                _number(block, "shots", "n_per_setting", integer=True),
                stats,
                block.get("seed", cfg.seed),
            )
        except ValueError as exc:
            raise ConfigError(f"shots: {exc}") from None

    if "noise" in raw:
        block = _require(
            raw["noise"], "noise",
            {"type": True, "xi": False, "epsilon": False,
             "coherence_length": False, "phi": False},
        )
        kind = block.get("type")
        if kind not in NOISE_TYPES:
            raise ConfigError(f"noise.type: expected one of {NOISE_TYPES}, got {kind!r}")
        noise = {"type": kind}
        if kind == "dephasing":
            if "xi" in block:
                noise["xi"] = _number_list(block["xi"], "noise.xi")
                bad = [x for x in noise["xi"] if not 0 <= x <= 1]
                if bad:
                    raise ConfigError(f"noise.xi: values outside [0, 1]: {bad}")
            elif "epsilon" in block:
                length = _number(block, "noise", "coherence_length")
                if length is None or length <= 0:
                    raise ConfigError(
                        "noise.coherence_length: required positive number with epsilon grid"
                    )
                noise["epsilon"] = _number_list(block["epsilon"], "noise.epsilon")
                noise["coherence_length"] = length
            else:
                raise ConfigError("noise: dephasing needs either an xi grid or an epsilon grid")
        else:
            if "phi" not in block:
                raise ConfigError("noise: rotation needs a phi grid (units of pi)")
            noise["phi"] = _number_list(block["phi"], "noise.phi", scale=math.pi)
        cfg.noise = noise

    if "sweep" in raw:
        block = _require(
            raw["sweep"], "sweep",
            {"axis": True, "grid": True, "trials": False, "theta": False,
             "eta": False, "e01": False, "g": False},
        )
        axis = block.get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: expected one of {SWEEP_AXES}, got {axis!r}")
        angle_scale = math.pi if axis in ("g", "theta", "phi") else 1.0
        sweep = {
            "axis": axis,
            "grid": _number_list(block["grid"], "sweep.grid", scale=angle_scale),
            "trials": _number(block, "sweep", "trials", default=10000, integer=True),
            "theta": _angle(block, "sweep", "theta", default=0.0),
            "eta": _number(block, "sweep", "eta", default=0.5),
            "g": _angle(block, "sweep", "g", default=cfg.g),
        }
        e01 = block.get("e01", [0.0, 0.0])
        if not (isinstance(e01, (list, tuple)) and len(e01) == 2):
            raise ConfigError("sweep.e01: expected [re, im]")
        sweep["e01"] = complex(float(e01[0]), float(e01[1]))
        cfg.sweep = sweep

    if "calibration" in raw:
        block = _require(
            raw["calibration"], "calibration",
            {"xi_grid": False, "samples": False, "phase_inputs": False,
             "epsilon": False, "coherence_length": False},
        )
        calib = {
            "samples": _number(block, "calibration", "samples", default=100000, integer=True)
        }
        if "xi_grid" in block:
            calib["xi_grid"] = _number_list(block["xi_grid"], "calibration.xi_grid")
        if "epsilon" in block:
            length = _number(block, "calibration", "coherence_length")
            if length is None or length <= 0:
                raise ConfigError(
                    "calibration.coherence_length: required positive number with epsilon grid"
                )
            calib["epsilon"] = _number_list(block["epsilon"], "calibration.epsilon")
            calib["coherence_length"] = length
        if "phase_inputs" in block:
            calib["phase_inputs"] = _number_list(block["phase_inputs"], "calibration.phase_inputs")
        cfg.calibration = calib

    if "output" in raw:
        block = _require(raw["output"], "output", {"dir": False, "format": False})
        if "dir" in block:
            if not isinstance(block["dir"], str):
                raise ConfigError("output.dir: expected a string path")
            cfg.out_dir = block["dir"]
        fmt = block.get("format", "csv")
        if fmt not in FORMATS:
            raise ConfigError(f"output.format: expected one of {FORMATS}, got {fmt!r}")
        cfg.out_format = fmt

    if "tolerance" in raw:
        tol = _number(raw, "config", "tolerance")
        if tol is None or tol <= 0:
            raise ConfigError(f"tolerance: expected a positive number, got {raw['tolerance']!r}")
        cfg.tolerance = tol

    return cfg
