"""Experiment config files (TOML).

Top-level keys::

    scenario = "sg-basic"          # one of the registered ids; omit for a wavepacket run
    mode = "unitary"               # unitary | collapse            (default unitary)
    trials = 10000                 # positive integer               (default 10000)
    seed = 7                       # default: $ENSEMBLEQ_SEED, else 0
    intermediate_readout = false   # sg-recombine only
    workers = 1
    output = "result.json"         # default: stdout
    format = "json"                # json | csv                      (default json)

    [wavepacket]
    sigma0 = 1.0                   # required
    mass = 1.0
    hbar = 1.0
    p0 = 0.0
    times = [0.0, 1.0, 2.0, 5.0]   # default [0.0]
    time_unit = "tau0"             # tau0 | absolute                 (default absolute)
    spectrum = false               # csv: write f(k) instead of psi(x)

    [wavepacket.grid]              # optional; every key may be left out
    x_min = -64.0                  # x_min/x_max: both or neither (auto-sized)
    x_max = 64.0
    n_points = 2048                # power of two >= 64

Exactly one of ``scenario`` and ``[wavepacket]`` must be present.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ensembleq.scenarios import SCENARIO_IDS
from ensembleq.wavepacket import GridSpec, PacketParams, default_grid

SEED_ENV = "ENSEMBLEQ_SEED"
DEFAULT_TRIALS = 10_000
MODES = ("unitary", "collapse")
FORMATS = ("json", "csv")


class ConfigSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None, column: int | None):
        super().__init__(f"config syntax error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ConfigError(ValueError):
    """Every validation problem found, not just the first."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class WavepacketConfig:
    params: PacketParams
    times: tuple[float, ...]
    grid: GridSpec
    spectrum: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str | None = None
    mode: str = "unitary"
    n_trials: int = DEFAULT_TRIALS
    master_seed: int = 0
    intermediate_readout: bool = False
    workers: int = 1
    wavepacket: WavepacketConfig | None = None
    output: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict, compare=False)


_TOP_KEYS = {"scenario", "mode", "trials", "seed", "intermediate_readout", "workers",
             "output", "format", "wavepacket"}
_WP_KEYS = {"sigma0", "mass", "hbar", "p0", "times", "time_unit", "spectrum", "grid"}
_GRID_KEYS = {"x_min", "x_max", "n_points"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _seed_default(env: Mapping[str, str], errors: list[str]) -> int:
    raw = env.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw)
    except ValueError:
        errors.append(f"{SEED_ENV}={raw!r} is not an integer")
        return 0
    if seed < 0:
        errors.append(f"{SEED_ENV} must be non-negative")
    return seed


def _validate_wavepacket(doc: Any, errors: list[str]) -> WavepacketConfig | None:
    if not isinstance(doc, dict):
        errors.append("wavepacket: must be a table")
        return None
    for key in sorted(set(doc) - _WP_KEYS):
        errors.append(f"wavepacket.{key}: unknown key")
    values = {}
    for key, default in (("sigma0", None), ("mass", 1.0), ("hbar", 1.0), ("p0", 0.0)):
        v = doc.get(key, default)
        if v is None:
            errors.append(f"wavepacket.{key}: required")
        elif not _is_number(v):
            errors.append(f"wavepacket.{key}: must be a number, got {v!r}")
        elif key != "p0" and not v > 0:
            errors.append(f"wavepacket.{key}: must be positive, got {v!r}")
        else:
            values[key] = float(v)
    unit = doc.get("time_unit", "absolute")
    if unit not in ("absolute", "tau0"):
        errors.append(f"wavepacket.time_unit: must be 'absolute' or 'tau0', got {unit!r}")
    times = doc.get("times", [0.0])
    if not isinstance(times, list) or not times or not all(_is_number(t) for t in times):
        errors.append("wavepacket.times: must be a non-empty list of numbers")
        times = None
    elif any(t < 0 for t in times):
        errors.append("wavepacket.times: times must be non-negative")
    spectrum = doc.get("spectrum", False)
    if not isinstance(spectrum, bool):
        errors.append("wavepacket.spectrum: must be true or false")
    grid_doc = doc.get("grid")
    n_errors = len(errors)
    if grid_doc is not None and not isinstance(grid_doc, dict):
        errors.append("wavepacket.grid: must be a table")
        grid_doc = None
    if grid_doc is not None:
        for key in sorted(set(grid_doc) - _GRID_KEYS):
            errors.append(f"wavepacket.grid.{key}: unknown key")
        if ("x_min" in grid_doc) != ("x_max" in grid_doc):
            errors.append("wavepacket.grid: give both x_min and x_max, or neither")
        for key in sorted(_GRID_KEYS & set(grid_doc)):
            ok = _is_int(grid_doc[key]) if key == "n_points" else _is_number(grid_doc[key])
            if not ok:
                errors.append(f"wavepacket.grid.{key}: must be a number, got {grid_doc[key]!r}")
    if len(errors) > n_errors or len(values) < 4 or times is None or unit not in ("absolute", "tau0"):
        return None
    params = PacketParams(values["sigma0"], values["mass"], values["hbar"], values["p0"])
    times = tuple(float(t) * (params.tau0 if unit == "tau0" else 1.0) for t in times)
    try:
        grid_doc = grid_doc or {}
        auto = default_grid(params, max(times), grid_doc.get("n_points"))
        grid = GridSpec(float(grid_doc.get("x_min", auto.x_min)),
                        float(grid_doc.get("x_max", auto.x_max)), auto.n_points)
        for t in times:
            grid.check_width(params.width(t), params.p0 / params.mass * t)
    except ValueError as exc:
        errors.append(f"wavepacket.grid: {exc}")
        return None
    return WavepacketConfig(params, times, grid, bool(spectrum))


def validate_config(doc: Mapping[str, Any], env: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Check a parsed document and fill defaults; raises ``ConfigError`` listing every problem."""
    env = os.environ if env is None else env
    errors: list[str] = []
    for key in sorted(set(doc) - _TOP_KEYS):
        errors.append(f"{key}: unknown key")

    scenario = doc.get("scenario")
    has_wp = "wavepacket" in doc
    if scenario is None and not has_wp:
        errors.append("scenario: required (or give a [wavepacket] table)")
    if scenario is not None and has_wp:
        errors.append("scenario: give either a scenario or a [wavepacket] table, not both")
    if scenario is not None and scenario not in SCENARIO_IDS:
        errors.append(f"scenario: unknown id {scenario!r}; registered ids: {', '.join(SCENARIO_IDS)}")

    mode = doc.get("mode", "unitary")
    if mode not in MODES:
        errors.append(f"mode: must be one of {', '.join(MODES)}, got {mode!r}")
    trials = doc.get("trials", DEFAULT_TRIALS)
    if not _is_int(trials) or trials < 1:
        errors.append(f"trials: must be a positive integer, got {trials!r}")
    seed = doc.get("seed")
    if seed is None:
        seed = _seed_default(env, errors)
    elif not _is_int(seed) or seed < 0:
        errors.append(f"seed: must be a non-negative integer, got {seed!r}")
    intermediate = doc.get("intermediate_readout", False)
    if not isinstance(intermediate, bool):
        errors.append("intermediate_readout: must be true or false")
    elif intermediate and scenario != "sg-recombine":
        errors.append("intermediate_readout: only defined for scenario sg-recombine")
    workers = doc.get("workers", 1)
    if not _is_int(workers) or workers < 1:
        errors.append(f"workers: must be a positive integer, got {workers!r}")
    output = doc.get("output")
    if output is not None and (not isinstance(output, str) or not output):
        errors.append("output: must be a non-empty path string")
    fmt = doc.get("format", "json")
    if fmt not in FORMATS:
        errors.append(f"format: must be one of {', '.join(FORMATS)}, got {fmt!r}")

    wavepacket = _validate_wavepacket(doc["wavepacket"], errors) if has_wp else None
    if wavepacket is not None and fmt == "csv" and len(wavepacket.times) != 1:
        errors.append("format: csv output needs exactly one wavepacket time")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        scenario=scenario,
        mode=mode,
        n_trials=trials,
        master_seed=seed,
        intermediate_readout=intermediate,
        workers=workers,
        wavepacket=wavepacket,
        output=output,
        format=fmt,
    )


def parse_config(text: str, env: Mapping[str, str] | None = None) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        message = getattr(exc, "msg", str(exc))
        raise ConfigSyntaxError(message, line, col) from None
    return validate_config(doc, env)
