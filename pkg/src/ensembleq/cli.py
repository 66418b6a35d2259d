"""Command-line front end.

Subcommands: ``list-scenarios``, ``run``, ``compare``, ``wavepacket``.
Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 validation error.
Results go to ``--out`` (written only on success) or to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from datetime import datetime, timezone

from ensembleq import __version__
from ensembleq.config import (
    FORMATS,
    MODES,
    ConfigError,
    ConfigSyntaxError,
    ExperimentConfig,
    WavepacketConfig,
    parse_config,
    validate_config,
)
from ensembleq.ensemble import compare_modes, sample_outcomes
from ensembleq.scenarios import SCENARIO_IDS, get_scenario
from ensembleq.wavepacket import (
    fourier_decompose,
    gaussian_packet,
    position_stats,
    to_csv,
    velocity_stats,
)

SCHEMA = "ensembleq.result/1"

EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION = 1, 2, 3


def _envelope(kind: str, timestamp: bool) -> dict:
    doc = {"schema": SCHEMA, "kind": kind}
    if timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return doc


def run_document(cfg: ExperimentConfig, timestamp: bool = True) -> dict:
    batch = sample_outcomes(cfg.scenario, cfg.mode, cfg.n_trials, cfg.master_seed,
                            workers=cfg.workers, intermediate_readout=cfg.intermediate_readout)
    stats = batch.stats()
    doc = _envelope("run", timestamp)
    doc.update(
        scenario=cfg.scenario,
        intermediate_readout=cfg.intermediate_readout,
        mode=cfg.mode,
        n=cfg.n_trials,
        seed=batch.seed,
        readouts=list(batch.tree.readouts),
        counts=stats.counts,
        frequencies=stats.frequencies,
        stderr=stats.stderr,
        exact=batch.tree.marginals(),
        divergence=None,
    )
    return doc


def run_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("readout", "outcome", "count", "frequency", "stderr", "exact"))
    for readout in doc["readouts"]:
        for outcome, count in doc["counts"][readout].items():
            writer.writerow((readout, outcome, count, repr(doc["frequencies"][readout][outcome]),
                             repr(doc["stderr"][readout][outcome]), repr(doc["exact"][readout][outcome])))
    return buf.getvalue()


def compare_document(cfg: ExperimentConfig, timestamp: bool = True) -> dict:
    comparison = compare_modes(cfg.scenario, cfg.n_trials, cfg.master_seed, workers=cfg.workers,
                               intermediate_readout=cfg.intermediate_readout)
    doc = _envelope("compare", timestamp)
    doc.update(comparison.to_dict())
    return doc


def wavepacket_document(wp: WavepacketConfig, timestamp: bool = True) -> dict:
    params = wp.params
    rows = []
    for t in wp.times:
        packet = gaussian_packet(params, t, wp.grid)
        mean, std, norm = position_stats(packet)
        rows.append({"t": t, "t_over_tau0": t / params.tau0, "position_mean": mean,
                     "position_std": std, "expected_std": params.width(t), "norm": norm})
    v_mean, v_std = velocity_stats(fourier_decompose(gaussian_packet(params, 0.0, wp.grid)))
    doc = _envelope("wavepacket", timestamp)
    doc.update(
        params={"sigma0": params.sigma0, "mass": params.mass, "hbar": params.hbar, "p0": params.p0},
        tau0=params.tau0,
        grid={"x_min": wp.grid.x_min, "x_max": wp.grid.x_max, "n_points": wp.grid.n_points},
        times=rows,
        velocity={
            "mean": v_mean,
            "std": v_std,
            "std_born": params.velocity_std,
            "std_as_printed": params.velocity_std_as_printed,
            "discrepancy_flag": not math.isclose(v_std, params.velocity_std_as_printed, rel_tol=1e-6),
        },
    )
    return doc


def wavepacket_csv(wp: WavepacketConfig) -> str:
    packet = gaussian_packet(wp.params, wp.times[0], wp.grid)
    return to_csv(fourier_decompose(packet) if wp.spectrum else packet)


def render(cfg: ExperimentConfig, command: str, timestamp: bool) -> str:
    if cfg.wavepacket is not None:
        if cfg.format == "csv":
            return wavepacket_csv(cfg.wavepacket)
        doc = wavepacket_document(cfg.wavepacket, timestamp)
    elif command == "compare":
        if cfg.format == "csv":
            raise ConfigError(["format: compare output is json only"])
        doc = compare_document(cfg, timestamp)
    else:
        doc = run_document(cfg, timestamp)
        if cfg.format == "csv":
            return run_csv(doc)
    return json.dumps(doc, indent=2) + "\n"


def write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ensembleq-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_TIME_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*(tau0?)?\s*$")


def _parse_time(text: str) -> tuple[float, bool]:
    """``"2"`` -> (2.0, absolute); ``"1tau0"`` -> (1.0, in units of tau0)."""
    m = _TIME_RE.match(text)
    if not m:
        raise ValueError(f"time {text!r}: expected a number, optionally suffixed with 'tau0'")
    return float(m.group(1)), m.group(2) is not None


def _inline_doc(args: argparse.Namespace) -> dict:
    doc = {}
    for key, attr in (("scenario", "scenario"), ("mode", "mode"), ("trials", "trials"),
                      ("seed", "seed"), ("workers", "workers"), ("output", "out"), ("format", "format")):
        value = getattr(args, attr, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "intermediate_readout", False):
        doc["intermediate_readout"] = True
    return doc


def _wavepacket_doc(args: argparse.Namespace) -> dict:
    times, units = [], set()
    for raw in args.time or ["0"]:
        value, in_tau = _parse_time(raw)
        times.append(value)
        if value != 0:
            units.add(in_tau)
    if len(units) > 1:
        raise ConfigError(["--time: do not mix absolute times and tau0 multiples"])
    wp = {"sigma0": args.sigma0, "mass": args.mass, "hbar": args.hbar, "p0": args.p0,
          "times": times, "time_unit": "tau0" if units == {True} else "absolute",
          "spectrum": args.spectrum}
    grid = {}
    if args.x_max is not None:
        grid.update(x_min=-args.x_max if args.x_min is None else args.x_min, x_max=args.x_max)
    elif args.x_min is not None:
        raise ConfigError(["--x-min: needs --x-max"])
    if args.grid_points is not None:
        grid["n_points"] = args.grid_points
    if grid:
        wp["grid"] = grid
    doc = {"wavepacket": wp, "format": args.format or "csv"}
    if args.out is not None:
        doc["output"] = args.out
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ensembleq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-scenarios", help="print the registered scenario ids")

    def trial_flags(p, with_mode: bool):
        p.add_argument("--scenario", help=f"one of: {', '.join(SCENARIO_IDS)}")
        if with_mode:
            p.add_argument("--mode", help=f"one of: {', '.join(MODES)}")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help="master seed (fallback: $ENSEMBLEQ_SEED, then 0)")
        p.add_argument("--workers", type=int)
        p.add_argument("--intermediate-readout", action="store_true",
                       help="sg-recombine: read the path between split and recombine")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")

    run = sub.add_parser("run", help="sample a scenario")
    run.add_argument("--config", help="TOML experiment config")
    trial_flags(run, with_mode=True)
    run.add_argument("--format", help=f"one of: {', '.join(FORMATS)}")

    cmp_ = sub.add_parser("compare", help="contrast unitary and collapse modes")
    cmp_.add_argument("--config", help="TOML experiment config")
    trial_flags(cmp_, with_mode=False)

    wave = sub.add_parser("wavepacket", help="Gaussian packet curve and spreading statistics")
    wave.add_argument("--sigma0", type=float, required=True)
    wave.add_argument("--mass", type=float, default=1.0)
    wave.add_argument("--hbar", type=float, default=1.0)
    wave.add_argument("--p0", type=float, default=0.0)
    wave.add_argument("--time", action="append",
                      help="evaluation time, absolute or as a tau0 multiple like '1tau0'; repeatable")
    wave.add_argument("--grid-points", type=int)
    wave.add_argument("--x-min", type=float)
    wave.add_argument("--x-max", type=float)
    wave.add_argument("--spectrum", action="store_true", help="csv: write f(k) instead of psi(x)")
    wave.add_argument("--format", help="csv (default) or json")
    wave.add_argument("--out", help="output path (default stdout)")
    wave.add_argument("--no-timestamp", action="store_true")
    return parser


def _config_for(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "wavepacket":
        return validate_config(_wavepacket_doc(args))
    inline = _inline_doc(args)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = parse_config(fh.read())
        doc = {"scenario": base.scenario, "mode": base.mode, "trials": base.n_trials,
               "seed": base.master_seed, "intermediate_readout": base.intermediate_readout,
               "workers": base.workers, "format": base.format}
        if base.output is not None:
            doc["output"] = base.output
        if base.wavepacket is not None:
            if inline:
                raise ConfigError(["inline flags cannot override a wavepacket config"])
            return base
        doc = {k: v for k, v in doc.items() if v is not None}
        doc.update(inline)
        return validate_config(doc)
    return validate_config(inline)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "list-scenarios":
        for sid in SCENARIO_IDS:
            print(f"{sid}\t{get_scenario(sid).description}")
        return 0

    try:
        cfg = _config_for(args)
    except ConfigSyntaxError as exc:
        print(f"ensembleq: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        for err in exc.errors:
            print(f"ensembleq: invalid config: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"ensembleq: cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"ensembleq: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        text = render(cfg, args.command, timestamp=not args.no_timestamp)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"ensembleq: invalid config: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime error
        print(f"ensembleq: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        write_output(text, cfg.output)
    except BrokenPipeError:
        # downstream reader closed early (e.g. ``| head``); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as exc:
        print(f"ensembleq: cannot write {cfg.output}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
