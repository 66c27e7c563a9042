"""Batch front-end for the toolkit.

Subcommands cover the main workflows: frame-condition audits, extremal
simulation with regime classification, the six-arc second-order rejection
sweep, oracle bound verification, and the sharpness search.  Every run writes
a JSON report (schema 1) embedding the fully resolved configuration, plus CSV
traces where a time series or table is produced.  Reports carry no timestamps,
so a fixed config and seed reproduce them byte for byte.

Exit codes: 0 success, 2 when a checked property is violated (so CI can tell
science failures from crashes), 1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, Driftless3DError
from .extremal import (
    ExtremalState,
    IntegrationOptions,
    classify_regime,
    detect_pattern,
    integrate_extremal,
    normalize_initial,
)
from .geometry import Box, PolyField, SystemPair, frame_condition_triples, moving_basis_check
from .oracle import (
    CandidateFamily,
    bound_verification,
    default_sharpness_candidates,
    get_fixture,
    sharpness_search,
)
from .second_order import Verdict, limit_matrix_comparison, six_arc_rejection

COMMANDS = ("frames", "simulate", "second-order", "oracle", "sharpness")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration with every default echoed."""

    system: object  # fixture name or {"X1": ..., "X2": ...} polynomial descriptor
    out_dir: str = "reports"
    seed: int = 0
    q0: tuple = (0.0, 0.0, 0.0)
    covector: tuple = (0.4, 1.0, -0.8)
    horizon: float = 1.0
    t1_list: tuple = (0.2, 0.1, 0.05)
    targets: tuple = ()
    max_arcs: int = 6
    t_max: float = 0.5
    include_singular: bool = False
    steps: int = 32
    box_halfwidth: float = 1.0
    samples: int = 9
    frame_threshold: float = 1e-8
    require_all_pass: bool = False
    expect_rejection: bool = True
    integrator_tol: float = 1e-10
    eps_zero: float = 1e-9
    eps_hit: float = 1e-6
    tol_rel: float = 1e-3

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "q0": list(self.q0),
            "covector": list(self.covector),
            "horizon": self.horizon,
            "t1_list": list(self.t1_list),
            "targets": [list(t) for t in self.targets],
            "max_arcs": self.max_arcs,
            "t_max": self.t_max,
            "include_singular": self.include_singular,
            "steps": self.steps,
            "box_halfwidth": self.box_halfwidth,
            "samples": self.samples,
            "frame_threshold": self.frame_threshold,
            "require_all_pass": self.require_all_pass,
            "expect_rejection": self.expect_rejection,
            "integrator_tol": self.integrator_tol,
            "eps_zero": self.eps_zero,
            "eps_hit": self.eps_hit,
            "tol_rel": self.tol_rel,
        }


_FIELD_CHECKS = {
    "out_dir": ("string", lambda v: isinstance(v, str) and v),
    "seed": ("nonnegative integer", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0),
    "horizon": ("positive number", lambda v: _is_num(v) and v > 0),
    "max_arcs": ("integer >= 1", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1),
    "t_max": ("positive number", lambda v: _is_num(v) and v > 0),
    "include_singular": ("boolean", lambda v: isinstance(v, bool)),
    "steps": ("integer >= 4", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 4),
    "box_halfwidth": ("positive number", lambda v: _is_num(v) and v > 0),
    "samples": ("integer >= 2", lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 2),
    "frame_threshold": ("positive number", lambda v: _is_num(v) and v > 0),
    "require_all_pass": ("boolean", lambda v: isinstance(v, bool)),
    "expect_rejection": ("boolean", lambda v: isinstance(v, bool)),
    "integrator_tol": ("positive number", lambda v: _is_num(v) and v > 0),
    "eps_zero": ("positive number", lambda v: _is_num(v) and v > 0),
    "eps_hit": ("positive number", lambda v: _is_num(v) and v > 0),
    "tol_rel": ("positive number", lambda v: _is_num(v) and v > 0),
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_vector3(raw, path, problems):
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        problems.append(f"{path}: must be a list of 3 numbers")
        return None
    out = []
    for i, v in enumerate(raw):
        if not _is_num(v):
            problems.append(f"{path}[{i}]: must be a number")
            return None
        out.append(float(v))
    return tuple(out)


def validate_config(raw: dict) -> RunConfig:
    """Validate a raw configuration mapping into a :class:`RunConfig`.

    All problems are collected and raised together as a :class:`ConfigError`
    whose message names each offending field by path.
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration root: must be a JSON object"])
    known = set(RunConfig.__dataclass_fields__)
    for key in sorted(set(raw) - known):
        problems.append(f"{key}: unknown field")

    values = {}
    if "system" not in raw:
        problems.append("system: required field is missing (fixture name or field descriptor)")
    else:
        system = raw["system"]
        if isinstance(system, str):
            if not system:
                problems.append("system: fixture name must be nonempty")
            else:
                values["system"] = system
        elif isinstance(system, dict):
            missing = [k for k in ("X1", "X2") if k not in system]
            extra = sorted(set(system) - {"X1", "X2"})
            for k in missing:
                problems.append(f"system.{k}: required field descriptor is missing")
            for k in extra:
                problems.append(f"system.{k}: unknown field")
            if not missing and not extra:
                values["system"] = system
        else:
            problems.append("system: must be a fixture name or a field-descriptor object")

    for key, (desc, ok) in _FIELD_CHECKS.items():
        if key in raw:
            if ok(raw[key]):
                values[key] = raw[key]
            else:
                problems.append(f"{key}: must be a {desc}")

    for key in ("q0", "covector"):
        if key in raw:
            vec = _check_vector3(raw[key], key, problems)
            if vec is not None:
                values[key] = vec

    if "t1_list" in raw:
        t1s = raw["t1_list"]
        if not isinstance(t1s, (list, tuple)) or not t1s:
            problems.append("t1_list: must be a nonempty list of positive durations")
        else:
            out = []
            for i, v in enumerate(t1s):
                if not _is_num(v) or v <= 0:
                    problems.append(f"t1_list[{i}]: duration must be a positive number")
                else:
                    out.append(float(v))
            if len(out) == len(t1s):
                values["t1_list"] = tuple(out)

    if "targets" in raw:
        tgts = raw["targets"]
        if not isinstance(tgts, (list, tuple)):
            problems.append("targets: must be a list of 3-vectors")
        else:
            out = []
            for i, t in enumerate(tgts):
                vec = _check_vector3(t, f"targets[{i}]", problems)
                if vec is not None:
                    out.append(vec)
            if len(out) == len(tgts):
                values["targets"] = tuple(out)

    if problems:
        raise ConfigError(problems)
    return RunConfig(**values)


def _resolve_system(config: RunConfig) -> SystemPair:
    if isinstance(config.system, str):
        return get_fixture(config.system)
    X1 = PolyField.from_json(config.system["X1"])
    X2 = PolyField.from_json(config.system["X2"])
    return SystemPair(X1, X2)


def _cmd_frames(system: SystemPair, config: RunConfig):
    region = Box.cube(config.box_halfwidth)
    results = {}
    for label, fields in frame_condition_triples(system):
        report = moving_basis_check(
            fields, region, samples=config.samples, threshold=config.frame_threshold
        )
        results[label] = report.to_json()
    all_pass = all(r["passed"] for r in results.values())
    status = EXIT_VIOLATION if config.require_all_pass and not all_pass else EXIT_OK
    return status, {"results": results, "all_pass": all_pass}, {}


def _cmd_simulate(system: SystemPair, config: RunConfig):
    q0 = np.asarray(config.q0, dtype=float)
    lam0 = normalize_initial(np.asarray(config.covector, dtype=float), q0, system)
    options = IntegrationOptions(
        rtol=config.integrator_tol,
        atol=config.integrator_tol,
        eps_zero=config.eps_zero,
        box=Box.cube(max(config.box_halfwidth, 1.0) * 8.0),
    )
    run, traces, arcs = integrate_extremal(
        system, ExtremalState(q0, lam0), config.horizon, options
    )
    regime = classify_regime(traces)
    end = run.end_state
    report = {
        "normalized_covector": [float(v) for v in lam0],
        "regime": regime.regime.value,
        "arc_bound": regime.arc_bound,
        "regime_note": regime.note,
        "pattern": detect_pattern(arcs).value,
        "arcs": arcs.to_json(),
        "end_point": [float(v) for v in end[:3]],
        "end_covector": [float(v) for v in end[3:]],
    }
    return EXIT_OK, report, {"simulate_trace.csv": run}


def _cmd_second_order(system: SystemPair, config: RunConfig):
    q0 = np.asarray(config.q0, dtype=float)
    entries = []
    all_rejected = True
    for t1 in config.t1_list:
        report = six_arc_rejection(system, q0, t1, t1_max=max(config.t1_list))
        limit = limit_matrix_comparison(system, t1, q0)
        all_rejected = all_rejected and report.verdict is Verdict.REJECTED
        entries.append({"t1": t1, "rejection": report.to_json(), "limit_matrix": limit.to_json()})
    status = EXIT_VIOLATION if config.expect_rejection and not all_rejected else EXIT_OK
    return status, {"results": entries, "all_rejected": all_rejected}, {}


def _make_family(config: RunConfig) -> CandidateFamily:
    return CandidateFamily(
        max_arcs=config.max_arcs,
        t_max=config.t_max,
        include_singular=config.include_singular,
        steps=config.steps,
    )


def _cmd_oracle(system: SystemPair, config: RunConfig):
    if not config.targets:
        raise ConfigError(["targets: the oracle command needs at least one target"])
    if config.max_arcs < 6:
        raise ConfigError(["max_arcs: bound verification needs a six-arc budget"])
    summary = bound_verification(
        system,
        np.asarray(config.q0, dtype=float),
        [np.asarray(t, dtype=float) for t in config.targets],
        _make_family(config),
        tol_rel=config.tol_rel,
        seed=config.seed,
        eps_hit=config.eps_hit,
    )
    status = EXIT_OK if summary.all_ok else EXIT_VIOLATION
    return status, {"summary": summary.to_json()}, {"oracle_summary.csv": summary.to_csv()}


def _cmd_sharpness(system: SystemPair, config: RunConfig):
    if config.max_arcs < 5:
        raise ConfigError(["max_arcs: the sharpness search needs a five-arc budget"])
    q0 = np.asarray(config.q0, dtype=float)
    targets = [np.asarray(t, dtype=float) for t in config.targets]
    if not targets:
        targets = default_sharpness_candidates(system, q0)
    if not targets:
        raise ConfigError(
            ["targets: no targets given and no default candidates exist for this system"]
        )
    summary = sharpness_search(
        system,
        q0,
        targets,
        _make_family(config),
        tol_rel=config.tol_rel,
        seed=config.seed,
        eps_hit=config.eps_hit,
    )
    lines = ["target_x,target_y,target_z,best_time_4,best_time_5,margin_rel,sharp"]
    for row in summary.rows:
        b4 = row.best_time.get(4, float("inf"))
        b5 = row.best_time.get(5, float("inf"))
        lines.append(
            ",".join(
                [
                    "%.12g" % row.target[0],
                    "%.12g" % row.target[1],
                    "%.12g" % row.target[2],
                    "inf" if np.isinf(b4) else "%.12g" % b4,
                    "inf" if np.isinf(b5) else "%.12g" % b5,
                    "inf" if np.isinf(row.margin_rel) else "%.12g" % row.margin_rel,
                    "true" if row.sharp else "false",
                ]
            )
        )
    csv_text = "\n".join(lines) + "\n"
    status = EXIT_OK if summary.winners else EXIT_VIOLATION
    return status, {"summary": summary.to_json()}, {"sharpness_summary.csv": csv_text}


_HANDLERS = {
    "frames": _cmd_frames,
    "simulate": _cmd_simulate,
    "second-order": _cmd_second_order,
    "oracle": _cmd_oracle,
    "sharpness": _cmd_sharpness,
}


def run(command: str, config: RunConfig) -> int:
    """Execute one subcommand and write its report files.

    Returns the process exit status; module errors are printed to stderr with
    the failing command named, never raised to the caller.
    """
    if command not in _HANDLERS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return EXIT_ERROR
    try:
        system = _resolve_system(config)
        status, body, extras = _HANDLERS[command](system, config)
    except Driftless3DError as exc:
        print(f"error: {command}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"schema": 1, "command": command, "config": config.to_json(), "status": status}
    report.update(body)
    report_path = out_dir / f"{command.replace('-', '_')}_report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    for name, payload in extras.items():
        path = out_dir / name
        if hasattr(payload, "to_csv"):
            payload.to_csv(path)
        else:
            path.write_text(payload)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftless3d",
        description="Bang/singular arc analysis for driftless two-input 3D systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    args = parser.parse_args(argv)

    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if isinstance(raw, dict):
        if args.out is not None:
            raw["out_dir"] = args.out
        if args.seed is not None:
            raw["seed"] = args.seed
    try:
        config = validate_config(raw)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_ERROR
    return run(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
