"""Command line front end.

Usage::

    tbilab overlap-curve --config run.json --set n_time=512 --set output=curve.csv
    tbilab violation-map --config run.json
    tbilab pseudo-map --config run.json
    tbilab squid-report --config squid.json

Configs are JSON objects validated strictly (unknown keys are errors).
Exit codes: 0 success, 1 computational or physical failure, 2 bad config.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, TbiError
from .inequalities import (
    TYPE_III_REASON,
    InequalityType,
    SignAssignment,
    delta_p_from_table,
    midpoint_times,
    pseudo_joint_from_table,
    violation_grid,
)
from .overlap import CRITERIA, OverlapEvaluator, overlap_curve
from .squid import (
    DEFAULT_MODES,
    DEFAULT_POINTS,
    POTENTIAL_FORMS,
    FluxDynamics,
    SquidParams,
    bistability_index,
    default_grid,
    eigensolve,
    well_summary,
)
from .two_level import FLUX_MAGNITUDE, SPIN_MAGNITUDE, RabiParams, SpinDynamics

CURVE_COLUMNS = ("xi_over_absX", "overlap_I", "overlap_II")
MAP_COLUMNS = ("t_ab", "t_bc", "delta_p", "dx_ab", "dx_ac", "dx_bc")
PSEUDO_COLUMNS = ("t_ab", "t_bc", "q_pp", "q_pm", "q_mp", "q_mm", "delta_p_I")
REPORT_KEYS = (
    "beta", "phi0", "barrier_J", "omega0_rad_s", "sigma0_sq_over_phi0_sq",
    "deltaE0_J", "tunnel_freq_Hz",
)

_TOP_KEYS = {
    "system", "omega", "magnitude", "squid", "inequality", "signs", "weighting",
    "n_time", "n_xi", "xi_tolerance", "modes", "n_points", "reference_branch",
    "output", "sidecar", "format",
}
_SQUID_KEYS = {"L", "C", "I_c", "n", "potential_form"}


@dataclass
class RunConfig:
    system: str
    omega: float | None = None
    squid: SquidParams | None = None
    magnitude: float | None = None
    inequality: InequalityType = InequalityType.I
    signs: str = "+--"
    weighting: str = "joint"
    n_time: int = 256
    n_xi: int = 200
    xi_tolerance: float = 1e-3
    modes: int = DEFAULT_MODES
    n_points: int = DEFAULT_POINTS
    reference_branch: int | None = None
    output: str | None = None
    sidecar: str | None = None
    format: str = "csv"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sign_assignments(self) -> tuple[SignAssignment, ...]:
        if self.signs == "all":
            return SignAssignment.all()
        return (SignAssignment.parse(self.signs),)

    @property
    def abs_x(self) -> float:
        if self.magnitude is not None:
            return self.magnitude
        return SPIN_MAGNITUDE if self.system == "spin" else FLUX_MAGNITUDE


def _number(value, key: str, *, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {type(value).__name__}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(key, "expected an integer")
        return int(value)
    return float(value)


def _string(value, key: str, choices=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {type(value).__name__}")
    if choices is not None and value not in choices:
        raise ConfigError(key, f"expected one of {sorted(choices)}, got {value!r}")
    return value


def _reject_unknown(data: dict, allowed: set, prefix: str = "") -> None:
    for key in sorted(set(data) - allowed):
        raise ConfigError(prefix + key, "unknown key")


def _squid_params(data) -> SquidParams:
    if not isinstance(data, dict):
        raise ConfigError("squid", "expected an object")
    _reject_unknown(data, _SQUID_KEYS, "squid.")
    values = {}
    for key in ("L", "C", "I_c"):
        if key not in data:
            raise ConfigError(f"squid.{key}", "missing required key")
        values[key] = _number(data[key], f"squid.{key}")
        if values[key] <= 0:
            raise ConfigError(f"squid.{key}", "must be positive")
    if "n" in data:
        values["n"] = _number(data["n"], "squid.n", integer=True)
    if "potential_form" in data:
        values["potential_form"] = _string(data["potential_form"], "squid.potential_form",
                                           POTENTIAL_FORMS)
    return SquidParams(**values)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _reject_unknown(data, _TOP_KEYS)
    if "system" not in data:
        raise ConfigError("system", "missing required key")
    system = _string(data["system"], "system", {"spin", "squid"})
    cfg = RunConfig(system=system, raw=data)

    if system == "spin":
        if "squid" in data:
            raise ConfigError("squid", "only allowed when system is 'squid'")
        if "omega" not in data:
            raise ConfigError("omega", "missing required key")
        cfg.omega = _number(data["omega"], "omega")
        if cfg.omega < 0:
            raise ConfigError("omega", "must be non-negative")
    else:
        if "omega" in data:
            raise ConfigError("omega", "only allowed when system is 'spin'")
        if "n_points" in data:
            cfg.n_points = _number(data["n_points"], "n_points", integer=True)
            if cfg.n_points < 128:
                raise ConfigError("n_points", "must be at least 128")
        cfg.squid = _squid_params(data.get("squid", {}))
    if "magnitude" in data:
        cfg.magnitude = _number(data["magnitude"], "magnitude")
        if cfg.magnitude <= 0:
            raise ConfigError("magnitude", "must be positive")

    if "inequality" in data:
        tag = _string(data["inequality"], "inequality", {"I", "II", "III"})
        if tag == "III":
            raise ConfigError("inequality", TYPE_III_REASON)
        cfg.inequality = InequalityType(tag)
    if "signs" in data:
        cfg.signs = _string(data["signs"], "signs")
        if cfg.signs != "all":
            try:
                SignAssignment.parse(cfg.signs)
            except ValueError as exc:
                raise ConfigError("signs", str(exc)) from None
    if "weighting" in data:
        cfg.weighting = _string(data["weighting"], "weighting", {"joint", "conditional"})
    for key, minimum in (("n_time", 2), ("n_xi", 2), ("modes", 2)):
        if key in data:
            value = _number(data[key], key, integer=True)
            if value < minimum:
                raise ConfigError(key, f"must be at least {minimum}")
            setattr(cfg, key, value)
    if cfg.modes > 32:
        raise ConfigError("modes", "must be at most 32")
    if "xi_tolerance" in data:
        cfg.xi_tolerance = _number(data["xi_tolerance"], "xi_tolerance")
        if cfg.xi_tolerance <= 0:
            raise ConfigError("xi_tolerance", "must be positive")
    if "reference_branch" in data:
        cfg.reference_branch = _number(data["reference_branch"], "reference_branch", integer=True)
        if cfg.reference_branch not in (1, -1):
            raise ConfigError("reference_branch", "must be +1 or -1")
    for key in ("output", "sidecar"):
        if key in data:
            setattr(cfg, key, _string(data[key], key))
    if "format" in data:
        cfg.format = _string(data["format"], "format", {"csv", "json"})
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    return config_from_dict(data)


def apply_overrides(data: dict, assignments: list[str]) -> dict:
    """Apply ``key=value`` overrides; dotted keys address nested objects and
    values are read as JSON when possible, else as plain strings."""
    data = json.loads(json.dumps(data))
    for item in assignments:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigError(item, "override must look like key=value")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "cannot descend into a non-object")
        node[parts[-1]] = value
    return data


# ---------------------------------------------------------------- rendering


def fmt(x: float) -> str:
    """Twelve significant digits; negative zero prints as 0."""
    text = f"{float(x):.12g}"
    return "0" if text == "-0" else text


def _num(x: float) -> float:
    return float(fmt(x))


def render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None, stream) -> None:
    if path is None:
        stream.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands


def build_dynamics(cfg: RunConfig):
    if cfg.system == "spin":
        return SpinDynamics(RabiParams(cfg.omega), magnitude=cfg.abs_x)
    grid = default_grid(cfg.squid, cfg.n_points)
    return FluxDynamics(eigensolve(cfg.squid, grid, cfg.modes), cfg.modes)


def _curve_summary(cfg: RunConfig, curves) -> dict:
    first = curves[0]
    per_signs = {
        str(c.signs): {"xi_I": _num(c.xi_I), "xi_II": _num(c.xi_II)} for c in curves
    }
    spread = 0.0
    for c1, c2 in itertools.combinations(curves, 2):
        spread = max(spread, float(np.max(np.abs(c1.overlap_I - c2.overlap_I))),
                     float(np.max(np.abs(c1.overlap_II - c2.overlap_II))))
    xi_i = max(c.xi_I for c in curves)
    xi_ii = max(c.xi_II for c in curves)
    return {
        "system": cfg.system,
        "n_time": cfg.n_time,
        "n_xi": cfg.n_xi,
        "xi_tolerance": cfg.xi_tolerance,
        "weighting": cfg.weighting,
        "signs": [str(c.signs) for c in curves],
        "xi_I": _num(xi_i),
        "xi_II": _num(xi_ii),
        "per_signs": per_signs,
        "max_pairwise_deviation": _num(spread),
        "overlap_at_xi_max": {"I": _num(first.overlap_I[-1]), "II": _num(first.overlap_II[-1])},
        "criteria": {name: _num(c.xi) for name, c in sorted(CRITERIA.items())},
        "exceeds_half_width": bool(min(xi_i, xi_ii) > CRITERIA["half_width"].xi),
        "exceeds_unit": bool(min(xi_i, xi_ii) > CRITERIA["unit"].xi),
    }


def cmd_overlap_curve(cfg: RunConfig, stdout=None, stderr=None) -> dict:
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    dynamics = build_dynamics(cfg)
    curves = [
        overlap_curve(s, dynamics, cfg.n_time, cfg.n_xi, cfg.xi_tolerance, cfg.weighting)
        for s in cfg.sign_assignments
    ]
    summary = _curve_summary(cfg, curves)
    if isinstance(dynamics, FluxDynamics):
        summary["tunnel_period_s"] = _num(dynamics.tunnel_period)
    many = len(curves) > 1
    if cfg.format == "json":
        doc = {
            "summary": summary,
            "curves": [
                {"signs": str(c.signs),
                 "xi_over_absX": [_num(x) for x in c.xi],
                 "overlap_I": [_num(x) for x in c.overlap_I],
                 "overlap_II": [_num(x) for x in c.overlap_II]}
                for c in curves
            ],
        }
        _emit(render_json(doc), cfg.output, stdout)
    else:
        header = (("signs",) if many else ()) + CURVE_COLUMNS
        rows = []
        for c in curves:
            prefix = (str(c.signs),) if many else ()
            rows.extend(prefix + row for row in c.samples)
        _emit(render_csv(header, rows), cfg.output, stdout)
    _emit(render_json(summary), cfg.sidecar, stderr)
    return summary


def _single_signs(cfg: RunConfig) -> SignAssignment:
    if cfg.signs == "all":
        raise ConfigError("signs", "this command needs a single sign assignment")
    return SignAssignment.parse(cfg.signs)


def cmd_violation_map(cfg: RunConfig, stdout=None, stderr=None) -> dict:
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    signs = _single_signs(cfg)
    dynamics = build_dynamics(cfg)
    grid = violation_grid(cfg.inequality, signs, dynamics, cfg.n_time, weighting=cfg.weighting)
    cells = grid.cells()
    if cfg.format == "json":
        doc = {"columns": list(MAP_COLUMNS),
               "rows": [[_num(getattr(c, k)) for k in MAP_COLUMNS] for c in cells]}
        _emit(render_json(doc), cfg.output, stdout)
    else:
        _emit(render_csv(MAP_COLUMNS, ([getattr(c, k) for k in MAP_COLUMNS] for c in cells)),
              cfg.output, stdout)
    evaluator = OverlapEvaluator(grid)
    summary = {
        "inequality": cfg.inequality.value,
        "signs": str(signs),
        "n_time": cfg.n_time,
        "max_delta_p": _num(grid.delta_p.max()),
        "violating_fraction": _num(np.mean(grid.delta_p > 0)),
        "positive_part": _num(evaluator.positive_part()),
    }
    _emit(render_json(summary), cfg.sidecar, stderr)
    return summary


def cmd_pseudo_map(cfg: RunConfig, stdout=None, stderr=None) -> dict:
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    signs = _single_signs(cfg)
    ref = cfg.reference_branch if cfg.reference_branch is not None else -signs.s_b
    dynamics = build_dynamics(cfg)
    span = dynamics.period if np.isfinite(dynamics.period) else 1.0
    t = midpoint_times(cfg.n_time, span)
    t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
    table = dynamics.table(t_ab, t_bc)
    pj = pseudo_joint_from_table(signs.s_a, ref, table, getattr(dynamics, "marginal_atol", 1e-10))
    dp = delta_p_from_table(InequalityType.I, signs, table)
    q = pj.q
    rows = (
        (t_ab[i, j], t_bc[i, j], q[0, 0, i, j], q[0, 1, i, j], q[1, 0, i, j], q[1, 1, i, j], dp[i, j])
        for i in range(len(t)) for j in range(len(t))
    )
    if cfg.format == "json":
        doc = {"columns": list(PSEUDO_COLUMNS), "rows": [[_num(v) for v in r] for r in rows]}
        _emit(render_json(doc), cfg.output, stdout)
    else:
        _emit(render_csv(PSEUDO_COLUMNS, rows), cfg.output, stdout)
    violating = dp > 0
    summary = {
        "signs": str(signs),
        "reference_branch": ref,
        "n_time": cfg.n_time,
        "min_entry": _num(q.min()),
        "violating_cells": int(violating.sum()),
        "violating_cells_with_negative_entry": int((violating & (pj.min_entry < 0)).sum()),
    }
    _emit(render_json(summary), cfg.sidecar, stderr)
    return summary


def _form_report(params: SquidParams, n_points: int, modes: int) -> dict:
    grid = default_grid(params, n_points)
    basis = eigensolve(params, grid, modes)
    refined = eigensolve(params, grid.refined(), modes)
    s = well_summary(params, basis=basis)
    return {
        "beta": _num(s.beta),
        "phi0": _num(s.phi0),
        "barrier_J": _num(s.barrier),
        "omega0_rad_s": _num(s.omega0),
        "sigma0_sq_over_phi0_sq": _num(s.sigma0_ratio),
        "deltaE0_J": _num(s.splitting),
        "tunnel_freq_Hz": _num(s.tunnel_frequency),
        "convergence": {
            "n_points": grid.n_points,
            "phi_max": _num(grid.phi_max),
            "modes": modes,
            "deltaE0_J_refined": _num(refined.splitting),
            "relative_change": _num(abs(refined.splitting / basis.splitting - 1.0)),
        },
    }


def cmd_squid_report(cfg: RunConfig, stdout=None, stderr=None) -> dict:
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    if cfg.system != "squid":
        raise ConfigError("system", "squid-report needs system 'squid'")
    params = cfg.squid
    beta, ok = bistability_index(params)
    if not ok:
        raise TbiError(f"not bistable: beta = {beta:.6g} lies outside (1, 5*pi/2)")
    report = {
        "params": {"L": params.L, "C": params.C, "I_c": params.I_c, "n": params.n},
        "beta": _num(beta),
        "bistable": True,
        "forms": {
            form: _form_report(params.replace(potential_form=form), cfg.n_points, cfg.modes)
            for form in POTENTIAL_FORMS
        },
    }
    _emit(render_json(report), cfg.output, stdout)
    return report


COMMANDS = {
    "overlap-curve": cmd_overlap_curve,
    "violation-map": cmd_violation_map,
    "pseudo-map": cmd_pseudo_map,
    "squid-report": cmd_squid_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tbilab", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
    parser.add_argument("--output", help="artifact path (same as --set output=PATH)")
    parser.add_argument("--sidecar", help="summary JSON path (default: stderr)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data: Any = {}
        if args.config is not None:
            try:
                data = json.loads(args.config.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError("--config", str(exc)) from None
            except json.JSONDecodeError as exc:
                raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        overrides = list(args.overrides)
        if args.output:
            overrides.append(f"output={args.output}")
        if args.sidecar:
            overrides.append(f"sidecar={args.sidecar}")
        cfg = config_from_dict(apply_overrides(data, overrides))
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"tbilab: config error: {exc}", file=sys.stderr)
        return 2
    except TbiError as exc:
        print(f"tbilab: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
