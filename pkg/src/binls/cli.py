"""Batch front end.

    binls <subcommand> [--config PATH] [--set key=value ...] [--jobs N]
                       [--seed U64] [--out DIR] [--format {csv,json}]

Subcommands: gn-constant, thresholds, ground-state, scan, mountain-pass, check.
Configuration keys are dotted (``params.alpha1``, ``grid.box_length``,
``solve.grad_tol``, ``scan.rhos`` ...) and come from a JSON file, a flat
``key=value`` file, or ``--set``.  Exit codes: 0 success, 2 configuration
error, 3 compute error (a JSON error record goes to stderr and to
``<out>/error.json``).  ``BINLS_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import constants, ground_state, model, mountain_pass
from .io import atomic_write, dumps_json, load_pair, save_pair, write_field
from .model import SystemParams
from .spectral import GridSpec, spectrum

log = logging.getLogger("binls")

SUBCOMMANDS = ("gn-constant", "thresholds", "ground-state", "scan", "mountain-pass", "check")
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3


class ConfigError(ValueError):
    pass


class ComputeError(RuntimeError):
    pass


# ---------------------------------------------------------------- configuration

DEFAULTS = {
    "params.dimension": 1,
    "params.alpha1": 1.0,
    "params.alpha2": 1.0,
    "params.beta": 1.0,
    "params.r1": 2.0,
    "params.r2": 2.0,
    "params.rho": 1.0,
    "grid.points_per_axis": 512,
    "grid.box_length": 40.0,
}


def parse_kv_text(text: str) -> dict:
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _flatten(obj: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return _flatten(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_kv_text(text)


def _coerce(value, kind, key: str):
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if kind is float:
            return float(value)
        if kind == "floats":
            if isinstance(value, (list, tuple)):
                return [float(x) for x in value]
            return [float(x) for x in str(value).split(",") if x.strip()]
        if kind == "ints":
            if isinstance(value, (list, tuple)):
                return tuple(int(x) for x in value)
            return tuple(int(x) for x in str(value).split(",") if x.strip())
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


_PARAM_KINDS = {"dimension": int, "alpha1": float, "alpha2": float, "beta": float, "r1": float, "r2": float, "rho": float}
_GRID_KINDS = {"dimension": int, "points_per_axis": int, "box_length": float}
_SOLVE_KINDS = {
    "step_init": float, "armijo_c": float, "step_shrink": float, "grad_tol": float, "max_iters": int,
    "vanish_energy_eps": float, "vanish_coupling_eps": float, "seed": int, "preconditioner": str,
    "precond_shift": float, "conjugate": bool, "restarts_seeds": "ints",
}
_SADDLE_KINDS = {
    "max_iters": int, "el_tol": float, "pohozaev_tol": float, "armijo_c": float, "step_shrink": float,
    "step_init": float, "precond_shift": float, "s_window": float, "profile": str, "seed_width": float, "seed": int,
}
_OTHER = {
    "scan.rhos": "floats", "scan.theta": float, "gs.strategy": str, "gs.restarts": bool,
    "gn.points_per_axis": int, "gn.box_length": float, "gn.tol": float, "gn.max_iters": int, "gn.dump": bool,
    "thresholds.estimate_R": bool, "thresholds.R_ascent_iters": int, "mp.geometry": bool, "mp.beta_fraction": float,
    "check.state": str, "output.fields": bool,
}


@dataclass
class RunConfig:
    subcommand: str
    params: SystemParams
    grid: GridSpec
    solve: ground_state.SolveConfig
    saddle: mountain_pass.SaddleConfig
    output_dir: Path
    format: str = "json"
    jobs: int = 1
    extra: dict = field(default_factory=dict)


def build_config(subcommand: str, flat: dict, out: str, fmt: str | None, jobs: int, seed: int | None) -> RunConfig:
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    merged = dict(DEFAULTS)
    merged.update(flat)
    known = (
        {f"params.{k}" for k in _PARAM_KINDS}
        | {f"grid.{k}" for k in _GRID_KINDS}
        | {f"solve.{k}" for k in _SOLVE_KINDS}
        | {f"saddle.{k}" for k in _SADDLE_KINDS}
        | set(_OTHER)
        | {"seed", "jobs", "format", "out"}
    )
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "grid.dimension" not in merged:
        merged["grid.dimension"] = merged["params.dimension"]
    if seed is None and "seed" in merged:
        seed = _coerce(merged["seed"], int, "seed")
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        merged["solve.seed"] = seed
        merged["saddle.seed"] = seed
    try:
        params = SystemParams(**{k: _coerce(merged[f"params.{k}"], t, f"params.{k}") for k, t in _PARAM_KINDS.items()})
        grid = GridSpec(**{k: _coerce(merged[f"grid.{k}"], t, f"grid.{k}") for k, t in _GRID_KINDS.items()})
        if grid.dimension != params.dimension:
            raise ConfigError("grid.dimension must equal params.dimension")
        solve = ground_state.SolveConfig(
            **{k: _coerce(merged[f"solve.{k}"], t, f"solve.{k}") for k, t in _SOLVE_KINDS.items() if f"solve.{k}" in merged}
        )
        saddle = mountain_pass.SaddleConfig(
            **{k: _coerce(merged[f"saddle.{k}"], t, f"saddle.{k}") for k, t in _SADDLE_KINDS.items() if f"saddle.{k}" in merged}
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    extra = {k: _coerce(merged[k], t, k) for k, t in _OTHER.items() if k in merged}
    fmt = fmt or str(merged.get("format", "json" if subcommand != "scan" else "csv"))
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out_dir = Path(out or merged.get("out", "."))
    return RunConfig(subcommand, params, grid, solve, saddle, out_dir, fmt, jobs, extra)


# ---------------------------------------------------------------- output helpers

def fmt_number(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def csv_text(columns, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_number(x) for x in row])
    return buf.getvalue()


def _check_finite(record: dict, what: str):
    for k, v in record.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise ComputeError(f"non-finite value in {what}: {k}={v}")


def _emit(cfg: RunConfig, name: str, record: dict) -> Path:
    if cfg.format == "csv":
        path = cfg.output_dir / f"{name}.csv"
        atomic_write(path, csv_text(list(record.keys()), [list(record.values())]))
    else:
        path = cfg.output_dir / f"{name}.json"
        atomic_write(path, dumps_json(record))
    return path


def _thresholds_for(cfg: RunConfig, params: SystemParams | None = None) -> constants.ThresholdSet:
    params = cfg.params if params is None else params
    N = params.dimension
    n = cfg.extra.get("gn.points_per_axis", 512 if N == 1 else 128)
    L = cfg.extra.get("gn.box_length", 40.0 if N == 1 else 24.0)
    est = constants.gn_constant_estimate(
        N, params.r, GridSpec(N, n, L), tol=cfg.extra.get("gn.tol", 1e-12), max_iters=cfg.extra.get("gn.max_iters", 5000)
    )
    return constants.thresholds(params, est.C_gn, est.extremal)


# ---------------------------------------------------------------- subcommands

def cmd_gn_constant(cfg: RunConfig) -> int:
    p = cfg.params
    N = p.dimension
    n = cfg.extra.get("gn.points_per_axis", cfg.grid.points_per_axis)
    L = cfg.extra.get("gn.box_length", cfg.grid.box_length)
    est = constants.gn_constant_estimate(N, p.r, GridSpec(N, n, L), cfg.extra.get("gn.tol", 1e-12), cfg.extra.get("gn.max_iters", 5000))
    rec = {"dimension": N, "r": p.r, "C_gn": est.C_gn, "converged": est.converged, "iterations": est.iterations}
    _check_finite(rec, "gn-constant")
    path = _emit(cfg, "gn_constant", rec)
    if cfg.extra.get("gn.dump", False):
        write_field(est.extremal, cfg.output_dir / "gn_extremal")
    print(path)
    return EXIT_OK


def cmd_thresholds(cfg: RunConfig) -> int:
    th = _thresholds_for(cfg)
    if cfg.extra.get("thresholds.estimate_R", False):
        est = constants.estimate_R(cfg.params, cfg.grid, ascent_iters=cfg.extra.get("thresholds.R_ascent_iters", 100))
        th = th.with_R(est.R_estimate, est.R_diverging, cfg.params.beta, cfg.params.r)
    rec = th.to_dict()
    if cfg.format == "csv":
        rec = {k: ("" if v is None else v) for k, v in rec.items()}
    path = _emit(cfg, "thresholds", rec)
    sys.stdout.write(dumps_json(th.to_dict()))
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_ground_state(cfg: RunConfig) -> int:
    th = _thresholds_for(cfg) if math.isclose(cfg.params.r, cfg.params.r_bar) else None
    if cfg.extra.get("gs.restarts", True):
        rep, _ = ground_state.best_of_restarts(cfg.params, cfg.grid, cfg.solve, thresholds=th, jobs=cfg.jobs)
    else:
        rep = ground_state.minimize_ground_state(
            cfg.params, cfg.grid, cfg.solve, cfg.extra.get("gs.strategy", "coupled-gaussian"), th
        )
    rec = rep.summary()
    if rep.status is ground_state.SolveStatus.UNBOUNDED_BELOW:
        raise ComputeError("minimization refused by the coercivity guard (energy unbounded below or supercritical)")
    _check_finite(rec, "ground-state")
    path = _emit(cfg, "ground_state", rec)
    if cfg.extra.get("output.fields", False) and rep.final_state is not None:
        save_pair(rep.final_state, cfg.params, cfg.output_dir / "ground_state_pair")
    print(path)
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    rhos = cfg.extra.get("scan.rhos")
    if not rhos:
        raise ConfigError("scan needs scan.rhos (comma-separated list)")
    for rho in rhos:
        if not rho > 0:
            raise ConfigError("every scan rho must be positive")
    th = None
    if math.isclose(cfg.params.r, cfg.params.r_bar):
        th = _thresholds_for(cfg)
    res = ground_state.dichotomy_scan(
        cfg.params, rhos, cfg.grid, cfg.solve, thresholds=th, theta=cfg.extra.get("scan.theta", 1.5), jobs=cfg.jobs
    )
    rows = [row.values() for row in res.rows]
    for row in res.rows:
        _check_finite({c: v for c, v in zip(row.COLUMNS, row.values())}, f"scan row rho={row.rho}")
    if cfg.format == "csv":
        path = cfg.output_dir / "scan.csv"
        atomic_write(path, csv_text(ground_state.ScanRow.COLUMNS, rows))
    else:
        path = cfg.output_dir / "scan.json"
        bracket = res.rho_star_bracket()
        atomic_write(
            path,
            dumps_json({
                "rows": [dict(zip(ground_state.ScanRow.COLUMNS, r)) for r in rows],
                "subadditivity": [
                    {"rho": a, "theta_rho": b, "m_theta_rho": c, "theta2_m_rho": d, "holds": e}
                    for a, b, c, d, e in res.subadditivity
                ],
                "rho_star_bracket": list(bracket) if bracket else None,
            }),
        )
    print(path)
    return EXIT_OK


def cmd_mountain_pass(cfg: RunConfig) -> int:
    params = cfg.params
    th = _thresholds_for(cfg)
    frac = cfg.extra.get("mp.beta_fraction")
    if frac is not None:
        # choose β so that βρ^{r-2} is the given fraction of min(c*, c_*)
        c = min(th.require_supercritical())
        beta = frac * c / params.rho ** (params.r - 2)
        params = SystemParams(**{**params.to_dict(), "beta": beta})
        th = constants.thresholds(params, th.C_gn, th.C_gn_extremal)
    geo = mountain_pass.bracket_roots_h(params, th)
    if cfg.extra.get("mp.geometry", False):
        sys.stdout.write(dumps_json(geo.to_dict()))
        _emit(cfg, "geometry", {k: ("" if v is None else v) for k, v in geo.to_dict().items()})
        return EXIT_OK
    rep = mountain_pass.saddle_search(params, cfg.grid, cfg.saddle, th)
    rec = {"beta": params.beta, **rep.summary(), "geometry": geo.to_dict()}
    if cfg.format == "csv":
        rec = {k: v for k, v in rec.items() if k != "geometry"}
    _check_finite({k: v for k, v in rec.items() if k != "geometry"}, "mountain-pass")
    path = _emit(cfg, "saddle", rec)
    if cfg.extra.get("output.fields", False) and rep.state is not None:
        save_pair(rep.state, params, cfg.output_dir / "saddle_pair")
    print(path)
    return EXIT_OK


def pair_diagnostics(p, params: SystemParams, C_gn: float | None = None) -> dict:
    t = model.evaluate_terms(p, params)
    lam = model._multiplier(t, params)
    sp = spectrum(p.grid)
    slack = []
    for f in (p.u, p.v):
        fh = sp.forward(f.samples)
        g2 = sp.quadratic(fh, sp.k2)
        bound = math.sqrt(sp.quadratic(fh) * sp.quadratic(fh, sp.k4))
        slack.append(bound - g2)
    rec = {
        "total_mass": t.total_mass,
        "mass_u": t.mass_u,
        "mass_v": t.mass_v,
        "energy_I": t.energy(params),
        "mj_value": model.mj_value(params),
        "lambda": lam,
        "pohozaev_P": model.pohozaev_P(p, params, t),
        "pohozaev_identity_residual": model.pohozaev_identity_residual(p, params, lam),
        "el_residual": model.euler_lagrange_residual(p, params, lam),
        "el_pohozaev_combination_residual": model.el_pohozaev_combination_residual(p, params, lam),
        "interpolation_slack_u": slack[0],
        "interpolation_slack_v": slack[1],
        "coupling": t.coupling,
    }
    if C_gn is not None:
        D1 = constants.d1_constant(params.r1, params.r2, C_gn)
        rec["combined_inequality_ratio"] = constants.combined_inequality_ratio(p, params, D1)
    return rec


def cmd_check(cfg: RunConfig) -> int:
    state = cfg.extra.get("check.state")
    if not state:
        raise ConfigError("check needs check.state (directory of a saved pair)")
    try:
        p, params = load_pair(state)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load pair from {state}: {exc}") from exc
    N = params.dimension
    est = constants.gn_constant_estimate(N, params.r, GridSpec(N, 512 if N == 1 else 128, 40.0 if N == 1 else 24.0))
    rec = pair_diagnostics(p, params, est.C_gn)
    _check_finite(rec, "check")
    path = _emit(cfg, "check", rec)
    sys.stdout.write(dumps_json(rec))
    log.info("wrote %s", path)
    return EXIT_OK


COMMANDS = {
    "gn-constant": cmd_gn_constant,
    "thresholds": cmd_thresholds,
    "ground-state": cmd_ground_state,
    "scan": cmd_scan,
    "mountain-pass": cmd_mountain_pass,
    "check": cmd_check,
}


# ---------------------------------------------------------------- entry point

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binls", description="Normalized solutions of the biharmonic coupled system.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON or key=value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for restarts and scan rows")
    ap.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed for all randomness")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    return ap


def _error_record(kind: str, exc: BaseException) -> str:
    return json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sort_keys=True)


def _setup_logging():
    level = os.environ.get("BINLS_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        flat = load_config_file(args.config) if args.config else {}
        flat.update(parse_kv_text("\n".join(args.set)))
        cfg = build_config(args.subcommand, flat, args.out, args.format, args.jobs, args.seed)
    except ConfigError as exc:
        print(_error_record("config", exc), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(_error_record("config", exc), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every failure becomes a structured record
        rec = _error_record("compute", exc)
        print(rec, file=sys.stderr)
        try:
            atomic_write(cfg.output_dir / "error.json", rec + "\n")
        except OSError:
            pass
        return EXIT_COMPUTE


__all__ = ["main", "build_config", "RunConfig", "ConfigError", "csv_text", "pair_diagnostics", "SUBCOMMANDS"]

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
