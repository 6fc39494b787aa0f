"""Command-line front end: configured scans emitting deterministic CSV/JSON.

Usage::

    qmanifold <command> --config run.json [--workers K] [--output PATH]
    qmanifold validate --config run.json

Exit codes: 0 success, 1 configuration error, 2 numerical failure (whatever
was computed is written next to the target with a ``.partial`` suffix).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Any, Callable

import numpy as np

from . import __version__
from .dpgeom import DEFAULT_TRUST_RADIUS, approx_error_profile, circle_length, two_level_gap, two_level_metric
from .errors import (
    DegenerateGroundStateError,
    MetricDegenerateError,
    NoDegeneracyError,
    QManifoldError,
    SeparatrixError,
)
from .geodesic import GeodesicControls, ShootingControls, integrate_cauchy, solve_dirichlet
from .geometry import (
    DEFAULT_DET_THRESHOLD,
    DEFAULT_FD_STEP,
    DEFAULT_OVERLAP_STEP,
    geometric_tensor,
    metric_field,
    metric_from_overlaps,
)
from .meanfield import condensate_fraction, hb_metric_f1, hb_minimize
from .model import HamiltonianFamily, LmgModel, TwoLevelModel
from .spectrum import dp_refine, dp_seeds, energy_gap, fock_probabilities

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

MAP_COMMANDS = ("gap-map", "metric-map", "ricci-map", "christoffel-map", "hb-compare")
COMMANDS = MAP_COMMANDS + (
    "geodesic-cauchy",
    "geodesic-dirichlet",
    "dp-find",
    "dp-zoom",
    "circle-length",
    "fock-hist",
    "approx-error",
)
LMG_ONLY = ("hb-compare", "dp-find", "dp-zoom", "circle-length", "fock-hist", "approx-error")
JSON_DEFAULT = ("geodesic-cauchy", "geodesic-dirichlet")

NUMERIC_DEFAULTS: dict[str, Any] = {
    "fd_step": DEFAULT_FD_STEP,
    "overlap_step": DEFAULT_OVERLAP_STEP,
    "det_threshold": DEFAULT_DET_THRESHOLD,
    "ode_tolerances": [1e-9, 1e-9],
    "capture_radius": 1e-3,
    "trust_radius": DEFAULT_TRUST_RADIUS,
    "richardson": True,
}

PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "metric-map": {"method": "perturbation"},
    "geodesic-cauchy": {
        "starts": None,
        "directions": [[1.0, 0.0]],
        "tau_max": 10.0,
        "domain": None,
        "capture_dps": True,
    },
    "geodesic-dirichlet": {
        "start": None,
        "end": None,
        "angles": 720,
        "max_length": 10.0,
        "angle_range": None,
        "domain": None,
        "capture_dps": True,
    },
    "dp-zoom": {"dp_index": 0, "half_width": 0.05, "steps": 21},
    "circle-length": {"dp_index": 0, "radii": [0.02, 0.01, 0.005]},
    "fock-hist": {"points": [[0.0, 0.0]]},
    "approx-error": {"dp_index": 0, "theta": math.pi / 4, "radii": [0.3, 0.1, 0.05, 0.025]},
}


class ConfigError(Exception):
    """Configuration problem tied to a dotted field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def load_config(path: str) -> dict:
    """Read a JSON config; parse errors are reported with line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a JSON object")
    return raw


def _number(value, field: str, positive: bool = False, integer: bool = False, minimum: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _pair(value, field: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, f"expected [kappa, chi], got {value!r}")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _pairs(value, field: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "expected a non-empty list of [kappa, chi] pairs")
    return [_pair(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _radii(value, field: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "expected a non-empty list of radii")
    return [_number(v, f"{field}[{i}]", positive=True) for i, v in enumerate(value)]


def _reject_unknown(section: dict, allowed, field: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{field}.{key}" if field else key, f"unknown field; expected one of {sorted(allowed)}")


def _validate_model(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("model", "expected an object")
    mtype = raw.get("type", "lmg")
    if mtype == "lmg":
        _reject_unknown(raw, {"type", "N"}, "model")
        if "N" not in raw:
            raise ConfigError("model.N", "required for the lmg model")
        return {"type": "lmg", "N": _number(raw["N"], "model.N", integer=True, minimum=1)}
    if mtype == "two_level":
        _reject_unknown(raw, {"type", "chart", "radius"}, "model")
        chart = raw.get("chart", "sphere")
        if chart not in ("sphere", "plane"):
            raise ConfigError("model.chart", f"expected 'sphere' or 'plane', got {chart!r}")
        out = {"type": "two_level", "chart": chart}
        if chart == "sphere":
            out["radius"] = _number(raw.get("radius", 1.0), "model.radius", positive=True)
        return out
    raise ConfigError("model.type", f"expected 'lmg' or 'two_level', got {mtype!r}")


def _validate_grid(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("grid", "expected an object with 'kappa' and 'chi' axes")
    _reject_unknown(raw, {"kappa", "chi"}, "grid")
    out = {}
    for axis in ("kappa", "chi"):
        field = f"grid.{axis}"
        spec = raw.get(axis)
        if not isinstance(spec, list) or len(spec) != 3:
            raise ConfigError(field, "expected [min, max, steps]")
        lo = _number(spec[0], f"{field}.min")
        hi = _number(spec[1], f"{field}.max")
        steps = _number(spec[2], f"{field}.steps", integer=True)
        if steps < 1:
            raise ConfigError(f"{field}.steps", f"must be >= 1, got {steps}")
        if lo > hi:
            raise ConfigError(field, f"min {lo} exceeds max {hi}")
        out[axis] = [lo, hi, steps]
    return out


def _validate_numerics(raw) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("numerics", "expected an object")
    _reject_unknown(raw, NUMERIC_DEFAULTS, "numerics")
    out = dict(NUMERIC_DEFAULTS)
    for key, value in raw.items():
        field = f"numerics.{key}"
        if key == "richardson":
            if not isinstance(value, bool):
                raise ConfigError(field, "expected true or false")
            out[key] = value
        elif key == "ode_tolerances":
            if not isinstance(value, list) or len(value) != 2:
                raise ConfigError(field, "expected [rtol, atol]")
            out[key] = [_number(v, f"{field}[{i}]", positive=True) for i, v in enumerate(value)]
        else:
            out[key] = _number(value, field, positive=True)
    return out


def _validate_domain(p: dict) -> None:
    if p["domain"] is not None:
        dom = p["domain"]
        if not isinstance(dom, list) or len(dom) != 2:
            raise ConfigError("params.domain", "expected [[kmin, kmax], [cmin, cmax]]")
        p["domain"] = [_pair(d, f"params.domain[{i}]") for i, d in enumerate(dom)]
        for i, (lo, hi) in enumerate(p["domain"]):
            if lo > hi:
                raise ConfigError(f"params.domain[{i}]", "min exceeds max")
    if not isinstance(p["capture_dps"], bool):
        raise ConfigError("params.capture_dps", "expected true or false")


def _validate_params(command: str, raw, model: dict) -> dict:
    defaults = PARAM_DEFAULTS.get(command, {})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("params", "expected an object")
    _reject_unknown(raw, defaults, "params")
    p = copy.deepcopy(defaults)
    p.update(raw)
    if command == "metric-map":
        if p["method"] not in ("perturbation", "overlap"):
            raise ConfigError("params.method", "expected 'perturbation' or 'overlap'")
    elif command == "geodesic-cauchy":
        if p["starts"] is None:
            raise ConfigError("params.starts", "required")
        p["starts"] = _pairs(p["starts"], "params.starts")
        p["directions"] = _pairs(p["directions"], "params.directions")
        if len(p["directions"]) not in (1, len(p["starts"])):
            raise ConfigError("params.directions", "give one direction or one per start")
        for i, d in enumerate(p["directions"]):
            if d[0] == 0 and d[1] == 0:
                raise ConfigError(f"params.directions[{i}]", "must be nonzero")
        p["tau_max"] = _number(p["tau_max"], "params.tau_max", positive=True)
        _validate_domain(p)
    elif command == "geodesic-dirichlet":
        for key in ("start", "end"):
            if p[key] is None:
                raise ConfigError(f"params.{key}", "required")
            p[key] = _pair(p[key], f"params.{key}")
        p["angles"] = _number(p["angles"], "params.angles", integer=True, minimum=4)
        p["max_length"] = _number(p["max_length"], "params.max_length", positive=True)
        if p["angle_range"] is not None:
            p["angle_range"] = _pair(p["angle_range"], "params.angle_range")
            if not p["angle_range"][0] < p["angle_range"][1]:
                raise ConfigError("params.angle_range", "expected [a, b] with a < b")
        _validate_domain(p)
    elif command in ("dp-zoom", "circle-length", "approx-error"):
        n_dp = len(dp_seeds(model["N"]))
        if n_dp == 0:
            raise ConfigError("model.N", "no diabolic points for N < 2")
        idx = _number(p["dp_index"], "params.dp_index", integer=True, minimum=0)
        if idx >= n_dp:
            raise ConfigError("params.dp_index", f"must be < {n_dp} for N={model['N']}")
        p["dp_index"] = idx
        if command == "dp-zoom":
            p["half_width"] = _number(p["half_width"], "params.half_width", positive=True)
            p["steps"] = _number(p["steps"], "params.steps", integer=True, minimum=1)
        else:
            p["radii"] = _radii(p["radii"], "params.radii")
        if command == "approx-error":
            p["theta"] = _number(p["theta"], "params.theta")
    elif command == "fock-hist":
        p["points"] = _pairs(p["points"], "params.points")
    return p


def resolve_config(raw: dict, command: str | None = None) -> dict:
    """Validate ``raw`` and fill defaults; raises :class:`ConfigError`."""
    _reject_unknown(raw, {"command", "model", "grid", "numerics", "output", "workers", "params"}, "")
    cfg_command = raw.get("command")
    if cfg_command is not None and cfg_command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg_command!r}; valid commands: {', '.join(COMMANDS)}")
    if command is not None and cfg_command is not None and command != cfg_command:
        raise ConfigError("command", f"config is for {cfg_command!r} but {command!r} was requested")
    command = command or cfg_command
    if command is None:
        raise ConfigError("command", f"missing; valid commands: {', '.join(COMMANDS)}")
    if "model" not in raw:
        raise ConfigError("model", "required")
    model = _validate_model(raw["model"])
    if command in LMG_ONLY and model["type"] != "lmg":
        raise ConfigError("model.type", f"{command} requires the lmg model")
    out: dict[str, Any] = {"command": command, "model": model}
    if command in MAP_COMMANDS:
        if "grid" not in raw:
            raise ConfigError("grid", f"required for {command}")
        out["grid"] = _validate_grid(raw["grid"])
    elif "grid" in raw:
        raise ConfigError("grid", f"not used by {command}; use params")
    out["numerics"] = _validate_numerics(raw.get("numerics"))
    out["params"] = _validate_params(command, raw.get("params"), model)
    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output", "expected an object")
    _reject_unknown(output, {"path", "format"}, "output")
    fmt = output.get("format", "json" if command in JSON_DEFAULT else "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format", f"expected 'csv' or 'json', got {fmt!r}")
    path = output.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path", "expected a string")
    out["output"] = {"path": path, "format": fmt}
    out["workers"] = _number(raw.get("workers", 1), "workers", integer=True, minimum=1)
    return out


# --------------------------------------------------------------------------
# per-task computations (module level so worker processes can import them)
# --------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _family_cached(key: str) -> HamiltonianFamily:
    model = json.loads(key)
    if model["type"] == "lmg":
        return LmgModel(model["N"])
    if model["chart"] == "sphere":
        return TwoLevelModel.sphere(model["radius"])
    return TwoLevelModel.plane()


def build_family(model: dict) -> HamiltonianFamily:
    return _family_cached(json.dumps(model, sort_keys=True))


@lru_cache(maxsize=8)
def _dp_cached(N: int, index: int):
    return dp_refine(LmgModel(N), dp_seeds(N)[index])


def _status(exc: Exception) -> str:
    if isinstance(exc, DegenerateGroundStateError):
        return "diabolic_point"
    if isinstance(exc, MetricDegenerateError):
        return "degenerate_metric"
    if isinstance(exc, SeparatrixError):
        return "separatrix"
    if isinstance(exc, NoDegeneracyError):
        return "no_degeneracy"
    return "failed"


NAN = float("nan")


def _gap_row(fam, cfg, lam):
    return [energy_gap(fam, lam)], "ok"


def _metric_row(fam, cfg, lam):
    if cfg["params"]["method"] == "overlap":
        g = metric_from_overlaps(fam, lam, cfg["numerics"]["overlap_step"])
        berry = NAN
    else:
        t = geometric_tensor(fam, lam)
        g, berry = t.metric, float(t.berry[0, 1])
    det = float(np.linalg.det(g))
    status = "ok" if det >= cfg["numerics"]["det_threshold"] else "degenerate_metric"
    return [g[0, 0], g[0, 1], g[1, 1], det, berry], status


def _field(fam, cfg, lam, second):
    num = cfg["numerics"]
    return metric_field(fam, lam, num["fd_step"], second=second, richardson=num["richardson"], det_threshold=num["det_threshold"])


def _ricci_row(fam, cfg, lam):
    f = _field(fam, cfg, lam, True)
    return [f.ricci, f.det], "degenerate_metric" if f.degenerate else "ok"


def _christoffel_row(fam, cfg, lam):
    f = _field(fam, cfg, lam, False)
    if f.degenerate:
        return [NAN] * 6 + [f.det], "degenerate_metric"
    G = f.christoffel
    return [G[0, 0, 0], G[0, 0, 1], G[0, 1, 1], G[1, 0, 0], G[1, 0, 1], G[1, 1, 1], f.det], "ok"


def _hb_row(fam, cfg, lam):
    N = cfg["model"]["N"]
    sol = hb_minimize(None, lam)
    sol_n = hb_minimize(N, lam)
    t = geometric_tensor(fam, lam)
    g = t.metric
    values = [sol.rho, sol_n.rho, g[0, 0], g[0, 1], g[1, 1], float(np.linalg.det(g))]
    status = "ok"
    try:
        h = hb_metric_f1(N, lam)
        values += [h[0, 0], h[0, 1], h[1, 1], float(np.linalg.det(h))]
    except SeparatrixError:
        values += [NAN] * 4
        status = "separatrix"
    values.append(condensate_fraction(N, lam) if not sol_n.coexisting else NAN)
    return values + [sol.phase], status


MAP_ROWS: dict[str, tuple[list[str], Callable]] = {
    "gap-map": (["gap"], _gap_row),
    "metric-map": (["g_kk", "g_kc", "g_cc", "det", "berry_kc"], _metric_row),
    "ricci-map": (["ricci", "det"], _ricci_row),
    "christoffel-map": (["gamma_k_kk", "gamma_k_kc", "gamma_k_cc", "gamma_c_kk", "gamma_c_kc", "gamma_c_cc", "det"], _christoffel_row),
    "hb-compare": (
        ["rho_inf", "rho_N", "g_kk", "g_kc", "g_cc", "det", "hb_kk", "hb_kc", "hb_cc", "hb_det", "fraction", "phase"],
        _hb_row,
    ),
}


def _map_task(args) -> list:
    cfg, i, j, lam = args
    names, fn = MAP_ROWS[cfg["command"]]
    fam = build_family(cfg["model"])
    try:
        values, status = fn(fam, cfg, np.array(lam))
    except QManifoldError as exc:
        values, status = [NAN] * len(names), _status(exc)
    return [i, j, lam[0], lam[1], *values, status]


def _dp_task(args) -> list:
    N, index = args
    seed = dp_seeds(N)[index]
    try:
        dp = dp_refine(LmgModel(N), seed)
        return [seed.l, seed.branch, seed.point.kappa, seed.point.chi, dp.location.kappa, dp.location.chi,
                dp.gap_at_location, dp.displacement, "ok"]
    except QManifoldError as exc:
        return [seed.l, seed.branch, seed.point.kappa, seed.point.chi, NAN, NAN, NAN, NAN, _status(exc)]


def _zoom_task(args) -> list:
    cfg, i, j, dlam = args
    N = cfg["model"]["N"]
    dp = _dp_cached(N, cfg["params"]["dp_index"])
    fam = LmgModel(N)
    lam = dp.point + np.asarray(dlam)
    row = [i, j, lam[0], lam[1], dlam[0], dlam[1]]
    try:
        t = geometric_tensor(fam, lam)
        ga = two_level_metric(fam, dp, dlam)
        return row + [t.gap, two_level_gap(fam, dp, dlam), t.metric[0, 0], t.metric[0, 1], t.metric[1, 1],
                      ga[0, 0], ga[0, 1], ga[1, 1], "ok"]
    except QManifoldError as exc:
        return row + [NAN] * 8 + [_status(exc)]


def _circle_task(args) -> list:
    N, index, R = args
    dp = _dp_cached(N, index)
    try:
        res = circle_length(LmgModel(N), dp, R)
        return [R, res.length, res.excess, res.error_estimate, res.method, "ok"]
    except QManifoldError as exc:
        return [R, NAN, NAN, NAN, "", _status(exc)]


def _geodesic_task(args) -> dict:
    model, num, start, direction, tau_max, domain, dps = args
    fam = build_family(model)
    rtol, atol = num["ode_tolerances"]
    controls = GeodesicControls(
        rtol=rtol,
        atol=atol,
        fd_step=num["fd_step"],
        richardson=num["richardson"],
        det_threshold=num["det_threshold"],
        domain=None if domain is None else tuple(tuple(d) for d in domain),
        dps=tuple(tuple(d) for d in dps),
        capture_radius=num["capture_radius"],
    )
    trace = integrate_cauchy(fam, start, direction, tau_max, controls)
    out = {"start": list(start), "direction": list(direction)}
    out.update(trace.to_dict())
    return out


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------


class RunFailure(Exception):
    """Numerical failure with whatever rows were produced before it."""

    def __init__(self, message: str, columns: list[str], rows: list):
        super().__init__(message)
        self.columns = columns
        self.rows = rows


def _ordered_map(fn, tasks: list, workers: int) -> list:
    """Apply ``fn`` to ``tasks`` preserving order; stops at the first exception."""
    results: list = []
    try:
        if workers <= 1 or len(tasks) <= 1:
            for t in tasks:
                results.append(fn(t))
        else:
            chunk = max(1, len(tasks) // (4 * workers))
            with ProcessPoolExecutor(max_workers=workers) as ex:
                for r in ex.map(fn, tasks, chunksize=chunk):
                    results.append(r)
    except Exception as exc:
        exc.partial_results = results  # type: ignore[attr-defined]
        raise
    return results


def _axis(spec) -> np.ndarray:
    lo, hi, steps = spec
    return np.array([lo]) if steps == 1 else np.linspace(lo, hi, steps)


def execute(cfg: dict, workers: int = 1) -> tuple[list[str], list]:
    """Run the configured command; returns ``(columns, rows)`` where rows are
    lists (tabular commands) or dicts (structured commands)."""
    command = cfg["command"]
    p = cfg["params"]
    if command in MAP_COMMANDS:
        names, _ = MAP_ROWS[command]
        columns = ["i_kappa", "i_chi", "kappa", "chi", *names, "status"]
        ks, cs = _axis(cfg["grid"]["kappa"]), _axis(cfg["grid"]["chi"])
        tasks = [(cfg, i, j, [float(k), float(c)]) for i, k in enumerate(ks) for j, c in enumerate(cs)]
        return columns, _run(_map_task, tasks, workers, columns)
    if command == "dp-find":
        N = cfg["model"]["N"]
        columns = ["l", "branch", "seed_kappa", "seed_chi", "kappa", "chi", "gap", "displacement", "status"]
        return columns, _run(_dp_task, [(N, i) for i in range(len(dp_seeds(N)))], workers, columns)
    if command == "dp-zoom":
        columns = ["i_kappa", "i_chi", "kappa", "chi", "dkappa", "dchi", "gap", "gap_two_level",
                   "g_kk", "g_kc", "g_cc", "gd_kk", "gd_kc", "gd_cc", "status"]
        axis = np.linspace(-p["half_width"], p["half_width"], p["steps"]) if p["steps"] > 1 else np.zeros(1)
        tasks = [(cfg, i, j, [float(a), float(b)]) for i, a in enumerate(axis) for j, b in enumerate(axis)]
        return columns, _run(_zoom_task, tasks, workers, columns)
    if command == "circle-length":
        columns = ["R", "length", "excess", "error_estimate", "method", "status"]
        tasks = [(cfg["model"]["N"], p["dp_index"], R) for R in p["radii"]]
        return columns, _run(_circle_task, tasks, workers, columns)
    if command == "approx-error":
        columns = ["R", "err_kk", "err_kc", "err_cc", "outside_trust", "status"]
        N = cfg["model"]["N"]
        prof = approx_error_profile(LmgModel(N), _dp_cached(N, p["dp_index"]), p["theta"], p["radii"],
                                    trust_radius=cfg["numerics"]["trust_radius"])
        rows = []
        for k, R in enumerate(prof.R):
            bad = bool(np.any(prof.undefined[k]))
            rows.append([float(R), *[float(e) for e in prof.errors[k]], int(bool(prof.outside_trust[k])),
                         "undefined" if bad else "ok"])
        return columns, rows
    if command == "fock-hist":
        columns = ["point", "kappa", "chi", "n_t", "probability"]
        rows = []
        for idx, lam in enumerate(p["points"]):
            probs = fock_probabilities(cfg["model"]["N"], lam)
            rows += [[idx, lam[0], lam[1], n, float(q)] for n, q in enumerate(probs)]
        return columns, rows
    dps = []
    if command.startswith("geodesic") and p["capture_dps"] and cfg["model"]["type"] == "lmg":
        N = cfg["model"]["N"]
        dps = [list(_dp_cached(N, i).point) for i in range(len(dp_seeds(N)))]
    if command == "geodesic-cauchy":
        dirs = p["directions"] * len(p["starts"]) if len(p["directions"]) == 1 else p["directions"]
        tasks = [(cfg["model"], cfg["numerics"], s, d, p["tau_max"], p["domain"], dps) for s, d in zip(p["starts"], dirs)]
        columns = ["start_kappa", "start_chi", "termination", "length", "speed_drift", "end_kappa", "end_chi"]
        return columns, _run(_geodesic_task, tasks, workers, columns)
    if command == "geodesic-dirichlet":
        num = cfg["numerics"]
        rtol, atol = num["ode_tolerances"]
        geo = GeodesicControls(
            rtol=rtol,
            atol=atol,
            fd_step=num["fd_step"],
            richardson=num["richardson"],
            det_threshold=num["det_threshold"],
            domain=None if p["domain"] is None else tuple(tuple(d) for d in p["domain"]),
            dps=tuple(tuple(d) for d in dps),
            capture_radius=num["capture_radius"],
        )
        angle_range = None if p["angle_range"] is None else tuple(p["angle_range"])
        ctrl = ShootingControls(angles=p["angles"], max_length=p["max_length"], angle_range=angle_range, geodesic=geo)
        res = solve_dirichlet(build_family(cfg["model"]), p["start"], p["end"], ctrl)
        rows = [{"angle": s.angle, "miss": s.miss, "length": s.length, "trace": s.trace.to_dict()} for s in res]
        return ["angle", "miss", "length"], rows
    raise ConfigError("command", f"unknown command {command!r}")


def _run(fn, tasks, workers, columns):
    try:
        return _ordered_map(fn, tasks, workers)
    except QManifoldError as exc:
        raise RunFailure(str(exc), columns, getattr(exc, "partial_results", [])) from exc
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise RunFailure(f"{type(exc).__name__}: {exc}", columns, getattr(exc, "partial_results", [])) from exc


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def meta_for(cfg: dict) -> dict:
    """Output metadata: version and the resolved config minus run-local fields
    (output path, worker count) that must not change the artifact."""
    resolved = copy.deepcopy(cfg)
    resolved.pop("workers", None)
    resolved["output"].pop("path", None)
    return {
        "tool": "qmanifold",
        "version": __version__,
        "command": cfg["command"],
        "model": cfg["model"]["type"],
        "N": cfg["model"].get("N"),
        "config": resolved,
    }


def _summary_rows(rows: list) -> list:
    out = []
    for r in rows:
        if isinstance(r, dict) and "start" in r:
            end = r["lam"][-1] if r["lam"] else [NAN, NAN]
            out.append([r["start"][0], r["start"][1], r["termination"], r["length"][-1] if r["length"] else NAN,
                        r["speed_drift"], end[0], end[1]])
        elif isinstance(r, dict):
            out.append([r["angle"], r["miss"], r["length"]])
        else:
            out.append(r)
    return out


def render(cfg: dict, columns: list[str], rows: list, fmt: str) -> str:
    meta = meta_for(cfg)
    if fmt == "json":
        if rows and not isinstance(rows[0], dict):
            data = [dict(zip(columns, r)) for r in rows]
        else:
            data = rows
        return json.dumps(_jsonable({"meta": meta, "data": data}), sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# tool: qmanifold {__version__}\n")
    buf.write(f"# command: {meta['command']}\n")
    buf.write(f"# model: {meta['model']}\n")
    buf.write(f"# N: {'n/a' if meta['N'] is None else meta['N']}\n")
    buf.write(f"# config: {json.dumps(_jsonable(meta['config']), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in _summary_rows(rows):
        writer.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmanifold", description="Ground-state manifold geometry scans.")
    ap.add_argument("--version", action="version", version=f"qmanifold {__version__}")
    ap.add_argument("command", help="one of: validate, " + ", ".join(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--workers", type=int, default=None, help="worker processes (overrides the config)")
    ap.add_argument("--output", default=None, help="output path, '-' for stdout (overrides the config)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    if command != "validate" and command not in COMMANDS:
        print(f"error: unknown command {command!r}; valid commands: validate, {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        raw = load_config(args.config)
        cfg = resolve_config(raw, None if command == "validate" else command)
        if args.workers is not None:
            cfg["workers"] = _number(args.workers, "--workers", integer=True, minimum=1)
        if args.output is not None:
            cfg["output"]["path"] = args.output
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if command == "validate":
        print("OK")
        print(json.dumps(cfg, indent=2, sort_keys=True))
        return EXIT_OK

    fmt, path = cfg["output"]["format"], cfg["output"]["path"]
    try:
        columns, rows = execute(cfg, cfg["workers"])
    except RunFailure as exc:
        partial = (path or f"{command}.{fmt}") + ".partial"
        write_output(render(cfg, exc.columns, exc.rows, fmt), partial)
        print(f"numerical failure: {exc}; partial output in {partial}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_output(render(cfg, columns, rows, fmt), path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
