"""Command-line experiment runner.

Experiments are YAML files with the sections ``problem``, ``grid``,
``boundary``, ``solve``, ``thresholds``, ``analyses`` and ``output``.  Every
scalar key can be overridden with a ``--section-key`` flag, e.g.
``--problem-p 3 --grid-nodes 257``.

Exit codes: 0 success, 2 configuration error, 3 non-convergence (reports are
still written), 4 insufficient grid resolution.
"""

from __future__ import annotations

import argparse
import copy
import datetime
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .blowup import blowup_sequence, homogeneity_defect, write_blowup
from .core import Grid, ScalarField, read_field, write_field
from .errors import EmptyPhase, InsufficientResolution, InvalidParameters, NonConvergence, UndefinedFit
from .fbanalysis import (
    bv_inequality_probe,
    decompose,
    default_thresholds,
    dyadic_radii,
    free_boundary_points,
    gradient_decay_fit,
    growth_fit,
    hessian_l2_estimate,
    nondegeneracy_fit,
    perimeter_estimate,
    small_gradient_measure,
)
from .oracles import (
    admissible,
    admissible_gamma_bound,
    alpha_p_lower,
    exact_one_d,
    holder_growth_report,
    nondegeneracy_constant,
)
from .params import ProblemParams
from .reporting import fmt, write_csv, write_record
from .solver import SolveConfig, p_sweep, regularization_floors, solve

log = logging.getLogger("quenchlab")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_RESOLUTION = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "QUENCHLAB_OUTPUT_ROOT"


class ConfigError(Exception):
    pass


SCHEMA = {
    "problem": {
        "p": float, "gamma": float, "lambda_plus": float, "lambda_minus": float,
        "grad_reg_delta": float, "pot_reg_eps": float, "floor_scale": float,
    },
    "grid": {"dim": int, "nodes": int, "half_width": float, "lower": list, "upper": list, "shape": list},
    "boundary": {
        "kind": str, "shift": float, "slope": list, "offset": float, "terms": list, "profile": str,
        "center": list, "radius": float, "power": float, "amplitude": float, "path": str,
    },
    "solve": {f.name: type(f.default) for f in dc_fields(SolveConfig)},
    "thresholds": {"tau": float, "sigma": float, "tau_scale": float, "sigma_scale": float},
    "output": {"directory": str},
}

DEFAULTS = {
    "problem": {"p": 2.0, "gamma": 1.0, "lambda_plus": 1.0, "lambda_minus": 1.0,
                "grad_reg_delta": None, "pot_reg_eps": None, "floor_scale": 1e-2},
    "grid": {"dim": 1, "nodes": 129, "half_width": 1.0},
    "boundary": {"kind": "exact1d-trace"},
    "solve": {},
    "thresholds": {"tau": None, "sigma": None, "tau_scale": 0.1, "sigma_scale": 10.0},
    "analyses": [],
    "output": {"directory": None},
}

ANALYSES = (
    "decompose", "growth_fit", "gradient_decay_fit", "nondegeneracy_fit", "small_gradient_measure",
    "hessian_l2_estimate", "bv_inequality_probe", "perimeter_estimate", "blowup", "holder_growth_check",
)

BOUNDARY_KINDS = ("exact1d-trace", "affine", "odd-polynomial", "radial", "file")


# -- configuration -----------------------------------------------------------

def _coerce(value, kind, where):
    if value is None:
        return None
    try:
        if kind is list:
            if isinstance(value, str):
                return [float(v) for v in value.split(",") if v.strip()]
            return list(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot read {value!r} as {kind.__name__}") from None


def load_config(path=None, overrides=None) -> dict:
    """Merge defaults, the YAML file and flag overrides; validate keys."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of sections")
    cfg = copy.deepcopy(DEFAULTS)
    for section, body in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}")
        if section == "analyses":
            if not isinstance(body, list):
                raise ConfigError("analyses must be a list")
            cfg["analyses"] = body
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            cfg[section][key] = _coerce(value, SCHEMA[section][key], f"{section}.{key}")
    for (section, key), value in (overrides or {}).items():
        cfg[section][key] = _coerce(value, SCHEMA[section][key], f"--{section}-{key.replace('_', '-')}")
    _validate(cfg)
    return cfg


def _validate(cfg):
    names = []
    for i, spec in enumerate(cfg["analyses"]):
        if isinstance(spec, str):
            spec = {"name": spec}
            cfg["analyses"][i] = spec
        if not isinstance(spec, dict) or "name" not in spec:
            raise ConfigError(f"analysis #{i} needs a name")
        if spec["name"] not in ANALYSES:
            raise ConfigError(f"unknown analysis {spec['name']!r}; known: {', '.join(ANALYSES)}")
        label = spec.get("label", spec["name"])
        if label in names:
            raise ConfigError(f"duplicate analysis label {label!r}; set distinct 'label' keys")
        names.append(label)
    b = cfg["boundary"]
    if b.get("kind") not in BOUNDARY_KINDS:
        raise ConfigError(f"unknown boundary kind {b.get('kind')!r}; known: {', '.join(BOUNDARY_KINDS)}")
    if b["kind"] == "file":
        if not b.get("path") or not Path(b["path"]).is_file():
            raise ConfigError(f"boundary file {b.get('path')!r} does not exist")
    try:
        problem_params(cfg)
        SolveConfig(**cfg["solve"])
    except (InvalidParameters, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    grid = cfg["grid"]
    if grid.get("dim") not in (1, 2):
        raise ConfigError("grid.dim must be 1 or 2")
    shape = grid.get("shape") or [grid["nodes"]] * grid["dim"]
    if any(int(n) < 3 for n in shape):
        raise ConfigError("grids need at least 3 nodes per axis")
    if grid["dim"] != 2 and any(a.get("name") == "perimeter_estimate" for a in cfg["analyses"]):
        raise ConfigError("perimeter_estimate needs a 2-D grid")


def problem_params(cfg) -> ProblemParams:
    pr = cfg["problem"]
    return ProblemParams(pr["p"], pr["gamma"], pr["lambda_plus"], pr["lambda_minus"])


def build_grid(cfg) -> Grid:
    g = cfg["grid"]
    if g.get("lower") is not None or g.get("upper") is not None:
        if g.get("lower") is None or g.get("upper") is None or g.get("shape") is None:
            raise ConfigError("grid.lower, grid.upper and grid.shape go together")
        if not len(g["lower"]) == len(g["upper"]) == len(g["shape"]) == g["dim"]:
            raise ConfigError("grid.lower/upper/shape must have grid.dim entries")
        return Grid.from_bounds(g["lower"], g["upper"], [int(n) for n in g["shape"]])
    return Grid.square(g["nodes"], dim=g["dim"], half_width=g["half_width"])


def boundary_field(cfg, grid: Grid, params: ProblemParams) -> ScalarField:
    """Boundary data on ``grid`` (interior values are ignored by the solver)."""
    b = cfg["boundary"]
    kind = b["kind"]
    mesh = grid.mesh()
    if kind == "exact1d-trace":
        try:
            return exact_one_d(params).sample(grid, shift=b.get("shift") or 0.0)
        except InvalidParameters as exc:
            raise ConfigError(str(exc)) from None
    if kind == "affine":
        slope = b.get("slope") or [1.0] + [0.0] * (grid.dim - 1)
        if len(slope) != grid.dim:
            raise ConfigError("boundary.slope needs one entry per axis")
        return ScalarField(grid, (b.get("offset") or 0.0) + sum(s * x for s, x in zip(slope, mesh)))
    if kind == "odd-polynomial":
        terms = b.get("terms") or [[1.0, 3, 0]]
        vals = np.zeros(grid.shape)
        for term in terms:
            if len(term) != 3:
                raise ConfigError("odd-polynomial terms are [coefficient, power_x1, power_x2]")
            c, i, j = float(term[0]), int(term[1]), int(term[2])
            if i % 2 != 1 or j < 0 or (grid.dim == 1 and j != 0):
                raise ConfigError(f"term {term} is not odd in x1")
            vals = vals + c * mesh[0] ** i * (mesh[1] ** j if grid.dim == 2 else 1.0)
        return ScalarField(grid, vals)
    if kind == "radial":
        center = b.get("center") or [0.0] * grid.dim
        r = grid.distance_from(center)
        radius = b.get("radius") or 0.0
        amp = b.get("amplitude")
        profile = b.get("profile") or "power"
        if profile == "power":
            amp = 1.0 if amp is None else amp
            return ScalarField(grid, amp * np.sign(r - radius) * np.abs(r - radius) ** (b.get("power") or params.eta))
        if profile == "deadcore":
            # exact one-phase solution for p = 2, gamma = 1 outside a disc (interval in 1-D)
            amp = params.lambda_plus if amp is None else amp
            if not radius > 0:
                raise ConfigError("deadcore profile needs boundary.radius > 0")
            with np.errstate(divide="ignore", invalid="ignore"):
                if grid.dim == 1:
                    vals = 0.5 * np.maximum(r - radius, 0.0) ** 2
                else:
                    vals = np.where(r > radius, (r**2 - radius**2) / 4 - radius**2 / 2 * np.log(r / radius), 0.0)
            return ScalarField(grid, amp * vals)
        raise ConfigError(f"unknown radial profile {profile!r}")
    field = read_field(b["path"])
    if field.grid != grid:
        raise ConfigError("boundary file grid differs from the configured grid")
    return field


def resolved_params(cfg, grid: Grid) -> ProblemParams:
    params = problem_params(cfg)
    pr = cfg["problem"]
    floors = regularization_floors(grid, params, pr["floor_scale"])
    delta = floors.grad_reg_delta if pr["grad_reg_delta"] is None else pr["grad_reg_delta"]
    eps = floors.pot_reg_eps if pr["pot_reg_eps"] is None else pr["pot_reg_eps"]
    return params.with_regularization(delta, eps)


def thresholds(cfg, grid: Grid, params: ProblemParams) -> tuple:
    th = cfg["thresholds"]
    tau0, sigma0 = default_thresholds(grid, params, th["tau_scale"], th["sigma_scale"])
    return (th["tau"] if th["tau"] is not None else tau0, th["sigma"] if th["sigma"] is not None else sigma0)


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def output_dir(cfg, config_path) -> Path:
    d = cfg["output"]["directory"]
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    if d is None:
        d = Path(config_path).stem if config_path else "quenchlab-run"
    d = Path(d)
    return d if d.is_absolute() else root / d


# -- analyses ----------------------------------------------------------------

class _Context:
    def __init__(self, u: ScalarField, params: ProblemParams, tau: float, sigma: float, out: Path):
        self.u, self.params, self.tau, self.sigma, self.out = u, params, tau, sigma, out
        self._pd = None

    @property
    def pd(self):
        if self._pd is None:
            self._pd = decompose(self.u, self.tau, self.sigma)
        return self._pd

    def center(self, spec):
        c = spec.get("center", "auto")
        if c == "auto":
            target = spec.get("target") or [0.0] * self.u.grid.dim
            return self.pd.nearest_degenerate_node(target)
        if len(c) != self.u.grid.dim:
            raise ConfigError(f"analysis {spec['name']}: center needs {self.u.grid.dim} coordinates")
        return tuple(float(v) for v in c)


def _run_analysis(ctx: _Context, spec: dict):
    """Return ``(columns, rows, summary)`` for one analysis entry."""
    name = spec["name"]
    u, params = ctx.u, ctx.params
    if name == "decompose":
        pts = free_boundary_points(ctx.pd)
        cols = ("x", "y")[: u.grid.dim]
        return cols, [dict(zip(cols, p)) for p in pts], ctx.pd.summary()
    if name in ("growth_fit", "gradient_decay_fit"):
        center = ctx.center(spec)
        if name == "growth_fit":
            fit = growth_fit(u, center, params.eta)
        else:
            fit = gradient_decay_fit(u, center, params.eta - 1)
        return fit.columns, fit.rows(), fit.summary()
    if name == "nondegeneracy_fit":
        center = ctx.center(spec)
        rows, summary = [], {"center": list(center)}
        for side in ("plus", "minus"):
            try:
                fit = nondegeneracy_fit(u, center, params.eta, side=side)
            except EmptyPhase:
                summary[side] = {"status": "empty"}
                continue
            rows += [{"side": side, **r} for r in fit.rows()]
            summary[side] = {**fit.summary(), "coefficient_floor": fit.coefficient_floor()}
        if params.gamma > 0:
            summary["theoretical_floor"] = nondegeneracy_constant(params, u.grid.dim)
        return ("side", "radius", "value", "scaled_value"), rows, summary
    if name == "small_gradient_measure":
        eps = [float(e) for e in spec.get("eps", [1e-1, 1e-2, 1e-3, 1e-4])]
        table = small_gradient_measure(u, params, eps)
        return table.columns, table.rows(), table.summary()
    if name == "hessian_l2_estimate":
        center = ctx.center(spec)
        table = hessian_l2_estimate(u, params, spec.get("radii"), center)
        return table.columns, table.rows(), table.summary()
    if name == "bv_inequality_probe":
        center = tuple(spec.get("center") or [0.0] * u.grid.dim)
        radius = float(spec.get("radius") or 0.5 * u.grid.distance_to_edge(center))
        probe = bv_inequality_probe(u, params, center, radius)
        return probe.columns, probe.rows(), probe.summary()
    if name == "perimeter_estimate":
        center = spec.get("center") or [0.0, 0.0]
        est = perimeter_estimate(ctx.pd, center, float(spec.get("radius", 0.5)))
        return est.columns, est.rows(), est.summary()
    if name == "blowup":
        center = ctx.center(spec)
        scales = spec.get("scales")
        if scales is None:
            scales = [r for r in dyadic_radii(u.grid, center, r_max=0.25) if r <= u.grid.distance_to_edge(center)]
        seq = blowup_sequence(u, center, scales, params)
        write_blowup(seq, ctx.out / f"blowup_{spec.get('label', name)}")
        summary = seq.summary()
        summary["homogeneity_defect"] = homogeneity_defect(seq) if len(seq.profiles) > 1 else 0.0
        return seq.columns, seq.rows(), summary
    if name == "holder_growth_check":
        center = tuple(spec.get("center") or [0.0] * u.grid.dim)
        rep = holder_growth_report(u, float(spec["alpha"]), float(spec["beta"]), float(spec["A"]), center)
        rows = [{"radius": r, "seminorm": s} for r, s in zip(rep.radii, rep.seminorms)]
        summary = {"hypothesis": rep.hypothesis, "conclusion": rep.conclusion, "held": rep.held,
                   "hypothesis_constant": rep.hypothesis_constant}
        return ("radius", "seminorm"), rows, summary
    raise ConfigError(f"unknown analysis {name!r}")


def run_analyses(cfg, u: ScalarField, params: ProblemParams, tau, sigma, out: Path) -> dict:
    ctx = _Context(u, params, tau, sigma, out)
    results = {}
    for spec in cfg["analyses"]:
        label = spec.get("label", spec["name"])
        try:
            cols, rows, summary = _run_analysis(ctx, spec)
            summary = {"status": "ok", **summary}
        except (UndefinedFit, EmptyPhase) as exc:
            cols, rows, summary = ("value",), [], {"status": "undefined", "reason": str(exc)}
        except InvalidParameters as exc:
            raise ConfigError(f"analysis {label}: {exc}") from None
        except KeyError as exc:
            raise ConfigError(f"analysis {label}: missing parameter {exc}") from None
        write_csv(out / f"{label}.csv", cols, rows)
        results[label] = summary
    return results


# -- report writing ----------------------------------------------------------

def write_solve_outputs(report, out: Path):
    write_record(out / "solve_report.json", report.to_record())
    cols = ("iteration", "total", "dirichlet", "potential_plus", "potential_minus")
    rows = [{"iteration": i, **e.to_dict()} for i, e in enumerate(report.energy_history)]
    write_csv(out / "energy_history.csv", cols, rows)
    write_field(out / "solution.txt", report.solution)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, cfg, params: ProblemParams, tau, sigma, status: str, code: int, results=None):
    files = {p.relative_to(out).as_posix(): _sha(p) for p in sorted(out.rglob("*"))
             if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "tool": "quenchlab",
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "regularization": {"grad_reg_delta": params.grad_reg_delta, "pot_reg_eps": params.pot_reg_eps},
        "thresholds": {"tau": tau, "sigma": sigma},
        "status": status,
        "exit_code": code,
        "results": results or {},
        "files": files,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    write_record(out / "manifest.json", manifest)


# -- subcommands -------------------------------------------------------------

def _prepare(args):
    cfg = load_config(args.config, _overrides(args))
    if getattr(args, "field", None):
        if not Path(args.field).is_file():
            raise ConfigError(f"field file {args.field} does not exist")
        u = read_field(args.field)
        grid = u.grid
    else:
        u, grid = None, build_grid(cfg)
    params = resolved_params(cfg, grid)
    tau, sigma = thresholds(cfg, grid, params)
    out = output_dir(cfg, args.config)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, grid, params, tau, sigma, out, u


def _solve_step(cfg, grid, params, out):
    g = boundary_field(cfg, grid, params)
    try:
        report = solve(g, params, SolveConfig(**cfg["solve"]))
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from None
    write_solve_outputs(report, out)
    return report


def cmd_run(args, analyses=True):
    cfg, grid, params, tau, sigma, out, _ = _prepare(args)
    report = _solve_step(cfg, grid, params, out)
    code, status = (EXIT_OK, "ok") if report.converged else (EXIT_NONCONVERGENCE, "not-converged")
    results = {}
    try:
        if analyses:
            results = run_analyses(cfg, report.solution, params, tau, sigma, out)
    except InsufficientResolution as exc:
        write_manifest(out, cfg, params, tau, sigma, f"resolution-error: {exc}", EXIT_RESOLUTION, results)
        raise
    results["solve"] = {"converged": report.converged, "iterations_used": report.iterations_used,
                        "el_residual_sup": report.el_residual_sup, "sup_norm": report.sup_norm}
    write_manifest(out, cfg, params, tau, sigma, status, code, results)
    print(f"{status}: reports in {out}")
    return code


def cmd_solve(args):
    return cmd_run(args, analyses=False)


def cmd_analyze(args):
    cfg, grid, params, tau, sigma, out, u = _prepare(args)
    if u is None:
        raise ConfigError("analyze needs --field")
    if not cfg["analyses"]:
        names = [n for n in ANALYSES if n not in ("holder_growth_check", "blowup")]
        if grid.dim != 2:
            names.remove("perimeter_estimate")
        cfg["analyses"] = [{"name": n} for n in names]
    try:
        results = run_analyses(cfg, u, params, tau, sigma, out)
    except InsufficientResolution as exc:
        write_manifest(out, cfg, params, tau, sigma, f"resolution-error: {exc}", EXIT_RESOLUTION)
        raise
    write_manifest(out, cfg, params, tau, sigma, "ok", EXIT_OK, results)
    print(f"ok: reports in {out}")
    return EXIT_OK


def cmd_blowup(args):
    cfg, grid, params, tau, sigma, out, u = _prepare(args)
    code, status = EXIT_OK, "ok"
    if u is None:
        report = _solve_step(cfg, grid, params, out)
        u = report.solution
        if not report.converged:
            code, status = EXIT_NONCONVERGENCE, "not-converged"
    spec = {"name": "blowup", "center": args.center or "auto"}
    if args.scales:
        spec["scales"] = args.scales
    cfg["analyses"] = [spec]
    results = run_analyses(cfg, u, params, tau, sigma, out)
    write_manifest(out, cfg, params, tau, sigma, status, code, results)
    print(f"homogeneity defect {fmt(results['blowup'].get('homogeneity_defect'))}")
    return code


def cmd_psweep(args):
    cfg, grid, params, tau, sigma, out, _ = _prepare(args)
    g = boundary_field(cfg, grid, params)
    base = problem_params(cfg)
    try:
        sweep = p_sweep(g, base.gamma, args.p_sequence, SolveConfig(**cfg["solve"]), base=base,
                        floor_scale=cfg["problem"]["floor_scale"])
    except NonConvergence as exc:
        write_manifest(out, cfg, params, tau, sigma, f"not-converged: {exc}", EXIT_NONCONVERGENCE)
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    write_csv(out / "psweep.csv", ("p", "c0_distance", "c1_distance"), sweep.rows())
    write_manifest(out, cfg, params, tau, sigma, "ok", EXIT_OK, {"psweep": {"rows": sweep.rows()}})
    for row in sweep.rows():
        print(" ".join(f"{k}={fmt(v)}" for k, v in row.items()))
    return EXIT_OK


def _emit(record: dict, path=None):
    text = "\n".join(f"{k} = {fmt(v)}" for k, v in record.items()) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    sys.stdout.write(text)


def cmd_exact1d(args):
    try:
        params = ProblemParams(args.p, args.gamma, args.lambda_plus, args.lambda_minus)
        ex = exact_one_d(params)
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from None
    res, stated = ex.el_identity_residuals(), ex.stated_identity_residuals()
    _emit({"p": params.p, "gamma": params.gamma, "lambda_plus": params.lambda_plus,
           "lambda_minus": params.lambda_minus, "eta": ex.eta, "c_plus": ex.c_plus, "c_minus": ex.c_minus,
           "el_residual_plus": res[0], "el_residual_minus": res[1],
           "stated_identity_residual_plus": stated[0], "stated_identity_residual_minus": stated[1]}, args.output)
    return EXIT_OK


def cmd_alphap(args):
    try:
        bound = alpha_p_lower(args.p)
    except InvalidParameters as exc:
        raise ConfigError(str(exc)) from None
    record = {"p": bound.p, "alpha_lower": bound.alpha_lower, "eta_max": 1.0 + bound.alpha_lower,
              "gamma_sup": admissible_gamma_bound(args.p)}
    if args.gamma is not None:
        record["gamma"] = args.gamma
        record["admissible"] = admissible(args.p, args.gamma)
    _emit(record, args.output)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def _add_config_flags(sp):
    sp.add_argument("config", nargs="?", help="YAML experiment file")
    for section, keys in SCHEMA.items():
        for key, kind in keys.items():
            flag = f"--{section}-{key.replace('_', '-')}"
            sp.add_argument(flag, dest=f"cfg__{section}__{key}", default=None,
                            help=f"override {section}.{key}" + (" (comma separated)" if kind is list else ""))


def _overrides(args) -> dict:
    out = {}
    for name, value in vars(args).items():
        if name.startswith("cfg__") and value is not None:
            _, section, key = name.split("__")
            out[(section, key)] = value
    return out


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quenchlab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"quenchlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="solve and run the configured analyses")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("solve", help="solve only")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("analyze", help="run analyses on a field file")
    _add_config_flags(sp)
    sp.add_argument("--field", required=True, help="field file to analyse")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("blowup", help="blow-up sequence of a solve or field file")
    _add_config_flags(sp)
    sp.add_argument("--field", help="field file (default: solve the config)")
    sp.add_argument("--center", type=_float_list, help="center coordinates (default: nearest degenerate node)")
    sp.add_argument("--scales", type=_float_list, help="decreasing scales")
    sp.set_defaults(func=cmd_blowup)

    sp = sub.add_parser("psweep", help="solves for a sequence of p and distances to p = 2")
    _add_config_flags(sp)
    sp.add_argument("--p-sequence", type=_float_list, required=True)
    sp.set_defaults(func=cmd_psweep)

    sp = sub.add_parser("exact1d", help="constants of the explicit 1-D profile")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--lambda-plus", type=float, default=1.0)
    sp.add_argument("--lambda-minus", type=float, default=1.0)
    sp.add_argument("--output", help="also write the record here")
    sp.set_defaults(func=cmd_exact1d)

    sp = sub.add_parser("alphap", help="lower bound for alpha_p and the admissible gamma range")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--output", help="also write the record here")
    sp.set_defaults(func=cmd_alphap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientResolution as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION


if __name__ == "__main__":
    sys.exit(main())
