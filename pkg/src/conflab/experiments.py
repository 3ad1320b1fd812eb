"""Experiment configs: schema, validation and the runner behind ``lab run``.

A config is a JSON object with ``version`` (1), a mandatory ``seed`` and an
``experiment`` kind; the remaining blocks depend on the kind. Reports are
plain dicts; everything except ``timestamp`` and ``timing`` entries is a
deterministic function of the config.
"""

from __future__ import annotations

import copy
import datetime as _dt
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from ._accel import backend_name
from .cat0 import cat0_scan, geodesic_distance_convexity
from .conformal import composition_law_check, conformal_change, conformal_curvature_check, exp_factor
from .fields import FieldError, Rule, make_field
from .harmonic import (
    CONVEX_LIBRARY, ConvergenceError, SpaceMap, conformal_factor_estimate, cyclically_monotone, ks_energy,
    pullback_subharmonicity_test, solve_dirichlet, solve_plateau,
)
from .fields import triangulation
from .metric import LengthSpace, SpaceError, load_space, save_space
from .models import ModelSpec, generate, oracle_fidelity
from .pipeline import PipelineError, PipelineParams, curve_samples, main_theorem_pipeline
from .targets import TargetSpace

SCHEMA_VERSION = 1
EXPERIMENTS = ("oracle-distance", "deform", "cat0-scan", "curvature-check", "dirichlet", "plateau",
               "pipeline", "composition-law")
VERDICTS = ("PASS", "FAIL", "REFUSED")
VOLATILE_KEYS = ("timestamp", "timing")

_RULE = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}
_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "seed", "experiment"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "experiment": {"enum": list(EXPERIMENTS)},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "expect": {"enum": list(VERDICTS)},
        "space": {
            "oneOf": [
                {"type": "object", "required": ["file"], "additionalProperties": False,
                 "properties": {"file": {"type": "string"}}},
                {"type": "object", "required": ["kind"], "additionalProperties": False,
                 "properties": {
                     "kind": {"enum": ["flat-disc", "hyperbolic-disc", "cone", "tree"]},
                     "radius": _POS, "spacing": _POS, "total_angle": _POS,
                     "legs": {"type": "array", "items": _POS, "minItems": 1},
                     "neighbor_scale": _POS, "vertex_budget": _INT}},
            ]
        },
        "field": _RULE,
        "factor": _RULE,
        "quadrature": {"enum": ["trapezoid", "midpoint", "segment"]},
        "scan": {
            "type": "object", "additionalProperties": False,
            "properties": {"triangles": _INT, "side_points": {"type": "integer", "minimum": 2},
                           "tol": _POS, "cluster_radius": _POS, "min_side": _POS,
                           "convexity_pairs": {"type": "integer", "minimum": 0}},
        },
        "oracle": {
            "type": "object", "additionalProperties": False,
            "properties": {"pairs": _INT, "max_relative_error": _POS, "refine": {"type": "boolean"},
                           "min_ratio": _POS},
        },
        "curvature": {
            "type": "object", "additionalProperties": False,
            "properties": {"C_max": _POS, "margin": _POS, "refine": {"type": "boolean"},
                           "stability": _POS},
        },
        "composition": {
            "type": "object", "required": ["rho1", "rho2"], "additionalProperties": False,
            "properties": {"rho1": _RULE, "rho2": _RULE, "pairs": _INT},
        },
        "target": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {"kind": {"enum": ["euclidean-plane", "hyperbolic-plane", "tree"]},
                           "legs": {"type": "array", "items": _POS, "minItems": 2}},
        },
        "boundary": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {"kind": {"enum": ["identity", "affine", "points", "tree-arcs"]},
                           "matrix": {"type": "array"}, "offset": {"type": "array"},
                           "points": {"type": "array"}, "depth": _POS},
        },
        "curve": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {"kind": {"enum": ["circle", "ellipse", "points"]},
                           "radius": _POS, "hyperbolic_radius": _POS, "a": _POS, "b": _POS,
                           "center": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                           "samples": {"type": "integer", "minimum": 3}, "points": {"type": "array"}},
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {"tol": _POS, "max_sweeps": _INT, "mode": {"enum": ["gauss-seidel", "jacobi"]},
                           "linear_oracle": {"type": "boolean"}, "compare_modes": {"type": "boolean"},
                           "fuglede": {"type": "boolean"}, "rules": {"type": "array", "items": _RULE},
                           "max_outer": _INT, "outer_tol": _POS},
        },
        "params": {"type": "object"},
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"report": {"type": "string"}, "csv": {"type": "string"},
                           "space": {"type": "string"}, "solution": {"type": "string"}},
        },
    },
}

_REQUIRED_BLOCKS = {
    "oracle-distance": ["space"],
    "deform": ["space"],
    "cat0-scan": ["space"],
    "curvature-check": ["space", "field"],
    "dirichlet": ["space", "target", "boundary"],
    "plateau": ["space", "target", "curve"],
    "pipeline": ["space", "field", "curve"],
    "composition-law": ["space", "composition"],
}


class ConfigError(ValueError):
    """Config does not validate; the message names the offending field."""


def validate_config(config: Any) -> dict[str, Any]:
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    if "version" in config and config["version"] != SCHEMA_VERSION:
        raise ConfigError(f"field 'version': unsupported config version {config['version']!r}; "
                          f"expected {SCHEMA_VERSION}")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: (len(e.absolute_path), list(e.absolute_path)))
    if errors:
        err = errors[0]
        if err.validator == "required":
            missing = [k for k in err.validator_value if k not in err.instance]
            where = "/".join(str(p) for p in err.absolute_path)
            field_name = f"{where}/{missing[0]}" if where else missing[0]
            raise ConfigError(f"field '{field_name}': required field is missing")
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"field '{where}': {err.message}")
    for block in _REQUIRED_BLOCKS[config["experiment"]]:
        if block not in config:
            raise ConfigError(f"field '{block}': required for experiment {config['experiment']!r}")
    return config


# ---------------------------------------------------------------------------
# helpers


def _space(cfg: dict[str, Any], base_dir: Path | None = None) -> tuple[LengthSpace, ModelSpec | None]:
    spec = cfg["space"]
    if "file" in spec:
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_space(path), None
    ms = ModelSpec.from_json(spec)
    return generate(ms), ms


def _deformed(cfg: dict[str, Any], space: LengthSpace) -> LengthSpace:
    """Apply ``factor`` and then ``e^field`` when present."""
    quad = cfg.get("quadrature", "trapezoid")
    out = space
    if "factor" in cfg:
        out = conformal_change(out, cfg["factor"], quad)
    if "field" in cfg:
        f = make_field(out, cfg["field"])
        if quad == "trapezoid":
            out = conformal_change(out, exp_factor(f), quad)
        else:
            out = conformal_change(out, {"kind": "exp", "of": cfg["field"]}, quad)
    return out


def _scan_args(cfg: dict[str, Any]) -> dict[str, Any]:
    s = cfg.get("scan", {})
    return {"n_triangles": s.get("triangles", 1000), "n_side_points": s.get("side_points", 5),
            "tol": s.get("tol"), "seed": cfg["seed"], "cluster_radius": s.get("cluster_radius"),
            "min_side": s.get("min_side")}


def _target(cfg: dict[str, Any]) -> TargetSpace:
    return TargetSpace.from_json(cfg["target"])


def _boundary_data(cfg: dict[str, Any], domain: LengthSpace, target: TargetSpace) -> np.ndarray:
    b = cfg["boundary"]
    z = domain.coords[domain.boundary]
    if b["kind"] == "identity":
        return target.validate(z)
    if b["kind"] == "affine":
        A = np.asarray(b.get("matrix", [[1.0, 0.0], [0.0, 1.0]]), dtype=float)
        c = np.asarray(b.get("offset", [0.0, 0.0]), dtype=float)
        return target.validate(z @ A.T + c)
    if b["kind"] == "tree-arcs":
        # boundary split into as many arcs as legs; each arc bulges up its leg
        if target.kind != "tree":
            raise SpaceError("tree-arcs boundary needs a tree target")
        m = len(target.legs)
        depth = float(b.get("depth", 0.8))
        ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
        sector = 2 * math.pi / m
        leg = np.floor(ang / sector)
        frac = np.mod(ang, sector) / sector
        t = depth * np.sin(math.pi * frac) * np.asarray(target.legs)[leg.astype(int)]
        return target.validate(np.column_stack([leg, t]))
    pts = np.asarray(b["points"], dtype=float)
    if len(pts) != len(domain.boundary):
        raise SpaceError(f"boundary points: got {len(pts)}, need {len(domain.boundary)}")
    return target.validate(pts)


def _write_json(path: str | Path, data: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps(data))


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(data: Any) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(data), sort_keys=True, indent=2) + "\n"


def strip_volatile(report: Any) -> Any:
    """Drop timestamp and timing entries (recursively) for reproducibility checks."""
    if isinstance(report, dict):
        return {k: strip_volatile(v) for k, v in report.items() if k not in VOLATILE_KEYS}
    if isinstance(report, list):
        return [strip_volatile(v) for v in report]
    return report


# ---------------------------------------------------------------------------
# experiments; each returns (verdict, result dict, artifacts)


@dataclass
class Outcome:
    verdict: str
    result: dict[str, Any]
    csv_rows: Callable[[str], None] | None = None
    space: LengthSpace | None = None
    solution: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)


def _exp_oracle(cfg, base_dir) -> Outcome:
    o = cfg.get("oracle", {})
    pairs = o.get("pairs", 1000)
    max_rel = o.get("max_relative_error", 0.02)
    space, spec = _space(cfg, base_dir)
    space = _deformed(cfg, space)
    if space.oracle is None:
        raise SpaceError("oracle-distance needs a space with a closed-form oracle")
    rep = oracle_fidelity(space, pairs, cfg["seed"])
    result: dict[str, Any] = {"coarse": rep.to_dict(), "max_relative_error_allowed": max_rel}
    ok = rep.max_relative_error <= max_rel
    if o.get("refine"):
        if spec is None:
            raise SpaceError("refinement needs a model spec, not a space file")
        fine_space = _deformed(cfg, generate(spec.with_spacing(spec.spacing / 2)))
        fine = oracle_fidelity(fine_space, pairs, cfg["seed"])
        min_ratio = o.get("min_ratio", 1.6)
        ratio = math.inf if fine.max_relative_error == 0 else rep.max_relative_error / fine.max_relative_error
        exact = rep.max_relative_error <= 1e-12 and fine.max_relative_error <= 1e-12
        result.update(fine=fine.to_dict(), ratio=ratio, min_ratio=min_ratio, exact=exact)
        ok = ok and (exact or ratio >= min_ratio)
    return Outcome("PASS" if ok else "FAIL", result)


def _exp_deform(cfg, base_dir) -> Outcome:
    space, _ = _space(cfg, base_dir)
    out = _deformed(cfg, space)
    ratio = out.weights / space.weights
    result = {"vertices": out.n, "edges": out.num_edges, "spacing": out.spacing,
              "edge_factor_min": float(ratio.min()), "edge_factor_max": float(ratio.max()),
              "oracle": out.oracle.to_json() if out.oracle else None, "labels": out.labels}
    verdict = "PASS"
    csv = None
    if "scan" in cfg:
        rep = cat0_scan(out, **_scan_args(cfg))
        result["scan"] = rep.to_dict()
        verdict = rep.verdict
        csv = rep.write_csv
    return Outcome(verdict, result, csv, space=out)


def _exp_scan(cfg, base_dir) -> Outcome:
    space, _ = _space(cfg, base_dir)
    space = _deformed(cfg, space)
    rep = cat0_scan(space, **_scan_args(cfg))
    result: dict[str, Any] = {"scan": rep.to_dict(), "spacing": space.spacing, "vertices": space.n}
    verdict = rep.verdict
    n_conv = cfg.get("scan", {}).get("convexity_pairs", 0)
    if n_conv:
        conv = geodesic_distance_convexity(space, n_pairs=n_conv, seed=cfg["seed"])
        result["distance_convexity"] = conv.to_dict()
        if conv.verdict != "PASS":
            verdict = "FAIL"
    return Outcome(verdict, result, rep.write_csv)


def _exp_curvature(cfg, base_dir) -> Outcome:
    c = cfg.get("curvature", {})
    space, spec = _space(cfg, base_dir)
    kw = {"C_max": c.get("C_max", 1.0), "margin": c.get("margin", 4.0)}
    rep = conformal_curvature_check(space, cfg["field"], **kw)
    result: dict[str, Any] = {"coarse": rep.to_dict()}
    verdict = rep.verdict
    if c.get("refine"):
        if spec is None:
            raise SpaceError("refinement needs a model spec, not a space file")
        fine = conformal_curvature_check(generate(spec.with_spacing(spec.spacing / 2)), cfg["field"], **kw)
        stability = c.get("stability", 1.2)
        stable = fine.statistic <= stability * rep.statistic
        result.update(fine=fine.to_dict(), stable=stable, stability=stability)
        if fine.verdict != "PASS" or not stable:
            verdict = "FAIL"
    return Outcome(verdict, result)


def _solution(domain_cfg, m: SpaceMap, energy: float, sweeps: int) -> dict[str, Any]:
    return {"domain": domain_cfg, "target": m.target.to_json(), "assignment": m.assignment.tolist(),
            "energy": energy, "sweeps": sweeps}


def _exp_dirichlet(cfg, base_dir) -> Outcome:
    s = cfg.get("solver", {})
    domain, _ = _space(cfg, base_dir)
    target = _target(cfg)
    bdata = _boundary_data(cfg, domain, target)
    tol = s.get("tol", 1e-10)
    kw = {"tol": tol, "max_sweeps": s.get("max_sweeps", 20000)}
    m, rep = solve_dirichlet(domain, target, bdata, mode=s.get("mode", "gauss-seidel"), **kw)
    result: dict[str, Any] = {"energy": rep.to_dict(), "checks": {}}
    ok = rep.converged and rep.monotone
    if s.get("linear_oracle"):
        if target.kind != "euclidean-plane":
            raise SpaceError("the linear-solve oracle needs a euclidean-plane target")
        diff = float(np.abs(m.assignment - linear_dirichlet(domain, bdata)).max())
        result["checks"]["linear_oracle"] = {"max_difference": diff, "tol": 1e-8, "pass": diff <= 1e-8}
        ok = ok and diff <= 1e-8
    if s.get("compare_modes"):
        other = "jacobi" if s.get("mode", "gauss-seidel") == "gauss-seidel" else "gauss-seidel"
        m2, rep2 = solve_dirichlet(domain, target, bdata, mode=other, **kw)
        diff = float(np.max(target.distance(m.assignment, m2.assignment)))
        result["checks"]["compare_modes"] = {"other": other, "max_distance": diff, "tol": 10 * tol,
                                             "pass": diff <= 10 * tol, "other_monotone": rep2.monotone}
        ok = ok and diff <= 10 * tol and rep2.monotone
    rules = list(s.get("rules", []))
    if s.get("fuglede"):
        rules = CONVEX_LIBRARY[target.kind] + rules
    if rules:
        fug = [pullback_subharmonicity_test(m, r).to_dict() for r in rules]
        for d in fug:
            d.pop("violations", None)
        result["checks"]["fuglede"] = fug
        ok = ok and all(d["verdict"] == "PASS" for d in fug)
    return Outcome("PASS" if ok else "FAIL", result,
                   solution=_solution(cfg["space"], m, rep.energy, rep.sweeps))


def linear_dirichlet(domain: LengthSpace, boundary_points: np.ndarray) -> np.ndarray:
    """Direct sparse solve of the cotangent Laplace equation, per coordinate."""
    from scipy.sparse.linalg import spsolve

    L = triangulation(domain).laplacian_matrix().tocsr()
    interior = np.flatnonzero(domain.is_interior())
    bnd = domain.boundary
    out = np.zeros((domain.n, 2))
    out[bnd] = boundary_points
    A = L[interior][:, interior]
    B = L[interior][:, bnd]
    for k in range(2):
        out[interior, k] = spsolve(A.tocsc(), -B @ boundary_points[:, k])
    return out


def _exp_plateau(cfg, base_dir) -> Outcome:
    s = cfg.get("solver", {})
    domain, _ = _space(cfg, base_dir)
    target = _target(cfg)
    samples = curve_samples(cfg["curve"], target, len(domain.boundary))
    res = solve_plateau(domain, target, samples, tol=s.get("outer_tol", 1e-9),
                        max_outer=s.get("max_outer", 200), dirichlet_tol=s.get("tol", 1e-10),
                        max_sweeps=s.get("max_sweeps", 50000), mode=s.get("mode", "gauss-seidel"))
    lam, lrep = conformal_factor_estimate(res.map)
    area = triangulation(domain).vertex_area
    lam_energy = float(2.0 * np.sum(lam.values ** 2 * area))
    consistency = lam_energy / res.energy.energy if res.energy.energy > 0 else math.nan
    monotone = cyclically_monotone(res.positions, len(samples))
    energies = res.outer_energies
    nonincreasing = all(b <= a + 1e-12 * max(1.0, a) for a, b in zip(energies, energies[1:]))
    uniform = solve_dirichlet(domain, target, samples[np.floor(
        np.arange(len(domain.boundary)) * len(samples) / len(domain.boundary) + 1e-9).astype(int)],
        tol=s.get("tol", 1e-10), max_sweeps=s.get("max_sweeps", 50000))[1].energy
    result = {"plateau": res.to_dict(), "energy": res.energy.to_dict(), "uniform_energy": uniform,
              "lambda": lrep.to_dict(), "lambda_energy": lam_energy, "lambda_consistency": consistency,
              "cyclically_monotone": monotone, "outer_nonincreasing": nonincreasing}
    result["lambda"].pop("excluded", None)
    ok = monotone and nonincreasing and lrep.verdict == "PASS" and abs(consistency - 1.0) <= 0.05
    return Outcome("PASS" if ok else "FAIL", result,
                   solution=_solution(cfg["space"], res.map, res.energy.energy, res.energy.sweeps))


def _exp_pipeline(cfg, base_dir) -> Outcome:
    params = dict(cfg.get("params", {}))
    params["seed"] = cfg["seed"]
    if "scan" in cfg:
        sc = cfg["scan"]
        params.setdefault("n_triangles", sc.get("triangles", 1000))
        params.setdefault("n_side_points", sc.get("side_points", 5))
        if "tol" in sc:
            params.setdefault("scan_tol", sc["tol"])
    if "file" in cfg["space"]:
        raise SpaceError("pipeline needs a model spec for X")
    rep = main_theorem_pipeline(cfg["space"], cfg["field"], cfg["curve"], PipelineParams.from_json(params))
    result = rep.to_dict()
    for st in result["stages"].values():
        st.pop("excluded", None)
    return Outcome(rep.verdict, result)


def _exp_composition(cfg, base_dir) -> Outcome:
    space, _ = _space(cfg, base_dir)
    c = cfg["composition"]
    rep = composition_law_check(space, c["rho1"], c["rho2"], n_pairs=c.get("pairs", 1000), seed=cfg["seed"],
                                quadrature=cfg.get("quadrature", "midpoint"))
    return Outcome(rep.verdict, rep.to_dict())


RUNNERS: dict[str, Callable[[dict[str, Any], Path | None], Outcome]] = {
    "oracle-distance": _exp_oracle,
    "deform": _exp_deform,
    "cat0-scan": _exp_scan,
    "curvature-check": _exp_curvature,
    "dirichlet": _exp_dirichlet,
    "plateau": _exp_plateau,
    "pipeline": _exp_pipeline,
    "composition-law": _exp_composition,
}

#: errors reported as "execution error" (exit status 2)
EXECUTION_ERRORS = (ConfigError, SpaceError, FieldError, ConvergenceError, PipelineError, ValueError, OSError,
                    KeyError)


@dataclass
class RunResult:
    report: dict[str, Any]
    status: int  # 0 PASS, 1 FAIL/REFUSED

    @property
    def verdict(self) -> str:
        return self.report["verdict"]


def run_config(config: dict[str, Any], out_dir: str | Path | None = None, base_dir: str | Path | None = None,
               write: bool = True) -> RunResult:
    """Validate and run one config; write its artifacts; return the report.

    Raises :class:`ConfigError` (or another execution error) on failure; the
    CLI maps those to exit status 2.
    """
    cfg = validate_config(copy.deepcopy(config))
    base = Path(base_dir) if base_dir is not None else None
    name = cfg.get("name", cfg["experiment"])
    t0 = time.perf_counter()
    outcome = RUNNERS[cfg["experiment"]](cfg, base)
    elapsed = time.perf_counter() - t0
    report = {
        "name": name,
        "experiment": cfg["experiment"],
        "verdict": outcome.verdict,
        "result": outcome.result,
        "config": cfg,
        "backend": backend_name(),
        "package_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "timing": {"seconds": elapsed},
    }
    if "expect" in cfg:
        report["expected"] = cfg["expect"]
    if write:
        paths = _artifact_paths(cfg, name, out_dir)
        if outcome.csv_rows is not None and paths.get("csv"):
            Path(paths["csv"]).parent.mkdir(parents=True, exist_ok=True)
            outcome.csv_rows(paths["csv"])
            report["artifacts"] = {"csv": str(paths["csv"])}
        if outcome.space is not None and paths.get("space"):
            Path(paths["space"]).parent.mkdir(parents=True, exist_ok=True)
            save_space(outcome.space, paths["space"])
            report.setdefault("artifacts", {})["space"] = str(paths["space"])
        if outcome.solution is not None and paths.get("solution"):
            _write_json(paths["solution"], outcome.solution)
            report.setdefault("artifacts", {})["solution"] = str(paths["solution"])
        if paths.get("report"):
            _write_json(paths["report"], report)
    status = 0 if outcome.verdict == "PASS" else 1
    return RunResult(report, status)


def _artifact_paths(cfg, name, out_dir) -> dict[str, str]:
    out = dict(cfg.get("output", {}))
    if out_dir is not None:
        d = Path(out_dir)
        out.setdefault("report", str(d / f"{name}.json"))
        out.setdefault("csv", str(d / f"{name}.csv"))
        if cfg["experiment"] == "deform":
            out.setdefault("space", str(d / f"{name}.space.json"))
        if cfg["experiment"] in ("dirichlet", "plateau"):
            out.setdefault("solution", str(d / f"{name}.solution.json"))
    return out


def load_config(path: str | Path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
