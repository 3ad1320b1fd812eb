"""The seven-stage main-theorem pipeline.

Given a model space X, a convex field f on X and a Jordan curve in X, the
pipeline builds a least-energy disc v spanning the curve, pulls the metric
back through v to a space Y, and checks that Y, the reweighted space
``e^(f o v) Y`` and ``e^f X`` all pass the CAT(0) comparison scan, with v a
majorization of the curve.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .cat0 import cat0_scan, majorization_check
from .conformal import conformal_change, exp_factor
from .fields import Rule, ScalarField, convexity_check, make_field
from .harmonic import conformal_factor_estimate, intrinsic_pullback, rule_on_target, solve_plateau
from .metric import LengthSpace, SpaceError
from .models import ModelSpec, generate
from .targets import TargetSpace

STAGES = (
    "convexity-pretest", "generate", "plateau", "conformal-factor",
    "intrinsic-pullback-scan", "majorization", "weighted-pullback-scan", "direct-scan",
)


class PipelineError(RuntimeError):
    """A stage raised; ``stage`` names it."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"stage {stage!r} failed: {error}")
        self.stage = stage
        self.error = error


@dataclass
class PipelineParams:
    domain_spacing: float | None = None  # defaults to the spacing of X
    n_triangles: int = 1000
    n_side_points: int = 5
    seed: int = 0
    scan_tol: float | None = None  # default 3h of the scanned space
    majorization_tol: float | None = None  # default 5h of the domain
    plateau_tol: float = 1e-9
    convexity_geodesics: int = 200
    force: bool = False

    @classmethod
    def from_json(cls, data: dict[str, Any] | None) -> "PipelineParams":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SpaceError(f"unknown pipeline parameter(s): {sorted(unknown)}")
        return cls(**data)


@dataclass
class PipelineReport:
    verdict: str
    stages: dict[str, dict[str, Any]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> dict[str, Any]:
        return {"name": "pipeline", "verdict": self.verdict, "stages": self.stages, "timing": self.timings}


def target_for(spec: ModelSpec, X: LengthSpace) -> TargetSpace:
    """Closed-form target matching the model, or the mesh itself."""
    if spec.kind == "flat-disc":
        return TargetSpace.euclidean()
    if spec.kind == "hyperbolic-disc":
        return TargetSpace.hyperbolic()
    if spec.kind == "tree":
        return TargetSpace.tree(spec.legs)
    return TargetSpace.mesh(X)


def curve_samples(gamma: dict[str, Any], target: TargetSpace, n_boundary: int) -> np.ndarray:
    """Samples of a curve spec: circle, ellipse or explicit points.

    ``circle`` takes ``radius`` (chart units) or, on the hyperbolic plane,
    ``hyperbolic_radius``; ``ellipse`` takes ``a`` and ``b``. Both accept
    ``center`` and ``samples`` (default three per boundary vertex).
    """
    kind = gamma.get("kind")
    if kind == "points":
        return target.validate(gamma["points"])
    if kind not in ("circle", "ellipse"):
        raise SpaceError(f"unknown curve kind {kind!r}")
    if target.kind not in ("euclidean-plane", "hyperbolic-plane"):
        raise SpaceError("circle and ellipse curves need a planar target; give explicit points")
    m = int(gamma.get("samples", 3 * n_boundary))
    th = 2 * math.pi * np.arange(m) / m
    cx, cy = gamma.get("center", (0.0, 0.0))
    if kind == "circle":
        if "hyperbolic_radius" in gamma:
            if target.kind != "hyperbolic-plane":
                raise SpaceError("hyperbolic_radius needs the hyperbolic plane")
            a = b = math.tanh(0.5 * float(gamma["hyperbolic_radius"]))
        else:
            a = b = float(gamma["radius"])
    else:
        a, b = float(gamma["a"]), float(gamma["b"])
    return target.validate(np.column_stack([cx + a * np.cos(th), cy + b * np.sin(th)]))


def _scan_dict(rep, space: LengthSpace) -> dict[str, Any]:
    out = rep.to_dict()
    out["h"] = space.spacing
    return out


def main_theorem_pipeline(x_spec: ModelSpec | dict, f_rule, gamma: dict[str, Any],
                          params: PipelineParams | dict | None = None) -> PipelineReport:
    """Run every stage; the overall verdict is PASS iff each stage passes.

    A failed convexity pretest stops the run with verdict ``REFUSED`` unless
    ``params.force`` is set. Exceptions are re-raised as
    :class:`PipelineError` carrying the stage name.
    """
    spec = x_spec if isinstance(x_spec, ModelSpec) else ModelSpec.from_json(x_spec)
    p = params if isinstance(params, PipelineParams) else PipelineParams.from_json(params)
    rule = Rule.from_json(f_rule)
    report = PipelineReport("PASS")
    state: dict[str, Any] = {}

    def run(stage, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except PipelineError:
            raise
        except Exception as exc:  # noqa: BLE001 - relabelled with the stage
            raise PipelineError(stage, exc) from exc
        report.timings[stage] = time.perf_counter() - t0
        report.stages[stage] = out
        if out.get("verdict") not in ("PASS", None):
            report.verdict = "FAIL"
        return out

    def gen():
        X = generate(spec)
        state["X"] = X
        state["f"] = make_field(X, rule)
        return {"verdict": "PASS", "model": spec.to_json(), "vertices": X.n, "edges": X.num_edges}

    def pretest():
        rep = convexity_check(state["X"], state["f"], n_geodesics=p.convexity_geodesics, seed=p.seed)
        return rep.to_dict()

    run("generate", gen)
    pre = run("convexity-pretest", pretest)
    if pre["verdict"] != "PASS" and not p.force:
        report.verdict = "REFUSED"
        report.stages["convexity-pretest"]["note"] = "field is not convex on X; rerun with force to continue"
        return report
    report.stages["convexity-pretest"]["forced"] = pre["verdict"] != "PASS"

    def plateau():
        X = state["X"]
        h = p.domain_spacing or spec.spacing
        D = generate(ModelSpec("flat-disc", radius=1.0, spacing=h))
        target = target_for(spec, X)
        samples = curve_samples(gamma, target, len(D.boundary))
        res = solve_plateau(D, target, samples, tol=p.plateau_tol)
        state.update(D=D, target=target, plateau=res)
        out = res.to_dict()
        out.pop("positions")
        out.update(verdict="PASS", samples=len(samples), domain_spacing=h, sweeps=res.energy.sweeps)
        return out

    def factor():
        lam, rep = conformal_factor_estimate(state["plateau"].map)
        state["lam"] = lam
        out = rep.to_dict()
        out["lambda_min"] = float(lam.values.min())
        out["lambda_max"] = float(lam.values.max())
        return out

    def pullback_scan():
        Y = intrinsic_pullback(state["D"], state["lam"])
        state["Y"] = Y
        rep = cat0_scan(Y, p.n_triangles, p.n_side_points, p.scan_tol, p.seed)
        out = _scan_dict(rep, Y)
        out["pullback"] = Y.labels.get("pullback")
        return out

    def majorization():
        D, res = state["D"], state["plateau"]
        tol = 5.0 * D.spacing if p.majorization_tol is None else p.majorization_tol
        rep = majorization_check(state["Y"], state["target"], res.map.assignment, gamma=res.samples,
                                 tol=tol, seed=p.seed)
        return rep.to_dict()

    def weighted_scan():
        vals = rule_on_target(state["target"], rule, state["plateau"].map.assignment)
        Z = conformal_change(state["Y"], exp_factor(ScalarField(vals)))
        return _scan_dict(cat0_scan(Z, p.n_triangles, p.n_side_points, p.scan_tol, p.seed), Z)

    def direct_scan():
        X = state["X"]
        Z = conformal_change(X, exp_factor(state["f"]))
        return _scan_dict(cat0_scan(Z, p.n_triangles, p.n_side_points, p.scan_tol, p.seed), Z)

    run("plateau", plateau)
    run("conformal-factor", factor)
    run("intrinsic-pullback-scan", pullback_scan)
    run("majorization", majorization)
    run("weighted-pullback-scan", weighted_scan)
    run("direct-scan", direct_scan)
    return report


__all__ = ["PipelineError", "PipelineParams", "PipelineReport", "STAGES", "curve_samples",
           "main_theorem_pipeline", "target_for"]
