"""Acceptance criteria, one test per criterion.

Each test prints a line ``[C<k>] PASS|FAIL <evidence>``; the lines are
repeated in the terminal summary. Run with ``pytest tests/test_acceptance.py -v``.
"""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from conflab.cat0 import cat0_scan
from conflab.conformal import composition_law_check, conformal_change, conformal_curvature_check, exp_factor
from conflab.experiments import linear_dirichlet
from conflab.fields import make_field
from conflab.harmonic import CONVEX_LIBRARY, SpaceMap, pullback_subharmonicity_test, solve_dirichlet
from conflab.models import ModelSpec, generate, oracle_fidelity
from conflab.pipeline import STAGES, main_theorem_pipeline
from conflab.targets import TargetSpace

pytestmark = pytest.mark.acceptance

LINES: list[str] = []


def report(tag, ok, evidence):
    line = f"[{tag}] {'PASS' if ok else 'FAIL'} {evidence}"
    LINES.append(line)
    print(line)
    assert ok, line


# -- C1 ---------------------------------------------------------------------

C1_MODELS = {
    "flat": ModelSpec("flat-disc", spacing=0.02),
    "hyperbolic": ModelSpec("hyperbolic-disc", radius=0.8, spacing=0.02),
    "tree": ModelSpec("tree", legs=(1.0, 1.0, 1.0), spacing=0.02),
    "cone-4pi": ModelSpec("cone", total_angle=4 * math.pi, spacing=0.02),
    "cone-pi": ModelSpec("cone", total_angle=math.pi, spacing=0.02),
}


@pytest.mark.parametrize("model", list(C1_MODELS))
def test_c1_oracle_fidelity(model):
    spec = C1_MODELS[model]
    t0 = time.perf_counter()
    e1 = oracle_fidelity(generate(spec), 1000, seed=0)
    e2 = oracle_fidelity(generate(spec.with_spacing(spec.spacing / 2)), 1000, seed=0)
    dt = time.perf_counter() - t0
    exact = e1.max_relative_error < 1e-12 and e2.max_relative_error < 1e-12
    ratio = math.inf if exact else e1.max_relative_error / max(e2.max_relative_error, 1e-300)
    ok = e1.max_relative_error <= 0.02 and (exact or ratio >= 1.6) and dt <= 30 and e1.pairs == 1000
    report(f"C1 {model}", ok, f"h=0.02 max rel err {e1.max_relative_error:.4%} (C={e1.constant:.3f}), "
                              f"h=0.01 {e2.max_relative_error:.4%}, ratio {ratio:.2f} (need >=1.6), {dt:.1f}s")


# -- C2 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def flat02():
    return generate(ModelSpec("flat-disc", spacing=0.02))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_c2_cone_identity(flat02, alpha):
    Y = conformal_change(flat02, {"kind": "power-radial", "alpha": alpha}, "segment")
    theta = 2 * math.pi * (1 + alpha)
    rep = oracle_fidelity(Y, 1000, seed=0, min_distance=2 * flat02.spacing)
    ok = Y.oracle.total_angle == pytest.approx(theta) and rep.max_relative_error <= 0.02
    report(f"C2 alpha={alpha}", ok, f"cone({theta / math.pi:.0f}pi) max rel err {rep.max_relative_error:.4%} "
                                    f"on {rep.pairs} pairs (need <=2%)")


def test_c2_negative_alpha_control():
    X = generate(ModelSpec("flat-disc", spacing=0.04))
    h = X.spacing
    Y = conformal_change(X, {"kind": "power-radial", "alpha": -0.5}, "segment")
    # tolerances and radii in undeformed units; the singular factor inflates Y.spacing
    rep = cat0_scan(Y, 2000, 5, tol=3 * h, seed=0, cluster_radius=10 * h, min_side=4 * h)
    surrounds = encloses_origin(X.coords[rep.worst_triangle["vertices"]])
    ok = not rep.passed and rep.min_slack < -3 * h and surrounds
    report("C2 alpha=-0.5 control", ok, f"min slack {rep.min_slack:.3f} < -3h = {-3 * h:.2f}; "
                                        f"worst triangle {'surrounds' if surrounds else 'misses'} the apex")


def encloses_origin(tri):
    a, b, c = tri
    cross = lambda p, q: p[0] * q[1] - p[1] * q[0]  # noqa: E731
    s = [cross(b - a, -a), cross(c - b, -b), cross(a - c, -c)]
    return all(x > 0 for x in s) or all(x < 0 for x in s)


# -- C3 ---------------------------------------------------------------------

C3_CASES = {
    "flat |z|^2": (ModelSpec("flat-disc", spacing=0.04), {"kind": "norm-squared"}),
    "flat distance": (ModelSpec("flat-disc", spacing=0.04), {"kind": "distance-to-point", "point": [0.2, -0.1]}),
    "hyperbolic distance": (ModelSpec("hyperbolic-disc", radius=0.8, spacing=0.04),
                            {"kind": "distance-to-point", "point": [0.0, 0.0]}),
    "tripod distance": (ModelSpec("tree", legs=(1.0, 1.0, 1.0), spacing=0.04),
                        {"kind": "distance-to-point", "point": [0.0, 0.0]}),
}


@pytest.mark.parametrize("case", list(C3_CASES))
def test_c3_main_theorem_scans(case):
    spec, rule = C3_CASES[case]
    t0 = time.perf_counter()
    X = generate(spec)
    Z = conformal_change(X, exp_factor(make_field(X, rule)))
    rep = cat0_scan(Z, 10_000, 5, seed=0)
    dt = time.perf_counter() - t0
    h0 = spec.spacing
    nominal = "PASS" if rep.min_slack >= -3 * h0 else "FAIL"
    ok = rep.passed and rep.triangles_tested == 10_000 and dt <= 120
    report(f"C3 {case}", ok, f"min slack {rep.min_slack:.4f}, tol 3h = {rep.tol:.4f} with h of e^f X "
                             f"({nominal} at 3h of X = {3 * h0:.2f}), {rep.triangles_tested} triangles, {dt:.1f}s")


# -- C4 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def flat01():
    return generate(ModelSpec("flat-disc", spacing=0.01))


def test_c4_negative_control(flat01):
    X = generate(ModelSpec("flat-disc", spacing=0.04))
    Z = conformal_change(X, exp_factor(make_field(X, {"kind": "norm-squared", "scale": -1.0})))
    scan = cat0_scan(Z, 2000, 5, seed=0)
    k_full = conformal_curvature_check(flat01, {"kind": "norm-squared", "scale": -1.0})
    k_half = conformal_curvature_check(flat01, {"kind": "norm-squared", "scale": -0.5})
    K1 = k_full.details["curvature_at_origin"]
    K2 = k_half.details["curvature_at_origin"]
    ok = (not scan.passed) and abs(K1 - 4.0) <= 0.2 and abs(K2 - 2.0) <= 0.1
    report("C4", ok, f"scan FAIL (min slack {scan.min_slack:.3f} < -{scan.tol:.3f}); h=0.01: "
                     f"K(0)={K1:.4f} for f=-|z|^2 (formula +4), K(0)={K2:.4f} for f=-|z|^2/2 (+2 +- 0.1)")


@pytest.mark.xfail(strict=True, reason="with K = -e^{-2f} Laplacian(f), f = -|z|^2 has K(0) = +4, not +2")
def test_c4_literal_value_for_minus_norm_squared(flat01):
    K = conformal_curvature_check(flat01, {"kind": "norm-squared", "scale": -1.0}).details["curvature_at_origin"]
    print(f"[C4 literal] K(0) = {K:.4f} for f = -|z|^2; the stated +2 +- 0.1 does not hold")
    assert abs(K - 2.0) <= 0.1


# -- C5 ---------------------------------------------------------------------

def test_c5_curvature_formula(flat01, flat02):
    rule = {"kind": "norm-squared", "scale": 0.5}
    a = conformal_curvature_check(flat02, rule)
    b = conformal_curvature_check(flat01, rule)
    Ca, Cb = a.details["C"], b.details["C"]
    ok = a.passed and b.passed and Cb <= 1.2 * Ca
    report("C5", ok, f"max residual/h: C={Ca:.4f} at h=0.02, C={Cb:.4f} at h=0.01 (C_max 1.0, stable if "
                     f"C(h/2) <= 1.2 C(h))")


# -- C6 ---------------------------------------------------------------------

def test_c6_dirichlet_linear_oracle():
    D = generate(ModelSpec("flat-disc", spacing=0.04))
    z = D.coords[D.boundary]
    bpts = np.column_stack([z[:, 0] ** 2 - z[:, 1], np.sin(2 * z[:, 1]) + 0.3 * z[:, 0]])
    t0 = time.perf_counter()
    m, rep = solve_dirichlet(D, TargetSpace.euclidean(), bpts, tol=1e-12)
    dt = time.perf_counter() - t0
    diff = float(np.max(np.linalg.norm(m.assignment - linear_dirichlet(D, bpts), axis=1)))
    ok = diff <= 1e-8 and D.n <= 10_000 and dt <= 60
    report("C6", ok, f"{D.n} vertices, max displacement vs sparse solve {diff:.2e} (need <=1e-8), "
                     f"{rep.sweeps} sweeps, {dt:.1f}s")


# -- C7 / C8 ----------------------------------------------------------------

@pytest.fixture(scope="module")
def d04():
    return generate(ModelSpec("flat-disc", spacing=0.04))


def _boundary(target, D):
    z = D.coords[D.boundary]
    if target.kind == "euclidean-plane":
        return np.column_stack([z[:, 0] + 0.3 * z[:, 1] ** 2, 0.7 * z[:, 1]])
    if target.kind == "hyperbolic-plane":
        return z * np.array([0.6, 0.42])
    nb = len(D.boundary)
    ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
    sector = 2 * math.pi / 3
    leg = np.floor(ang / sector)
    return np.column_stack([leg, 0.8 * np.sin(math.pi * np.mod(ang, sector) / sector)])


TARGETS = {"euclidean": TargetSpace.euclidean(), "hyperbolic": TargetSpace.hyperbolic(),
           "tripod": TargetSpace.tree((1.0, 1.0, 1.0))}
_MAPS = {}


def harmonic(name, D):
    if name not in _MAPS:
        _MAPS[name] = solve_dirichlet(D, TARGETS[name], _boundary(TARGETS[name], D), tol=1e-10)
    return _MAPS[name]


@pytest.mark.parametrize("name", ["hyperbolic", "tripod"])
def test_c7_monotone_and_unique(d04, name):
    tol = 1e-10
    m1, r1 = harmonic(name, d04)
    m2, r2 = solve_dirichlet(d04, TARGETS[name], _boundary(TARGETS[name], d04), tol=tol, mode="jacobi")
    steps = np.diff(r1.history)
    worst_rise = float(steps.max())
    gap = float(np.max(TARGETS[name].distance(m1.assignment, m2.assignment)))
    ok = r1.monotone and r2.monotone and gap <= 10 * tol
    report(f"C7 {name}", ok, f"{r1.sweeps} GS sweeps, largest energy step {worst_rise:.2e} (nonincreasing), "
                             f"GS vs Jacobi max distance {gap:.2e} (need <= {10 * tol:.0e})")


@pytest.mark.parametrize("name", ["euclidean", "hyperbolic", "tripod"])
def test_c8_fuglede(d04, name):
    m, _ = harmonic(name, d04)
    kind = TARGETS[name].kind
    worst = min(pullback_subharmonicity_test(m, rule).statistic for rule in CONVEX_LIBRARY[kind])
    tol = 5 * d04.spacing
    ok = worst >= -tol
    report(f"C8 {name}", ok, f"{len(CONVEX_LIBRARY[kind])} convex rules, min Laplacian of f o u {worst:.4f} "
                             f">= -5h = {-tol:.2f}")


def test_c8_concave_control(d04):
    m = SpaceMap(d04, TARGETS["euclidean"], d04.coords)
    rep = pullback_subharmonicity_test(m, {"kind": "norm-squared", "scale": -1.0})
    ok = not rep.passed and len(rep.violations) > 0
    report("C8 concave control", ok, f"f=-|z|^2 on the identity: min Laplacian {rep.statistic:.3f}, "
                                     f"{len(rep.violations)} violations")


# -- C9 ---------------------------------------------------------------------

def test_c9_composition_law(flat02):
    up = {"kind": "exp", "of": {"kind": "norm-squared"}}
    aff = {"kind": "exp", "of": {"kind": "affine", "a": 0.5, "b": -0.3}}
    mid = composition_law_check(flat02, up, aff, n_pairs=1000, quadrature="midpoint")
    trap = composition_law_check(flat02, up, up, n_pairs=1000, quadrature="trapezoid")
    ok = mid.passed and mid.statistic <= 1e-12 and trap.passed and mid.details["pairs"] == 1000
    report("C9", ok, f"midpoint gap {mid.statistic:.1e} (<=1e-12); trapezoid gap {trap.statistic:.2e} "
                     f"<= 2hLip = {trap.tol:.2e}")


# -- C10 --------------------------------------------------------------------

def test_c10_pipeline():
    t0 = time.perf_counter()
    rep = main_theorem_pipeline({"kind": "flat-disc", "spacing": 0.04}, {"kind": "norm-squared"},
                                {"kind": "circle", "radius": 0.8})
    dt = time.perf_counter() - t0
    verdicts = {s: rep.stages[s].get("verdict") for s in STAGES}
    maj = rep.stages["majorization"]
    ok = rep.verdict == "PASS" and all(v == "PASS" for v in verdicts.values()) and dt <= 300 \
        and maj["tol"] == pytest.approx(5 * 0.04)
    report("C10", ok, f"stages {verdicts}; majorization tol {maj['tol']:.2f}; "
                      f"weighted pullback min slack {rep.stages['weighted-pullback-scan']['min_slack']:.4f}; "
                      f"{dt:.1f}s")


# -- C11 --------------------------------------------------------------------

def test_c11_suite_all(tmp_path):
    exe = shutil.which("lab")
    cmd = [exe] if exe else [sys.executable, "-m", "conflab.cli"]
    t0 = time.perf_counter()
    r = subprocess.run(cmd + ["suite", "all", "--out", str(tmp_path)], capture_output=True, text=True,
                       timeout=900)
    dt = time.perf_counter() - t0
    bad = [line for line in r.stderr.splitlines() if line.startswith("BAD")]
    ok = r.returncode == 0 and dt <= 600
    report("C11", ok, f"lab suite all exit {r.returncode}, {dt:.0f}s (limit 600s)"
                      + (f"; {bad}" if bad else ""))
