import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab.fields import (
    FieldError, Rule, ScalarField, boundary_layer, convexity_check, discrete_laplacian, log_subharmonic_check, make_field,
    subharmonic_check,
)
from conflab.metric import build_space
from conflab.models import ModelSpec, generate, nearest_vertex


def test_simple_rules(flat08):
    assert np.all(make_field(flat08, {"kind": "constant", "c": 0.0}).values == 0)
    v = nearest_vertex(flat08, (0.24, 0.0))
    f = make_field(flat08, {"kind": "distance-to-point", "vertex": v})
    assert f.values[v] == 0.0
    from conflab.fields import evaluate
    assert evaluate(Rule.make("norm-squared"), np.array([[0.3, 0.4]]))[0] == pytest.approx(0.25)


def test_rule_json_round_trip():
    r = Rule.make("exp", of={"kind": "product", "factors": [{"kind": "norm-squared"}, {"kind": "constant", "c": 2}]})
    assert Rule.from_json(r.to_json()) == r


@pytest.mark.parametrize("data, match", [
    ({}, "kind"),
    ({"kind": "cubic"}, "unknown"),
    ({"kind": "distance-to-set", "points": []}, "empty"),
    ({"kind": "distance-to-point"}, "point"),
])
def test_rule_errors(data, match):
    with pytest.raises(FieldError, match=match):
        Rule.from_json(data)


def test_field_value_checks():
    with pytest.raises(FieldError):
        ScalarField([1.0, float("nan")])
    with pytest.raises(FieldError):
        ScalarField([1.0, 0.0], positive=True)


def test_exp_overflow_rejected(flat08):
    with pytest.raises(FieldError, match="700"):
        make_field(flat08, {"kind": "exp", "of": {"kind": "constant", "c": 800}})


def test_graph_space_needs_vertex_rules():
    s = build_space(3, [(0, 1, 1.0), (1, 2, 2.0)])
    assert make_field(s, {"kind": "distance-to-point", "vertex": 0}).values.tolist() == [0.0, 1.0, 3.0]
    with pytest.raises(FieldError):
        make_field(s, {"kind": "norm-squared"})


# convexity

def test_tree_distance_is_convex(tripod):
    f = make_field(tripod, {"kind": "distance-to-point", "vertex": 7})
    rep = convexity_check(tripod, f, n_geodesics=300, seed=3)
    assert rep.passed and rep.statistic >= -1e-12


def test_tree_convexity_brute_force():
    # 20-vertex star tree: defect over every vertex triple geodesic is >= 0
    X = generate(ModelSpec("tree", legs=(1.0, 0.6, 0.3), spacing=0.1))
    assert X.n <= 21
    D = X.all_pairs()
    from conflab.metric import geodesic
    for p in range(X.n):
        f = D[p]
        for a in range(X.n):
            for b in range(a + 1, X.n):
                g = geodesic(X, a, b)
                vals = f[g.vertices]
                # along a geodesic f is convex as a function of arc length
                for k in range(1, len(vals) - 1):
                    t0, t1, t2 = g.cumulative[k - 1:k + 2]
                    lin = vals[k - 1] + (vals[k + 1] - vals[k - 1]) * (t1 - t0) / (t2 - t0)
                    assert vals[k] <= lin + 1e-12


def test_affine_convexity_zero_defect(flat08):
    f = make_field(flat08, {"kind": "affine", "a": 1.0, "b": -2.0, "c": 0.5})
    rep = convexity_check(flat08, f, seed=1)
    assert rep.passed
    assert abs(rep.statistic) < 5 * flat08.spacing


def test_concave_fails_convexity(flat04):
    f = make_field(flat04, {"kind": "norm-squared", "scale": -1.0})
    rep = convexity_check(flat04, f, seed=0)
    assert not rep.passed and rep.statistic < -rep.tol


@pytest.mark.parametrize("spec", [
    ModelSpec("flat-disc", spacing=0.08),
    ModelSpec("hyperbolic-disc", radius=0.8, spacing=0.08),
    ModelSpec("tree", legs=(1.0, 2.0, 0.5), spacing=0.1),
])
@settings(max_examples=8, deadline=None)
@given(data=st.data())
def test_distance_fields_convex_on_cat0_models(spec, data):
    X = _cached(spec)
    v = data.draw(st.integers(0, X.n - 1))
    f = make_field(X, {"kind": "distance-to-point", "vertex": v})
    assert convexity_check(X, f, n_geodesics=40, seed=data.draw(st.integers(0, 99))).passed


_CACHE = {}


def _cached(spec):
    if spec not in _CACHE:
        _CACHE[spec] = generate(spec)
    return _CACHE[spec]


# Laplacians

def test_laplacian_annihilates_affine(flat08):
    f = make_field(flat08, {"kind": "affine", "a": 0.7, "b": -1.3, "c": 2.0})
    assert np.max(np.abs(discrete_laplacian(flat08, f).values)) < 1e-10


def test_laplacian_of_norm_squared(flat04):
    lap = discrete_laplacian(flat04, make_field(flat04, {"kind": "norm-squared"})).values
    layer = boundary_layer(flat04)[discrete_laplacian(flat04, ScalarField(np.zeros(flat04.n))).support]
    assert np.max(np.abs(lap[~layer] - 4.0)) < 1e-9
    assert np.all(lap > 2.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_laplacian_is_linear(s, t):
    X = _cached(ModelSpec("flat-disc", spacing=0.08))
    f = make_field(X, {"kind": "norm-squared"}).values
    g = np.sin(3 * X.coords[:, 0]) * X.coords[:, 1]
    L = lambda v: discrete_laplacian(X, ScalarField(v)).values
    np.testing.assert_allclose(L(s * f + t * g), s * L(f) + t * L(g), atol=1e-9)


def test_laplacian_needs_flat_mesh(hyp08):
    with pytest.raises(FieldError):
        discrete_laplacian(hyp08, ScalarField(np.zeros(hyp08.n)))


def test_subharmonic_checks(flat04):
    assert subharmonic_check(flat04, make_field(flat04, {"kind": "norm-squared"})).passed
    assert not subharmonic_check(flat04, make_field(flat04, {"kind": "norm-squared", "scale": -1})).passed


def test_log_subharmonic_examples(flat04):
    h = flat04.spacing
    r = make_field(flat04, {"kind": "power-radial", "alpha": 1.0})
    rep = log_subharmonic_check(flat04, r, exclude_radius=6 * h)
    assert rep.passed and rep.excluded
    up = make_field(flat04, {"kind": "exp", "of": {"kind": "norm-squared"}})
    assert log_subharmonic_check(flat04, up).passed
    down = make_field(flat04, {"kind": "exp", "of": {"kind": "norm-squared", "scale": -1}})
    assert not log_subharmonic_check(flat04, down).passed
    with pytest.raises(FieldError):
        log_subharmonic_check(flat04, ScalarField(-np.ones(flat04.n)))


@pytest.mark.parametrize("a, b", [
    ({"kind": "exp", "of": {"kind": "norm-squared"}}, {"kind": "exp", "of": {"kind": "affine", "a": 1.0}}),
    ({"kind": "exp", "of": {"kind": "affine", "b": 2.0}}, {"kind": "exp", "of": {"kind": "norm-squared", "scale": 0.5}}),
])
def test_log_subharmonic_closed_under_products(flat04, a, b):
    fa, fb = make_field(flat04, a), make_field(flat04, b)
    assert log_subharmonic_check(flat04, fa).passed and log_subharmonic_check(flat04, fb).passed
    assert log_subharmonic_check(flat04, ScalarField(fa.values * fb.values)).passed


def test_rim_layer_is_opt_in(flat04):
    f = make_field(flat04, {"kind": "norm-squared"})
    inner = subharmonic_check(flat04, f)
    full = subharmonic_check(flat04, f, rim=True)
    assert full.details["tested"] - inner.details["tested"] == int(boundary_layer(flat04).sum())
    assert set(np.flatnonzero(boundary_layer(flat04))) <= set(inner.excluded)
