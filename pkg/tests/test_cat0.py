import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab.cat0 import (
    CSV_COLUMNS, MajorizationError, cat0_scan, comparison_points, comparison_test, geodesic_distance_convexity,
    majorization_check,
)
from conflab.metric import SpaceError, build_space
from conflab.models import ModelSpec, generate, nearest_vertex


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5))
def test_comparison_points_have_the_given_sides(a, b, c):
    l0, l1, l2 = sorted([a, b, c])[::-1]
    if l0 > l1 + l2:
        l0 = l1 + l2
    p = comparison_points(l0, l1, l2)
    sides = [np.linalg.norm(p[1] - p[0]), np.linalg.norm(p[2] - p[1]), np.linalg.norm(p[0] - p[2])]
    np.testing.assert_allclose(sides, [l0, l1, l2], atol=1e-6 * (l0 + l1 + l2))


def test_flat_triangle_slacks_are_mesh_noise(flat04):
    tri = [nearest_vertex(flat04, p) for p in ((-0.5, -0.3), (0.5, -0.2), (0.0, 0.6))]
    rep = comparison_test(flat04, tri)
    assert rep.passed and abs(rep.min_slack) <= 3 * flat04.spacing


def test_tripod_leaf_triangle_brute_force(tripod):
    r = np.linalg.norm(tripod.coords, axis=1)
    tips = np.flatnonzero(np.isclose(r, r.max()))
    rep = comparison_test(tripod, tips, n_side_points=11)
    assert rep.min_slack >= -1e-12
    # brute force: every pair of side vertices is at most its comparison distance
    D = tripod.all_pairs()
    assert D[tips[0], tips[1]] == pytest.approx(2.0)


def test_tree_scan_passes(tripod):
    rep = cat0_scan(tripod, 300, 5, seed=4)
    assert rep.passed and rep.min_slack >= -1e-12


def test_cone_pi_apex_triangle_fails(cone_pi):
    h = cone_pi.spacing
    a = nearest_vertex(cone_pi, (0.3, 0.0))
    b = nearest_vertex(cone_pi, (-0.15, 0.26))
    c = nearest_vertex(cone_pi, (-0.15, -0.26))
    rep = comparison_test(cone_pi, [a, b, c])
    assert rep.min_slack < -3 * h


def test_cone_pi_scan_fails(cone_pi):
    rep = cat0_scan(cone_pi, 400, seed=0)
    assert not rep.passed


def test_hyperbolic_scan_passes(hyp08):
    assert cat0_scan(hyp08, 300, seed=1).passed


def test_scan_rejects_bad_arguments(flat08):
    with pytest.raises(SpaceError):
        comparison_test(flat08, [1, 1, 2])
    with pytest.raises(SpaceError):
        cat0_scan(flat08, 10, n_side_points=1)
    with pytest.raises(SpaceError, match="tol"):
        cat0_scan(build_space(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]), 5)


def test_scan_is_seeded(flat08):
    a = cat0_scan(flat08, 100, seed=3)
    b = cat0_scan(flat08, 100, seed=3)
    assert a.rows == b.rows


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20.0))
def test_scan_scale_equivariance(c):
    X = _small()
    base = cat0_scan(X, 60, seed=7)
    Y = X.with_weights(X.weights * c, spacing=X.spacing * c)
    scaled = cat0_scan(Y, 60, seed=7)
    assert scaled.verdict == base.verdict
    assert scaled.min_slack == pytest.approx(c * base.min_slack, rel=1e-9, abs=1e-12)


_SMALL = []


def _small():
    if not _SMALL:
        _SMALL.append(generate(ModelSpec("cone", total_angle=math.pi, spacing=0.1)))
    return _SMALL[0]


def test_csv_columns(tmp_path, flat08):
    rep = cat0_scan(flat08, 20, seed=0)
    path = tmp_path / "slack.csv"
    rep.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + rep.triangles_tested
    assert min(float(r[-1]) for r in rows[1:]) == rep.min_slack


def test_geodesic_distance_convexity(flat08, tripod, cone_pi):
    assert geodesic_distance_convexity(flat08, 40, seed=0).passed
    assert geodesic_distance_convexity(tripod, 60, seed=0).passed
    assert not geodesic_distance_convexity(cone_pi, 200, seed=0, cluster_radius=0.3).passed


def test_majorization_identity(flat08):
    rep = majorization_check(flat08, flat08, np.arange(flat08.n), tol=0.0)
    assert rep.passed


def test_majorization_shrink_fails(flat08):
    # P(v) = vertex nearest to v/2: boundary arcs shrink by half
    P = np.array([nearest_vertex(flat08, 0.5 * z) for z in flat08.coords])
    with pytest.raises(MajorizationError):
        majorization_check(flat08, flat08, P, tol=5 * flat08.spacing)
    # scaling the domain by 0.5 keeps boundary labels but halves arc length
    small = flat08.with_weights(flat08.weights * 0.5, spacing=flat08.spacing * 0.5)
    rep = majorization_check(small, flat08, np.arange(flat08.n), tol=0.0)
    assert not rep.passed
    assert any(f["condition"] == "arc-length" for f in rep.violations)
