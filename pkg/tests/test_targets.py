import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conflab.metric import SpaceError
from conflab.targets import TargetSpace

E, H, T = TargetSpace.euclidean(), TargetSpace.hyperbolic(), TargetSpace.tree((1.0, 1.0, 1.0))

disc_pts = st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
tree_pts = st.tuples(st.integers(0, 2).map(float), st.floats(0.0, 1.0))


@pytest.mark.parametrize("target, strat", [(E, disc_pts), (H, disc_pts), (T, tree_pts)])
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_point_on_geodesic_splits_distance(target, strat, data):
    p = np.array(data.draw(strat))
    q = np.array(data.draw(strat))
    t = data.draw(st.floats(0.0, 1.0))
    x = target.point_on_geodesic(p, q, t)
    d = float(target.distance(p, q))
    assert float(target.distance(p, x)) == pytest.approx(t * d, abs=1e-10)
    assert float(target.distance(x, q)) == pytest.approx((1 - t) * d, abs=1e-10)


def test_barycenter_examples():
    np.testing.assert_allclose(E.barycenter([[0, 0], [2, 4]], [1, 1]), [1, 2])
    np.testing.assert_allclose(H.barycenter([[0.5, 0], [-0.5, 0]], [1, 1]), [0, 0], atol=1e-12)
    c = T.barycenter([[0, 0.5], [1, 0.5]], [1, 1])
    assert c[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("target, strat", [(E, disc_pts), (H, disc_pts), (T, tree_pts)])
@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_barycenter_minimises(target, strat, data):
    pts = np.array(data.draw(st.lists(strat, min_size=1, max_size=5)))
    w = np.array(data.draw(st.lists(st.floats(0.1, 3.0), min_size=len(pts), max_size=len(pts))))
    b = target.barycenter(pts, w)
    cost = lambda x: float(np.sum(w * target.distance(pts, x) ** 2))  # noqa: E731
    best = cost(b)
    for p in pts:
        for t in (0.1, 0.5):
            assert best <= cost(target.point_on_geodesic(b, p, t)) + 1e-9


def test_barycenter_errors():
    with pytest.raises(SpaceError, match="empty"):
        E.barycenter(np.zeros((0, 2)), [])
    with pytest.raises(SpaceError):
        E.barycenter([[0, 0]], [0.0])


def test_validation():
    with pytest.raises(SpaceError):
        H.validate([[1.0, 0.0]])
    with pytest.raises(SpaceError):
        T.validate([[0.5, 0.1]])
    with pytest.raises(SpaceError):
        T.validate([[0, 1.5]])
    with pytest.raises(SpaceError):
        TargetSpace("sphere")


def test_json_round_trip():
    for t in (E, H, T):
        assert TargetSpace.from_json(t.to_json()) == t


def test_hyperbolic_distance():
    assert float(H.distance([0, 0], [0.5, 0])) == pytest.approx(math.log(3))


def test_mesh_target(tripod):
    M = TargetSpace.mesh(tripod)
    b = M.barycenter([[5, 0], [15, 0]], [1, 1])
    assert float(M.distance(b, [5, 0])) == pytest.approx(float(M.distance(b, [15, 0])), abs=tripod.spacing)
