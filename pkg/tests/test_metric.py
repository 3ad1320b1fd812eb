import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from conflab.metric import (
    SpaceError, build_space, curve_length, distance, geodesic, load_space, save_space, space_from_json,
    space_to_json,
)


def path_graph(n, w=1.0):
    return build_space(n, [(i, i + 1, w) for i in range(n - 1)])


def csgraph_distances(space):
    a, b = space.edges[:, 0], space.edges[:, 1]
    g = coo_matrix((space.weights, (a, b)), shape=(space.n, space.n)).tocsr()
    return shortest_path(g, directed=False)


@st.composite
def random_graphs(draw):
    n = draw(st.integers(2, 14))
    edges = [(i, i + 1, draw(st.floats(0.05, 3.0))) for i in range(n - 1)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.floats(0.05, 3.0)),
                          max_size=25))
    edges += [e for e in extra if e[0] != e[1]]
    return build_space(n, edges)


def test_path_graph_distances():
    s = path_graph(5, 0.5)
    assert distance(s, 0, 4) == pytest.approx(2.0)
    assert distance(s, 3, 3) == 0.0


def test_parallel_edges_keep_smallest_weight():
    s = build_space(2, [(0, 1, 2.0), (1, 0, 0.5)])
    assert s.num_edges == 1
    assert distance(s, 0, 1) == 0.5


@pytest.mark.parametrize("edges, message", [
    ([(0, 0, 1.0)], "self-loop"),
    ([(0, 1, 0.0)], "positive"),
    ([(0, 1, -1.0)], "positive"),
    ([(0, 5, 1.0)], "out of range"),
    ([(0, 1, float("nan"))], "positive"),
])
def test_invalid_edges(edges, message):
    with pytest.raises(SpaceError, match=message):
        build_space(3, edges + [(1, 2, 1.0)])


def test_disconnected_graph_rejected():
    with pytest.raises(SpaceError, match="disconnected"):
        build_space(4, [(0, 1, 1.0), (2, 3, 1.0)])


def test_boundary_cycle_must_follow_edges():
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0)]
    build_space(4, edges, boundary=[0, 1, 2])
    with pytest.raises(SpaceError, match="not adjacent"):
        build_space(4, edges, boundary=[0, 1, 3])
    with pytest.raises(SpaceError, match="repeats"):
        build_space(4, edges, boundary=[0, 1, 0])


def test_invalid_vertex_query():
    s = path_graph(3)
    with pytest.raises(SpaceError):
        distance(s, 0, 3)
    with pytest.raises(SpaceError):
        s.row(-1)


@settings(max_examples=40, deadline=None)
@given(random_graphs())
def test_distances_match_scipy_csgraph(space):
    np.testing.assert_allclose(space.all_pairs(), csgraph_distances(space), rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.data())
def test_metric_axioms(space, data):
    D = space.all_pairs()
    np.testing.assert_array_equal(np.diag(D), 0.0)
    np.testing.assert_allclose(D, D.T, rtol=0, atol=1e-12)
    i, j, k = (data.draw(st.integers(0, space.n - 1)) for _ in range(3))
    assert D[i, k] <= D[i, j] + D[j, k] + 1e-12


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.data())
def test_geodesic_is_a_shortest_path(space, data):
    a = data.draw(st.integers(0, space.n - 1))
    b = data.draw(st.integers(0, space.n - 1))
    g = geodesic(space, a, b)
    assert g.vertices[0] == a and g.vertices[-1] == b
    assert curve_length(space, g.vertices) == pytest.approx(distance(space, a, b), rel=1e-12, abs=1e-12)
    assert np.all(np.diff(g.cumulative) > 0)


def test_geodesic_point_at_and_interpolate():
    s = build_space(3, [(0, 1, 1.0), (1, 2, 3.0)], coords=[[0, 0], [1, 0], [4, 0]])
    g = geodesic(s, 0, 2)
    assert g.total == 4.0
    assert g.point_at(2.5) == (1, 2, 1.5)
    np.testing.assert_allclose(g.coords_at(2.5), [2.5, 0.0])
    assert g.interpolate(np.array([0.0, 10.0, 40.0]), 0.5) == pytest.approx(5.0)
    with pytest.raises(SpaceError):
        g.point_at(4.5)


def test_geodesic_tie_break_is_deterministic():
    # square: two shortest paths 0-1-3 and 0-2-3; the smaller predecessor wins
    s = build_space(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])
    assert geodesic(s, 0, 3).vertices.tolist() == [0, 1, 3]
    assert geodesic(s, 0, 3).vertices.tolist() == [0, 1, 3]


def test_curve_length_rejects_non_adjacent():
    s = path_graph(4)
    assert curve_length(s, [0, 1, 2, 1]) == 3.0
    with pytest.raises(SpaceError):
        curve_length(s, [0, 2])


def test_row_matches_all_pairs(flat08):
    D = flat08.all_pairs()
    fresh = build_space(flat08.n, np.column_stack([flat08.edges, flat08.weights]))
    for v in (0, 17, flat08.n - 1):
        np.testing.assert_array_equal(fresh.row(v), D[v])
    np.testing.assert_array_equal(fresh.rows([3, 5]), D[[3, 5]])


def test_json_round_trip(tmp_path, flat08):
    path = tmp_path / "space.json"
    save_space(flat08, path)
    back = load_space(path)
    assert back.n == flat08.n and back.num_edges == flat08.num_edges
    np.testing.assert_array_equal(back.weights, flat08.weights)
    np.testing.assert_array_equal(back.boundary, flat08.boundary)
    assert back.oracle == flat08.oracle and back.spacing == flat08.spacing
    assert json.loads(path.read_text())["vertices"] == flat08.n
    assert space_from_json(space_to_json(back)).n == back.n


def test_space_json_missing_field():
    with pytest.raises(SpaceError, match="vertices"):
        space_from_json({"edges": []})
