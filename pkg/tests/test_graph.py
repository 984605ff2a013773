import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcica.errors import ValidationError
from gcica.graph import (
    build_graph,
    combinatorial_laplacian,
    connected_components,
    is_connected_subset,
    laplacian,
    regularized_laplacian,
    smoothness_penalty,
)

from conftest import random_graph


def test_edge_list_is_symmetrized():
    g = build_graph([(0, 1, 1), (1, 2, 1)], n_nodes=3)
    expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float)
    np.testing.assert_array_equal(g.weights, expected)
    assert g.edges() == [(0, 1, 1.0), (1, 2, 1.0)]


@pytest.mark.parametrize("source, kw", [
    (np.array([[0, 1.0], [0, 0]]), {}),
    ([(0, 1, -0.5)], {"n_nodes": 2}),
    (np.array([[1.0, 0], [0, 0]]), {}),
    ([(0, 5, 1.0)], {"n_nodes": 3}),
])
def test_invalid_graphs_rejected(source, kw):
    with pytest.raises(ValidationError):
        build_graph(source, **kw)


def test_weights_are_read_only():
    g = build_graph([(0, 1, 1.0)], n_nodes=2)
    with pytest.raises(ValueError):
        g.weights[0, 1] = 5.0


def test_laplacian_path(path3):
    lap = combinatorial_laplacian(path3)
    np.testing.assert_array_equal(lap.matrix, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert lap.alpha == 0


def test_laplacian_single_edge():
    lap = combinatorial_laplacian(build_graph([(0, 1, 0.3)], n_nodes=2))
    np.testing.assert_allclose(lap.matrix, [[0.3, -0.3], [-0.3, 0.3]])


def test_regularized_laplacian(path3):
    lap = combinatorial_laplacian(path3)
    reg = regularized_laplacian(lap, 0.01)
    np.testing.assert_allclose(np.diag(reg.matrix), [1.01, 2.01, 1.01])
    np.testing.assert_allclose(reg.matrix - 0.01 * np.eye(3), lap.matrix, rtol=0, atol=1e-15)
    assert abs(np.linalg.eigvalsh(reg.matrix)[0] - 0.01) < 1e-10
    with pytest.raises(ValidationError):
        regularized_laplacian(lap, 0.0)
    with pytest.raises(ValidationError):
        regularized_laplacian(reg, 0.01)


def test_smoothness_examples(path3):
    lap = combinatorial_laplacian(path3)
    assert smoothness_penalty(np.ones(3), lap) == 0
    assert smoothness_penalty(np.array([1.0, 0, 0]), lap) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        smoothness_penalty(np.ones(4), lap)


def _edge_sum(a, w):
    n = len(a)
    return 0.5 * sum(w[i, j] * (a[i] - a[j]) ** 2 for i in range(n) for j in range(n))


@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_quadratic_form_matches_edge_sum(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, connected=False)
    a = rng.standard_normal(n)
    assert smoothness_penalty(a, combinatorial_laplacian(g)) == pytest.approx(_edge_sum(a, g.weights), abs=1e-10)
    alpha = 0.3
    assert smoothness_penalty(a, laplacian(g, alpha)) == pytest.approx(
        smoothness_penalty(a, laplacian(g)) + alpha * a @ a, abs=1e-10)


@given(st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_laplacian_psd_and_component_count(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p=0.15, connected=False)
    ev = np.linalg.eigvalsh(combinatorial_laplacian(g).matrix)
    assert ev[0] >= -1e-10
    np.testing.assert_allclose(combinatorial_laplacian(g).matrix.sum(axis=1), 0, atol=1e-12)
    assert len(connected_components(g)) == int(np.sum(np.abs(ev) < 1e-9))


def test_connected_components_examples():
    assert connected_components(build_graph([(0, 1, 1), (2, 3, 1)], n_nodes=4)) == [[0, 1], [2, 3]]
    full = np.ones((4, 4)) - np.eye(4)
    assert connected_components(build_graph(full)) == [[0, 1, 2, 3]]
    assert connected_components(build_graph(np.zeros((3, 3)))) == [[0], [1], [2]]


def test_connected_subset():
    g = build_graph([(0, 1, 1), (1, 2, 1), (3, 4, 1)], n_nodes=5)
    assert is_connected_subset(g, [0, 1, 2])
    assert not is_connected_subset(g, [0, 2])
    assert not is_connected_subset(g, [2, 3])
