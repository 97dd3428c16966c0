import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsobolev.errors import ConfigurationError
from gpsobolev.grid import (
    Box,
    GridFunction,
    MultiIndex,
    build_grid,
    enumerate_multi_indices,
    lp_norm,
    lp_power,
)


def test_midpoint_nodes_and_weights():
    g = build_grid(Box.unit(), 4)
    np.testing.assert_allclose(g.nodes[:, 0], [1 / 8, 3 / 8, 5 / 8, 7 / 8])
    np.testing.assert_allclose(g.weights, 0.25)


@pytest.mark.parametrize("rule", ["midpoint", "gauss_legendre"])
def test_weights_sum_to_volume(rule):
    assert math.isclose(build_grid(Box.unit(), 7, rule).weights.sum(), 1.0, rel_tol=1e-14)
    g = build_grid(Box([0, 0], [2, 3]), 10, rule)
    assert g.size == 100
    assert abs(g.weights.sum() - 6.0) < 1e-13


def test_node_layout_is_c_order():
    g = build_grid(Box([0, 0], [1, 2]), 3)
    np.testing.assert_allclose(g.nodes[:3, 0], g.nodes[0, 0])
    np.testing.assert_allclose(g.nodes[:3, 1], g.axes[1])


def test_lp_norm_examples():
    g = build_grid(Box.unit(), 50)
    for p in (1.0, 1.5, 2.0, 7.0):
        assert math.isclose(lp_norm(g.function(lambda X: np.ones(len(X))), p), 1.0, rel_tol=1e-13)
    assert lp_norm(GridFunction(g, np.zeros(g.size)), 3.0) == 0.0
    gl = build_grid(Box.unit(), 200, "gauss_legendre")
    assert abs(lp_norm(gl.function(lambda X: X[:, 0]), 2.0) - 1 / math.sqrt(3)) < 1e-12


def test_lp_norm_rejects_small_p():
    g = build_grid(Box.unit(), 8)
    with pytest.raises(ConfigurationError):
        lp_norm(GridFunction(g, np.ones(g.size)), 0.5)


def test_lp_norm_does_not_overflow():
    g = build_grid(Box.unit(), 8)
    u = GridFunction(g, np.full(g.size, 1e200))
    assert math.isclose(lp_norm(u, 4.0), 1e200, rel_tol=1e-12)


def test_lp_power_is_norm_to_the_p():
    g = build_grid(Box.unit(), 64)
    u = g.function(lambda X: np.sin(3 * X[:, 0]))
    assert math.isclose(lp_power(u, 3.0), lp_norm(u, 3.0) ** 3, rel_tol=1e-12)


def test_midpoint_quadrature_error_decays_quadratically():
    # the n vs 2n difference shrinks by about 4 per doubling
    diffs = []
    for n in (16, 32, 64, 128):
        g1, g2 = build_grid(Box.unit(), n), build_grid(Box.unit(), 2 * n)
        a = lp_norm(g1.function(lambda X: np.sin(X[:, 0])), 2.0)
        b = lp_norm(g2.function(lambda X: np.sin(X[:, 0])), 2.0)
        diffs.append(abs(a - b))
    assert all(d1 > d2 for d1, d2 in zip(diffs, diffs[1:]))
    rates = [d1 / d2 for d1, d2 in zip(diffs, diffs[1:])]
    assert all(3.5 < r < 4.5 for r in rates)


def test_interior_mask_and_volume():
    g = build_grid(Box.unit(), 20, margin=0.1)
    x = g.nodes[g.interior_mask, 0]
    assert x.min() > 0.1 and x.max() < 0.9
    assert math.isclose(g.interior_volume(), 0.8, rel_tol=1e-12)


def test_build_grid_validation():
    with pytest.raises(ConfigurationError):
        build_grid(Box.unit(), 1)
    with pytest.raises(ConfigurationError):
        build_grid(Box.unit(), 10, rule="simpson")
    with pytest.raises(ConfigurationError):
        build_grid(Box.unit(), 10, margin=0.6)
    with pytest.raises((ConfigurationError, ValueError)):
        Box([0.0], [0.0])


def test_refined_keeps_margin():
    g = build_grid(Box.unit(), 10, margin=0.1)
    r = g.refined()
    assert r.n == 20 and r.margin == g.margin


def test_multi_index_enumeration_examples():
    assert enumerate_multi_indices(1, 2) == [(0,), (1,), (2,)]
    assert enumerate_multi_indices(2, 1) == [(0, 0), (0, 1), (1, 0)]
    assert len(enumerate_multi_indices(2, 2)) == 6


@given(st.integers(1, 3), st.integers(0, 4))
@settings(max_examples=30, deadline=None)
def test_multi_index_enumeration_properties(d, m):
    out = enumerate_multi_indices(d, m)
    assert out == enumerate_multi_indices(d, m)
    assert out == sorted(out)
    assert len(out) == math.comb(m + d, d)
    assert all(isinstance(a, MultiIndex) and a.order <= m and a.dim == d for a in out)


def test_multi_index_arithmetic():
    a, b = MultiIndex((1, 0)), MultiIndex((0, 2))
    assert a + b == (1, 2) and (a + b).order == 3
    assert MultiIndex.zero(3) == (0, 0, 0)
    with pytest.raises(ConfigurationError):
        MultiIndex((-1,))
