import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gpsobolev import kernels as K
from gpsobolev.errors import ConfigurationError, NotPositiveDefinite
from gpsobolev.grid import Box, build_grid
from gpsobolev.spectral import (
    CONVERGENT,
    DIVERGENT,
    TraceEstimate,
    differentiated_mercer_trace,
    nuclear_bound_report,
    nystrom_decompose,
    operator_spectrum,
    resolve_source,
    rkhs_imbedding_trace,
    trace_diagonal,
    trace_refinement,
)


@pytest.fixture(scope="module")
def brownian_dec():
    g = build_grid(Box.unit(), 2000)
    return nystrom_decompose(K.brownian(), (0,), g, mass=1.0, max_modes=None)


def test_brownian_spectrum(brownian_dec):
    lam = brownian_dec.eigenvalues
    for n in range(1, 11):
        assert math.isclose(lam[n - 1], oracles.brownian_eigenvalue(n), rel_tol=1e-2)
    assert math.isclose(lam[0], 0.405285, rel_tol=1e-5)


def test_brownian_eigenfunctions(brownian_dec):
    x = brownian_dec.grid.nodes[:, 0]
    for n in range(1, 4):
        phi = brownian_dec.modes[:, n - 1]
        ref = oracles.brownian_eigenfunction(n, x)
        ref *= np.sign(ref[np.argmax(np.abs(ref) > 1e-12 * np.abs(ref).max())])
        assert np.max(np.abs(phi - ref)) < 1e-2


def test_weight_orthonormality(brownian_dec):
    V = brownian_dec.modes[:, :40]
    w = brownian_dec.grid.weights
    np.testing.assert_allclose(V.T @ (w[:, None] * V), np.eye(40), atol=1e-10)


def test_sign_convention(brownian_dec):
    V = brownian_dec.modes[:, :20]
    first = V[np.argmax(np.abs(V) > 1e-12 * np.abs(V).max(axis=0), axis=0), np.arange(20)]
    assert np.all(first > 0)


def test_trace_consistency(brownian_dec):
    g = brownian_dec.grid
    diag = trace_diagonal(K.brownian(), (0,), g)
    assert abs(diag - 0.5) < 1e-3
    assert abs(brownian_dec.all_eigenvalues.sum() - diag) <= 1e-10 * diag


@pytest.mark.parametrize("k,box", [
    (K.squared_exponential(1, 0.3), Box.unit()),
    (K.matern(2.5, 0.5, d=2), Box([0, 0], [1, 1])),
    (K.hat_series([0.0, 1.0], [1.0, 0.5]), None),
])
def test_trace_equals_eigenvalue_sum(k, box):
    g = build_grid(box or k.default_box(), 40 if k.dimension == 2 else 300)
    lam = operator_spectrum(k, (0,) * k.dimension, g)
    assert math.isclose(lam.sum(), trace_diagonal(k, (0,) * k.dimension, g), rel_tol=1e-10)


def test_finite_rank_spectrum():
    g = build_grid(Box.unit(), 400, "gauss_legendre")
    dec = nystrom_decompose(K.finite_rank([K.Polynomial([0, 1])]), (0,), g)
    assert dec.truncation == 1
    assert math.isclose(dec.eigenvalues[0], 1 / 3, rel_tol=1e-10)
    assert np.all(np.abs(dec.all_eigenvalues[1:]) < 1e-12)
    two = nystrom_decompose(K.finite_rank([K.Polynomial([0, 1]), K.Sine(math.pi)]), (0,), g)
    assert np.sum(two.all_eigenvalues > 1e-10 * two.all_eigenvalues[0]) == 2


def test_zero_kernel_spectrum():
    dec = nystrom_decompose(K.zero_kernel(), (0,), build_grid(Box.unit(), 50))
    assert dec.truncation == 0 and np.all(dec.all_eigenvalues == 0)


def test_mass_truncation_and_cap():
    g = build_grid(Box.unit(), 400)
    dec = nystrom_decompose(K.brownian(), (0,), g, mass=0.99)
    kept = dec.eigenvalues.sum()
    assert kept >= 0.99 * dec.matrix_trace
    assert dec.eigenvalues[:-1].sum() < 0.99 * dec.matrix_trace
    assert nystrom_decompose(K.brownian(), (0,), g, mass=1.0, max_modes=7).truncation == 7
    assert math.isclose(kept + dec.discarded_mass, dec.matrix_trace, rel_tol=1e-12)


def test_mercer_reconstruction_converges():
    k = K.matern(1.5, 0.4)
    g = build_grid(Box.unit(), 200)
    dec = nystrom_decompose(k, (0,), g, mass=1.0, max_modes=None)
    G = k.matrix(g.nodes)
    errs = [np.linalg.norm(dec.reconstruct(n) - G) for n in (5, 20, 80, dec.truncation)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-10 * np.linalg.norm(G)


@given(st.integers(0, 60))
@settings(max_examples=20, deadline=None)
def test_loewner_truncation_monotone(n):
    k = K.squared_exponential(1, 0.2)
    g = build_grid(Box.unit(), 120)
    dec = nystrom_decompose(k, (0,), g, mass=1.0, max_modes=None)
    n = min(n, dec.truncation)
    full = trace_diagonal(k, (0,), g)
    part = dec.truncated(n).eigenvalues.sum()
    assert part <= full * (1 + 1e-12)
    if n:
        assert dec.truncated(n - 1).eigenvalues.sum() <= part
    # truncated operator sits below the full one in the Loewner order
    residual = k.matrix(g.nodes) - dec.reconstruct(n)
    assert np.linalg.eigvalsh(residual).min() > -1e-8


def test_not_positive_definite_raised():
    bad = K.CustomBasis({(0,): lambda X: X[..., 0]})

    class Indefinite(K.Kernel):
        name = "indefinite"

        def _value(self, x, y):
            return -bad(x) * bad(y)

    with pytest.raises(NotPositiveDefinite):
        nystrom_decompose(Indefinite(1), (0,), build_grid(Box.unit(), 20))


def test_resolve_source():
    assert resolve_source(K.squared_exponential(), (1,)) == "analytic"
    assert resolve_source(K.brownian(), (1,)) == "finite_difference"
    assert resolve_source(K.brownian(), (0,)) == "analytic"
    with pytest.raises(ConfigurationError):
        resolve_source(K.brownian(), (0,), "symbolic")


# -- trace examples -------------------------------------------------------

def test_trace_examples():
    assert abs(trace_diagonal(K.brownian(), (0,), build_grid(Box.unit(), 1000)) - 0.5) < 1e-9
    for ell in (0.5, 1.0):
        v = trace_diagonal(K.squared_exponential(1, ell), (1,), build_grid(Box.unit(), 64))
        assert math.isclose(v, 1 / ell**2, rel_tol=1e-12)
    hs = K.hat_series([0.0], [1.0])
    assert math.isclose(trace_diagonal(hs, (1,), build_grid(Box((-2,), (2,)), 512)), 2.0, rel_tol=1e-12)


def test_differentiated_mercer_se():
    k = K.squared_exponential()
    g = build_grid(Box.unit(), 200, margin=0.05)
    dec = nystrom_decompose(k, (0,), g)
    mercer = differentiated_mercer_trace(dec, (1,))
    diag = trace_diagonal(k, (1,), g, region="interior")
    assert abs(mercer - diag) <= 0.02 * diag
    assert math.isclose(differentiated_mercer_trace(dec, (0,)),
                        trace_diagonal(k, (0,), g, region="interior"), rel_tol=0.02)


def test_differentiated_mercer_finite_rank():
    k = K.finite_rank([K.Polynomial([0, 1])])
    g = build_grid(Box.unit(), 400, margin=0.01)
    dec = nystrom_decompose(k, (0,), g)
    # lambda_1 ||phi_1'||^2 = ||f'||^2 over the interior
    assert math.isclose(differentiated_mercer_trace(dec, (1,)), g.interior_volume(), rel_tol=1e-8)


# Matérn at its top analytic order: lambda_n decays like n^-(2 nu + 1) and the
# derivative weights grow like n^(2 |alpha|), so the tail beyond 99.99 % mass
# carries more than 2 % of the derivative trace.
BOUNDARY_MATERN = pytest.mark.xfail(
    strict=True, reason="derivative tail beyond 99.99% mass exceeds 2%")


@pytest.mark.parametrize("k,alpha", [
    (K.squared_exponential(1, 0.5), (1,)),
    (K.squared_exponential(1, 0.5), (2,)),
    (K.squared_exponential(2, 0.5), (1, 0)),
    (K.matern(2.5, 0.7), (1,)),
    pytest.param(K.matern(2.5, 0.7), (2,), marks=BOUNDARY_MATERN),
    pytest.param(K.matern(1.5, 0.7), (1,), marks=BOUNDARY_MATERN),
    (K.finite_rank([K.Polynomial([0, 1]), K.Sine(math.pi)]), (1,)),
    (K.hat_series([0.0], [1.0]), (1,)),
])
def test_differentiated_mercer_builtin_suite(k, alpha):
    g = build_grid(k.default_box() if k.name == "hat_series" else Box.unit(d=k.dimension),
                   40 if k.dimension == 2 else 256)
    dec = nystrom_decompose(k, (0,) * k.dimension, g)
    diag = trace_diagonal(k, alpha, g, region="interior")
    assert abs(differentiated_mercer_trace(dec, alpha) - diag) <= 0.02 * diag


@pytest.mark.parametrize("nu,alpha", [(2.5, (2,)), (1.5, (1,))])
def test_differentiated_mercer_boundary_matern_all_modes(nu, alpha):
    k = K.matern(nu, 0.7)
    g = build_grid(Box.unit(), 256)
    dec = nystrom_decompose(k, (0,), g, mass=1.0, max_modes=None)
    diag = trace_diagonal(k, alpha, g, region="interior")
    assert abs(differentiated_mercer_trace(dec, alpha) - diag) <= 0.02 * diag


def test_mercer_needs_full_alpha_zero():
    g = build_grid(Box.unit(), 50)
    dec = nystrom_decompose(K.squared_exponential(), (1,), g)
    with pytest.raises(ConfigurationError):
        differentiated_mercer_trace(dec, (1,))


def test_rkhs_imbedding_trace_hat():
    hs = K.hat_series([0.0], [1.0])
    g = build_grid(Box((-2,), (2,)), 512)
    sq, dsq = oracles.hat_integrals()
    assert math.isclose(rkhs_imbedding_trace(hs, 1, g), sq + dsq, rel_tol=1e-4)
    assert math.isclose(rkhs_imbedding_trace(hs, 0, g), trace_diagonal(hs, (0,), g))


def test_rkhs_imbedding_trace_finite_rank():
    k = K.finite_rank([K.Polynomial([0, 1])])
    g = build_grid(Box.unit(), 300, "gauss_legendre")
    assert math.isclose(rkhs_imbedding_trace(k, 1, g), 4 / 3, rel_tol=1e-10)


# -- refinement -----------------------------------------------------------

@pytest.mark.parametrize("k,factor", [(K.brownian(), 1.0), (K.exponential(), 2.0)])
def test_divergence_detection(k, factor):
    box = Box.unit()
    grids = [build_grid(box, n, margin=0.05) for n in (100, 200, 400)]
    est = trace_refinement(k, (1,), grids)
    assert est.source == "finite_difference"
    assert est.classification == DIVERGENT
    s = est.refinement_series
    assert all(b / a >= 1.8 for a, b in zip(s, s[1:]))
    # trace ~ factor / h over the interior
    h = grids[-1].spacing[0]
    assert math.isclose(s[-1], factor / h * grids[-1].interior_volume(), rel_tol=0.01)


def test_convergent_refinement_with_spectral_value():
    grids = [build_grid(Box.unit(), n, margin=0.05) for n in (50, 100, 200)]
    est = trace_refinement(K.squared_exponential(), (1,), grids, spectral=True)
    assert est.classification == CONVERGENT
    assert math.isclose(est.spectral_value, est.diagonal_value, rel_tol=1e-10)
    assert TraceEstimate.from_dict(est.to_dict()) == est


# -- nuclear bounds -------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("k", [K.squared_exponential(), K.brownian()], ids=["se", "brownian"])
def test_nuclear_checks(k, p):
    rep = nuclear_bound_report(k, p, build_grid(Box.unit(), 400))
    assert rep.passed, rep.checks
    assert rep.checks


def test_nuclear_examples():
    g = build_grid(Box.unit(), 400)
    rb = nuclear_bound_report(K.brownian(), 2.0, g)
    assert abs(rb.sigma_p_sq - 0.5) < 1e-3 and abs(rb.eigenvalue_sum - 0.5) < 1e-3
    assert rb.c_p_factor == 1.0
    rs = nuclear_bound_report(K.squared_exponential(), 4.0, g)
    assert math.isclose(rs.sigma_p_sq, 1.0, rel_tol=1e-12)
    assert math.isclose(rs.c_p_factor, 3 ** -0.5, rel_tol=1e-12)
