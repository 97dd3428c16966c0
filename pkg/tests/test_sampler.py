import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gpsobolev import kernels as K
from gpsobolev.errors import ConfigurationError
from gpsobolev.grid import Box, build_grid
from gpsobolev.sampler import (
    c_p,
    c_p_asymptotic_ratio,
    empirical_sobolev_moment,
    path_normals,
    path_sobolev_powers,
    sample_paths,
)
from gpsobolev.spectral import nystrom_decompose, sigma_power_integral


def test_c_p_values():
    assert c_p(2) == 1.0
    assert abs(c_p(1) - math.sqrt(2 / math.pi)) < 1e-12
    assert abs(c_p(4) - 3.0) < 1e-10


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.5, 3.0, 4.0, 6.0, 7.3])
def test_c_p_against_quadrature(p):
    assert math.isclose(c_p(p), oracles.abs_normal_moment(p), rel_tol=1e-10)


def test_c_p_asymptotics():
    assert abs(c_p_asymptotic_ratio(200) - 1) < 0.05
    assert abs(c_p_asymptotic_ratio(1000) - 1) < 0.01
    assert math.isclose(c_p_asymptotic_ratio(2), 1 / math.e, rel_tol=1e-12)
    with pytest.raises(ConfigurationError):
        c_p(0)


@given(st.floats(0.1, 50.0))
@settings(max_examples=40, deadline=None)
def test_c_p_log_convex_growth(p):
    # Lyapunov: C_p^(1/p) is non-decreasing in p
    assert c_p(p) ** (1 / p) <= c_p(p * 1.1) ** (1 / (p * 1.1)) * (1 + 1e-12)


def test_zero_decomposition_gives_zero_paths():
    g = build_grid(Box.unit(), 30)
    dec = nystrom_decompose(K.zero_kernel(), (0,), g)
    batch = sample_paths(dec, 5, seed=1)
    assert batch.paths.shape == (5, 30) and np.all(batch.paths == 0)
    assert empirical_sobolev_moment(batch, 1, 2.0).mean == 0.0


def test_rank_one_paths():
    g = build_grid(Box.unit(), 50, "gauss_legendre")
    dec = nystrom_decompose(K.finite_rank([K.Polynomial([0, 1])]), (0,), g)
    batch = sample_paths(dec, 10_000, seed=3)
    x = g.nodes[:, 0]
    ratio = batch.paths / x
    np.testing.assert_allclose(ratio, ratio[:, :1] * np.ones_like(ratio), rtol=1e-10)
    # variance at x = 1 from the slope
    slope = ratio[:, 0]
    var = np.var(slope, ddof=1)
    se = var * math.sqrt(2 / (len(slope) - 1))
    assert abs(var - 1.0) <= 3 * se


def test_seed_determinism_and_thread_independence():
    g = build_grid(Box.unit(), 64)
    dec = nystrom_decompose(K.matern(1.5, 0.3), (0,), g)
    a = sample_paths(dec, 37, seed=9)
    b = sample_paths(dec, 37, seed=9)
    c = sample_paths(dec, 37, seed=9, threads=4)
    assert a.paths.tobytes() == b.paths.tobytes() == c.paths.tobytes()
    assert not np.array_equal(a.paths, sample_paths(dec, 37, seed=10).paths)


def test_single_path_regeneration():
    g = build_grid(Box.unit(), 40)
    dec = nystrom_decompose(K.squared_exponential(1, 0.3), (0,), g)
    batch = sample_paths(dec, 12, seed=5)
    xi = path_normals(5, 7, dec.truncation)
    one = (dec.modes * np.sqrt(dec.eigenvalues)) @ xi
    np.testing.assert_allclose(batch.paths[7], one, rtol=1e-12, atol=1e-14)


def test_truncation_monotonicity():
    g = build_grid(Box.unit(), 100)
    dec = nystrom_decompose(K.brownian(), (0,), g, mass=1.0, max_modes=None)
    means = [empirical_sobolev_moment(sample_paths(dec, 2000, 4, truncation=n), 0, 2.0).mean
             for n in (1, 2, 4, 8, 16, 64)]
    assert all(a <= b for a, b in zip(means, means[1:]))


def test_sampling_validation():
    g = build_grid(Box.unit(), 20)
    dec = nystrom_decompose(K.squared_exponential(), (0,), g)
    with pytest.raises(ConfigurationError):
        sample_paths(dec, 0)
    with pytest.raises(ConfigurationError):
        sample_paths(dec, 3, truncation=dec.truncation + 1)
    with pytest.raises(ConfigurationError):
        sample_paths(nystrom_decompose(K.squared_exponential(), (1,), g), 3)


def test_moment_identity_se_m0():
    g = build_grid(Box.unit(), 200, margin=0.05)
    dec = nystrom_decompose(K.squared_exponential(), (0,), g)
    batch = sample_paths(dec, 10_000, seed=7)
    for p, target in [(2.0, 0.9), (4.0, 2.7)]:
        est = empirical_sobolev_moment(batch, 0, p)
        assert abs(est.z_score(target)) <= 3


@pytest.mark.parametrize("k", [K.matern(2.5, 0.5), K.finite_rank([K.Polynomial([0, 1]), K.Sine(math.pi)])],
                         ids=["matern52", "finite_rank"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_moment_identity_builtin_suite(k, p):
    g = build_grid(Box.unit(), 128, margin=0.05)
    dec = nystrom_decompose(k, (0,), g, mass=1.0, max_modes=None)
    batch = sample_paths(dec, 10_000, seed=11)
    est = empirical_sobolev_moment(batch, 1, p)
    # with every mode kept the sampled field has covariance k on the grid, so the
    # difference-quotient diagonal makes the identity exact up to Monte Carlo error
    predicted = c_p(p) * (sigma_power_integral(k, (0,), g, p, region="interior")
                          + sigma_power_integral(k, (1,), g, p, "finite_difference", region="interior"))
    assert abs(est.z_score(predicted)) <= 3, (est, predicted)


def test_path_sobolev_powers_shape():
    g = build_grid(Box([0, 0], [1, 1]), 12)
    dec = nystrom_decompose(K.squared_exponential(2, 0.5), (0, 0), g)
    batch = sample_paths(dec, 4, seed=2)
    vals = path_sobolev_powers(batch, 1, 2.0)
    assert vals.shape == (4,) and np.all(vals > 0)
