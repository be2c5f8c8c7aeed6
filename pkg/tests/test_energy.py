import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from wpcn.energy import (
    EnergyDistribution,
    ccdf_zf,
    chernoff_exponent,
    laplace_zf,
    rho_free,
    sample_zf,
)
from wpcn.errors import DomainError, UnsupportedAlphaError
from wpcn.params import NetworkParams

P = NetworkParams()  # lambda_AP = 0.0008, P_D = 10 W, eta = 0.4, alpha = 4


@pytest.fixture
def dist60():
    return EnergyDistribution(P, 60)


# --- frozen oracles (40-digit mpmath) ---------------------------------------

def test_c_coeff_frozen(dist60):
    assert dist60.c_coeff == pytest.approx(0.03443385541173000781, rel=1e-13)


def test_ccdf_frozen(dist60):
    assert ccdf_zf(dist60, 0.02) == pytest.approx(0.26940830694880963729, rel=1e-13)


def test_chernoff_exponent_frozen(dist60):
    assert chernoff_exponent(dist60, 0.02) == pytest.approx(11.856903985159279457, rel=1e-12)


# --- dual route: the CCDF and the Laplace transform describe the same law ------

@pytest.mark.parametrize("s", [0.5, 5.0, 50.0])
def test_laplace_from_ccdf(dist60, s):
    # E[e^{-sZ}] = s * int_0^inf e^{-sz} P(Z < z) dz, evaluated from the CCDF
    c = dist60.c_coeff

    def integrand(z):
        return math.exp(-s * z) * math.erfc(c / math.sqrt(z)) if z > 0 else 0.0

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
    assert s * val == pytest.approx(laplace_zf(dist60, s), rel=1e-8)


def test_laplace_general_alpha_by_mpmath():
    # alpha = 3: compare with the PGFL written as an integral over the plane
    p = P.with_(alpha=3.0)
    d = EnergyDistribution(p, 4)
    s = 2.0
    lam, n = p.lambda_ap, 4
    x = p.p_d * p.eta * s

    def inner(r):
        return (1 - (1 + x * r ** -3) ** -n) * 2 * mp.pi * r

    ref = mp.exp(-lam * mp.quad(inner, [0, 1, 10, mp.inf]))
    assert laplace_zf(d, s) == pytest.approx(float(ref), rel=1e-8)


# --- invariants ---------------------------------------------------------------

def test_ccdf_limits_and_monotone(dist60):
    assert ccdf_zf(dist60, 0.0) == 1.0
    assert ccdf_zf(dist60, 1e12) < 1e-6
    z = np.logspace(-6, 4, 500)
    v = ccdf_zf(dist60, z)
    assert np.all(np.diff(v) <= 0)
    # strict wherever the value has not rounded to 1
    assert np.all(np.diff(v[v < 1.0]) < 0)


@settings(max_examples=40)
@given(st.integers(min_value=1, max_value=97), st.floats(min_value=1e-6, max_value=10.0))
def test_ccdf_increasing_in_n(n, z):
    lo = ccdf_zf(EnergyDistribution(P, n), z)
    hi = ccdf_zf(EnergyDistribution(P, n + 1), z)
    assert hi >= lo
    if lo < 0.999:
        assert hi > lo


def test_sample_consistent_with_ccdf_ks(dist60):
    u = np.random.default_rng(12345).random(1_000_000)
    u = u[u > 0]
    z = sample_zf(dist60, u)
    cdf = lambda x: 1.0 - ccdf_zf(dist60, x)  # noqa: E731
    res = stats.kstest(z, cdf)
    assert res.pvalue > 0.001


@given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_sample_inverts_ccdf(u):
    d = EnergyDistribution(P, 10)
    assert ccdf_zf(d, sample_zf(d, u)) == pytest.approx(u, rel=1e-9)


def test_laplace_at_zero_and_log_linear_in_density(dist60):
    assert laplace_zf(dist60, 0.0) == 1.0
    s = 3.0
    l1 = math.log(laplace_zf(dist60, s))
    l2 = math.log(laplace_zf(EnergyDistribution(P.with_(lambda_ap=3 * P.lambda_ap), 60), s))
    assert l2 / l1 == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("lam", [1e-4, 8e-4, 3e-3])
@pytest.mark.parametrize("n", [1, 10, 60])
@pytest.mark.parametrize("p_u", [1e-5, 0.02])
def test_chernoff_fixed_point(lam, n, p_u):
    d = EnergyDistribution(P.with_(lambda_ap=lam), n)
    q = chernoff_exponent(d, p_u)
    # log E[e^{-QZ}] + Q P_U = 0, scaled by Q P_U; the log is taken in
    # 40-digit arithmetic because E[e^{-QZ}] underflows for large Q
    p = d.params
    log_l = -mp.mpf(d.laplace_coeff) * mp.power(mp.mpf(p.p_d * p.eta * q), mp.mpf(2) / p.alpha)
    if q < 700:
        assert math.log(laplace_zf(d, q)) == pytest.approx(float(log_l), rel=1e-12)
    resid = (log_l + q * p_u) / (q * p_u)
    assert abs(float(resid)) < 1e-10


def test_rho_free_clips_to_one():
    d = EnergyDistribution(P.with_(lambda_ap=0.05), 60)
    assert rho_free(d, 0.02) == 1.0
    assert rho_free(EnergyDistribution(P, 60), 0.02) == pytest.approx(0.2694083069488, rel=1e-12)


def test_errors():
    d = EnergyDistribution(P, 5)
    with pytest.raises(DomainError):
        ccdf_zf(d, -1.0)
    with pytest.raises(DomainError):
        sample_zf(d, 1.0)
    with pytest.raises(DomainError):
        rho_free(d, 0.0)
    with pytest.raises(DomainError):
        laplace_zf(d, -0.1)
    with pytest.raises(DomainError):
        EnergyDistribution(P, 100)
    with pytest.raises(UnsupportedAlphaError):
        ccdf_zf(EnergyDistribution(P.with_(alpha=3.0), 5), 0.1)
