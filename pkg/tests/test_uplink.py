import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpcn.errors import DomainError, InfeasibleParamsError, UnsupportedAlphaError
from wpcn.numerics import gaussian_q
from wpcn.params import NetworkParams
from wpcn.uplink import (
    _g0_residual,
    active_density,
    constraint_ok,
    density_constraint_ok,
    distance_pdf,
    g0_solve,
    kappa,
    kappa_quad,
    outage_equivalence,
    psuc_closed4,
    psuc_general,
    psuc_terms,
)

P = NetworkParams()


# --- frozen oracles (40-digit mpmath) ---------------------------------------

def test_outage_constants_frozen():
    eq = outage_equivalence(P)
    assert eq.g0 == pytest.approx(1.876271399902946561815, rel=1e-11)
    assert eq.k_epsilon == pytest.approx(0.01498447459825635912583, rel=1e-13)
    assert eq.p_min == pytest.approx(0.0008870165634102693740, rel=1e-10)


def test_kappa_frozen():
    assert kappa(5, 4) == pytest.approx(3.512407365520363196578, rel=1e-14)


def test_psuc_frozen():
    # pi lambda_AP int exp(-a x - b x^2) dx by mpmath at rho = 0.5, N = 60, P_U = 0.02 W
    ref = 0.8832146408907226354803
    assert psuc_closed4(P, 0.5, 60, 0.02) == pytest.approx(ref, rel=1e-12)
    assert psuc_general(P, 0.5, 60, 0.02) == pytest.approx(ref, rel=1e-9)


# --- dual routes ----------------------------------------------------------------

@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 5.0])
@pytest.mark.parametrize("beta", [0.5, 5.0])
def test_kappa_closed_vs_quadrature(alpha, beta):
    assert kappa(beta, alpha) == pytest.approx(kappa_quad(beta, alpha), rel=1e-9)


def test_closed_vs_general_grid():
    rhos = np.linspace(0.0, 1.0, 5)
    pus = np.logspace(-7, math.log10(0.02), 5)
    lams = np.logspace(-4, -2, 5)
    worst = 0.0
    for rho, pu, lam in itertools.product(rhos, pus, lams):
        p = P.with_(lambda_ap=float(lam))
        a = psuc_closed4(p, float(rho), 60, float(pu))
        b = psuc_general(p, float(rho), 60, float(pu))
        worst = max(worst, abs(a - b) / b)
    assert worst <= 1e-6


def test_general_alpha3_vs_mpmath():
    p = P.with_(alpha=3.0)
    t = psuc_terms(p, 0.4, 20, 1e-4)
    ref = mp.pi * p.lambda_ap * mp.quad(lambda x: mp.exp(-t.a * x - t.b * x ** 1.5),
                                        [0, 1, 100, mp.inf])
    assert psuc_general(p, 0.4, 20, 1e-4) == pytest.approx(float(ref), rel=1e-8)


# --- monotonicity -------------------------------------------------------------

@settings(max_examples=60)
@given(st.floats(0.0, 0.95), st.floats(1e-6, 0.019), st.integers(1, 98))
def test_psuc_monotone(rho, pu, n):
    base = psuc_closed4(P, rho, n, pu)
    assert psuc_closed4(P, rho + 0.05, n, pu) < base
    assert psuc_closed4(P, rho, n, pu * 1.05) > base
    if rho > 1e-9:
        assert psuc_closed4(P.with_(lambda_w=P.lambda_w * 1.5), rho, n, pu) < base


# --- outage equivalence -------------------------------------------------------

def test_interference_limited_success_is_exactly_one_minus_eps():
    # with the density constraint tight and noise negligible, kappa * K_eps =
    # eps / (1 - eps) and the success probability is 1 - eps
    for eps in (0.2, 0.05, 1e-3):
        p = P.with_(epsilon=eps)
        eq = outage_equivalence(p, check=False)
        n = 95
        rho = eq.k_epsilon * p.lambda_ap * (p.t_slots - n) / p.lambda_w
        assert 0 < rho < 1
        got = psuc_closed4(p, rho, n, 1e9)
        assert got == pytest.approx(1 - eps, abs=1e-9)


def test_noise_only_success_at_p_min_closed_form():
    # with no interferers the success probability at P_min reduces to
    # g0 exp(g0^2 / 4 pi) Q(g0 / sqrt(2 pi))
    for eps in (0.05, 0.01):
        p = P.with_(epsilon=eps)
        eq = outage_equivalence(p)
        g = eq.g0
        expect = g * math.exp(g * g / (4 * math.pi)) * gaussian_q(g / math.sqrt(2 * math.pi))
        assert psuc_closed4(p, 0.0, 60, eq.p_min) == pytest.approx(expect, rel=1e-10)


@pytest.mark.xfail(strict=True, reason="with g0 from g Q(g/2pi) = (1-eps) exp(-g^2/4pi) "
                   "the noise term alone gives about 0.56 at P_min")
def test_success_at_boundary_within_band():
    eq = outage_equivalence(P)
    n = 60
    rho = eq.k_epsilon * P.lambda_ap * (P.t_slots - n) / P.lambda_w
    assert constraint_ok(P, rho, n, eq.p_min, eq)
    assert 1 - P.epsilon - 0.02 <= psuc_closed4(P, rho, n, eq.p_min) <= 1


def test_g0_unique_sign_change():
    g = np.linspace(1e-9, 50, 10_000)
    r = np.array([_g0_residual(x, 0.05) for x in g])
    assert np.count_nonzero(np.diff(np.sign(r)) != 0) == 1
    g0 = g0_solve(0.05)
    assert abs(_g0_residual(g0, 0.05)) < 1e-12


def test_p_min_scales_with_noise_and_density():
    e1 = outage_equivalence(P)
    e2 = outage_equivalence(P.with_(sigma2=2e-9, lambda_ap=2 * P.lambda_ap))
    assert e2.p_min == pytest.approx(e1.p_min * 2 / 4, rel=1e-12)


def test_infeasible_when_p_min_above_p_max():
    p = P.with_(lambda_ap=1e-4)
    with pytest.raises(InfeasibleParamsError):
        outage_equivalence(p)
    eq = outage_equivalence(p, check=False)
    assert eq.p_min > p.p_max


def test_constraint_inclusive_at_equality():
    eq = outage_equivalence(P)
    n = 60
    rho = eq.k_epsilon * P.lambda_ap * (P.t_slots - n) / P.lambda_w
    assert density_constraint_ok(P, rho, n, eq)
    assert not density_constraint_ok(P, rho * (1 + 1e-9), n, eq)
    assert constraint_ok(P, rho, n, P.p_max, eq)
    assert not constraint_ok(P, rho, n, eq.p_min * 0.99, eq)


# --- helpers --------------------------------------------------------------------

def test_active_density():
    assert active_density(0.0012, 0.5, 100, 60) == pytest.approx(0.0012 * 0.5 / 40)
    with pytest.raises(DomainError):
        active_density(0.0012, 1.5, 100, 60)
    with pytest.raises(DomainError):
        active_density(0.0012, 0.5, 100, 100)


def test_distance_pdf_normalized():
    lam = 8e-4
    val = float(mp.quad(lambda r: distance_pdf(lam, float(r)), [0, 10, 50, mp.inf]))
    assert val == pytest.approx(1.0, abs=1e-10)


def test_errors():
    with pytest.raises(UnsupportedAlphaError):
        psuc_closed4(P.with_(alpha=3.0), 0.5, 60, 0.02)
    with pytest.raises(DomainError):
        psuc_terms(P, 0.5, 60, 0.0)
    with pytest.raises(DomainError):
        g0_solve(1.0)
    with pytest.raises(DomainError):
        kappa(5, 2.0)
