import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpcn.errors import BracketError, ConvergenceError, DomainError
from wpcn.numerics import (
    DEFAULT_CLIP,
    ErfClipConfig,
    Tolerance,
    clipped_erf,
    erf,
    erfinv,
    find_root,
    gamma_ratio,
    gaussian_q,
    integrate_semi_infinite,
    scaled_q,
)

mp.mp.dps = 40


# --- values frozen from 40-digit mpmath evaluations -----------------------

def test_erf_frozen():
    assert erf(0.7) == pytest.approx(0.6778011938374184729756, rel=1e-14)


def test_erfinv_frozen():
    assert erfinv(0.3) == pytest.approx(0.2724627147267543556220, rel=1e-14)


def test_gaussian_q_frozen():
    assert gaussian_q(1.5) == pytest.approx(0.06680720126885806600449, rel=1e-13)


def test_scaled_q_large_argument_frozen():
    # exp(x^2/2) Q(x) at x = 30 underflows if computed naively
    assert scaled_q(30.0) == pytest.approx(0.01328334935398379427429, rel=1e-13)


def test_gamma_ratio_frozen():
    assert gamma_ratio(60, 4) == pytest.approx(7.729846246333355539119, rel=1e-13)
    assert gamma_ratio(7, 3) == pytest.approx(3.602175243020186243523, rel=1e-13)


def test_erf_clip_threshold_frozen():
    assert DEFAULT_CLIP.v_e == pytest.approx(4.320005384913445286298, rel=1e-12)


# --- mpmath oracles on grids ------------------------------------------------

def test_erf_matches_mpmath_grid():
    xs = np.linspace(-6, 6, 241)
    ref = np.array([float(mp.erf(mp.mpf(float(x)))) for x in xs])
    np.testing.assert_allclose(erf(xs), ref, rtol=1e-14, atol=1e-300)


def test_erfinv_matches_mpmath_near_one():
    ys = [0.5, 0.9, 0.999, 1 - 1e-9, 1 - 1e-14]
    for y in ys:
        ref = float(mp.erfinv(mp.mpf(y)))
        assert erfinv(y) == pytest.approx(ref, rel=1e-12)


def test_gamma_ratio_large_n_no_overflow():
    # Gamma(N) overflows a double at N ~ 171; the ratio must not
    ref = float(mp.gamma(500 + mp.mpf(1) / 2) / mp.gamma(500))
    assert gamma_ratio(500, 4) == pytest.approx(ref, rel=1e-12)


# --- invariants -------------------------------------------------------------

def test_erf_odd_increasing_bounded():
    x = np.linspace(-5, 5, 1000)
    y = erf(x)
    np.testing.assert_array_equal(erf(-x), -y)
    assert np.all(np.diff(y) > 0)
    assert np.all(np.abs(y) < 1)


@given(st.floats(min_value=-0.999, max_value=0.999))
def test_erfinv_inverts_erf(y):
    assert erf(erfinv(y)) == pytest.approx(y, abs=1e-10)


@given(st.floats(min_value=-2.3, max_value=2.3))
def test_erf_inverts_erfinv(x):
    assert erfinv(erf(x)) == pytest.approx(x, abs=1e-10)


def test_gaussian_q_decreasing_and_mills_bound():
    x = np.linspace(0.01, 30, 3000)
    q = gaussian_q(x)
    assert np.all(np.diff(q) < 0)
    bound = np.exp(-x ** 2 / 2) / (x * math.sqrt(2 * math.pi))
    assert np.all(q <= bound)


@given(st.integers(min_value=1, max_value=400), st.sampled_from([2.5, 3.0, 4.0, 6.0]))
def test_gamma_ratio_recurrence(n, alpha):
    lhs = gamma_ratio(n + 1, alpha) / gamma_ratio(n, alpha)
    assert lhs == pytest.approx((n + 2 / alpha) / n, rel=1e-12)


def test_scaled_q_consistent_with_q():
    x = np.linspace(0, 8, 50)
    np.testing.assert_allclose(scaled_q(x), np.exp(x ** 2 / 2) * gaussian_q(x), rtol=1e-12)


def test_clipped_erf_saturates_at_threshold():
    v = DEFAULT_CLIP.v_e
    assert clipped_erf(v) == 1.0
    assert clipped_erf(v * (1 - 1e-13)) == 1.0
    assert clipped_erf(v * 0.999) < 1.0
    assert clipped_erf(0.0) == 0.0


def test_clip_digits_move_threshold():
    assert ErfClipConfig(n_digits=6).v_e < ErfClipConfig(n_digits=12).v_e


def test_domain_errors():
    with pytest.raises(DomainError):
        erfinv(1.0)
    with pytest.raises(DomainError):
        erfinv(-1.5)
    with pytest.raises(DomainError):
        gamma_ratio(0, 4)
    with pytest.raises(DomainError):
        Tolerance(abs_tol=0)


# --- quadrature ---------------------------------------------------------------

def _simpson(f, hi, n=200_001):
    x = np.linspace(0.0, hi, n)
    y = f(x)
    h = x[1] - x[0]
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


@pytest.mark.parametrize("a,b,h", [(1.0, 0.5, 2.0), (0.01, 1e-4, 2.0), (3.0, 2.0, 1.5),
                                   (1e-3, 1e-7, 2.0)])
def test_quadrature_vs_simpson(a, b, h):
    f = lambda x: np.exp(-a * x - b * x ** h)  # noqa: E731
    # the integrand is below 1e-25 well before the Simpson cutoff
    hi = 60.0 / a
    got = integrate_semi_infinite(lambda x: float(f(x)))
    assert got == pytest.approx(_simpson(f, hi), rel=1e-8)


def test_quadrature_vs_mpmath():
    a, b = 2.5e-3, 5e-7
    ref = float(mp.quad(lambda x: mp.exp(-a * x - b * x ** 2), [0, mp.inf]))
    assert integrate_semi_infinite(lambda x: math.exp(-a * x - b * x * x)) == pytest.approx(
        ref, rel=1e-10)


def test_quadrature_rejects_non_decaying():
    with pytest.raises(ConvergenceError):
        integrate_semi_infinite(lambda x: 1.0)


# --- root finding -----------------------------------------------------------

def test_find_root_simple():
    r = find_root(lambda x: x * x - 2.0, 0.0, 2.0)
    assert r == pytest.approx(math.sqrt(2.0), rel=1e-14)


def test_find_root_bad_bracket():
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1.0, -1.0, 1.0)


@settings(max_examples=50)
@given(st.floats(min_value=0.01, max_value=100.0))
def test_find_root_cube(c):
    r = find_root(lambda x: x ** 3 - c, 0.0, 10.0)
    assert r ** 3 == pytest.approx(c, rel=1e-10)
