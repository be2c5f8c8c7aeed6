"""Uplink success probability and the outage-constraint equivalence.

A node that transmits is served by its nearest AP; interference comes from
the other active nodes, an independent PPP of density
``lambda_w * rho / (T - N)``. The success probability reduces to a one
dimensional integral, which for alpha = 4 has a closed form in terms of the
Gaussian tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError, InfeasibleParamsError, UnsupportedAlphaError
from .numerics import Tolerance, find_root, gaussian_q, integrate_semi_infinite, scaled_q
from .params import NetworkParams

# relative slack for the inclusive "<=" of the density constraint
_CONSTRAINT_RTOL = 1e-12


@dataclass(frozen=True)
class PsucTerms:
    """Coefficients of the success-probability integral.

    ``P_suc = pi lambda_AP * int_0^inf exp(-a x - b x^(alpha/2)) dx``;
    for alpha = 4 this equals ``G * exp(upsilon**2 / 2) * Q(upsilon)``.
    """

    kappa: float
    a: float
    b: float
    g_term: float
    upsilon: float


@dataclass(frozen=True)
class OutageEquivalence:
    """Constants turning the outage budget into a density constraint."""

    k_epsilon: float
    g0: float
    p_min: float

    def to_dict(self) -> dict:
        return {"k_epsilon": self.k_epsilon, "g0": self.g0, "p_min_w": self.p_min}


def active_density(lambda_w: float, rho: float, t_slots: int, n_dl: int) -> float:
    """Density of nodes transmitting in one uplink slot."""
    if not 0 <= rho <= 1:
        raise DomainError("rho must lie in [0, 1]")
    if not 1 <= n_dl <= t_slots - 1:
        raise DomainError("n_dl must lie in [1, T-1]")
    return lambda_w * rho / (t_slots - n_dl)


def kappa(beta: float, alpha: float) -> float:
    """``beta^(2/a) * int_0^inf du / (1 + u^(a/2))`` in closed form.

    The integral equals ``(2 pi / a) / sin(2 pi / a)``.
    """
    if not alpha > 2:
        raise DomainError("alpha must be > 2")
    x = 2.0 * math.pi / alpha
    return beta ** (2.0 / alpha) * x / math.sin(x)


def kappa_quad(beta: float, alpha: float, tol: Tolerance = Tolerance()) -> float:
    """Numerical version of :func:`kappa`, for cross-checking.

    The integrand decays only polynomially. The tail u > 1 is mapped to
    w = 1/u, which leaves ``w^(h-2) / (1 + w^h)`` on [0, 1]; the algebraic
    endpoint factor is handled by a weighted rule.
    """
    if not alpha > 2:
        raise DomainError("alpha must be > 2")
    h = alpha / 2.0
    opts = dict(epsabs=tol.abs_tol, epsrel=tol.rel_tol, limit=200)
    head, _ = integrate.quad(lambda u: 1.0 / (1.0 + u ** h), 0.0, 1.0, **opts)
    tail, _ = integrate.quad(lambda w: 1.0 / (1.0 + w ** h), 0.0, 1.0, weight="alg",
                             wvar=(h - 2.0, 0.0), **opts)
    return beta ** (2.0 / alpha) * (head + tail)


def psuc_terms(params: NetworkParams, rho: float, n_dl: int, p_u: float) -> PsucTerms:
    if not p_u > 0:
        raise DomainError("p_u must be > 0")
    lam_a = active_density(params.lambda_w, rho, params.t_slots, n_dl)
    k = kappa(params.beta, params.alpha)
    a = math.pi * k * lam_a + math.pi * params.lambda_ap
    b = params.beta * params.sigma2 / p_u
    g = math.pi ** 1.5 * params.lambda_ap / math.sqrt(b)
    return PsucTerms(kappa=k, a=a, b=b, g_term=g, upsilon=a / math.sqrt(2.0 * b))


def psuc_general(params: NetworkParams, rho: float, n_dl: int, p_u: float,
                 tol: Tolerance = Tolerance()) -> float:
    """Success probability by quadrature, valid for any alpha > 2."""
    t = psuc_terms(params, rho, n_dl, p_u)
    h = params.alpha / 2.0

    def f(x):
        return math.exp(-t.a * x - t.b * x ** h)

    return math.pi * params.lambda_ap * integrate_semi_infinite(f, tol)


def psuc_closed4(params: NetworkParams, rho: float, n_dl: int, p_u: float) -> float:
    """Closed-form success probability for alpha = 4."""
    if params.alpha != 4:
        raise UnsupportedAlphaError("closed form requires alpha = 4")
    t = psuc_terms(params, rho, n_dl, p_u)
    return float(t.g_term * scaled_q(t.upsilon))


def _g0_residual(g: float, epsilon: float) -> float:
    return g * gaussian_q(g / (2.0 * math.pi)) - (1.0 - epsilon) * math.exp(-g * g / (4.0 * math.pi))


@lru_cache(maxsize=64)
def g0_solve(epsilon: float) -> float:
    """Root of ``g Q(g / 2pi) = (1 - eps) exp(-g^2 / 4pi)`` on [1e-9, 50]."""
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    return find_root(lambda g: float(_g0_residual(g, epsilon)), 1e-9, 50.0,
                     Tolerance(abs_tol=1e-12))


def outage_equivalence(params: NetworkParams, check: bool = True) -> OutageEquivalence:
    """K_eps, g0 and the minimum valid transmit power P_min.

    Raises
    ------
    InfeasibleParamsError
        If ``check`` and P_min > P_max.
    """
    eps, beta = params.epsilon, params.beta
    k_eps = 2.0 * eps / (1.0 - eps) / math.sqrt(beta) / math.pi
    g0 = g0_solve(eps)
    p_min = g0 ** 2 * beta * params.sigma2 / (math.pi ** 3 * params.lambda_ap ** 2)
    if check and p_min > params.p_max:
        raise InfeasibleParamsError(
            f"P_min = {p_min:.4g} W exceeds P_max = {params.p_max:.4g} W")
    return OutageEquivalence(k_epsilon=k_eps, g0=g0, p_min=p_min)


def density_constraint_ok(params: NetworkParams, rho: float, n_dl: int,
                          eq: OutageEquivalence) -> bool:
    """``lambda_w rho <= K_eps lambda_AP (T - N)`` (inclusive)."""
    rhs = eq.k_epsilon * params.lambda_ap * (params.t_slots - n_dl)
    return params.lambda_w * rho <= rhs * (1.0 + _CONSTRAINT_RTOL)


def constraint_ok(params: NetworkParams, rho: float, n_dl: int, p_u: float,
                  eq: OutageEquivalence) -> bool:
    """Density constraint plus ``P_min <= p_u <= P_max``."""
    power_ok = eq.p_min * (1.0 - _CONSTRAINT_RTOL) <= p_u <= params.p_max * (1.0 + _CONSTRAINT_RTOL)
    return bool(power_ok and density_constraint_ok(params, rho, n_dl, eq))


def distance_pdf(lambda_ap: float, r):
    """Density of the distance to the nearest point of a PPP."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("distance must be >= 0")
    out = 2.0 * math.pi * lambda_ap * r_arr * np.exp(-lambda_ap * math.pi * r_arr ** 2)
    return float(out) if np.ndim(out) == 0 else out
