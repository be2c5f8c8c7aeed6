"""Special functions, semi-infinite quadrature and bracketed root finding.

Thin, validated wrappers around :mod:`scipy.special`, :mod:`scipy.integrate`
and :mod:`scipy.optimize`. The wrappers add the domain checks, the erf
saturation rule and the tail-truncation search the analytical modules rely
on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .errors import BracketError, ConvergenceError, DomainError

_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

# Relative slack used when comparing against the erf saturation threshold, so
# that a value constructed to sit exactly on the boundary is treated as on it.
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class Tolerance:
    """Stopping rule shared by the iterative routines."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError("max_iter must be a positive integer")


@dataclass(frozen=True)
class ErfClipConfig:
    """Saturation rule for erf: values at or beyond ``v_e`` count as 1.

    ``v_e`` satisfies ``1 - erf(v_e) = 10**(-n_digits)``.
    """

    n_digits: int = 9

    def __post_init__(self):
        if int(self.n_digits) != self.n_digits or self.n_digits < 1:
            raise DomainError("n_digits must be a positive integer")

    @property
    def v_e(self) -> float:
        # erfcinv avoids forming 1 - 10**-n, which rounds to 1 for n >= 16
        return float(special.erfcinv(10.0 ** (-self.n_digits)))

    def saturates(self, x) -> np.ndarray | bool:
        """True where ``x`` reaches the threshold (inclusive)."""
        return np.asarray(x) >= self.v_e * (1.0 - BOUNDARY_RTOL)


DEFAULT_CLIP = ErfClipConfig()


def erf(x):
    """Error function, accurate to double precision.

    Parameters
    ----------
    x : float or array_like
        Finite argument(s).
    """
    return special.erf(x)


def erfinv(y):
    """Inverse error function on (-1, 1).

    scipy's value is polished with one Newton step on ``erf(x) - y``;
    derivative is ``2/sqrt(pi) * exp(-x**2)``.

    Raises
    ------
    DomainError
        If any ``|y| >= 1``.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(~(np.abs(y_arr) < 1.0)):
        raise DomainError("erfinv requires |y| < 1")
    x = special.erfinv(y_arr)
    deriv = _TWO_OVER_SQRT_PI * np.exp(-x * x)
    x = x - (special.erf(x) - y_arr) / deriv
    return float(x) if np.ndim(x) == 0 else x


def gaussian_q(x):
    """Standard Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * special.erfc(np.asarray(x) / _SQRT2)


def scaled_q(x):
    """Overflow-safe ``exp(x**2 / 2) * Q(x)``.

    Equal to ``erfcx(x / sqrt(2)) / 2``; finite for every real ``x`` where
    the product is representable, and ~ ``1 / (x sqrt(2 pi))`` for large x.
    """
    return 0.5 * special.erfcx(np.asarray(x) / _SQRT2)


def gamma_ratio(n_dl, alpha: float):
    """``Gamma(N + 2/alpha) / Gamma(N)`` via log-gamma.

    Raises
    ------
    DomainError
        If ``alpha <= 2`` or ``N < 1``.
    """
    if not alpha > 2:
        raise DomainError("alpha must be > 2")
    n = np.asarray(n_dl, dtype=float)
    if np.any(n < 1):
        raise DomainError("N must be >= 1")
    out = np.exp(special.gammaln(n + 2.0 / alpha) - special.gammaln(n))
    return float(out) if np.ndim(out) == 0 else out


def clipped_erf(x, cfg: ErfClipConfig = DEFAULT_CLIP):
    """erf(x) for x >= 0, replaced by exactly 1 once x reaches ``cfg.v_e``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("clipped_erf is defined for x >= 0")
    out = np.where(cfg.saturates(x_arr), 1.0, special.erf(x_arr))
    return float(out) if np.ndim(out) == 0 else out


def _tail_cutoff(f: Callable[[float], float], start: float, max_doublings: int,
                 ratio: float = 1e-14) -> tuple[float, list[float]]:
    """Double x from ``start`` until f(x) drops below ``ratio`` times the peak.

    Returns the cut-off and the visited points, which are used as
    quadrature breakpoints so the integrator sees every scale.
    """
    peak = abs(f(0.0))
    x = start
    pts = []
    for _ in range(max_doublings):
        fx = abs(f(x))
        peak = max(peak, fx)
        pts.append(x)
        if peak > 0 and fx < ratio * peak:
            return x, pts
        x *= 2.0
    raise ConvergenceError("integrand tail did not decay within the doubling budget")


def integrate_semi_infinite(f: Callable[[float], float], tol: Tolerance = Tolerance(),
                            start: float = 1e-8) -> float:
    """Integrate a nonnegative, exponentially decaying ``f`` over [0, inf).

    The range is truncated at the first point of a doubling search where f
    falls below 1e-14 of the largest value seen, then integrated with
    adaptive Gauss-Kronrod (QUADPACK) using the doubling points as
    breakpoints.

    Raises
    ------
    ConvergenceError
        If the tail search or the adaptive integrator fails.
    """
    x_cut, pts = _tail_cutoff(f, start, max_doublings=2 * tol.max_iter)
    inner = [p for p in pts if 0.0 < p < x_cut]
    val, err, info = integrate.quad(
        f, 0.0, x_cut, points=inner or None, epsabs=tol.abs_tol * 1e-2,
        epsrel=tol.rel_tol * 1e-2, limit=max(50, tol.max_iter), full_output=True)[:3]
    if err > max(tol.abs_tol, tol.rel_tol * abs(val)):
        raise ConvergenceError(
            f"quadrature error estimate {err:.3g} exceeds tolerance (value {val:.6g})")
    return float(val)


def find_root(f: Callable[[float], float], lo: float, hi: float,
              tol: Tolerance = Tolerance()) -> float:
    """Root of a continuous scalar function on a sign-changing bracket.

    Uses Brent's method (inverse quadratic interpolation safeguarded by
    bisection), which always converges on a valid bracket.

    Raises
    ------
    BracketError
        If ``f(lo) * f(hi) >= 0`` and neither endpoint is a root.
    ConvergenceError
        If the iteration budget is exhausted or the residual at the converged
        point still exceeds ``tol.abs_tol``.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not flo * fhi < 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    try:
        x = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                            maxiter=tol.max_iter)
    except RuntimeError as exc:  # maxiter exhausted
        raise ConvergenceError(str(exc)) from exc
    if abs(f(x)) > tol.abs_tol:
        raise ConvergenceError(f"residual {abs(f(x)):.3g} above abs_tol at x={x}")
    return float(x)
