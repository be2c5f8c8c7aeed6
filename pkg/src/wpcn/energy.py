"""Distribution of the energy a node harvests over the downlink phase.

A node collects energy from every AP of a PPP during N slots with Rayleigh
fading, so per AP the fading sum is Erlang(N, 1). The resulting energy Z
has a closed-form Laplace transform for any alpha > 2 and, for alpha = 4,
the CCDF ``P(Z >= z) = erf(c / sqrt(z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedAlphaError
from .numerics import DEFAULT_CLIP, ErfClipConfig, clipped_erf, erfinv, gamma_ratio
from .params import NetworkParams


def _require_alpha4(params: NetworkParams):
    if params.alpha != 4:
        raise UnsupportedAlphaError(
            f"closed-form CCDF needs alpha = 4, got {params.alpha}")


@dataclass(frozen=True)
class EnergyDistribution:
    """Harvested energy Z for a given downlink length ``n_dl``."""

    params: NetworkParams
    n_dl: int

    def __post_init__(self):
        object.__setattr__(self, "n_dl", self.params.check_n_dl(self.n_dl))

    @property
    def laplace_coeff(self) -> float:
        """``A = pi * lambda_AP * Gamma(N+2/a)/Gamma(N) * Gamma(1-2/a)``."""
        p = self.params
        return (math.pi * p.lambda_ap * gamma_ratio(self.n_dl, p.alpha)
                * math.gamma(1.0 - 2.0 / p.alpha))

    @property
    def c_coeff(self) -> float:
        """Coefficient c of the alpha = 4 CCDF ``erf(c / sqrt(z))``."""
        p = self.params
        return (p.lambda_ap * gamma_ratio(self.n_dl, p.alpha) / 2.0
                * math.sqrt(math.pi ** 3 * p.p_d * p.eta))


def laplace_zf(dist: EnergyDistribution, s):
    """``E[exp(-s Z)]`` for s >= 0 (any alpha > 2)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("Laplace argument must be >= 0")
    p = dist.params
    out = np.exp(-dist.laplace_coeff * (p.p_d * p.eta * s_arr) ** (2.0 / p.alpha))
    return float(out) if np.ndim(out) == 0 else out


def ccdf_zf(dist: EnergyDistribution, z):
    """``P(Z >= z)``; requires alpha = 4.

    Returns 1 at z = 0 and decays like ``2c / sqrt(pi z)``, so Z has no mean.
    """
    _require_alpha4(dist.params)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise DomainError("energy level must be >= 0")
    with np.errstate(divide="ignore"):
        arg = dist.c_coeff / np.sqrt(z_arr)
    out = np.where(z_arr > 0, special.erf(arg), 1.0)
    return float(out) if np.ndim(out) == 0 else out


def sample_zf(dist: EnergyDistribution, u):
    """Inverse-CCDF sampling: the z with ``ccdf_zf(z) = u`` for u in (0, 1)."""
    _require_alpha4(dist.params)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~((u_arr > 0) & (u_arr < 1))):
        raise DomainError("u must lie in (0, 1)")
    out = (dist.c_coeff / erfinv(u_arr)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def rho_free(dist: EnergyDistribution, p_u, cfg: ErfClipConfig = DEFAULT_CLIP):
    """Battery-free transmission probability ``P(Z >= P_U)`` with erf clipping."""
    _require_alpha4(dist.params)
    p_arr = np.asarray(p_u, dtype=float)
    if np.any(~(p_arr > 0)):
        raise DomainError("p_u must be > 0")
    return clipped_erf(dist.c_coeff / np.sqrt(p_arr), cfg)


def chernoff_exponent(dist: EnergyDistribution, p_u: float) -> float:
    """Positive root Q of ``E[exp(-Q Z)] = exp(-Q P_U)``.

    Equating exponents, ``A (P_D eta Q)^(2/a) = Q P_U`` so
    ``Q = (A (P_D eta)^(2/a) / P_U)^(a / (a - 2))``.
    """
    if not p_u > 0:
        raise DomainError("p_u must be > 0")
    p = dist.params
    base = dist.laplace_coeff * (p.p_d * p.eta) ** (2.0 / p.alpha) / p_u
    return base ** (p.alpha / (p.alpha - 2.0))
