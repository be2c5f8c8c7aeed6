"""Transmission probability for nodes with a battery.

With a finite capacity C the battery level is tracked by a quantized Markov
chain on the grid ``{0, delta, ..., V delta}``. A node whose level is at
least ``U delta`` spends ``U delta`` and then adds the floor-quantized
harvest, saturating at ``V delta``. The quantized level never exceeds the
true level, so the chain's probability of sitting at or above ``U`` is a
lower bound on the true transmission probability. Refining delta tightens
the bound.

Every row of the transition matrix is the same increment law shifted by the
post-spend level, so one step of ``pi -> pi P`` is a truncated convolution.
Large chains are therefore propagated with FFTs and never materialize P.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft

from .energy import EnergyDistribution, ccdf_zf, chernoff_exponent, rho_free
from .errors import (
    ConvergenceError,
    DomainError,
    QuantizationError,
    ResourceError,
    UnsupportedAlphaError,
)
from .numerics import DEFAULT_CLIP, ErfClipConfig, gamma_ratio
from .params import NetworkParams

DEFAULT_DELTA0 = 1e-4
DEFAULT_THETA = 1e-3
# Memory is O(V) with the convolution solver, so the cap mostly bounds run
# time. It must admit the finest step reached when C is around 1 W.
DEFAULT_STATE_CAP = 1_000_001
DENSE_LIMIT = 2000
STATIONARY_TOL = 1e-12

# guards ceil/floor of ratios such as 0.02 / 1e-4 = 200.00000000000003
_QUANT_EPS = 1e-9


class NonUniqueStationaryWarning(UserWarning):
    """The chain has more than one stationary distribution."""


@dataclass(frozen=True)
class BatteryMode:
    """Battery model selector: ``free``, ``finite`` (with capacity) or ``infinite``."""

    kind: str
    capacity: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("free", "finite", "infinite"):
            raise DomainError(f"unknown battery mode {self.kind!r}")
        if self.kind == "finite":
            if self.capacity is None or not self.capacity > 0:
                raise DomainError("finite battery needs a positive capacity")
        elif self.capacity is not None:
            raise DomainError(f"{self.kind} battery takes no capacity")

    @classmethod
    def free(cls) -> "BatteryMode":
        return cls("free")

    @classmethod
    def finite(cls, capacity: float) -> "BatteryMode":
        return cls("finite", float(capacity))

    @classmethod
    def infinite(cls) -> "BatteryMode":
        return cls("infinite")

    def check_power(self, p_u: float):
        if self.kind == "finite" and p_u > self.capacity:
            raise DomainError("finite battery requires P_U <= C")


def quantize(p_u: float, capacity: float, delta: float) -> tuple[int, int]:
    """Threshold index ``U = ceil(P_U/delta)`` and top index ``V = floor(C/delta)``."""
    if not delta > 0:
        raise DomainError("delta must be > 0")
    u = max(int(math.ceil(p_u / delta - _QUANT_EPS)), 0)
    v = int(math.floor(capacity / delta + _QUANT_EPS))
    return u, v


@dataclass
class MarkovSpec:
    """Quantized battery chain.

    Attributes
    ----------
    delta : float
        Quantization step in W.
    u_idx, v_idx : int
        Transmit threshold U and top state V.
    increment_pmf : ndarray, shape (V,)
        ``P(floor(Z/delta) = k)`` for k = 0..V-1.
    tail : ndarray, shape (V + 1,)
        ``P(Z >= k delta)`` for k = 0..V; the saturation probabilities.
    stationary : ndarray or None
        Filled in by :func:`steady_state`.
    """

    delta: float
    u_idx: int
    v_idx: int
    increment_pmf: np.ndarray
    tail: np.ndarray
    stationary: Optional[np.ndarray] = None
    unique: Optional[bool] = None
    iterations: int = 0
    _dense: Optional[np.ndarray] = field(default=None, repr=False)
    _kernel: Optional[tuple] = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.v_idx + 1

    def post_spend_levels(self) -> np.ndarray:
        i = np.arange(self.n_states)
        return np.where(i >= self.u_idx, i - self.u_idx, i)

    @property
    def transition(self) -> np.ndarray:
        """Dense row-stochastic matrix (built on demand)."""
        if self._dense is None:
            if self.n_states > 20 * DENSE_LIMIT:
                raise ResourceError(
                    f"refusing to materialize a {self.n_states}^2 transition matrix")
            v = self.v_idx
            s = self.post_spend_levels()
            diff = np.arange(v + 1)[None, :] - s[:, None]
            pmf_pad = np.concatenate([self.increment_pmf, [0.0]])
            p = np.where((diff >= 0) & (diff < v), pmf_pad[np.clip(diff, 0, v)], 0.0)
            p[:, v] = self.tail[v - s]
            self._dense = p
        return self._dense

    def propagate(self, pi: np.ndarray) -> np.ndarray:
        """One step ``pi @ P`` without forming P."""
        u, v = self.u_idx, self.v_idx
        # levels at or above U drop by U; the rest are left untouched
        q = np.zeros_like(pi)
        q[:u] = pi[:u]
        q[: v + 1 - u] += pi[u:]
        out = np.empty_like(pi)
        if v > 64:
            if self._kernel is None:
                # only the first v outputs are kept, so 2v - 1 points avoid wrap-around
                n = sfft.next_fast_len(2 * v - 1, real=True)
                self._kernel = (n, sfft.rfft(self.increment_pmf, n))
            n, kern = self._kernel
            conv = sfft.irfft(sfft.rfft(q, n) * kern, n)[:v]
            out[:v] = np.maximum(conv, 0.0)
        elif v > 0:
            out[:v] = np.maximum(np.convolve(q, self.increment_pmf)[:v], 0.0)
        out[v] = q @ self.tail[v::-1]
        return out

    def rho_lb(self) -> float:
        if self.stationary is None:
            raise DomainError("stationary distribution not computed")
        return float(np.clip(self.stationary[self.u_idx:].sum(), 0.0, 1.0))


def build_chain(ccdf: Callable[[np.ndarray], np.ndarray], p_u: float, capacity: float,
                delta: float, state_cap: int = DEFAULT_STATE_CAP) -> MarkovSpec:
    """Quantized chain for an arrival law given by its CCDF ``P(Z >= z)``.

    From level i the node first spends U if ``i >= U``, leaving s; the next
    level is ``min(s + floor(Z/delta), V)``. Below V the probability of
    landing on j is ``ccdf((j-s) delta) - ccdf((j-s+1) delta)``, and the top
    state collects ``ccdf((V-s) delta)``. Levels below s are unreachable
    because harvesting never removes energy.

    Raises
    ------
    QuantizationError
        If U > V.
    ResourceError
        If V + 1 exceeds ``state_cap``.
    """
    if not (p_u > 0 and capacity > 0):
        raise DomainError("p_u and capacity must be > 0")
    u, v = quantize(p_u, capacity, delta)
    if u > v:
        raise QuantizationError(f"U = {u} exceeds V = {v} at delta = {delta:g}")
    if v + 1 > state_cap:
        raise ResourceError(f"{v + 1} battery states exceed the cap of {state_cap}")
    grid = np.arange(v + 2) * delta
    cc = np.asarray(ccdf(grid), dtype=float)
    cc[0] = 1.0
    cc = np.minimum.accumulate(np.clip(cc, 0.0, 1.0))
    pmf = cc[:v] - cc[1: v + 1]
    return MarkovSpec(delta=delta, u_idx=u, v_idx=v, increment_pmf=pmf, tail=cc[: v + 1])


def _as_matrix_chain(p: np.ndarray):
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DomainError("transition matrix must be square")
    if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=1e-12):
        raise DomainError("transition matrix must be row-stochastic")
    return p


def _power_iterate(step, pi0: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    pi = pi0 / pi0.sum()
    for it in range(1, max_iter + 1):
        nxt = step(pi)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt, it
        pi = nxt
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def _dense_solve(p: np.ndarray) -> Optional[np.ndarray]:
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    if np.any(pi < -1e-12) or np.abs(pi @ p - pi).sum() > 1e-10:
        return None
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def steady_state(chain, initial: Optional[np.ndarray] = None, tol: float = STATIONARY_TOL,
                 max_iter: int = 200_000, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Stationary distribution of a :class:`MarkovSpec` or a plain matrix.

    Chains with at most ``dense_limit`` states are solved directly from
    ``pi (P - I) = 0, sum(pi) = 1``. If that system is singular (several
    closed classes), or the chain is large, power iteration is run from
    ``initial``. The default start is an empty battery for a MarkovSpec and
    the uniform vector for a matrix. A singular system triggers a
    :class:`NonUniqueStationaryWarning`.

    Returns
    -------
    ndarray
        The stationary vector; for a MarkovSpec it is also stored on the
        object together with ``unique`` and ``iterations``.
    """
    spec = chain if isinstance(chain, MarkovSpec) else None
    n = spec.n_states if spec is not None else _as_matrix_chain(chain).shape[0]
    if initial is None:
        initial = np.zeros(n)
        if spec is not None:
            initial[0] = 1.0
        else:
            initial[:] = 1.0 / n
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (n,) or np.any(initial < 0) or initial.sum() <= 0:
        raise DomainError("initial distribution has the wrong shape or sign")

    unique = True
    iterations = 0
    pi = None
    if n <= dense_limit:
        mat = spec.transition if spec is not None else np.asarray(chain, dtype=float)
        pi = _dense_solve(mat)
        if pi is None:
            unique = False
            warnings.warn("transition matrix has several stationary distributions; "
                          "returning the limit from the initial distribution",
                          NonUniqueStationaryWarning, stacklevel=2)
            pi, iterations = _power_iterate(lambda x: x @ mat, initial, tol, max_iter)
    else:
        pi, iterations = _power_iterate(spec.propagate, initial, tol, max_iter)
    if spec is not None:
        spec.stationary, spec.unique, spec.iterations = pi, unique, iterations
    return pi


@dataclass(frozen=True)
class MarkovBound:
    """Result of the refinement loop."""

    rho_lb: float
    delta: float
    n_states: int
    history: tuple


def _refine_initial(prev: Optional[np.ndarray], n: int) -> Optional[np.ndarray]:
    # halving delta splits every level in two; spread the mass accordingly
    if prev is None:
        return None
    fine = np.repeat(prev / 2.0, 2)
    out = np.zeros(n)
    m = min(n, fine.size)
    out[:m] = fine[:m]
    out[m - 1] += fine[m:].sum()
    return out if out.sum() > 0 else None


def markov_lower_bound(params: NetworkParams, n_dl: int, p_u: float, capacity: float,
                       delta0: float = DEFAULT_DELTA0, theta: float = DEFAULT_THETA,
                       state_cap: int = DEFAULT_STATE_CAP, max_rounds: int = 40,
                       ccdf: Optional[Callable] = None,
                       dense_limit: int = DENSE_LIMIT) -> MarkovBound:
    """Refining lower bound on the finite-battery transmission probability.

    Starting from ``rho_0 = 1`` and ``rho_LB = 0``, repeat: set
    ``rho_0 = rho_LB``, halve delta, rebuild the chain and recompute
    ``rho_LB``, until the two differ by at most ``theta``. When a step
    leaves U above V the quantized battery can never reach the threshold,
    and the bound for that step is 0; such steps never stop the loop.
    ``dense_limit`` is passed to :func:`steady_state`.
    """
    if not capacity >= p_u:
        raise DomainError("capacity must be >= p_u")
    if not (delta0 > 0 and theta > 0):
        raise DomainError("delta0 and theta must be > 0")
    if ccdf is None:
        dist = EnergyDistribution(params, n_dl)
        ccdf = lambda z: ccdf_zf(dist, z)  # noqa: E731
    delta = delta0
    rho0, rho_lb = 1.0, 0.0
    history = []
    prev_pi = None
    n_states = 0
    built = False
    for _ in range(max_rounds):
        # a step with U > V carries no information, so it cannot end the loop
        if built and abs(rho0 - rho_lb) <= theta:
            break
        rho0 = rho_lb
        delta /= 2.0
        u, v = quantize(p_u, capacity, delta)
        if u > v:
            rho_lb, prev_pi, n_states = 0.0, None, v + 1
        else:
            spec = build_chain(ccdf, p_u, capacity, delta, state_cap)
            steady_state(spec, initial=_refine_initial(prev_pi, spec.n_states),
                         dense_limit=dense_limit)
            rho_lb, prev_pi, n_states = spec.rho_lb(), spec.stationary, spec.n_states
            built = True
        history.append((delta, rho_lb))
    else:
        raise ConvergenceError(f"bound did not settle within {max_rounds} refinements")
    return MarkovBound(rho_lb=rho_lb, delta=delta, n_states=n_states, history=tuple(history))


def rho_lb_markov(params: NetworkParams, n_dl: int, p_u: float, capacity: float,
                  delta0: float = DEFAULT_DELTA0, theta: float = DEFAULT_THETA,
                  state_cap: int = DEFAULT_STATE_CAP) -> float:
    """Value of :func:`markov_lower_bound`."""
    return markov_lower_bound(params, n_dl, p_u, capacity, delta0, theta, state_cap).rho_lb


def closed_bound_terms(params: NetworkParams, n_dl: int, p_u: float, capacity: float,
                       cfg: ErfClipConfig = DEFAULT_CLIP) -> tuple[float, float]:
    """The two closed-form lower bounds: battery-free erf term and Chernoff term."""
    if not capacity >= p_u:
        raise DomainError("capacity must be >= p_u")
    dist = EnergyDistribution(params, n_dl)
    erf_term = float(rho_free(dist, p_u, cfg))
    q = chernoff_exponent(dist, p_u)
    chernoff_term = float(-np.expm1(-q * (capacity - p_u)))
    return erf_term, chernoff_term


def rho_bounds_closed(params: NetworkParams, n_dl: int, p_u: float, capacity: float,
                      cfg: ErfClipConfig = DEFAULT_CLIP) -> tuple[float, float]:
    """``(max(erf term, 1 - exp(-Q (C - P_U))), 1)``."""
    erf_term, chernoff_term = closed_bound_terms(params, n_dl, p_u, capacity, cfg)
    return max(erf_term, chernoff_term), 1.0


def chernoff_crossover(params: NetworkParams, n_dl: int, p_u: float,
                       cfg: ErfClipConfig = DEFAULT_CLIP) -> float:
    """Capacity above which the Chernoff term exceeds the erf term."""
    dist = EnergyDistribution(params, n_dl)
    erf_term = float(rho_free(dist, p_u, cfg))
    if erf_term >= 1.0:
        return math.inf
    return p_u - math.log1p(-erf_term) / chernoff_exponent(dist, p_u)


def rho_one_lambda_threshold(params: NetworkParams, n_dl: int, p_u: float,
                             cfg: ErfClipConfig = DEFAULT_CLIP) -> float:
    """Smallest AP density that makes the battery-free probability saturate."""
    return (2.0 * cfg.v_e / gamma_ratio(n_dl, params.alpha)
            * math.sqrt(p_u / (math.pi ** 3 * params.p_d * params.eta)))


def rho_one_threshold(params: NetworkParams, n_dl: int, p_u: float,
                      cfg: ErfClipConfig = DEFAULT_CLIP) -> bool:
    """True iff lambda_AP reaches :func:`rho_one_lambda_threshold` (inclusive)."""
    if params.alpha != 4:
        raise UnsupportedAlphaError("threshold is stated for alpha = 4")
    thr = rho_one_lambda_threshold(params, n_dl, p_u, cfg)
    return params.lambda_ap >= thr * (1.0 - 1e-12)


def rho_infinite() -> float:
    """Transmission probability with an unlimited battery: exactly 1."""
    return 1.0
