"""Spatial-throughput maximization over (N, P_U).

The objective is ``R = lambda_w * rho * log2(1 + beta)`` subject to the
outage constraint, which is equivalent to
``lambda_w * rho <= K_eps * lambda_AP * (T - N)`` together with
``P_min <= P_U <= P_max``. Because rho grows with N and shrinks with P_U,
the battery-free problem splits into three AP-density regimes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .battery import (
    DEFAULT_DELTA0,
    DEFAULT_STATE_CAP,
    DEFAULT_THETA,
    BatteryMode,
    markov_lower_bound,
)
from .energy import EnergyDistribution, rho_free
from .errors import DomainError, InfeasibleParamsError, UnsupportedAlphaError
from .numerics import DEFAULT_CLIP, ErfClipConfig, erfinv, gamma_ratio
from .params import NetworkParams
from .uplink import OutageEquivalence, constraint_ok, density_constraint_ok, outage_equivalence

TAU = 1.0  # rate exponent of the throughput; fixed at 1
DEFAULT_POWER_GRID = 200
# The grid search solves thousands of chains; FFT power iteration is several
# times faster than the dense solve at these sizes and agrees to ~1e-12.
GRID_DENSE_LIMIT = 0

HIGH = "HighDensity"
MEDIUM = "MediumDensity"
LOW = "LowDensity"
INFINITE = "InfiniteBattery"
FINITE = "FiniteBattery"


@dataclass(frozen=True)
class Decision:
    """A protocol choice: downlink slots and uplink power."""

    n_dl: int
    p_u: float

    def __post_init__(self):
        object.__setattr__(self, "n_dl", int(self.n_dl))
        object.__setattr__(self, "p_u", float(self.p_u))


@dataclass(frozen=True)
class RegionRow:
    """For one N, the closed interval of optimal powers."""

    n_dl: int
    p_u_lo: float
    p_u_hi: float


@dataclass
class OptimizationOutcome:
    feasible: bool
    regime: str
    best: Optional[Decision] = None
    throughput: float = 0.0
    rho_at_best: float = 0.0
    witness_region: Optional[list] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.feasible:
            self.best = None
            self.throughput = 0.0

    def to_dict(self) -> dict:
        d = {
            "feasible": self.feasible,
            "regime": self.regime,
            "best": asdict(self.best) if self.best else None,
            "throughput_bps_hz_m2": self.throughput,
            "rho_at_best": self.rho_at_best,
            "witness_region": [asdict(r) for r in self.witness_region]
            if self.witness_region is not None else None,
            "notes": self.notes,
        }
        return d


def spatial_throughput(lambda_w: float, rho, beta: float):
    """``lambda_w * rho * log2(1 + beta)`` in bps/Hz/m^2."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any((rho_arr < 0) | (rho_arr > 1)):
        raise DomainError("rho must lie in [0, 1]")
    out = lambda_w * rho_arr * math.log2(1.0 + beta)
    return float(out) if np.ndim(out) == 0 else out


def max_throughput(params: NetworkParams) -> float:
    return spatial_throughput(params.lambda_w, 1.0, params.beta)


def _saturation_arg(params: NetworkParams, n_dl, p_u):
    return (gamma_ratio(n_dl, params.alpha) * params.lambda_ap / 2.0
            * np.sqrt(math.pi ** 3 * params.p_d * params.eta / np.asarray(p_u, dtype=float)))


def feasibility_rho1(params: NetworkParams, n_dl: int, p_u: float,
                     cfg: ErfClipConfig = DEFAULT_CLIP) -> bool:
    """True iff the battery-free probability saturates to 1 at (N, P_U)."""
    if not p_u > 0:
        raise DomainError("p_u must be > 0")
    return bool(cfg.saturates(_saturation_arg(params, n_dl, p_u)))


def power_cap(params: NetworkParams, n_dl, cfg: ErfClipConfig = DEFAULT_CLIP):
    """Largest P_U with saturated rho at this N."""
    g = gamma_ratio(n_dl, params.alpha)
    return math.pi ** 3 * params.p_d * params.eta * (params.lambda_ap * g / (2.0 * cfg.v_e)) ** 2


def _rho(params: NetworkParams, n_dl: int, p_u: float, cfg: ErfClipConfig) -> float:
    return float(rho_free(EnergyDistribution(params, n_dl), p_u, cfg))


def regime_bounds(params: NetworkParams, eq: OutageEquivalence) -> tuple[float, float]:
    """(medium lower bound, high lower bound) on lambda_AP."""
    hi = params.lambda_w / eq.k_epsilon
    return hi / (params.t_slots - 1), hi


def classify_regime(params: NetworkParams, eq: OutageEquivalence) -> str:
    lo, hi = regime_bounds(params, eq)
    if params.lambda_ap >= hi:
        return HIGH
    if params.lambda_ap >= lo:
        return MEDIUM
    return LOW


def n0_index(params: NetworkParams, eq: OutageEquivalence) -> int:
    """Unique N0 with ``K l (T-(N0+1)) < lambda_w <= K l (T-N0)``.

    Closed form ``floor(T - lambda_w / (K lambda_AP))``, then checked against
    both inequalities and nudged by one if rounding put it off.
    """
    t = params.t_slots
    kl = eq.k_epsilon * params.lambda_ap
    n0 = int(math.floor(t - params.lambda_w / kl))

    def ok(n):
        # same inclusive slack as the density constraint on the upper side
        return kl * (t - (n + 1)) < params.lambda_w <= kl * (t - n) * (1.0 + 1e-12)

    for cand in (n0, n0 - 1, n0 + 1):
        if 1 <= cand <= t - 2 and ok(cand):
            return cand
    raise DomainError("no N0 exists; parameters are not in the medium regime")


def _tight_power(params: NetworkParams, n_dl: int, eq: OutageEquivalence,
                 cfg: ErfClipConfig) -> Optional[tuple[float, float]]:
    """Best power for one N when the density constraint can bind.

    Returns ``(p, rho)`` with ``p = max(P_s, P_min)``, where P_s makes the
    constraint tight, or None when N is infeasible even at P_max.
    """
    target = eq.k_epsilon * params.lambda_ap * (params.t_slots - n_dl) / params.lambda_w
    if not density_constraint_ok(params, _rho(params, n_dl, params.p_max, cfg), n_dl, eq):
        return None
    if target >= 1.0:
        return eq.p_min, _rho(params, n_dl, eq.p_min, cfg)
    g = gamma_ratio(n_dl, params.alpha)
    p_s = (math.pi ** 3 * params.p_d * params.eta
           * (2.0 / (params.lambda_ap * g) * erfinv(target)) ** -2)
    p = max(p_s, eq.p_min)
    rho = _rho(params, n_dl, p, cfg)
    if not density_constraint_ok(params, rho, n_dl, eq):
        # only reachable when the target sits inside the erf clipping band
        return None
    return p, rho


def _scan_tight(params: NetworkParams, n_values, eq: OutageEquivalence,
                cfg: ErfClipConfig):
    best = None
    for n in n_values:
        cand = _tight_power(params, n, eq, cfg)
        if cand is None:
            continue
        p, rho = cand
        r = spatial_throughput(params.lambda_w, rho, params.beta)
        if best is None or r > best[0]:
            best = (r, n, p, rho)
    return best


def _saturated_region(params: NetworkParams, n_max: int, eq: OutageEquivalence,
                      cfg: ErfClipConfig) -> list:
    rows = []
    for n in range(1, n_max + 1):
        hi = min(params.p_max, power_cap(params, n, cfg))
        if feasibility_rho1(params, n, eq.p_min, cfg):
            rows.append(RegionRow(n, eq.p_min, max(hi, eq.p_min)))
    return rows


def optimize_free(params: NetworkParams, cfg: ErfClipConfig = DEFAULT_CLIP) -> OptimizationOutcome:
    """Battery-free optimum by AP-density regime.

    * High density: every N satisfies the constraint. If rho saturates at
      ``(T-1, P_min)``, every saturating pair is optimal and the region is
      reported; otherwise ``(T-1, P_min)``.
    * Medium density: the same rule with N capped at N0. When rho does not
      saturate at ``(N0, P_min)``, values ``N > N0`` can still meet the
      constraint with rho < 1. They are scanned with the tight-power rule
      and the better candidate is kept; ``notes`` records both.
    * Low density: infeasible if N = 1 fails at P_max, otherwise the best of
      ``p = max(P_s, P_min)`` over all N that are feasible at P_max.

    Raises
    ------
    InfeasibleParamsError
        If P_min > P_max.
    """
    if params.alpha != 4:
        raise UnsupportedAlphaError("battery-free optimizer requires alpha = 4")
    eq = outage_equivalence(params)
    regime = classify_regime(params, eq)
    r_max = max_throughput(params)
    notes = {"p_min_w": eq.p_min, "k_epsilon": eq.k_epsilon, "tau": TAU}
    t = params.t_slots

    if regime in (HIGH, MEDIUM):
        n_max = t - 1 if regime == HIGH else n0_index(params, eq)
        if regime == MEDIUM:
            notes["n0"] = n_max
        if feasibility_rho1(params, n_max, eq.p_min, cfg):
            region = _saturated_region(params, n_max, eq, cfg)
            first = region[0].n_dl
            return OptimizationOutcome(True, regime, Decision(first, eq.p_min), r_max, 1.0,
                                       witness_region=region, notes=notes)
        rho = _rho(params, n_max, eq.p_min, cfg)
        best = (spatial_throughput(params.lambda_w, rho, params.beta), n_max, eq.p_min, rho)
        if regime == MEDIUM:
            notes["rule_decision"] = {"n_dl": n_max, "p_u": eq.p_min, "rho": rho}
            ext = _scan_tight(params, range(n_max + 1, t), eq, cfg)
            if ext is not None and ext[0] > best[0]:
                best = ext
                notes["improved_beyond_n0"] = True
        r, n, p, rho = best
        return OptimizationOutcome(True, regime, Decision(n, p), r, rho, notes=notes)

    # low density
    if not density_constraint_ok(params, _rho(params, 1, params.p_max, cfg), 1, eq):
        notes["reason"] = "constraint violated at N=1, P_U=P_max"
        return OptimizationOutcome(False, LOW, notes=notes)
    best = _scan_tight(params, range(1, t), eq, cfg)
    r, n, p, rho = best
    return OptimizationOutcome(True, LOW, Decision(n, p), r, rho, notes=notes)


def feasible_n_max_infinite(params: NetworkParams, eq: OutageEquivalence) -> int:
    """``floor(min(T-1, T - lambda_w / (K lambda_AP)))`` (may be < 1)."""
    t = params.t_slots
    bound = t - params.lambda_w / (eq.k_epsilon * params.lambda_ap)
    n = min(t - 1, int(math.floor(bound + 1e-12)))
    # the constraint at rho = 1 decides ties exactly
    while n >= 1 and not density_constraint_ok(params, 1.0, n, eq):
        n -= 1
    while n + 1 <= t - 1 and density_constraint_ok(params, 1.0, n + 1, eq):
        n += 1
    return n


def feasible_region_infinite(params: NetworkParams) -> OptimizationOutcome:
    """Infinite battery: rho = 1, so any N up to the density bound is optimal."""
    eq = outage_equivalence(params, check=False)
    notes = {"p_min_w": eq.p_min, "k_epsilon": eq.k_epsilon}
    n_hi = feasible_n_max_infinite(params, eq)
    if n_hi < 1 or eq.p_min > params.p_max:
        notes["reason"] = "empty N interval" if n_hi < 1 else "P_min exceeds P_max"
        return OptimizationOutcome(False, INFINITE, notes=notes)
    region = [RegionRow(n, eq.p_min, params.p_max) for n in range(1, n_hi + 1)]
    return OptimizationOutcome(True, INFINITE, Decision(1, eq.p_min), max_throughput(params),
                               1.0, witness_region=region, notes=notes)


def feasible_region_finite_rho1(params: NetworkParams,
                                cfg: ErfClipConfig = DEFAULT_CLIP) -> OptimizationOutcome:
    """Finite battery with saturated rho: the infinite region cut by ``cap(N)``."""
    if params.alpha != 4:
        raise UnsupportedAlphaError("power cap requires alpha = 4")
    eq = outage_equivalence(params, check=False)
    notes = {"p_min_w": eq.p_min, "k_epsilon": eq.k_epsilon}
    n_hi = feasible_n_max_infinite(params, eq)
    region = []
    for n in range(1, max(n_hi, 0) + 1):
        hi = min(params.p_max, power_cap(params, n, cfg))
        if hi >= eq.p_min:
            region.append(RegionRow(n, eq.p_min, hi))
    if not region:
        notes["reason"] = "no N admits a saturating power above P_min"
        return OptimizationOutcome(False, FINITE, witness_region=[], notes=notes)
    return OptimizationOutcome(True, FINITE, Decision(region[0].n_dl, eq.p_min),
                               max_throughput(params), 1.0, witness_region=region, notes=notes)


def power_grid(p_min: float, p_max: float, n_points: int) -> np.ndarray:
    """Uniform grid over [P_min, P_max] with both endpoints included."""
    if n_points < 1:
        raise DomainError("power grid needs at least one point")
    if n_points == 1:
        return np.array([p_min])
    g = np.linspace(p_min, p_max, n_points)
    g[0], g[-1] = p_min, p_max
    return g


@dataclass(frozen=True)
class GridCell:
    n_dl: int
    p_u: float
    rho: float
    feasible: bool
    throughput: float


def _argmax_cells(cells) -> Optional[GridCell]:
    # maximum throughput; ties go to smaller P_U, then smaller N
    best = None
    for c in cells:
        if not c.feasible:
            continue
        if best is None or (c.throughput, -c.p_u, -c.n_dl) > (best.throughput, -best.p_u, -best.n_dl):
            best = c
    return best


def finite_grid_cells(params: NetworkParams, capacity: float,
                      n_power_grid: int = DEFAULT_POWER_GRID,
                      delta0: float = DEFAULT_DELTA0, theta: float = DEFAULT_THETA,
                      p_min: Optional[float] = None, state_cap: int = DEFAULT_STATE_CAP,
                      n_values=None, progress: Optional[Callable] = None,
                      dense_limit: int = GRID_DENSE_LIMIT) -> list:
    """Evaluate the Markov lower bound and its throughput on the (N, P_U) grid.

    Pass ``dense_limit=DENSE_LIMIT`` to use the direct solver for small chains.
    """
    eq = outage_equivalence(params, check=False)
    lo = eq.p_min if p_min is None else p_min
    if lo > params.p_max:
        raise InfeasibleParamsError(f"P_min = {lo:.4g} W exceeds P_max")
    if capacity < lo:
        raise DomainError("capacity must be >= P_min")
    grid = power_grid(lo, params.p_max, n_power_grid)
    ns = list(range(1, params.t_slots)) if n_values is None else list(n_values)
    cells = []
    for p in grid:
        if p > capacity:
            continue
        for n in ns:
            rho = markov_lower_bound(params, n, float(p), capacity, delta0, theta,
                                     state_cap, dense_limit=dense_limit).rho_lb
            ok = density_constraint_ok(params, rho, n, eq)
            r = spatial_throughput(params.lambda_w, rho, params.beta) if ok else 0.0
            cells.append(GridCell(n, float(p), rho, ok, r))
        if progress is not None:
            progress(p)
    return cells


def optimize_finite(params: NetworkParams, capacity: float,
                    n_power_grid: int = DEFAULT_POWER_GRID,
                    delta0: float = DEFAULT_DELTA0, theta: float = DEFAULT_THETA,
                    p_min: Optional[float] = None, state_cap: int = DEFAULT_STATE_CAP,
                    cells: Optional[list] = None) -> OptimizationOutcome:
    """Grid search over (N, P_U) using the Markov lower bound on rho.

    Cells violating the density constraint score zero. ``p_min`` overrides
    the lower end of the power grid (by default the outage-derived P_min).
    """
    eq = outage_equivalence(params, check=False)
    if cells is None:
        cells = finite_grid_cells(params, capacity, n_power_grid, delta0, theta, p_min,
                                  state_cap)
    best = _argmax_cells(cells)
    notes = {"p_min_w": eq.p_min, "grid_p_min_w": cells[0].p_u if cells else None,
             "capacity_w": capacity, "n_cells": len(cells),
             "n_feasible_cells": sum(c.feasible for c in cells)}
    if best is None:
        return OptimizationOutcome(False, FINITE, notes=notes)
    return OptimizationOutcome(True, FINITE, Decision(best.n_dl, best.p_u), best.throughput,
                               best.rho, notes=notes)


def brute_force_oracle(params: NetworkParams, mode: BatteryMode,
                       n_power_grid: int = DEFAULT_POWER_GRID,
                       cfg: ErfClipConfig = DEFAULT_CLIP, **finite_kw) -> OptimizationOutcome:
    """Exhaustive scan of every N and every grid power under ``mode``.

    Each cell evaluates rho directly (erf law, Markov bound, or 1) and
    checks the full outage constraint; no regime logic is used.
    """
    eq = outage_equivalence(params, check=False)
    if mode.kind == "finite":
        return optimize_finite(params, mode.capacity, n_power_grid, **finite_kw)
    grid = power_grid(eq.p_min, params.p_max, n_power_grid)
    cells = []
    for n in range(1, params.t_slots):
        if mode.kind == "free":
            rhos = rho_free(EnergyDistribution(params, n), grid, cfg)
        else:
            rhos = np.ones_like(grid)
        for p, rho in zip(grid, np.atleast_1d(rhos)):
            rho = float(rho)
            ok = constraint_ok(params, rho, n, float(p), eq)
            r = spatial_throughput(params.lambda_w, rho, params.beta) if ok else 0.0
            cells.append(GridCell(n, float(p), rho, ok, r))
    best = _argmax_cells(cells)
    regime = INFINITE if mode.kind == "infinite" else classify_regime(params, eq)
    if best is None:
        return OptimizationOutcome(False, regime, notes={"p_min_w": eq.p_min})
    return OptimizationOutcome(True, regime, Decision(best.n_dl, best.p_u), best.throughput,
                               best.rho, notes={"p_min_w": eq.p_min})
