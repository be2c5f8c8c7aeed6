"""Monte Carlo engine for the harvest-then-transmit network.

Point processes are drawn as a Poisson count with uniform positions in a
square window centred at the origin. Every frame or trial gets its own
generator seeded from ``(seed, stream, index)``, so results depend only on
the master seed and not on evaluation order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .battery import BatteryMode
from .energy import EnergyDistribution, rho_free, sample_zf
from .errors import DomainError, ResourceError
from .params import NetworkParams
from .uplink import active_density

MIN_DISTANCE = 0.1  # m; path-loss singularity guard, simulation only
FAST_BLOCK = 4096

# generator streams, one per experiment so they never share draws
_STREAM_HARVEST = 1
_STREAM_BATTERY = 2
_STREAM_GAP = 3
_STREAM_VOID = 4
_STREAM_PSUC = 5
_STREAM_STATIC = 6


def frame_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for one (stream, frame) pair."""
    return np.random.default_rng([int(seed), int(stream), int(index)])


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Attributes
    ----------
    window_side : float
        Side of the simulation square in m.
    interim_side : float
        Side of the centred sampling square in m; tagged nodes live here so
        they are far from the window border.
    frames : int
        Number of frames (or trials).
    seed : int
        Master seed.
    mobility : str
        ``"type1"``: tagged nodes are relocated every frame. ``"type2"``:
        tagged nodes stay put and only the APs are redrawn.
    mode : BatteryMode
        Battery model for :func:`run_battery_frames`.
    fast : bool
        Draw Z by inverse-CCDF sampling instead of simulating the AP field.
    time_budget_s : float or None
        Wall-clock budget; exceeding it raises ResourceError.
    """

    window_side: float = 1000.0
    interim_side: float = 200.0
    frames: int = 4000
    seed: int = 0
    mobility: str = "type1"
    mode: BatteryMode = field(default_factory=BatteryMode.free)
    fast: bool = True
    time_budget_s: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.interim_side < self.window_side:
            raise DomainError("need 0 < interim_side < window_side")
        if int(self.frames) != self.frames or self.frames < 1:
            raise DomainError("frames must be a positive integer")
        if self.mobility not in ("type1", "type2"):
            raise DomainError("mobility must be 'type1' or 'type2'")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")


class _Budget:
    def __init__(self, seconds: Optional[float]):
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self):
        if self.seconds is not None and time.monotonic() - self.start > self.seconds:
            raise ResourceError(f"simulation exceeded its {self.seconds:g} s budget")


def gen_ppp(rng: np.random.Generator, lam: float, window_side: float) -> np.ndarray:
    """Homogeneous PPP on ``[-s/2, s/2]^2``, returned as an (n, 2) array."""
    if not lam > 0:
        raise DomainError("density must be > 0")
    n = rng.poisson(lam * window_side ** 2)
    return rng.uniform(-window_side / 2.0, window_side / 2.0, size=(n, 2))


def displace(points: np.ndarray, rng: np.random.Generator, window_side: float) -> np.ndarray:
    """Uniform relocation: same count, fresh i.i.d. uniform positions."""
    return rng.uniform(-window_side / 2.0, window_side / 2.0, size=np.shape(points))


def _uniform_in(rng: np.random.Generator, side: float, n: int) -> np.ndarray:
    return rng.uniform(-side / 2.0, side / 2.0, size=(n, 2))


def harvest_frame(rng: np.random.Generator, node, aps: np.ndarray, n_dl: int,
                  params: NetworkParams, min_distance: float = MIN_DISTANCE):
    """Energy harvested over N downlink slots from every AP.

    ``eta * P_D * sum_X d_X^-alpha * E_X`` with ``E_X ~ Erlang(N, 1)``, the
    sum of N unit-mean Rayleigh power gains. ``node`` may be one position
    (returns a float) or an (m, 2) array (returns m values that share the
    AP field but have independent fading).
    """
    node = np.asarray(node, dtype=float)
    single = node.ndim == 1
    nodes = node.reshape(-1, 2)
    if len(aps) == 0:
        out = np.zeros(len(nodes))
    else:
        d2 = ((nodes[:, None, :] - aps[None, :, :]) ** 2).sum(axis=2)
        d2 = np.maximum(d2, min_distance ** 2)
        gain = d2 ** (-params.alpha / 2.0)
        fades = rng.gamma(n_dl, 1.0, size=gain.shape)
        out = params.eta * params.p_d * (gain * fades).sum(axis=1)
    return float(out[0]) if single else out


def harvest_samples(params: NetworkParams, n_dl: int, frames: int, seed: int = 0,
                    window_side: float = 2000.0, interim_side: float = 200.0) -> np.ndarray:
    """Z for one tagged node over many frames, each with a fresh AP field."""
    out = np.empty(frames)
    for f in range(frames):
        rng = frame_rng(seed, _STREAM_HARVEST, f)
        aps = gen_ppp(rng, params.lambda_ap, window_side)
        node = _uniform_in(rng, interim_side, 1)[0]
        out[f] = harvest_frame(rng, node, aps, n_dl, params)
    return out


def _arrivals(cfg: SimConfig, params: NetworkParams, n_dl: int):
    """Yield blocks of harvested energies, one value per frame."""
    if cfg.fast:
        dist = EnergyDistribution(params, n_dl)
        for b, start in enumerate(range(0, cfg.frames, FAST_BLOCK)):
            m = min(FAST_BLOCK, cfg.frames - start)
            u = frame_rng(cfg.seed, _STREAM_BATTERY, b).random(m)
            # random() is on [0, 1); map the measure-zero 0 inside the domain
            u = np.where(u > 0, u, np.nextafter(0.0, 1.0))
            yield sample_zf(dist, u)
    else:
        static = _uniform_in(frame_rng(cfg.seed, _STREAM_STATIC, 0), cfg.interim_side, 1)[0]
        for f in range(cfg.frames):
            rng = frame_rng(cfg.seed, _STREAM_BATTERY, f)
            aps = gen_ppp(rng, params.lambda_ap, cfg.window_side)
            node = _uniform_in(rng, cfg.interim_side, 1)[0] if cfg.mobility == "type1" else static
            yield np.array([harvest_frame(rng, node, aps, n_dl, params)])


def run_battery_frames(cfg: SimConfig, params: NetworkParams, n_dl: int, p_u: float) -> float:
    """Fraction of frames in which the stored energy reaches P_U.

    The level follows ``S_F = min(S_{F-1} - P_U 1{S_{F-1} >= P_U} + Z_F, C)``
    from an empty battery (C infinite for the unlimited battery; ``S_F = Z_F``
    without a battery).
    """
    params.check_n_dl(n_dl)
    if not p_u > 0:
        raise DomainError("p_u must be > 0")
    mode = cfg.mode
    mode.check_power(p_u)
    cap = mode.capacity if mode.kind == "finite" else math.inf
    budget = _Budget(cfg.time_budget_s)
    hits = 0
    level = 0.0
    for z in _arrivals(cfg, params, n_dl):
        if mode.kind == "free":
            hits += int(np.count_nonzero(z >= p_u))
        else:
            for zf in z.tolist():
                if level >= p_u:
                    level -= p_u
                level = min(level + zf, cap)
                hits += level >= p_u
        budget.check()
    return hits / cfg.frames


@dataclass(frozen=True)
class GapEstimate:
    p1: float
    p2: float
    joint: float

    @property
    def product(self) -> float:
        return self.p1 * self.p2

    @property
    def gap(self) -> float:
        return abs(self.product - self.joint)


def independence_estimate(cfg: SimConfig, params: NetworkParams, n_dl: int, p_u: float,
                          co_located: bool = False) -> GapEstimate:
    """Marginal and joint transmit frequencies of two tagged nodes.

    Every frame draws a fresh AP field. Type-I relocates the two nodes
    uniformly in the interim square each frame; Type-II draws them once.
    With ``co_located`` both nodes sit at the interim centre in every frame,
    a control with no spatial decorrelation at all.
    """
    params.check_n_dl(n_dl)
    budget = _Budget(cfg.time_budget_s)
    static = _uniform_in(frame_rng(cfg.seed, _STREAM_STATIC, 1), cfg.interim_side, 2)
    c1 = c2 = c12 = 0
    for f in range(cfg.frames):
        rng = frame_rng(cfg.seed, _STREAM_GAP, f)
        aps = gen_ppp(rng, params.lambda_ap, cfg.window_side)
        if co_located:
            nodes = np.zeros((2, 2))
        elif cfg.mobility == "type1":
            nodes = _uniform_in(rng, cfg.interim_side, 2)
        else:
            nodes = static
        z = harvest_frame(rng, nodes, aps, n_dl, params)
        a, b = bool(z[0] >= p_u), bool(z[1] >= p_u)
        c1 += a
        c2 += b
        c12 += a and b
        if f % 256 == 0:
            budget.check()
    n = cfg.frames
    return GapEstimate(c1 / n, c2 / n, c12 / n)


def independence_gap(cfg: SimConfig, params: NetworkParams, n_dl: int, p_u: float,
                     co_located: bool = False) -> float:
    """``|P(A1) P(A2) - P(A1, A2)|`` for the events ``A_i = {Z_i >= P_U}``."""
    return independence_estimate(cfg, params, n_dl, p_u, co_located).gap


def void_probability(cfg: SimConfig, params: NetworkParams, n_dl: int, p_u: float,
                     l_grid: Sequence[float]) -> list:
    """Empirical vs analytic void probability of the active-node process.

    Per frame a fresh AP field is drawn. Each node harvests at a uniform
    position in the interim square over the downlink phase, then, as all
    nodes are relocated at every slot boundary, lands at a fresh uniform
    position for the uplink slot. An active node uses one of the T - N uplink
    slots at random, and the observed slot is the first. The empirical
    value for side L is the fraction of frames with no transmitter in the
    centred L-square; the analytic value is ``exp(-lambda_a L^2)`` with
    ``lambda_a = lambda_w rho / (T - N)`` and rho from the erf law.

    Returns
    -------
    list of (L, empirical, analytic)
    """
    params.check_n_dl(n_dl)
    ls = np.asarray(l_grid, dtype=float)
    if ls.size == 0 or np.any(ls <= 0) or ls.max() > cfg.interim_side:
        raise DomainError("L values must lie in (0, interim_side]")
    l_max = float(ls.max())
    ul_slots = params.t_slots - n_dl
    budget = _Budget(cfg.time_budget_s)
    voids = np.zeros(ls.size, dtype=np.int64)
    for f in range(cfg.frames):
        rng = frame_rng(cfg.seed, _STREAM_VOID, f)
        aps = gen_ppp(rng, params.lambda_ap, cfg.window_side)
        ul_pos = gen_ppp(rng, params.lambda_w, l_max)
        n = len(ul_pos)
        if n:
            dl_pos = _uniform_in(rng, cfg.interim_side, n)
            z = harvest_frame(rng, dl_pos, aps, n_dl, params)
            slot = rng.integers(ul_slots, size=n)
            tx = ul_pos[(z >= p_u) & (slot == 0)]
        else:
            tx = ul_pos
        reach = np.abs(tx).max(axis=1) if len(tx) else np.empty(0)
        # a transmitter at Chebyshev radius r lies inside every square with L/2 > r
        voids += np.array([not np.any(reach < l / 2.0) for l in ls])
        if f % 256 == 0:
            budget.check()
    rho = float(rho_free(EnergyDistribution(params, n_dl), p_u))
    lam_a = active_density(params.lambda_w, rho, params.t_slots, n_dl)
    emp = voids / cfg.frames
    return [(float(l), float(e), float(math.exp(-lam_a * l * l))) for l, e in zip(ls, emp)]


def empirical_psuc(cfg: SimConfig, params: NetworkParams, rho: float, n_dl: int,
                   p_u: float) -> float:
    """Fraction of uplink trials whose SINR reaches beta.

    The typical node sits at the origin and is served by its nearest AP.
    Interferers are the active nodes, a PPP of density
    ``lambda_w rho / (T - N)`` independent of the link. By stationarity
    their distances to the serving AP are drawn as distances to the
    centre of a fresh window. All links see unit-mean Rayleigh fading.
    """
    params.check_n_dl(n_dl)
    if not 0 <= rho <= 1:
        raise DomainError("rho must lie in [0, 1]")
    lam_a = active_density(params.lambda_w, rho, params.t_slots, n_dl)
    budget = _Budget(cfg.time_budget_s)
    a = params.alpha
    ok = 0
    for t in range(cfg.frames):
        rng = frame_rng(cfg.seed, _STREAM_PSUC, t)
        aps = gen_ppp(rng, params.lambda_ap, cfg.window_side)
        if len(aps) == 0:
            continue
        d2 = (aps ** 2).sum(axis=1)
        k = int(np.argmin(d2))
        r2 = max(d2[k], MIN_DISTANCE ** 2)
        signal = p_u * rng.exponential() * r2 ** (-a / 2.0)
        interference = 0.0
        if lam_a > 0:
            pts = gen_ppp(rng, lam_a, cfg.window_side)
            if len(pts):
                di2 = np.maximum((pts ** 2).sum(axis=1), MIN_DISTANCE ** 2)
                interference = float((p_u * rng.exponential(size=len(pts))
                                      * di2 ** (-a / 2.0)).sum())
        ok += signal >= params.beta * (interference + params.sigma2)
        if t % 256 == 0:
            budget.check()
    return ok / cfg.frames
