"""Network parameter record and unit helpers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import DomainError


def dbm_to_watt(dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    """Convert a power in watts to dBm."""
    if watt <= 0:
        raise DomainError("power must be positive to express in dBm")
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class NetworkParams:
    """Physical and protocol constants of the network.

    Attributes
    ----------
    lambda_ap : float
        AP density in points per m^2.
    lambda_w : float
        Wireless node density in points per m^2.
    p_d : float
        AP transmit power in W.
    eta : float
        RF-to-DC harvesting efficiency, in (0, 1).
    alpha : float
        Path-loss exponent, > 2.
    sigma2 : float
        Receiver noise power in W.
    beta : float
        SINR decoding threshold (linear).
    epsilon : float
        Outage budget, in (0, 1).
    t_slots : int
        Frame length T in slots (N downlink + T - N uplink).
    p_max : float
        Maximum node transmit power in W.

    The defaults describe the battery-deployed scenario used throughout the
    examples (sigma2 = -60 dBm).
    """

    lambda_ap: float = 0.0008
    lambda_w: float = 0.0012
    p_d: float = 10.0
    eta: float = 0.4
    alpha: float = 4.0
    sigma2: float = 1e-9
    beta: float = 5.0
    epsilon: float = 0.05
    t_slots: int = 100
    p_max: float = 0.02

    def __post_init__(self):
        checks = (
            (self.lambda_ap > 0, "lambda_ap must be > 0"),
            (self.lambda_w > 0, "lambda_w must be > 0"),
            (self.p_d > 0, "p_d must be > 0"),
            (0 < self.eta < 1, "eta must lie in (0, 1)"),
            (self.alpha > 2, "alpha must be > 2"),
            (self.sigma2 > 0, "sigma2 must be > 0"),
            (self.beta > 0, "beta must be > 0"),
            (0 < self.epsilon < 1, "epsilon must lie in (0, 1)"),
            (self.p_max > 0, "p_max must be > 0"),
        )
        for ok, msg in checks:
            # NaN fails every comparison, so it is rejected here too
            if not ok:
                raise DomainError(msg)
        if int(self.t_slots) != self.t_slots or self.t_slots < 2:
            raise DomainError("t_slots must be an integer >= 2")
        object.__setattr__(self, "t_slots", int(self.t_slots))

    def with_(self, **changes) -> "NetworkParams":
        """Return a copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    def check_n_dl(self, n_dl: int) -> int:
        """Validate a downlink slot count against the frame length."""
        if int(n_dl) != n_dl or not 1 <= n_dl <= self.t_slots - 1:
            raise DomainError(
                f"n_dl must be an integer in [1, {self.t_slots - 1}], got {n_dl}")
        return int(n_dl)
