"""Valuation distributions and the first-auction participation threshold."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .channel import RadioParams
from .errors import ConfigError, InvalidPopulationError

BISECTION_MAX_ITER = 200
RESIDUAL_TOL = 1e-9
TAIL_MASS = 1e-9


@dataclass(frozen=True)
class ValuationCdf:
    """A valuation CDF truncated at ``support_max`` for root bracketing."""

    cdf: Callable[[float], float]
    support_max: float

    def __call__(self, theta: float) -> float:
        return self.cdf(theta)

    @classmethod
    def rayleigh(cls, gain_G: float, params: RadioParams) -> "ValuationCdf":
        mean_snr = gain_G * params.snr_scale
        # rate at which the exponential tail drops to TAIL_MASS
        support_max = params.bandwidth * math.log2(1.0 + mean_snr * -math.log(TAIL_MASS))
        return cls(lambda theta: rayleigh_rate_cdf(theta, gain_G, params), support_max)

    @classmethod
    def uniform(cls, high: float = 1.0) -> "ValuationCdf":
        return cls(lambda theta: min(max(theta / high, 0.0), 1.0), high)


def rayleigh_rate_cdf(theta: float, gain_G: float, params: RadioParams) -> float:
    """P(rate <= theta) when the fading power is unit-mean exponential."""
    if theta <= 0:
        return 0.0
    mean_snr = gain_G * params.snr_scale
    snr_needed = math.expm1(theta / params.bandwidth * math.log(2.0))
    return -math.expm1(-snr_needed / mean_snr)


def highest_opponent_cdf(F_value: float, num_users: int) -> float:
    """CDF of the largest of ``num_users - 1`` i.i.d. opponent valuations."""
    if num_users < 2:
        raise InvalidPopulationError(f"need at least 2 users, got {num_users}")
    return F_value ** (num_users - 1)


def initial_threshold(entry_fee: float, monitor_fee: float, num_users: int, F: ValuationCdf) -> float:
    """Solve ``theta * F(theta)**(N-1) = e1 / (1 + c1)`` by bisection.

    The left side is nondecreasing in theta, so the root is unique up to flat
    stretches; the smallest bracket end meeting the residual is returned. When
    the target is out of reach on ``[0, support_max]`` the SU stays out of the
    first auction whatever its valuation, i.e. ``support_max`` is returned.
    """
    if not (math.isfinite(entry_fee) and math.isfinite(monitor_fee)):
        raise ConfigError("fees must be finite")
    if entry_fee < 0 or monitor_fee < 0:
        raise ConfigError("fees must be >= 0")
    if num_users < 2:
        raise InvalidPopulationError(f"need at least 2 users, got {num_users}")
    target = monitor_fee / (1.0 + entry_fee)

    def excess(theta: float) -> float:
        return theta * highest_opponent_cdf(F(theta), num_users) - target

    if target == 0.0:
        return 0.0
    lo, hi = 0.0, F.support_max
    if excess(hi) < 0:
        return hi
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket down to adjacent floats
            break
        value = excess(mid)
        if abs(value) <= RESIDUAL_TOL:
            return mid
        if value < 0:
            lo = mid
        else:
            hi = mid
    return hi
