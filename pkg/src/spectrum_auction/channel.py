"""Radio channel: path loss, time-correlated Rayleigh fading, primary-user activity and rates.

Fading is a first-order Gauss-Markov process on the underlying complex
Gaussian gain ``g``; the stored factor is ``h = |g|^2``, a unit-mean
exponential variable. The slot-to-slot correlation follows Clarke's model,
``rho = J0(2 pi f_d T_frame)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import j0

from .errors import InvalidGeometryError


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    bandwidth: float = 1.0  # Hz, per channel
    tx_power: float = 0.1  # W
    noise_power: float = dbm_to_watts(-90.0)  # W
    pathloss_exponent: float = 3.0
    frame_length: float = 100e-6  # s
    doppler_freq: float = 100.0  # Hz
    # False drops P0 from the SNR (SNR = G h / sigma^2)
    include_tx_power: bool = True

    def __post_init__(self):
        for name in ("bandwidth", "tx_power", "noise_power", "pathloss_exponent",
                     "frame_length", "doppler_freq"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.pathloss_exponent < 2:
            raise ValueError(f"pathloss_exponent must be >= 2, got {self.pathloss_exponent!r}")

    @property
    def snr_scale(self) -> float:
        """Factor multiplying ``G*h`` inside the SNR."""
        power = self.tx_power if self.include_tx_power else 1.0
        return power / self.noise_power

    @property
    def correlation(self) -> float:
        return fading_correlation(self.doppler_freq, self.frame_length)


def fading_correlation(doppler_freq: float, frame_length: float) -> float:
    """Clarke/Jakes slot-to-slot correlation of the complex gain."""
    return float(j0(2.0 * math.pi * doppler_freq * frame_length))


def pathloss(distance: float, exponent: float) -> float:
    if not distance > 0:
        raise InvalidGeometryError(f"distance must be > 0, got {distance!r}")
    return float(distance) ** (-float(exponent))


@dataclass(frozen=True)
class Topology:
    su_positions: np.ndarray  # (N, 2), meters
    basestation_position: np.ndarray  # (2,), meters
    pathloss_gains: np.ndarray  # (N,)

    @classmethod
    def from_positions(cls, su_positions, basestation_position, exponent: float) -> "Topology":
        su = np.asarray(su_positions, dtype=float).reshape(-1, 2)
        bs = np.asarray(basestation_position, dtype=float).reshape(2)
        gains = np.array([pathloss(float(np.hypot(*(p - bs))), exponent) for p in su])
        return cls(su, bs, gains)

    @property
    def num_sus(self) -> int:
        return len(self.pathloss_gains)


def random_topology(num_sus: int, area_side: float, bs_distance: float, exponent: float,
                    rng: np.random.Generator) -> Topology:
    """Place SUs uniformly in a square centred at the origin; the base station sits
    ``bs_distance`` meters from the centre along the x axis."""
    if area_side <= 0 or bs_distance < 0:
        raise InvalidGeometryError("area_side must be > 0 and bs_distance >= 0")
    positions = rng.uniform(-area_side / 2, area_side / 2, size=(num_sus, 2))
    return Topology.from_positions(positions, (bs_distance, 0.0), exponent)


@dataclass(frozen=True)
class ChannelState:
    fading_h: np.ndarray  # (N, K) unit-mean exponential power factors
    pu_active: np.ndarray  # (K,) bool
    pu_prob: np.ndarray  # (K,) Bernoulli occupancy probabilities
    gain: np.ndarray = field(repr=False, default=None)  # (N, K) complex Gaussian behind fading_h

    @property
    def shape(self) -> tuple[int, int]:
        return self.fading_h.shape


def initial_state(num_sus: int, pu_prob, rng: np.random.Generator) -> ChannelState:
    """Draw fading from its stationary distribution; the PU starts idle."""
    pu_prob = np.asarray(pu_prob, dtype=float)
    if np.any((pu_prob < 0) | (pu_prob > 1)):
        raise ValueError("pu_prob entries must lie in [0, 1]")
    k = len(pu_prob)
    g = _complex_normal(rng, (num_sus, k))
    return ChannelState(np.abs(g) ** 2, np.zeros(k, dtype=bool), pu_prob, g)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian with unit variance (real, imag each N(0, 1/2))."""
    z = rng.standard_normal(tuple(shape) + (2,))
    z *= math.sqrt(0.5)
    return z.view(np.complex128)[..., 0]


def step_fading(state: ChannelState, params: RadioParams, rng: np.random.Generator,
                rho: float | None = None) -> ChannelState:
    """Advance every fading entry by one slot.

    ``rho`` overrides the Doppler-derived correlation (useful for tests and
    for the independent-fading limit ``rho = 0``).
    """
    if rho is None:
        rho = params.correlation
    g = state.gain
    if g is None:
        # state built from fading_h alone: recover a gain with random phase
        phase = rng.uniform(0, 2 * math.pi, state.fading_h.shape)
        g = np.sqrt(state.fading_h) * np.exp(1j * phase)
    innovation = _complex_normal(rng, g.shape)
    g_next = rho * g + math.sqrt(max(0.0, 1.0 - rho * rho)) * innovation
    return ChannelState(np.abs(g_next) ** 2, state.pu_active, state.pu_prob, g_next)


def fading_block(gain: np.ndarray, rho: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` consecutive slots of the complex gain following ``gain``; shape ``(size, N, K)``.

    Consumes ``rng`` exactly as ``size`` calls of :func:`step_fading` would, so
    both paths produce the same trajectory up to rounding.
    """
    innovation = _complex_normal(rng, (size,) + gain.shape)
    scale = math.sqrt(max(0.0, 1.0 - rho * rho))
    return lfilter([scale], [1.0, -rho], innovation, axis=0, zi=(rho * gain)[None])[0]


def pu_block(pu_prob, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` slots of Bernoulli PU activity, consuming ``rng`` like repeated :func:`step_pu`."""
    pu_prob = np.asarray(pu_prob, dtype=float)
    return rng.random((size, len(pu_prob))) < pu_prob


def step_pu(state: ChannelState, rng: np.random.Generator) -> ChannelState:
    active = rng.random(len(state.pu_prob)) < state.pu_prob
    return ChannelState(state.fading_h, active, state.pu_prob, state.gain)


def rate(gain_G, fading_h, params: RadioParams):
    """Achievable rate ``W log2(1 + G h P0 / sigma^2)``; broadcasts over arrays."""
    snr = np.asarray(gain_G, dtype=float) * np.asarray(fading_h, dtype=float) * params.snr_scale
    out = params.bandwidth * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out
