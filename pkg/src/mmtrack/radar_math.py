"""Closed-form FMCW link relations: IF frequency, resolution, Doppler, AoA,
and the multi-radar chirp-collision probability."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import AmbiguityError, DomainError, ValidationError

C = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ChirpParams:
    """One chirp profile.

    The defaults describe a 77 GHz device sweeping 4 GHz at 70 MHz/us; the
    chirp duration follows from ``bandwidth / slope``. Wavelength and chirp
    time are illustrative, not measured values for any particular board.
    """

    slope: float = 70e12  # Hz/s
    bandwidth: float = 4e9  # Hz
    chirp_time: float = 4e9 / 70e12  # s
    wavelength: float = C / 77e9  # m
    rx_spacing: float = C / 77e9 / 2  # m

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValidationError("wavelength", "must be > 0")
        if self.rx_spacing <= 0:
            raise ValidationError("rx_spacing", "must be > 0")
        if abs(self.slope * self.chirp_time - self.bandwidth) > 1e-6 * abs(self.bandwidth):
            raise ValidationError("bandwidth", "must equal slope * chirp_time")

    @classmethod
    def with_bandwidth(cls, bandwidth, slope=70e12, **kw):
        return cls(slope=slope, bandwidth=bandwidth, chirp_time=bandwidth / slope, **kw)


def if_frequency_for_distance(params: ChirpParams, d: float) -> float:
    if d < 0:
        raise DomainError("distance must be >= 0")
    return params.slope * 2.0 * d / C


def distance_for_if_frequency(params: ChirpParams, f_if: float) -> float:
    if f_if < 0:
        raise DomainError("IF frequency must be >= 0")
    return f_if * C / (2.0 * params.slope)


def range_resolution(params: ChirpParams) -> float:
    if params.bandwidth <= 0:
        raise DomainError("bandwidth must be > 0")
    return C / (2.0 * params.bandwidth)


def velocity_from_phase(params: ChirpParams, dphi: float) -> float:
    if abs(dphi) > math.pi:
        raise AmbiguityError(f"|dphi| = {abs(dphi):.4f} exceeds pi")
    return params.wavelength * dphi / (4.0 * math.pi * params.chirp_time)


def max_unambiguous_velocity(params: ChirpParams) -> float:
    return params.wavelength / (4.0 * params.chirp_time)


def aoa_from_phase(params: ChirpParams, dphi: float) -> float:
    arg = params.wavelength * dphi / (2.0 * math.pi * params.rx_spacing)
    if abs(arg) > 1.0 + 1e-12:
        raise DomainError(f"asin argument {arg:.4f} outside [-1, 1]")
    return math.asin(max(-1.0, min(1.0, arg)))


def interference_probability(n_radars: int, b_total: float, b_inter: float) -> float:
    """Chance that at least two of ``n_radars`` randomly started chirps collide."""
    if n_radars < 1:
        raise DomainError("need at least one radar")
    if b_total <= 0 or b_inter < 0:
        raise DomainError("bandwidths must be positive")
    if b_inter * (n_radars - 1) >= b_total:
        raise DomainError("interference bands exhaust the total bandwidth")
    p_clear = 1.0
    for i in range(1, n_radars + 1):
        p_clear *= (b_total - b_inter * (i - 1)) / b_total
    return 1.0 - p_clear


def summary(params: ChirpParams = ChirpParams(), b_inter=5.6e6, max_distance=4.0) -> dict:
    """Numbers printed by ``mmtrack info``."""
    return {
        "speed_of_light_m_s": C,
        "slope_hz_per_s": params.slope,
        "bandwidth_hz": params.bandwidth,
        "chirp_time_s": params.chirp_time,
        "wavelength_m": params.wavelength,
        "range_resolution_m": range_resolution(params),
        "if_frequency_at_max_distance_hz": if_frequency_for_distance(params, max_distance),
        "max_unambiguous_velocity_m_s": max_unambiguous_velocity(params),
        "interference_probability": {
            n: interference_probability(n, params.bandwidth, b_inter) for n in range(1, 6)
        },
    }
