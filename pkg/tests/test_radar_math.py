import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mmtrack.errors import AmbiguityError, DomainError, ValidationError
from mmtrack.radar_math import (
    C,
    ChirpParams,
    aoa_from_phase,
    distance_for_if_frequency,
    if_frequency_for_distance,
    interference_probability,
    max_unambiguous_velocity,
    range_resolution,
    summary,
    velocity_from_phase,
)

P = ChirpParams()


def test_if_frequency_at_four_metres():
    assert if_frequency_for_distance(P, 4.0) == pytest.approx(1.87e6, rel=5e-3)


def test_if_frequency_hand_value():
    assert if_frequency_for_distance(P, 1.0) == pytest.approx(70e12 * 2.0 / 299_792_458.0, rel=1e-12)
    assert if_frequency_for_distance(P, 0.0) == 0.0
    with pytest.raises(DomainError):
        if_frequency_for_distance(P, -0.1)


@given(st.floats(0.0, 100.0))
def test_if_round_trip(d):
    assert distance_for_if_frequency(P, if_frequency_for_distance(P, d)) == pytest.approx(d, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("bw,expected", [(4e9, 0.0375), (2e9, 0.075)])
def test_range_resolution(bw, expected):
    assert range_resolution(ChirpParams.with_bandwidth(bw)) == pytest.approx(expected, rel=0.01)


def test_range_resolution_hand_value():
    assert range_resolution(ChirpParams.with_bandwidth(1.5e9)) == pytest.approx(299_792_458.0 / 3e9, rel=1e-12)


@given(st.floats(1e8, 1e10), st.floats(1.01, 3.0))
def test_range_resolution_decreasing(b, k):
    assert range_resolution(ChirpParams.with_bandwidth(b * k)) < range_resolution(ChirpParams.with_bandwidth(b))


def test_chirp_invariant():
    with pytest.raises(ValidationError):
        ChirpParams(slope=70e12, bandwidth=4e9, chirp_time=50e-6)
    with pytest.raises(ValidationError):
        ChirpParams(wavelength=0.0)


def test_velocity_from_phase():
    p = ChirpParams(slope=80e12, bandwidth=4e9, chirp_time=50e-6, wavelength=3.9e-3)
    assert velocity_from_phase(p, 0.0) == 0.0
    assert velocity_from_phase(p, math.pi / 2) == pytest.approx(3.9e-3 * (math.pi / 2) / (4 * math.pi * 50e-6))
    assert velocity_from_phase(p, math.pi) == pytest.approx(max_unambiguous_velocity(p))
    assert max_unambiguous_velocity(p) == pytest.approx(3.9e-3 / (4 * 50e-6))
    with pytest.raises(AmbiguityError):
        velocity_from_phase(p, 3.2)


@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_velocity_linear(a, b):
    if abs(a + b) <= math.pi:
        lhs = velocity_from_phase(P, a + b)
        assert lhs == pytest.approx(velocity_from_phase(P, a) + velocity_from_phase(P, b), abs=1e-9)


def test_aoa():
    assert aoa_from_phase(P, 0.0) == 0.0
    assert aoa_from_phase(P, math.pi) == pytest.approx(math.pi / 2)
    assert math.degrees(aoa_from_phase(P, math.pi / 2)) == pytest.approx(30.0)
    wide = ChirpParams(rx_spacing=P.wavelength / 4)
    with pytest.raises(DomainError):
        aoa_from_phase(wide, math.pi)


def test_interference_three_radars():
    assert interference_probability(3, 4e9, 5.6e6) == pytest.approx(0.004, abs=5e-4)
    assert interference_probability(1, 4e9, 5.6e6) == 0.0


def _birthday_oracle(n, slots):
    """Enumerate every start-slot assignment and count those with a shared slot."""
    hits = total = 0
    for combo in itertools.product(range(slots), repeat=n):
        total += 1
        hits += len(set(combo)) < n
    return hits / total


@pytest.mark.parametrize("n,slots", [(2, 5), (3, 7), (4, 6), (4, 9), (5, 8)])
def test_interference_matches_enumeration(n, slots):
    # with B_total an integer multiple of B_inter the chirp starts become discrete slots
    assert interference_probability(n, slots * 1.0, 1.0) == pytest.approx(_birthday_oracle(n, slots), abs=1e-12)


@settings(max_examples=200)
@given(st.integers(1, 6), st.floats(1e5, 1e8), st.floats(1.0, 1.5))
def test_interference_monotone(n, b_inter, k):
    b = 4e9
    p = interference_probability(n, b, b_inter)
    assert 0.0 <= p <= 1.0
    assert interference_probability(n + 1, b, b_inter) >= p
    assert interference_probability(n, b, b_inter * k) >= p


def test_interference_domain():
    with pytest.raises(DomainError):
        interference_probability(3, 10.0, 5.0)
    with pytest.raises(DomainError):
        interference_probability(0, 10.0, 1.0)


def test_summary_values():
    s = summary()
    assert s["range_resolution_m"] == pytest.approx(0.0375, rel=0.01)
    assert s["interference_probability"][3] == pytest.approx(0.004, abs=5e-4)
    assert s["speed_of_light_m_s"] == C
