"""Unit tests for :mod:`uregion.pipeline.wavepacket`."""
from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from uregion.pipeline.wavepacket import (
    GaussianPacket,
    InfeasibleTargetError,
    InvalidPacketError,
    analytic_moments,
    momentum_stats,
    position_stats,
    quadrature_moments,
    solve_packet_for,
    spreads,
    wavefunction,
    xp_membership,
    xp_sweep,
)


def test_initial_packet_is_minimum_uncertainty():
    delta_x, delta_p = spreads(GaussianPacket(a=1.0))
    assert delta_x == pytest.approx(1 / math.sqrt(2))
    assert delta_p == pytest.approx(1 / math.sqrt(2))
    assert delta_x * delta_p == pytest.approx(0.5)


def test_moments_drift_and_spread_in_time():
    packet = GaussianPacket(a=2.0, k0=1.5, m=0.5, hbar=1.0, t=3.0)
    mean, second = position_stats(packet)
    assert mean == pytest.approx(1.0 * 1.5 * 3.0 / (0.5 * 2.0))
    delta_x, _ = spreads(packet)
    assert second - mean**2 == pytest.approx(delta_x**2)

    still = GaussianPacket(a=2.0, k0=1.5, m=0.5, hbar=1.0, t=0.0)
    assert momentum_stats(packet) == momentum_stats(still)
    assert spreads(packet)[0] > spreads(still)[0]


def test_invalid_packets_are_rejected():
    with pytest.raises(InvalidPacketError):
        GaussianPacket(a=0.0)
    with pytest.raises(InvalidPacketError):
        GaussianPacket(a=1.0, t=-1.0)
    with pytest.raises(InvalidPacketError):
        GaussianPacket(a=1.0, k0=math.nan)


def test_xp_membership_uses_standard_deviation_bound():
    assert xp_membership(1.0, 0.5)
    assert xp_membership(1 / math.sqrt(2), 1 / math.sqrt(2))
    assert not xp_membership(0.5, 0.5)
    assert not xp_membership(-1.0, -1.0)
    assert xp_membership(1.0, 1.0, hbar=2.0)


def test_solve_packet_for_hits_the_target():
    packet = solve_packet_for(2.0, 1.0)
    assert packet.a == pytest.approx(1 / math.sqrt(2))
    assert packet.t == pytest.approx(math.sqrt(15) / 2)
    assert packet.k0 == 0.0
    assert spreads(packet) == pytest.approx((2.0, 1.0))

    edge = solve_packet_for(1 / math.sqrt(2), 1 / math.sqrt(2))
    assert edge.t == pytest.approx(0.0, abs=1e-7)


def test_solve_packet_for_rejects_targets_below_the_bound():
    with pytest.raises(InfeasibleTargetError):
        solve_packet_for(0.5, 0.5)
    with pytest.raises(InfeasibleTargetError):
        solve_packet_for(0.0, 3.0)


@pytest.mark.parametrize(
    "packet",
    [
        GaussianPacket(a=1.0),
        GaussianPacket(a=1.3, k0=0.7, t=2.0),
        GaussianPacket(a=0.6, k0=-1.2, m=2.0, hbar=0.5, t=4.0),
    ],
)
def test_quadrature_matches_closed_form(packet):
    numeric = quadrature_moments(packet)
    exact = analytic_moments(packet)
    delta_x, delta_p = spreads(packet)
    scales = {
        "x_mean": delta_x,
        "x_second": delta_x**2,
        "p_mean": delta_p,
        "p_second": delta_p**2,
    }
    for key, value in exact.items():
        reference = max(abs(value), scales[key])
        assert abs(numeric[key] - value) / reference <= 1e-6, key


def test_xp_sweep_stays_above_the_bound():
    rows = xp_sweep(n=5)
    assert rows.shape == (25, 4)
    assert np.all(rows[:, 2] * rows[:, 3] >= 0.5 - 1e-12)
    with pytest.raises(InvalidPacketError):
        xp_sweep(n=1)


def test_wavefunction_stays_normalized():
    packet = GaussianPacket(a=1.5, k0=0.7, t=2.0)
    x = np.linspace(-40.0, 40.0, 20_001)
    density = np.abs(wavefunction(packet, x)) ** 2
    assert np.trapz(density, x) == pytest.approx(1.0, abs=1e-6)
    mean, _ = position_stats(packet)
    assert np.trapz(x * density, x) == pytest.approx(mean, abs=1e-6)
