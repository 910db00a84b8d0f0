"""自由粒子ガウス波束の位置・運動量のモーメントと x–p 不確定性領域。"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import integrate

from .qcore import UncertaintyRegionError

logger = logging.getLogger(__name__)

MEMBERSHIP_RTOL = 1e-12
QUADRATURE_WIDTHS = 12.0


class InvalidPacketError(UncertaintyRegionError, ValueError):
    """波束パラメータが不正。"""


class InfeasibleTargetError(UncertaintyRegionError, ValueError):
    """目標 (Δx, Δp) が xy ≥ ħ/2 を満たさない。"""


@dataclass(frozen=True)
class GaussianPacket:
    """ψ(x,0) = (a√π)^{-1/2} exp(−x²/2a² + ik₀x/a) を時間 t だけ自由発展させた波束。"""

    a: float
    k0: float = 0.0
    m: float = 1.0
    hbar: float = 1.0
    t: float = 0.0

    def __post_init__(self) -> None:
        values = (self.a, self.k0, self.m, self.hbar, self.t)
        if not all(math.isfinite(value) for value in values):
            raise InvalidPacketError(f"有限でないパラメータがあります: {values}")
        if self.a <= 0 or self.m <= 0 or self.hbar <= 0:
            raise InvalidPacketError("a, m, hbar は正の値で指定してください")
        if self.t < 0:
            raise InvalidPacketError(f"t は 0 以上で指定してください: t={self.t}")

    @property
    def tau(self) -> float:
        return self.hbar * self.t / (self.m * self.a * self.a)


def position_stats(packet: GaussianPacket) -> Tuple[float, float]:
    """(⟨x⟩, ⟨x²⟩)。"""
    a, k0, m, hbar, t = packet.a, packet.k0, packet.m, packet.hbar, packet.t
    mean = hbar * k0 * t / (m * a)
    second = (
        a * a / 2.0
        + hbar**2 * t**2 / (2.0 * m**2 * a**2)
        + hbar**2 * k0**2 * t**2 / (m**2 * a**2)
    )
    return mean, second


def momentum_stats(packet: GaussianPacket) -> Tuple[float, float]:
    """(⟨p⟩, ⟨p²⟩)。自由粒子なので t に依らない。"""
    a, k0, hbar = packet.a, packet.k0, packet.hbar
    return hbar * k0 / a, hbar**2 / (2.0 * a * a) + hbar**2 * k0**2 / (a * a)


def spreads(packet: GaussianPacket) -> Tuple[float, float]:
    """標準偏差 (Δx, Δp)。"""
    a, m, hbar, t = packet.a, packet.m, packet.hbar, packet.t
    delta_x = math.sqrt(a * a / 2.0 + hbar**2 * t**2 / (2.0 * m**2 * a**2))
    delta_p = hbar / (math.sqrt(2.0) * a)
    return delta_x, delta_p


def xp_membership(x: float, y: float, hbar: float = 1.0) -> bool:
    return x > 0 and y > 0 and x * y >= hbar / 2.0 - MEMBERSHIP_RTOL * hbar


def solve_packet_for(
    x_target: float, y_target: float, m: float = 1.0, hbar: float = 1.0
) -> GaussianPacket:
    """spreads(packet) = (x_target, y_target) となる k₀=0 の波束。"""
    if x_target <= 0 or y_target <= 0:
        raise InfeasibleTargetError("目標値は正の値で指定してください")
    if m <= 0 or hbar <= 0:
        raise InvalidPacketError("m, hbar は正の値で指定してください")
    if not xp_membership(x_target, y_target, hbar):
        raise InfeasibleTargetError(
            f"(x, y)=({x_target!r}, {y_target!r}) は xy >= hbar/2 を満たしません"
        )
    a = hbar / (math.sqrt(2.0) * y_target)
    t = (m * a / hbar) * math.sqrt(max(2.0 * x_target * x_target - a * a, 0.0))
    return GaussianPacket(a=a, k0=0.0, m=m, hbar=hbar, t=t)


def wavefunction(packet: GaussianPacket, x: np.ndarray) -> np.ndarray:
    """時刻 t の ψ(x,t)。"""
    scaled = np.asarray(x, dtype=float) / packet.a
    spread = 1.0 + 1j * packet.tau
    prefactor = np.exp(-(packet.k0**2) / 2.0) / (np.sqrt(packet.a * np.sqrt(np.pi)) * np.sqrt(spread))
    return prefactor * np.exp(-((scaled - 1j * packet.k0) ** 2) / (2.0 * spread))


def wavefunction_derivative(packet: GaussianPacket, x: np.ndarray) -> np.ndarray:
    scaled = np.asarray(x, dtype=float) / packet.a
    spread = 1.0 + 1j * packet.tau
    return wavefunction(packet, x) * (-(scaled - 1j * packet.k0) / (packet.a * spread))


def _integrate(function, lower: float, upper: float, center: float) -> float:
    value, _ = integrate.quad(
        function, lower, upper, points=[center], limit=400, epsabs=1e-13, epsrel=1e-11
    )
    return float(value)


def quadrature_moments(packet: GaussianPacket) -> Dict[str, float]:
    """ψ(x,t) を数値積分して 4 つのモーメントを求める。"""
    mean, _ = position_stats(packet)
    delta_x, _ = spreads(packet)
    bound = abs(mean) + QUADRATURE_WIDTHS * delta_x
    hbar = packet.hbar

    def density(x: float) -> float:
        return float(abs(wavefunction(packet, x)) ** 2)

    def momentum_density(x: float) -> float:
        value = np.conj(wavefunction(packet, x)) * (-1j * hbar) * wavefunction_derivative(packet, x)
        return float(np.real(value))

    def kinetic_density(x: float) -> float:
        return float(hbar**2 * abs(wavefunction_derivative(packet, x)) ** 2)

    moments = {
        "x_mean": _integrate(lambda x: x * density(x), -bound, bound, mean),
        "x_second": _integrate(lambda x: x * x * density(x), -bound, bound, mean),
        "p_mean": _integrate(momentum_density, -bound, bound, mean),
        "p_second": _integrate(kinetic_density, -bound, bound, mean),
    }
    logger.debug("quadrature_moments: %s -> %s", packet, moments)
    return moments


def analytic_moments(packet: GaussianPacket) -> Dict[str, float]:
    x_mean, x_second = position_stats(packet)
    p_mean, p_second = momentum_stats(packet)
    return {"x_mean": x_mean, "x_second": x_second, "p_mean": p_mean, "p_second": p_second}


def xp_sweep(
    hbar: float = 1.0,
    m: float = 1.0,
    n: int = 40,
    a_range: Tuple[float, float] = (0.25, 4.0),
    t_max: float = 10.0,
) -> np.ndarray:
    """(a, t, Δx, Δp) の格子。k₀ は分散に影響しないので 0 に固定する。"""
    if n < 2:
        raise InvalidPacketError("n は 2 以上で指定してください")
    rows = []
    for a in np.geomspace(a_range[0], a_range[1], n):
        for t in np.linspace(0.0, t_max, n):
            packet = GaussianPacket(a=float(a), m=m, hbar=hbar, t=float(t))
            rows.append((packet.a, packet.t, *spreads(packet)))
    return np.array(rows)


__all__ = [
    "GaussianPacket",
    "InfeasibleTargetError",
    "InvalidPacketError",
    "analytic_moments",
    "momentum_stats",
    "position_stats",
    "quadrature_moments",
    "solve_packet_for",
    "spreads",
    "wavefunction",
    "wavefunction_derivative",
    "xp_membership",
    "xp_sweep",
]
