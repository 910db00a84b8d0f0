"""射影の組に対する不確定性領域の解析的な判定と境界曲線。"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .jordan import OneDim, TwoDim, jordan_decompose
from .qcore import (
    NORM_TOL,
    Operator,
    Projector,
    PureState,
    UncertaintyRegionError,
    InvalidProjectorError,
    operator_array,
    shift_scale_to_projector,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
SQRT_GUARD = 1e-12
ALPHA_TOL = 1e-12
QUARTER = 0.25
HALF_PI = float(np.pi / 2)

SIGN_COMBINATIONS: Tuple[Tuple[int, int], ...] = ((-1, -1), (-1, 1), (1, -1), (1, 1))


class AngleOutOfRangeError(UncertaintyRegionError, ValueError):
    """θ が (0, π/2] の外。"""


class InvalidPointError(UncertaintyRegionError, ValueError):
    """分散の組が [0, 1/4]² の外。"""


class OutOfAnalyticScopeError(UncertaintyRegionError):
    """解析式の適用範囲外。サンプリングによる近似に切り替える。"""


class BoxBoundaryFallback(OutOfAnalyticScopeError):
    """θ > π/4 では qudit 領域が箱全体になる。"""

    def __init__(self, theta: float) -> None:
        super().__init__(f"theta={theta!r} > pi/4 では qudit 領域の境界は箱の辺です")
        self.theta = theta
        self.box = box_polyline()


class UnattainablePointError(UncertaintyRegionError, ValueError):
    """領域外の点に対して状態を構成しようとした。"""


class DimClass(str, Enum):
    QUBIT = "qubit"
    QUDIT = "qudit"


class Verdict(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Part(str, Enum):
    R1 = "R1"
    R2 = "R2"


_VERDICT_BY_CODE = (Verdict.INTERIOR, Verdict.BOUNDARY, Verdict.OUTSIDE)
_PART_BY_CODE = (None, Part.R1, Part.R2)
INTERIOR, BOUNDARY, OUTSIDE = 0, 1, 2


@dataclass(frozen=True)
class VariancePoint:
    dA: float
    dB: float

    def __post_init__(self) -> None:
        for name, value in (("dA", self.dA), ("dB", self.dB)):
            if not np.isfinite(value) or value < -SQRT_GUARD or value > QUARTER + SQRT_GUARD:
                raise InvalidPointError(f"{name}={value!r} が [0, 1/4] の外です")


@dataclass(frozen=True)
class RegionSpec:
    theta: float
    dim_class: DimClass

    def __post_init__(self) -> None:
        _check_theta(self.theta)
        object.__setattr__(self, "dim_class", DimClass(self.dim_class))


@dataclass(frozen=True)
class RotatedCoords:
    x1: float
    y1: float


@dataclass(frozen=True)
class QuadraticCoefficients:
    f1: float
    f2: float
    f3: float

    @property
    def alpha0(self) -> float:
        return -self.f2 / (2.0 * self.f1)

    def evaluate(self, alpha: float) -> float:
        return self.f1 * alpha * alpha + self.f2 * alpha + self.f3


@dataclass(frozen=True)
class Membership:
    verdict: Verdict
    which_part: Optional[Part]
    margin: float


@dataclass(frozen=True)
class AlphaFeasibility:
    feasible: bool
    alpha_witness: Optional[float]
    signs: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class VarianceTransform:
    """射影の分散 → 観測量の分散 (各軸を scale² 倍)。"""

    scale_a: float = 1.0
    scale_b: float = 1.0

    def apply(self, point: VariancePoint) -> Tuple[float, float]:
        return self.scale_a**2 * point.dA, self.scale_b**2 * point.dB

    def invert(self, var_a: float, var_b: float) -> VariancePoint:
        return VariancePoint(var_a / self.scale_a**2, var_b / self.scale_b**2)


@dataclass(frozen=True)
class GridClassification:
    """セル中心ごとの判定結果。"""

    resolution: int
    centers: np.ndarray
    verdicts: np.ndarray
    parts: np.ndarray
    margins: np.ndarray

    def verdict_labels(self) -> List[str]:
        return [_VERDICT_BY_CODE[int(code)].value for code in self.verdicts]

    def part_labels(self) -> List[str]:
        labels = []
        for code in self.parts:
            part = _PART_BY_CODE[int(code)]
            labels.append(part.value if part is not None else "")
        return labels


def _check_theta(theta: float) -> None:
    if not np.isfinite(theta) or theta <= 0.0 or theta > HALF_PI + NORM_TOL:
        raise AngleOutOfRangeError(f"theta={theta!r} は (0, pi/2] の範囲で指定してください")


def _guarded_sqrt(values: np.ndarray) -> np.ndarray:
    radicand = 1.0 - 4.0 * values
    if radicand.size and float(radicand.min()) < -SQRT_GUARD:
        raise InvalidPointError("分散が 1/4 を超えています")
    return np.sqrt(np.maximum(radicand, 0.0))


def _angle_terms(theta: float) -> Tuple[float, float]:
    theta = min(float(theta), HALF_PI)
    return float(np.cos(2 * theta)), float(np.sin(2 * theta))


def qubit_margin(dA: np.ndarray, dB: np.ndarray, theta: float) -> np.ndarray:
    """4(ΔA+ΔB) − (1+cos²2θ) + 2|cos2θ|·√(1−4ΔA)√(1−4ΔB)。非負なら qubit 領域内。"""
    c, _ = _angle_terms(theta)
    dA = np.asarray(dA, dtype=float)
    dB = np.asarray(dB, dtype=float)
    u = _guarded_sqrt(dA)
    v = _guarded_sqrt(dB)
    return 4.0 * (dA + dB) - (1.0 + c * c) + 2.0 * abs(c) * u * v


def parabola_margin(dA: np.ndarray, dB: np.ndarray, theta: float) -> np.ndarray:
    """(2 − √(1−4ΔA) − √(1−4ΔB)) − 2sin²θ。"""
    c, _ = _angle_terms(theta)
    u = _guarded_sqrt(np.asarray(dA, dtype=float))
    v = _guarded_sqrt(np.asarray(dB, dtype=float))
    return (1.0 + c) - (u + v)


def ellipse_branch_margins(
    dA: np.ndarray, dB: np.ndarray, theta: float
) -> Tuple[np.ndarray, np.ndarray]:
    """楕円の下側・上側の枝をそれぞれ零点集合とする符号付きの式。"""
    c, _ = _angle_terms(theta)
    dA = np.asarray(dA, dtype=float)
    dB = np.asarray(dB, dtype=float)
    u = _guarded_sqrt(dA)
    v = _guarded_sqrt(dB)
    linear = 4.0 * (dA + dB) - (1.0 + c * c)
    cross = 2.0 * abs(c) * u * v
    return linear + cross, linear - cross


def _classify_arrays(
    dA: np.ndarray,
    dB: np.ndarray,
    theta: float,
    dim_class: DimClass,
    tol: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    c, _ = _angle_terms(theta)
    dA = np.asarray(dA, dtype=float)
    dB = np.asarray(dB, dtype=float)
    g = qubit_margin(dA, dB, theta)
    verdicts = np.full(g.shape, INTERIOR, dtype=np.int8)
    parts = np.zeros(g.shape, dtype=np.int8)

    if dim_class is DimClass.QUBIT:
        inside = g >= -tol
        on_edge = np.abs(g) <= tol
        in_r1 = 4.0 * (dA + dB) >= (1.0 + c * c) - tol
        margins = g
    else:
        h = parabola_margin(dA, dB, theta)
        inside = (g >= -tol) | (h < tol)
        on_edge = (np.abs(h) <= tol) | ((h >= -tol) & (np.abs(g) <= tol))
        in_r1 = (h >= -tol) & (g >= -tol)
        margins = np.maximum(g, -h)

    # ΔA=1/4, ΔB=1/4 の辺も境界。角 (1/4,1/4) だけは内部 (R1) として扱う
    near_a = dA >= QUARTER - tol
    near_b = dB >= QUARTER - tol
    on_edge = on_edge | (near_a ^ near_b)

    verdicts[on_edge & inside] = BOUNDARY
    verdicts[~inside] = OUTSIDE
    parts[inside & in_r1] = 1
    parts[inside & ~in_r1] = 2
    return verdicts, parts, margins


def _membership(point: VariancePoint, theta: float, tol: float, dim_class: DimClass) -> Membership:
    _check_theta(theta)
    if tol <= 0:
        raise ValueError("tol は正の値で指定してください")
    verdicts, parts, margins = _classify_arrays(
        np.array([point.dA]), np.array([point.dB]), theta, dim_class, tol
    )
    return Membership(
        verdict=_VERDICT_BY_CODE[int(verdicts[0])],
        which_part=_PART_BY_CODE[int(parts[0])],
        margin=float(margins[0]),
    )


def qubit_membership(point: VariancePoint, theta: float, tol: float = DEFAULT_TOL) -> Membership:
    """R₁⁽²⁾ ∪ R₂⁽²⁾ に対する判定。両方に属する点は R1 として報告する。"""
    return _membership(point, theta, tol, DimClass.QUBIT)


def qudit_membership(point: VariancePoint, theta: float, tol: float = DEFAULT_TOL) -> Membership:
    """R₁⁽ᵈ⁾ ∪ R₂⁽ᵈ⁾ (d ≥ 3) に対する判定。θ > π/4 では箱全体が領域になる。"""
    return _membership(point, theta, tol, DimClass.QUDIT)


def membership(spec: RegionSpec, point: VariancePoint, tol: float = DEFAULT_TOL) -> Membership:
    return _membership(point, spec.theta, tol, spec.dim_class)


def classify_points(
    dA: np.ndarray,
    dB: np.ndarray,
    theta: float,
    dim_class: DimClass,
    tol: float = DEFAULT_TOL,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ベクトル化版の判定。(verdict codes, part codes, margins) を返す。"""
    _check_theta(theta)
    return _classify_arrays(dA, dB, theta, DimClass(dim_class), tol)


def cell_centers(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / (4.0 * resolution)


def classify_grid(
    theta: float,
    dim_class: DimClass,
    resolution: int,
    tol: float = DEFAULT_TOL,
) -> GridClassification:
    """[0,1/4]² を resolution×resolution に分けたセル中心の判定。ΔA が外側のループ。"""
    if resolution < 1:
        raise ValueError("resolution は 1 以上で指定してください")
    axis = cell_centers(resolution)
    grid_a, grid_b = np.meshgrid(axis, axis, indexing="ij")
    verdicts, parts, margins = classify_points(grid_a.ravel(), grid_b.ravel(), theta, dim_class, tol)
    return GridClassification(
        resolution=resolution,
        centers=np.column_stack([grid_a.ravel(), grid_b.ravel()]),
        verdicts=verdicts,
        parts=parts,
        margins=margins,
    )


def rotated_coords(point: VariancePoint) -> RotatedCoords:
    """(ΔA−1/8, ΔB−1/8) を 45° 回転した座標。"""
    a = point.dA - 0.125
    b = point.dB - 0.125
    root = np.sqrt(0.5)
    return RotatedCoords(x1=float(root * (a + b)), y1=float(root * (a - b)))


def ellipse_form(point: VariancePoint, theta: float) -> float:
    """64x₁²/(1+cos4θ) + 64y₁²/(1−cos4θ)。θ=π/4, π/2 では定義されない。"""
    _check_theta(theta)
    cos4 = float(np.cos(4 * theta))
    if abs(1.0 + cos4) <= NORM_TOL or abs(1.0 - cos4) <= NORM_TOL:
        raise OutOfAnalyticScopeError(f"theta={theta!r} では楕円が退化しています")
    coords = rotated_coords(point)
    return 64.0 * coords.x1**2 / (1.0 + cos4) + 64.0 * coords.y1**2 / (1.0 - cos4)


def ellipse_residual(point: VariancePoint, theta: float) -> float:
    """(1+cos²2θ−4(ΔA+ΔB))² − 4cos²2θ(1−4ΔA)(1−4ΔB)。楕円上で 0、内側で負。"""
    _check_theta(theta)
    c, _ = _angle_terms(theta)
    total = point.dA + point.dB
    first = 1.0 + c * c - 4.0 * total
    return float(first * first - 4.0 * c * c * (1.0 - 4.0 * point.dA) * (1.0 - 4.0 * point.dB))


def ellipse_point(phi: float, theta: float) -> VariancePoint:
    """赤道面の純粋状態 r=(sinφ, 0, cosφ) が与える分散の組。"""
    return VariancePoint(
        float(np.sin(phi) ** 2 / 4.0),
        float(np.sin(phi - 2.0 * theta) ** 2 / 4.0),
    )


def box_polyline() -> List[VariancePoint]:
    return [
        VariancePoint(0.0, 0.0),
        VariancePoint(QUARTER, 0.0),
        VariancePoint(QUARTER, QUARTER),
        VariancePoint(0.0, QUARTER),
        VariancePoint(0.0, 0.0),
    ]


def _allocate(total: int, weights: Sequence[float]) -> List[int]:
    """total 点を重みに比例して配分する (各区間 1 点以上)。"""
    counts = [1] * len(weights)
    remaining = total - len(weights)
    weight_sum = float(sum(weights))
    shares = [remaining * w / weight_sum for w in weights]
    for index, share in enumerate(shares):
        counts[index] += int(np.floor(share))
    leftovers = total - sum(counts)
    order = np.argsort([-(share - np.floor(share)) for share in shares], kind="stable")
    for index in order[:leftovers]:
        counts[int(index)] += 1
    return counts


def _segment(start: Tuple[float, float], end: Tuple[float, float], count: int) -> np.ndarray:
    """start を含み end を含まない count 点。"""
    steps = np.arange(count) / count
    return np.column_stack(
        [start[0] + (end[0] - start[0]) * steps, start[1] + (end[1] - start[1]) * steps]
    )


def _arc(theta: float, phi_start: float, phi_end: float, count: int, exact_end: bool) -> np.ndarray:
    phis = phi_start + (phi_end - phi_start) * np.arange(count + int(exact_end)) / count
    points = np.column_stack([np.sin(phis) ** 2 / 4.0, np.sin(phis - 2.0 * theta) ** 2 / 4.0])
    return points


def _pin_edges(points: np.ndarray) -> np.ndarray:
    """丸め誤差で 1/4 をわずかに超えた座標を箱に戻す。"""
    return np.clip(points, 0.0, QUARTER)


def _lower_arc_range(theta: float) -> Tuple[float, float]:
    c, _ = _angle_terms(theta)
    if c >= 0.0:
        return HALF_PI + 2.0 * theta, 3.0 * HALF_PI
    return HALF_PI, HALF_PI + 2.0 * theta


def _arc_endpoints(theta: float) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    c, _ = _angle_terms(theta)
    edge = c * c / 4.0
    if c >= 0.0:
        return (edge, QUARTER), (QUARTER, edge)
    return (QUARTER, edge), (edge, QUARTER)


def ellipse_arc(theta: float, n: int) -> List[VariancePoint]:
    """ΔA+ΔB ≤ (1+cos²2θ)/4 側に残る楕円弧 (両端を含む n 点)。"""
    _check_theta(theta)
    if n < 2:
        raise ValueError("n は 2 以上で指定してください")
    phi_start, phi_end = _lower_arc_range(theta)
    points = _arc(theta, phi_start, phi_end, n - 1, exact_end=True)
    start, end = _arc_endpoints(theta)
    points[0] = start
    points[-1] = end
    return [VariancePoint(float(a), float(b)) for a, b in _pin_edges(points)]


def qubit_boundary(theta: float, n: int) -> List[VariancePoint]:
    """楕円弧と ΔA=1/4, ΔB=1/4 の辺からなる閉じた折れ線 (先頭と末尾は同じ点)。"""
    _check_theta(theta)
    if n < 8:
        raise ValueError(f"n は 8 以上で指定してください: n={n}")
    phi_start, phi_end = _lower_arc_range(theta)
    start, end = _arc_endpoints(theta)
    corner = (QUARTER, QUARTER)
    arc_count, first_edge, second_edge = _allocate(n - 1, (3.0, 1.0, 1.0))
    arc = _arc(theta, phi_start, phi_end, arc_count, exact_end=False)
    arc[0] = start
    pieces = [
        arc,
        _segment(end, corner, first_edge),
        _segment(corner, start, second_edge),
        np.array([start]),
    ]
    points = _pin_edges(np.vstack(pieces))
    return [VariancePoint(float(a), float(b)) for a, b in points]


def parabola_point(u: float, theta: float) -> VariancePoint:
    """√(1−4ΔA)=u, √(1−4ΔB)=1+cos2θ−u を満たす放物線上の点。"""
    c, _ = _angle_terms(theta)
    v = 1.0 + c - u
    return VariancePoint(float((1.0 - u * u) / 4.0), float((1.0 - v * v) / 4.0))


def qudit_boundary(theta: float, n: int) -> List[VariancePoint]:
    """放物線と、その外側に残る楕円弧・辺からなる閉じた折れ線。θ ≤ π/4 のみ。"""
    _check_theta(theta)
    if theta > np.pi / 4 + NORM_TOL:
        raise BoxBoundaryFallback(theta)
    if n < 8:
        raise ValueError(f"n は 8 以上で指定してください: n={n}")
    c, s = _angle_terms(theta)
    corner = (QUARTER, QUARTER)
    top_left, bottom_right = _arc_endpoints(theta)
    counts = _allocate(n - 1, (2.0, 1.0, 1.0, 1.0, 1.0))

    us = 1.0 - (1.0 - c) * np.arange(counts[0]) / counts[0]
    vs = 1.0 + c - us
    parabola = np.column_stack([(1.0 - us * us) / 4.0, (1.0 - vs * vs) / 4.0])
    parabola[0] = (0.0, s * s / 4.0)
    low_arc = _arc(theta, np.pi + 2.0 * theta, 3.0 * HALF_PI, counts[1], exact_end=False)
    low_arc[0] = (s * s / 4.0, 0.0)
    high_arc = _arc(theta, HALF_PI + 2.0 * theta, np.pi, counts[4], exact_end=False)
    high_arc[0] = top_left
    pieces = [
        parabola,
        low_arc,
        _segment(bottom_right, corner, counts[2]),
        _segment(corner, top_left, counts[3]),
        high_arc,
        np.array([parabola[0]]),
    ]
    points = _pin_edges(np.vstack(pieces))
    return [VariancePoint(float(a), float(b)) for a, b in points]


def _sign_terms(point: VariancePoint, signs: Tuple[int, int]) -> Tuple[float, float]:
    u = float(_guarded_sqrt(np.array([point.dA]))[0])
    v = float(_guarded_sqrt(np.array([point.dB]))[0])
    return 1.0 + signs[0] * u, 1.0 + signs[1] * v


def quadratic_coefficients(
    point: VariancePoint, theta: float, signs: Tuple[int, int] = (-1, -1)
) -> QuadraticCoefficients:
    """r_x²+r_z²−α² ≤ 0 を α の二次式 f₁α²+f₂α+f₃ として表した係数。"""
    _check_theta(theta)
    c, s = _angle_terms(theta)
    if abs(s) <= NORM_TOL:
        raise AngleOutOfRangeError("theta=pi/2 では f1 が発散します (単位化した式を使ってください)")
    big_p, big_q = _sign_terms(point, signs)
    s2 = s * s
    return QuadraticCoefficients(
        f1=(1.0 - c) ** 2 / s2,
        f2=-2.0 * (1.0 - c) * (big_p + big_q) / s2,
        f3=(big_p * big_p + big_q * big_q - 2.0 * c * big_p * big_q) / s2,
    )


def _monic_minimum(big_p: float, big_q: float, c: float) -> Tuple[float, float, float]:
    """α² − 2α(P+Q)/(1−c) + (P²+Q²−2cPQ)/(1−c)² の [0,1] 上の最小点と値。"""
    one_minus_c = 1.0 - c
    linear = -2.0 * (big_p + big_q) / one_minus_c
    constant = (big_p * big_p + big_q * big_q - 2.0 * c * big_p * big_q) / one_minus_c**2
    alpha = float(np.clip(-linear / 2.0, 0.0, 1.0))
    value = alpha * alpha + linear * alpha + constant
    return alpha, value, max(1.0, abs(constant))


def alpha_feasible(point: VariancePoint, theta: float) -> AlphaFeasibility:
    """4 通りの符号について α ∈ [0,1] で F(α) ≤ 0 となるかを調べる。"""
    _check_theta(theta)
    c, _ = _angle_terms(theta)
    best: Optional[Tuple[float, float, Tuple[int, int], float]] = None
    for signs in SIGN_COMBINATIONS:
        big_p, big_q = _sign_terms(point, signs)
        alpha, value, scale = _monic_minimum(big_p, big_q, c)
        if best is None or value < best[1]:
            best = (alpha, value, signs, scale)
    assert best is not None
    alpha, value, signs, scale = best
    if value <= ALPHA_TOL * scale:
        return AlphaFeasibility(True, alpha, signs)
    return AlphaFeasibility(False, None, None)


def _ket_from_bloch(r: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(r))
    if norm == 0.0:
        return np.array([1.0, 0.0], dtype=complex)
    unit = r / norm
    polar = float(np.arccos(np.clip(unit[2], -1.0, 1.0)))
    azimuth = float(np.arctan2(unit[1], unit[0]))
    return np.array([np.cos(polar / 2), np.exp(1j * azimuth) * np.sin(polar / 2)], dtype=complex)


def _block_bloch(point: VariancePoint, theta: float, alpha: float, signs: Tuple[int, int]) -> np.ndarray:
    c, s = _angle_terms(theta)
    big_p, big_q = _sign_terms(point, signs)
    r_z = big_p - alpha
    r_x = (big_q - c * big_p - alpha * (1.0 - c)) / s
    r_y = float(np.sqrt(max(alpha * alpha - r_x * r_x - r_z * r_z, 0.0)))
    return np.array([r_x, r_y, r_z])


def witness_state(point: VariancePoint, theta: float, d: int = 2) -> PureState:
    """canonical_pair(θ, d) に対して point の分散を与える純粋状態を構成する。"""
    _check_theta(theta)
    if d < 2:
        raise ValueError("d は 2 以上で指定してください")
    if theta >= HALF_PI - NORM_TOL:
        return _witness_orthogonal(point, d)

    if d == 2:
        if qubit_membership(point, theta).verdict is Verdict.OUTSIDE:
            raise UnattainablePointError(f"{point} は qubit 領域の外です")
        signs = min(
            SIGN_COMBINATIONS,
            key=lambda pair: float(np.linalg.norm(_block_bloch(point, theta, 1.0, pair)[[0, 2]])),
        )
        alpha = 1.0
    else:
        report = alpha_feasible(point, theta)
        if not report.feasible or report.signs is None or report.alpha_witness is None:
            raise UnattainablePointError(f"{point} は qudit 領域の外です")
        alpha, signs = report.alpha_witness, report.signs

    ket = np.zeros(d, dtype=complex)
    if alpha > 0.0:
        ket[:2] = np.sqrt(alpha) * _ket_from_bloch(_block_bloch(point, theta, alpha, signs))
    if d > 2:
        ket[2] = np.sqrt(max(1.0 - alpha, 0.0))
    return PureState.normalized(ket)


def _witness_orthogonal(point: VariancePoint, d: int) -> PureState:
    """θ=π/2 (A=|0⟩⟨0|, B=|1⟩⟨1|) の場合。"""
    u = float(_guarded_sqrt(np.array([point.dA]))[0])
    v = float(_guarded_sqrt(np.array([point.dB]))[0])
    p_a = (1.0 - u) / 2.0
    p_b = (1.0 - v) / 2.0
    ket = np.zeros(d, dtype=complex)
    if d == 2:
        if abs(point.dA - point.dB) > DEFAULT_TOL:
            raise UnattainablePointError("theta=pi/2 の qubit 領域は対角線のみです")
        ket[0], ket[1] = np.sqrt(p_a), np.sqrt(1.0 - p_a)
    else:
        ket[0], ket[1] = np.sqrt(p_a), np.sqrt(p_b)
        ket[2] = np.sqrt(max(1.0 - p_a - p_b, 0.0))
    return PureState.normalized(ket)


def _as_rank_one(operator: Operator) -> Projector:
    try:
        projector = Projector.from_matrix(operator_array(operator))
    except InvalidProjectorError as exc:
        raise OutOfAnalyticScopeError("d ≥ 3 では rank-1 射影のみ解析的に扱えます") from exc
    if projector.rank != 1:
        raise OutOfAnalyticScopeError(f"rank={projector.rank} の射影は解析式の範囲外です")
    return projector


def _pair_angle(p: Projector, q: Projector) -> Tuple[float, bool]:
    """(θ, 同一射影か)。"""
    blocks = jordan_decompose(p, q).blocks
    angles = [block.theta for block in blocks if isinstance(block, TwoDim)]
    if angles:
        return float(angles[0]), False
    if any(isinstance(block, OneDim) and block.p == 1 and block.q == 1 for block in blocks):
        return HALF_PI, True
    raise OutOfAnalyticScopeError("射影の組から角度を決められません")


def region_for_observables(
    a: Operator, b: Operator, d: Optional[int] = None
) -> Tuple[RegionSpec, VarianceTransform]:
    """観測量の組を射影の組 (θ) と分散の拡大率に写す。"""
    a_array = operator_array(a)
    b_array = operator_array(b)
    dim = int(d if d is not None else a_array.shape[0])
    if a_array.shape != (dim, dim) or b_array.shape != (dim, dim):
        raise OutOfAnalyticScopeError(f"観測量の次元が d={dim} と一致しません")

    if dim == 2:
        p_a, _, scale_a = shift_scale_to_projector(a_array)
        p_b, _, scale_b = shift_scale_to_projector(b_array)
        theta, _ = _pair_angle(p_a, p_b)
        return RegionSpec(theta, DimClass.QUBIT), VarianceTransform(scale_a, scale_b)

    p_a = _as_rank_one(a_array)
    p_b = _as_rank_one(b_array)
    theta, identical = _pair_angle(p_a, p_b)
    # 同一射影では ΔA=ΔB の対角線になり、θ=π/2 の qubit 領域と一致する
    dim_class = DimClass.QUBIT if identical else DimClass.QUDIT
    return RegionSpec(theta, dim_class), VarianceTransform(1.0, 1.0)


def boundary_polyline(spec: RegionSpec, n: int) -> List[VariancePoint]:
    if spec.dim_class is DimClass.QUBIT:
        return qubit_boundary(spec.theta, n)
    try:
        return qudit_boundary(spec.theta, n)
    except BoxBoundaryFallback as fallback:
        return fallback.box


def points_from_pairs(pairs: Iterable[Tuple[float, float]]) -> List[VariancePoint]:
    return [VariancePoint(float(a), float(b)) for a, b in pairs]


__all__ = [
    "AlphaFeasibility",
    "AngleOutOfRangeError",
    "BoxBoundaryFallback",
    "DEFAULT_TOL",
    "DimClass",
    "GridClassification",
    "InvalidPointError",
    "Membership",
    "OutOfAnalyticScopeError",
    "Part",
    "QuadraticCoefficients",
    "RegionSpec",
    "RotatedCoords",
    "UnattainablePointError",
    "VariancePoint",
    "VarianceTransform",
    "Verdict",
    "alpha_feasible",
    "boundary_polyline",
    "box_polyline",
    "cell_centers",
    "classify_grid",
    "classify_points",
    "ellipse_arc",
    "ellipse_branch_margins",
    "ellipse_form",
    "ellipse_point",
    "ellipse_residual",
    "membership",
    "parabola_margin",
    "parabola_point",
    "points_from_pairs",
    "quadratic_coefficients",
    "qubit_boundary",
    "qubit_margin",
    "qudit_boundary",
    "qudit_membership",
    "region_for_observables",
    "rotated_coords",
    "witness_state",
]
