"""乱数状態の生成と、解析領域を検証するモンテカルロ・オラクル。"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, List, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy import linalg

from .qcore import (
    ComplexMatrix,
    DensityMatrix,
    Operator,
    Projector,
    PureState,
    State,
    UncertaintyRegionError,
    batch_variance,
    canonical_pair,
    operator_array,
    variance,
)
from .regions import VariancePoint, cell_centers

logger = logging.getLogger(__name__)

_T = TypeVar("_T")

UINT64_MAX = 2**64 - 1
DEFAULT_CHUNK = 1 << 16


class SamplingError(UncertaintyRegionError, ValueError):
    """サンプリング条件が不正。"""


class StateKind(str, Enum):
    PURE = "pure"
    MIXED = "mixed"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SeededRng:
    """(seed, stream) から決まる Philox ストリーム。子ストリームは path で区別する。"""

    seed: int
    stream: int = 0
    path: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for name, value in (("seed", self.seed), ("stream", self.stream)):
            if not 0 <= int(value) <= UINT64_MAX:
                raise SamplingError(f"{name}={value!r} は 64bit 符号なし整数で指定してください")

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.path))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream, self.path + (int(index),))


RngLike = Union[np.random.Generator, SeededRng]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    return rng


def _check_dim(d: int) -> None:
    if d < 2:
        raise SamplingError(f"d は 2 以上で指定してください: d={d}")


def haar_pure_batch(d: int, n: int, rng: RngLike) -> np.ndarray:
    """(n, d) の Haar ランダムな状態ベクトル。"""
    _check_dim(d)
    generator = as_generator(rng)
    kets = generator.standard_normal((n, d)) + 1j * generator.standard_normal((n, d))
    return kets / np.linalg.norm(kets, axis=1, keepdims=True)


def haar_pure(d: int, rng: RngLike) -> PureState:
    return PureState.normalized(haar_pure_batch(d, 1, rng)[0])


def random_mixed_batch(d: int, n: int, rng: RngLike) -> np.ndarray:
    """(n, d, d) の Hilbert–Schmidt 測度の密度行列 GG†/Tr(GG†)。"""
    _check_dim(d)
    generator = as_generator(rng)
    ginibre = generator.standard_normal((n, d, d)) + 1j * generator.standard_normal((n, d, d))
    products = ginibre @ np.conj(np.transpose(ginibre, (0, 2, 1)))
    traces = np.trace(products, axis1=1, axis2=2).real
    products = products / traces[:, np.newaxis, np.newaxis]
    return (products + np.conj(np.transpose(products, (0, 2, 1)))) / 2


def random_mixed(d: int, rng: RngLike) -> DensityMatrix:
    return DensityMatrix(ComplexMatrix(random_mixed_batch(d, 1, rng)[0]))


def haar_unitary(d: int, rng: RngLike) -> np.ndarray:
    """Ginibre 行列の QR 分解 (R の対角の位相を補正)。"""
    _check_dim(d)
    generator = as_generator(rng)
    ginibre = (generator.standard_normal((d, d)) + 1j * generator.standard_normal((d, d))) / np.sqrt(2)
    q, r = linalg.qr(ginibre)
    diagonal = np.diag(r)
    return q * (diagonal / np.abs(diagonal))


def random_projector(d: int, rank: int, rng: RngLike) -> Projector:
    if not 0 <= rank <= d:
        raise SamplingError(f"rank={rank} は 0..{d} で指定してください")
    columns = haar_unitary(d, rng)[:, :rank]
    matrix = columns @ columns.conj().T
    return Projector(ComplexMatrix((matrix + matrix.conj().T) / 2), rank)


def boundary_kets(n: int, rng: RngLike, d: int = 2) -> np.ndarray:
    """cosφ|0⟩ + sinφ|1⟩ (φ 一様, 実振幅) を d 次元に埋め込んだ (n, d) 配列。"""
    if n < 1:
        raise SamplingError("n は 1 以上で指定してください")
    _check_dim(d)
    phis = as_generator(rng).uniform(0.0, 2.0 * np.pi, n)
    kets = np.zeros((n, d), dtype=complex)
    kets[:, 0] = np.cos(phis)
    kets[:, 1] = np.sin(phis)
    return kets


def boundary_states_qubit(n: int, rng: RngLike, d: int = 2) -> List[PureState]:
    return [PureState.normalized(ket) for ket in boundary_kets(n, rng, d)]


def scatter_array(a: Operator, b: Operator, states: np.ndarray) -> np.ndarray:
    """状態配列 ((N,d) または (N,d,d)) から (N, 2) の分散の組。"""
    states = np.asarray(states)
    if states.shape[0] == 0:
        return np.zeros((0, 2))
    return np.column_stack([batch_variance(a, states), batch_variance(b, states)])


def scatter(a: Operator, b: Operator, states: Sequence[State]) -> List[VariancePoint]:
    """射影の組に対して状態ごとの (ΔA, ΔB)。"""
    a_array = operator_array(a)
    b_array = operator_array(b)
    return [VariancePoint(variance(a_array, state), variance(b_array, state)) for state in states]


@dataclass
class OccupancyGrid:
    """[0,1/4]² を resolution² 個のセルに分けた到達セルの記録。"""

    resolution: int
    cells: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.resolution < 1:
            raise SamplingError("resolution は 1 以上で指定してください")
        if self.cells is None:
            self.cells = np.zeros((self.resolution, self.resolution), dtype=bool)
        elif self.cells.shape != (self.resolution, self.resolution):
            raise SamplingError(f"cells の形状が resolution={self.resolution} と一致しません")

    def indices(self, values: np.ndarray) -> np.ndarray:
        scaled = np.floor(np.asarray(values, dtype=float) * 4.0 * self.resolution).astype(np.int64)
        return np.clip(scaled, 0, self.resolution - 1)

    def mark(self, points: np.ndarray) -> "OccupancyGrid":
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if points.size:
            self.cells[self.indices(points[:, 0]), self.indices(points[:, 1])] = True
        return self

    def merge(self, other: "OccupancyGrid") -> "OccupancyGrid":
        if other.resolution != self.resolution:
            raise SamplingError("resolution の異なるグリッドは結合できません")
        return OccupancyGrid(self.resolution, self.cells | other.cells)

    def erode(self) -> "OccupancyGrid":
        """8 近傍がすべて到達済みのセルだけを残す。箱の外側は到達済みとみなす。"""
        padded = np.pad(self.cells, 1, constant_values=True)
        result = self.cells.copy()
        size = self.resolution
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                result &= padded[1 + di : 1 + di + size, 1 + dj : 1 + dj + size]
        return OccupancyGrid(self.resolution, result)

    def fraction(self) -> float:
        return float(self.cells.mean())

    def cell_centers(self) -> np.ndarray:
        return cell_centers(self.resolution)

    def marked_centers(self) -> np.ndarray:
        centers = self.cell_centers()
        rows, cols = np.nonzero(self.cells)
        return np.column_stack([centers[rows], centers[cols]])


def _bloch_kets(r_x: np.ndarray, r_y: np.ndarray, r_z: np.ndarray) -> np.ndarray:
    polar = np.arccos(np.clip(r_z, -1.0, 1.0))
    azimuth = np.arctan2(r_y, r_x)
    kets = np.empty((r_x.size, 2), dtype=complex)
    kets[:, 0] = np.cos(polar / 2)
    kets[:, 1] = np.exp(1j * azimuth) * np.sin(polar / 2)
    return kets


def _bloch_densities(r_x: np.ndarray, r_z: np.ndarray) -> np.ndarray:
    densities = np.empty((r_x.size, 2, 2), dtype=complex)
    densities[:, 0, 0] = (1 + r_z) / 2
    densities[:, 1, 1] = (1 - r_z) / 2
    densities[:, 0, 1] = r_x / 2
    densities[:, 1, 0] = r_x / 2
    return densities


def _sweep_axes(resolution: int, refine: int) -> Tuple[np.ndarray, np.ndarray]:
    steps = 4 * resolution * refine
    angles = np.arange(int(np.ceil(np.pi * steps))) / steps
    radii = np.linspace(0.0, 1.0, steps + 1)
    return angles, radii


def boundary_sweep(
    d: int,
    resolution: int,
    kind: StateKind = StateKind.PURE,
    chunk_size: int = DEFAULT_CHUNK,
) -> Iterator[np.ndarray]:
    """極値の弧を埋めるための決定的な状態の列を chunk ごとに返す。

    qubit の純粋状態は r=(ρsinφ, √(1−ρ²), ρcosφ)、混合状態は r=(ρsinφ, 0, ρcosφ)。
    d ≥ 3 では √α(cosφ|0⟩+sinφ|1⟩) + √(1−α)|2⟩ (混合版は対応する直和)。
    刻みは分散の変化がセル幅以下になるように resolution から決める。
    """
    kind = StateKind(kind)
    _check_dim(d)
    angles, radii = _sweep_axes(resolution, 1 if d == 2 else 2)
    block = max(1, chunk_size // radii.size)
    for start in range(0, angles.size, block):
        count = min(block, angles.size - start)
        phi = np.repeat(angles[start : start + count], radii.size)
        r = np.tile(radii, count)
        if d == 2:
            r_x = r * np.sin(phi)
            r_z = r * np.cos(phi)
            if kind is StateKind.MIXED:
                yield _bloch_densities(r_x, r_z)
            else:
                yield _bloch_kets(r_x, np.sqrt(np.clip(1.0 - r * r, 0.0, 1.0)), r_z)
        elif kind is StateKind.MIXED:
            states = np.zeros((phi.size, d, d), dtype=complex)
            states[:, 0, 0] = r * np.cos(phi) ** 2
            states[:, 1, 1] = r * np.sin(phi) ** 2
            states[:, 0, 1] = r * np.cos(phi) * np.sin(phi)
            states[:, 1, 0] = states[:, 0, 1]
            states[:, 2, 2] = 1.0 - r
            yield states
        else:
            kets = np.zeros((phi.size, d), dtype=complex)
            kets[:, 0] = np.sqrt(r) * np.cos(phi)
            kets[:, 1] = np.sqrt(r) * np.sin(phi)
            kets[:, 2] = np.sqrt(1.0 - r)
            yield kets


def _parallel_map(function: Callable[[int], _T], count: int, threads: int) -> List[_T]:
    """index 順に結果を返す。スレッド数は結果に影響しない。"""
    if threads <= 1 or count <= 1:
        return [function(index) for index in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, range(count)))


def _chunk_sizes(total: int, chunk_size: int) -> List[int]:
    sizes = [chunk_size] * (total // chunk_size)
    if total % chunk_size:
        sizes.append(total % chunk_size)
    return sizes


def random_states(d: int, n: int, kind: StateKind, rng: RngLike) -> np.ndarray:
    kind = StateKind(kind)
    if kind is StateKind.PURE:
        return haar_pure_batch(d, n, rng)
    if kind is StateKind.MIXED:
        return random_mixed_batch(d, n, rng)
    return boundary_kets(n, rng, d)


def sample_scatter(
    theta: float,
    d: int,
    n_samples: int,
    kind: StateKind,
    rng: SeededRng,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """canonical_pair(θ, d) の散布図。chunk i は rng.child(i) から生成する。"""
    kind = StateKind(kind)
    if n_samples < 0:
        raise SamplingError("n_samples は 0 以上で指定してください")
    a, b = canonical_pair(theta, d)
    sizes = _chunk_sizes(n_samples, chunk_size)

    def run(index: int) -> np.ndarray:
        states = random_states(d, sizes[index], kind, rng.child(index))
        return scatter_array(a, b, states)

    parts = _parallel_map(run, len(sizes), threads)
    if not parts:
        return np.zeros((0, 2))
    return np.vstack(parts)


def oracle_region(
    theta: float,
    d: int,
    n_samples: int,
    resolution: int,
    rng: SeededRng,
    kind: StateKind | str = "both",
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    sweeps: bool = True,
) -> OccupancyGrid:
    """ランダム状態と決定的スイープで到達したセルを記録する。

    kind="both" では chunk ごとに純粋状態と混合状態を交互に使う。
    """
    if n_samples < resolution * resolution:
        raise SamplingError(
            f"n_samples={n_samples} は resolution²={resolution * resolution} 以上必要です"
        )
    a, b = canonical_pair(theta, d)
    sizes = _chunk_sizes(n_samples, chunk_size)
    kinds = _chunk_kinds(kind, len(sizes))

    def sample_chunk(index: int) -> OccupancyGrid:
        states = random_states(d, sizes[index], kinds[index], rng.child(index))
        return OccupancyGrid(resolution).mark(scatter_array(a, b, states))

    grids = _parallel_map(sample_chunk, len(sizes), threads)
    grid = OccupancyGrid(resolution)
    for partial in grids:
        grid = grid.merge(partial)

    if sweeps:
        for sweep_kind in _sweep_kinds(kind, d):
            for states in boundary_sweep(d, resolution, sweep_kind, chunk_size):
                grid.mark(scatter_array(a, b, states))

    logger.info(
        "oracle_region: theta=%.6f d=%d samples=%d resolution=%d occupancy=%.4f",
        theta,
        d,
        n_samples,
        resolution,
        grid.fraction(),
    )
    return grid


def _chunk_kinds(kind: StateKind | str, count: int) -> List[StateKind]:
    if kind == "both":
        return [StateKind.PURE if index % 2 == 0 else StateKind.MIXED for index in range(count)]
    resolved = StateKind(kind)
    if resolved is StateKind.BOUNDARY:
        raise SamplingError("oracle_region の kind は pure / mixed / both です")
    return [resolved] * count


def _sweep_kinds(kind: StateKind | str, d: int) -> List[StateKind]:
    if kind != "both":
        return [StateKind(kind)]
    # d ≥ 3 の純粋版と混合版は同じ分散を与える
    return [StateKind.PURE] if d > 2 else [StateKind.PURE, StateKind.MIXED]


_SIC_PHASES = (0.0, 2.0 * np.pi / 3.0, -2.0 * np.pi / 3.0)


def sic_tetrahedron() -> List[PureState]:
    """Bloch 球上で正四面体をなす 4 つの qubit 純粋状態。"""
    states = [PureState(np.array([1.0, 0.0], dtype=complex))]
    for phase in _SIC_PHASES:
        states.append(
            PureState.normalized(
                np.array([-1.0 / np.sqrt(3.0), np.exp(1j * phase) * np.sqrt(2.0 / 3.0)])
            )
        )
    return states


def sic_projectors() -> List[Projector]:
    return [Projector.onto(state.amplitudes) for state in sic_tetrahedron()]


def sic_overlaps() -> np.ndarray:
    kets = np.array([state.amplitudes for state in sic_tetrahedron()])
    return np.abs(kets.conj() @ kets.T) ** 2


def sic_variance_sum(rho: State) -> float:
    return float(sum(variance(projector, rho) for projector in sic_projectors()))


def sic_variance_points(states: np.ndarray) -> np.ndarray:
    """(N, 4) の各 SIC 射影の分散。"""
    return np.column_stack([batch_variance(projector, states) for projector in sic_projectors()])


__all__ = [
    "DEFAULT_CHUNK",
    "OccupancyGrid",
    "RngLike",
    "SamplingError",
    "SeededRng",
    "StateKind",
    "as_generator",
    "boundary_kets",
    "boundary_states_qubit",
    "boundary_sweep",
    "haar_pure",
    "haar_pure_batch",
    "haar_unitary",
    "oracle_region",
    "random_mixed",
    "random_mixed_batch",
    "random_projector",
    "random_states",
    "sample_scatter",
    "scatter",
    "scatter_array",
    "sic_overlaps",
    "sic_projectors",
    "sic_tetrahedron",
    "sic_variance_points",
    "sic_variance_sum",
]
