"""小次元 (d ≤ 16) の量子状態・観測量の型と分散汎関数。"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
NORM_TOL = 1e-12
VARIANCE_CLAMP = 1e-12
MAX_DIM = 16


class UncertaintyRegionError(RuntimeError):
    """Base class for every failure raised by :mod:`uregion`."""


class DimensionMismatchError(UncertaintyRegionError, ValueError):
    """Operands live in Hilbert spaces of different dimension."""


class NotHermitianError(UncertaintyRegionError, ValueError):
    """An observable failed the Hermiticity check."""


class InvalidStateError(UncertaintyRegionError, ValueError):
    """A state vector or density matrix failed its invariants."""


class InvalidProjectorError(UncertaintyRegionError, ValueError):
    """A matrix is not a Hermitian idempotent of integral trace."""


class DegenerateSpectrumError(UncertaintyRegionError, ValueError):
    """The observable is proportional to the identity; its variance is identically zero."""


class NegativeVarianceError(UncertaintyRegionError):
    """A variance came out negative beyond round-off."""


def _max_abs(array: np.ndarray) -> float:
    return float(np.max(np.abs(array))) if array.size else 0.0


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """Immutable dim×dim complex matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.entries, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] == 0:
            raise DimensionMismatchError(f"正方行列ではありません: shape={array.shape}")
        array.setflags(write=False)
        object.__setattr__(self, "entries", array)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return is_hermitian(self.entries, tol)

    def dagger(self) -> "ComplexMatrix":
        return ComplexMatrix(self.entries.conj().T)

    def __matmul__(self, other: "ComplexMatrix") -> "ComplexMatrix":
        if self.dim != other.dim:
            raise DimensionMismatchError(f"次元が一致しません: {self.dim} != {other.dim}")
        return ComplexMatrix(self.entries @ other.entries)


@dataclass(frozen=True, eq=False)
class PureState:
    """正規化済みの状態ベクトル。"""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        vector = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if vector.size == 0:
            raise InvalidStateError("空の状態ベクトルです")
        norm = float(np.vdot(vector, vector).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidStateError(f"状態ベクトルが正規化されていません: |psi|^2={norm!r}")
        vector.setflags(write=False)
        object.__setattr__(self, "amplitudes", vector)

    @classmethod
    def normalized(cls, vector: np.ndarray) -> "PureState":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise InvalidStateError("零ベクトルは正規化できません")
        return cls(vector / norm)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def density(self) -> "DensityMatrix":
        return state_to_density(self)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, trace one, positive semidefinite."""

    matrix: ComplexMatrix

    def __post_init__(self) -> None:
        matrix = self.matrix if isinstance(self.matrix, ComplexMatrix) else ComplexMatrix(self.matrix)
        array = matrix.entries
        if not is_hermitian(array, NORM_TOL):
            raise InvalidStateError("密度行列がエルミートではありません")
        trace = complex(np.trace(array))
        if abs(trace - 1.0) > NORM_TOL:
            raise InvalidStateError(f"密度行列のトレースが 1 ではありません: {trace!r}")
        eigenvalues = np.linalg.eigvalsh(array)
        if float(eigenvalues[0]) < -DEFAULT_TOL:
            raise InvalidStateError(f"負の固有値があります: {float(eigenvalues[0])!r}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent with trace equal to its rank."""

    matrix: ComplexMatrix
    rank: int

    def __post_init__(self) -> None:
        matrix = self.matrix if isinstance(self.matrix, ComplexMatrix) else ComplexMatrix(self.matrix)
        array = matrix.entries
        if not is_hermitian(array, NORM_TOL):
            raise InvalidProjectorError("射影がエルミートではありません")
        if _max_abs(array @ array - array) > DEFAULT_TOL:
            raise InvalidProjectorError("P^2 != P です")
        if abs(complex(np.trace(array)) - self.rank) > DEFAULT_TOL:
            raise InvalidProjectorError(f"トレースが rank={self.rank} と一致しません")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_matrix(cls, array: np.ndarray) -> "Projector":
        array = np.asarray(array, dtype=complex)
        rank = int(round(float(np.trace(array).real)))
        return cls(ComplexMatrix(array), rank)

    @classmethod
    def onto(cls, vector: np.ndarray) -> "Projector":
        """単位ベクトル方向への rank-1 射影。"""
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        vector = vector / np.linalg.norm(vector)
        return cls(ComplexMatrix(np.outer(vector, vector.conj())), 1)

    @property
    def dim(self) -> int:
        return self.matrix.dim

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries


@dataclass(frozen=True)
class BlochVector:
    r_x: float
    r_y: float
    r_z: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.r_x**2 + self.r_y**2 + self.r_z**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.r_x, self.r_y, self.r_z], dtype=float)


Operator = Union[ComplexMatrix, Projector, np.ndarray]
State = Union[PureState, DensityMatrix]

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def pauli() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _SIGMA_X.copy(), _SIGMA_Y.copy(), _SIGMA_Z.copy()


def identity(d: int) -> ComplexMatrix:
    return ComplexMatrix(np.eye(d, dtype=complex))


def is_hermitian(array: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    array = np.asarray(array)
    return _max_abs(array - array.conj().T) <= tol


def operator_array(operator: Operator) -> np.ndarray:
    """ComplexMatrix / Projector / ndarray を複素配列に揃える。"""
    if isinstance(operator, Projector):
        return operator.entries
    if isinstance(operator, ComplexMatrix):
        return operator.entries
    return np.asarray(operator, dtype=complex)


def _checked_observable(operator: Operator, dim: int) -> np.ndarray:
    array = operator_array(operator)
    if array.ndim != 2 or array.shape != (dim, dim):
        raise DimensionMismatchError(f"観測量 {array.shape} と状態の次元 {dim} が一致しません")
    if not is_hermitian(array, DEFAULT_TOL):
        raise NotHermitianError("観測量がエルミートではありません")
    return array


def _real_part(value: complex, scale: float) -> float:
    if abs(value.imag) > NORM_TOL * max(1.0, scale):
        raise NotHermitianError(f"期待値に虚部が残っています: {value!r}")
    return float(value.real)


def expectation(operator: Operator, rho: State) -> float:
    """Tr(Oρ)。"""
    array = _checked_observable(operator, rho.dim)
    scale = _max_abs(array)
    if isinstance(rho, PureState):
        psi = rho.amplitudes
        return _real_part(complex(np.vdot(psi, array @ psi)), scale)
    return _real_part(complex(np.trace(array @ rho.entries)), scale)


def _clamp_variance(value: float, scale: float) -> float:
    if value >= 0.0:
        return value
    if value >= -VARIANCE_CLAMP * max(1.0, scale):
        return 0.0
    raise NegativeVarianceError(f"分散が負になりました: {value!r}")


def variance(operator: Operator, rho: State) -> float:
    """Tr(O²ρ) − Tr²(Oρ)。丸め誤差程度の負値は 0 に丸める。"""
    array = _checked_observable(operator, rho.dim)
    mean = expectation(array, rho)
    second = expectation(array @ array, rho)
    return _clamp_variance(second - mean * mean, _max_abs(array) ** 2)


def batch_expectation(operator: Operator, states: np.ndarray) -> np.ndarray:
    """(N, d) の状態ベクトル群または (N, d, d) の密度行列群に対する期待値。"""
    array = operator_array(operator)
    states = np.asarray(states, dtype=complex)
    if states.ndim == 2:
        if states.shape[1] != array.shape[0]:
            raise DimensionMismatchError("状態と観測量の次元が一致しません")
        values = np.einsum("ni,ij,nj->n", states.conj(), array, states)
    elif states.ndim == 3:
        if states.shape[1:] != array.shape:
            raise DimensionMismatchError("状態と観測量の次元が一致しません")
        values = np.einsum("ij,nji->n", array, states)
    else:
        raise DimensionMismatchError(f"状態配列の形状が不正です: {states.shape}")
    return values.real


def batch_variance(operator: Operator, states: np.ndarray) -> np.ndarray:
    array = operator_array(operator)
    mean = batch_expectation(array, states)
    second = batch_expectation(array @ array, states)
    values = second - mean * mean
    floor = -VARIANCE_CLAMP * max(1.0, _max_abs(array) ** 2)
    if values.size and float(values.min()) < floor:
        raise NegativeVarianceError(f"分散が負になりました: {float(values.min())!r}")
    return np.maximum(values, 0.0)


def state_to_density(psi: PureState) -> DensityMatrix:
    vector = psi.amplitudes
    matrix = np.outer(vector, vector.conj())
    return DensityMatrix(ComplexMatrix((matrix + matrix.conj().T) / 2))


def qubit_projector(axis: BlochVector) -> Projector:
    """½(I + a·σ)。"""
    if abs(axis.norm - 1.0) > NORM_TOL:
        raise InvalidProjectorError(f"単位ベクトルではありません: |a|={axis.norm!r}")
    matrix = 0.5 * (np.eye(2) + axis.r_x * _SIGMA_X + axis.r_y * _SIGMA_Y + axis.r_z * _SIGMA_Z)
    return Projector(ComplexMatrix(matrix), 1)


def bloch_to_density(r: BlochVector) -> DensityMatrix:
    if r.norm > 1.0 + NORM_TOL:
        raise InvalidStateError(f"Bloch ベクトルが単位球の外です: |r|={r.norm!r}")
    matrix = 0.5 * (np.eye(2) + r.r_x * _SIGMA_X + r.r_y * _SIGMA_Y + r.r_z * _SIGMA_Z)
    return DensityMatrix(ComplexMatrix(matrix))


def density_to_bloch(rho: State) -> BlochVector:
    if rho.dim != 2:
        raise DimensionMismatchError(f"Bloch 表示は qubit のみです: dim={rho.dim}")
    return BlochVector(
        r_x=expectation(_SIGMA_X, rho),
        r_y=expectation(_SIGMA_Y, rho),
        r_z=expectation(_SIGMA_Z, rho),
    )


def shift_scale_to_projector(operator: Operator) -> Tuple[Projector, float, float]:
    """O = scale·P + shift·I となる (P, shift, scale) を返す。"""
    array = _checked_observable(operator, operator_array(operator).shape[0])
    if array.shape != (2, 2):
        raise DimensionMismatchError(f"2×2 の観測量のみ対応しています: {array.shape}")
    eigenvalues, eigenvectors = np.linalg.eigh((array + array.conj().T) / 2)
    low, high = float(eigenvalues[0]), float(eigenvalues[1])
    gap = high - low
    if gap <= DEFAULT_TOL:
        raise DegenerateSpectrumError(f"縮退したスペクトルです: mu={low!r}")
    projector = Projector.onto(eigenvectors[:, 1])
    return projector, low, gap


def canonical_pair(theta: float, d: int = 2) -> Tuple[Projector, Projector]:
    """A=|0⟩⟨0|, B=|v⟩⟨v| (v = cosθ|0⟩ + sinθ|1⟩) を d 次元に埋め込んだ射影の組。"""
    if d < 2 or d > MAX_DIM:
        raise DimensionMismatchError(f"次元は 2..{MAX_DIM} で指定してください: d={d}")
    ket0 = np.zeros(d, dtype=complex)
    ket0[0] = 1.0
    ket_v = np.zeros(d, dtype=complex)
    ket_v[0] = np.cos(theta)
    ket_v[1] = np.sin(theta)
    return Projector.onto(ket0), Projector.onto(ket_v)


def robertson_bound(a: Operator, b: Operator, rho: State) -> float:
    """¼|Tr(ρ[A,B])|²。"""
    a_array = _checked_observable(a, rho.dim)
    b_array = _checked_observable(b, rho.dim)
    commutator = a_array @ b_array - b_array @ a_array
    density = rho.density().entries if isinstance(rho, PureState) else rho.entries
    return 0.25 * abs(complex(np.trace(density @ commutator))) ** 2


def _complex_to_json(value: complex) -> list[float]:
    return [float(value.real), float(value.imag)]


def _complex_from_json(value: Any) -> complex:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise InvalidStateError(f"複素数は [re, im] 形式で指定してください: {value!r}")
    return complex(float(value[0]), float(value[1]))


def matrix_to_json(operator: Operator) -> Dict[str, Any]:
    array = operator_array(operator)
    return {
        "dim": int(array.shape[0]),
        "entries": [[_complex_to_json(entry) for entry in row] for row in array],
    }


def matrix_from_json(payload: Dict[str, Any]) -> ComplexMatrix:
    dim = int(payload["dim"])
    rows = payload["entries"]
    if len(rows) != dim or any(len(row) != dim for row in rows):
        raise DimensionMismatchError(f"entries の形状が dim={dim} と一致しません")
    return ComplexMatrix(np.array([[_complex_from_json(v) for v in row] for row in rows]))


def state_to_json(psi: PureState) -> Dict[str, Any]:
    return {"dim": psi.dim, "amplitudes": [_complex_to_json(v) for v in psi.amplitudes]}


def state_from_json(payload: Dict[str, Any]) -> PureState:
    dim = int(payload["dim"])
    amplitudes = [_complex_from_json(v) for v in payload["amplitudes"]]
    if len(amplitudes) != dim:
        raise DimensionMismatchError(f"amplitudes の長さが dim={dim} と一致しません")
    return PureState(np.array(amplitudes))


__all__ = [
    "BlochVector",
    "ComplexMatrix",
    "DegenerateSpectrumError",
    "DensityMatrix",
    "DimensionMismatchError",
    "InvalidProjectorError",
    "InvalidStateError",
    "NegativeVarianceError",
    "NotHermitianError",
    "Projector",
    "PureState",
    "UncertaintyRegionError",
    "batch_expectation",
    "batch_variance",
    "bloch_to_density",
    "canonical_pair",
    "density_to_bloch",
    "expectation",
    "identity",
    "is_hermitian",
    "matrix_from_json",
    "matrix_to_json",
    "operator_array",
    "pauli",
    "qubit_projector",
    "robertson_bound",
    "shift_scale_to_projector",
    "state_from_json",
    "state_to_density",
    "state_to_json",
    "variance",
]
