"""2 つの射影の同時ブロック対角化 (Jordan 分解) と主角。"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from .qcore import ComplexMatrix, DimensionMismatchError, Projector, matrix_to_json

logger = logging.getLogger(__name__)

CLASSIFY_TOL = 1e-10


@dataclass(frozen=True)
class OneDim:
    p: int
    q: int

    size = 1


@dataclass(frozen=True)
class TwoDim:
    theta: float

    size = 2


JordanBlock = Union[OneDim, TwoDim]

# (1,1) → (1,0) → (0,1) → (0,0)
_ONE_DIM_ORDER = {(1, 1): 0, (1, 0): 1, (0, 1): 2, (0, 0): 3}


@dataclass(frozen=True, eq=False)
class JordanDecomposition:
    """basis の列が blocks の順に並ぶユニタリ基底。"""

    basis: ComplexMatrix
    blocks: Tuple[JordanBlock, ...]

    @property
    def dim(self) -> int:
        return self.basis.dim


def _split_range(projector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """射影の値域と核の正規直交基底。"""
    eigenvalues, eigenvectors = np.linalg.eigh((projector + projector.conj().T) / 2)
    mask = eigenvalues > 0.5
    return eigenvectors[:, mask], eigenvectors[:, ~mask]


def _orthonormalize(columns: np.ndarray) -> np.ndarray:
    """QR による再直交化。R の対角を正にして元の列の向きを保つ。"""
    q, r = np.linalg.qr(columns)
    phases = np.diag(r).copy()
    phases[np.abs(phases) == 0] = 1.0
    return q * (phases / np.abs(phases))[np.newaxis, :]


def _complement(span: np.ndarray, remove: np.ndarray) -> np.ndarray:
    """span の列空間から remove の列空間を除いた直交補空間の基底。"""
    if span.shape[1] == 0:
        return span
    if remove.shape[1] > 0:
        span = span - remove @ (remove.conj().T @ span)
    u, s, _ = np.linalg.svd(span, full_matrices=False)
    return u[:, s > 0.5]


def jordan_decompose(p: Projector, q: Projector) -> JordanDecomposition:
    """PQP のスペクトルから Jordan 基底を構成する。"""
    if not isinstance(p, Projector) or not isinstance(q, Projector):
        raise TypeError("jordan_decompose は Projector を受け取ります")
    if p.dim != q.dim:
        raise DimensionMismatchError(f"次元が一致しません: {p.dim} != {q.dim}")
    d = p.dim
    p_array = p.entries
    q_array = q.entries
    range_p, kernel_p = _split_range(p_array)

    compressed = range_p.conj().T @ q_array @ range_p
    cosines, vectors = np.linalg.eigh((compressed + compressed.conj().T) / 2)

    two_dim: List[Tuple[float, np.ndarray, np.ndarray]] = []
    both: List[np.ndarray] = []
    p_only: List[np.ndarray] = []
    pending_u: List[np.ndarray] = []
    pending_w: List[np.ndarray] = []
    pending_theta: List[float] = []
    for index, raw_c in enumerate(cosines):
        c = float(np.clip(raw_c, 0.0, 1.0))
        u = range_p @ vectors[:, index]
        if c >= 1.0 - CLASSIFY_TOL:
            both.append(u)
        elif c <= CLASSIFY_TOL:
            p_only.append(u)
        else:
            qu = q_array @ u
            w = (qu - c * u) / np.sqrt(c * (1.0 - c))
            theta = float(np.arctan2(np.linalg.norm(u - qu), np.linalg.norm(qu)))
            pending_u.append(u)
            pending_w.append(w)
            pending_theta.append(theta)

    partners = np.zeros((d, 0), dtype=complex)
    if pending_w:
        partners = _orthonormalize(np.column_stack(pending_w))
        for k, (u, theta) in enumerate(zip(pending_u, pending_theta)):
            two_dim.append((theta, u, partners[:, k]))

    rest = _complement(kernel_p, partners)
    q_only: List[np.ndarray] = []
    neither: List[np.ndarray] = []
    if rest.shape[1] > 0:
        restricted = rest.conj().T @ q_array @ rest
        values, rest_vectors = np.linalg.eigh((restricted + restricted.conj().T) / 2)
        for index, value in enumerate(values):
            target = q_only if value > 0.5 else neither
            target.append(rest @ rest_vectors[:, index])

    # P のみ・Q のみの方向を組にして θ=π/2 のブロックにする
    paired = min(len(p_only), len(q_only))
    for k in range(paired):
        two_dim.append((float(np.pi / 2), p_only[k], q_only[k]))
    p_only = p_only[paired:]
    q_only = q_only[paired:]

    two_dim.sort(key=lambda item: item[0])
    blocks: List[JordanBlock] = []
    columns: List[np.ndarray] = []
    for theta, first, second in two_dim:
        blocks.append(TwoDim(theta=theta))
        columns.extend([first, second])
    for flags, group in (((1, 1), both), ((1, 0), p_only), ((0, 1), q_only), ((0, 0), neither)):
        for vector in group:
            blocks.append(OneDim(p=flags[0], q=flags[1]))
            columns.append(vector)

    basis = np.column_stack(columns)
    logger.debug(
        "Jordan 分解: d=%d two_dim=%d one_dim=%d",
        d,
        len(two_dim),
        len(blocks) - len(two_dim),
    )
    return JordanDecomposition(basis=ComplexMatrix(basis), blocks=tuple(blocks))


def principal_angles(p: Projector, q: Projector) -> List[float]:
    decomposition = jordan_decompose(p, q)
    return [block.theta for block in decomposition.blocks if isinstance(block, TwoDim)]


def block_forms(decomposition: JordanDecomposition) -> Tuple[np.ndarray, np.ndarray]:
    """Jordan 基底における P, Q の標準形。"""
    d = decomposition.dim
    p_canon = np.zeros((d, d), dtype=complex)
    q_canon = np.zeros((d, d), dtype=complex)
    offset = 0
    for block in decomposition.blocks:
        if isinstance(block, TwoDim):
            cos_t, sin_t = np.cos(block.theta), np.sin(block.theta)
            p_canon[offset, offset] = 1.0
            q_canon[offset : offset + 2, offset : offset + 2] = [
                [cos_t * cos_t, cos_t * sin_t],
                [cos_t * sin_t, sin_t * sin_t],
            ]
            offset += 2
        else:
            p_canon[offset, offset] = block.p
            q_canon[offset, offset] = block.q
            offset += 1
    return p_canon, q_canon


def reconstruct(decomposition: JordanDecomposition) -> Tuple[np.ndarray, np.ndarray]:
    basis = decomposition.basis.entries
    p_canon, q_canon = block_forms(decomposition)
    return basis @ p_canon @ basis.conj().T, basis @ q_canon @ basis.conj().T


def reconstruction_residual(
    decomposition: JordanDecomposition, p: Projector, q: Projector
) -> float:
    p_rebuilt, q_rebuilt = reconstruct(decomposition)
    return float(
        max(np.max(np.abs(p_rebuilt - p.entries)), np.max(np.abs(q_rebuilt - q.entries)))
    )


def unitarity_residual(decomposition: JordanDecomposition) -> float:
    basis = decomposition.basis.entries
    return float(np.max(np.abs(basis.conj().T @ basis - np.eye(decomposition.dim))))


def _block_to_json(block: JordanBlock) -> Dict[str, Any]:
    if isinstance(block, TwoDim):
        return {"kind": "two_dim", "theta": block.theta}
    return {"kind": "one_dim", "p": block.p, "q": block.q}


def decomposition_to_json(decomposition: JordanDecomposition) -> Dict[str, Any]:
    return {
        "dim": decomposition.dim,
        "basis": matrix_to_json(decomposition.basis),
        "blocks": [_block_to_json(block) for block in decomposition.blocks],
    }


def angle_multiset(angles: Sequence[float]) -> np.ndarray:
    return np.sort(np.asarray(angles, dtype=float))


__all__ = [
    "CLASSIFY_TOL",
    "JordanBlock",
    "JordanDecomposition",
    "OneDim",
    "TwoDim",
    "angle_multiset",
    "block_forms",
    "decomposition_to_json",
    "jordan_decompose",
    "principal_angles",
    "reconstruct",
    "reconstruction_residual",
    "unitarity_residual",
]
