"""Unit tests for :mod:`uregion.pipeline.jordan`."""
from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from uregion.pipeline.jordan import (
    OneDim,
    TwoDim,
    angle_multiset,
    block_forms,
    decomposition_to_json,
    jordan_decompose,
    principal_angles,
    reconstruct,
    reconstruction_residual,
    unitarity_residual,
)
from uregion.pipeline.qcore import (
    ComplexMatrix,
    DimensionMismatchError,
    Projector,
    canonical_pair,
)
from uregion.pipeline.sampling import SeededRng, haar_unitary, random_projector


def _diag_projector(*entries: float) -> Projector:
    return Projector(ComplexMatrix(np.diag(entries)), int(sum(entries)))


def test_identical_projectors_give_only_one_dimensional_blocks():
    p = _diag_projector(1, 0, 0)
    decomposition = jordan_decompose(p, p)
    assert decomposition.blocks == (OneDim(1, 1), OneDim(0, 0), OneDim(0, 0))
    assert principal_angles(p, p) == []
    assert reconstruction_residual(decomposition, p, p) <= 1e-12


def test_canonical_qubit_pair_is_a_single_block_in_the_standard_basis():
    theta = math.pi / 6
    p, q = canonical_pair(theta, 2)
    decomposition = jordan_decompose(p, q)
    assert len(decomposition.blocks) == 1
    assert isinstance(decomposition.blocks[0], TwoDim)
    assert decomposition.blocks[0].theta == pytest.approx(theta, abs=1e-12)
    np.testing.assert_allclose(np.abs(decomposition.basis.entries), np.eye(2), atol=1e-12)
    assert reconstruction_residual(decomposition, p, q) <= 1e-12


def test_embedded_pair_adds_a_neither_block():
    theta = 0.4
    p, q = canonical_pair(theta, 3)
    decomposition = jordan_decompose(p, q)
    assert decomposition.blocks[1:] == (OneDim(0, 0),)
    assert decomposition.blocks[0].theta == pytest.approx(theta, abs=1e-12)

    basis = decomposition.basis.entries
    p_canon, q_canon = block_forms(decomposition)
    np.testing.assert_allclose(basis.conj().T @ p.entries @ basis, p_canon, atol=1e-12)
    np.testing.assert_allclose(basis.conj().T @ q.entries @ basis, q_canon, atol=1e-12)


def test_commuting_pair_has_no_angles():
    p = _diag_projector(1, 0, 0)
    q = _diag_projector(1, 1, 0)
    decomposition = jordan_decompose(p, q)
    assert principal_angles(p, q) == []
    assert decomposition.blocks == (OneDim(1, 1), OneDim(0, 1), OneDim(0, 0))


def test_orthogonal_rank_one_projectors_pair_into_a_right_angle():
    p = _diag_projector(1, 0)
    q = _diag_projector(0, 1)
    assert principal_angles(p, q) == [pytest.approx(math.pi / 2)]
    decomposition = jordan_decompose(p, q)
    assert reconstruction_residual(decomposition, p, q) <= 1e-12


def test_rank_one_qubit_angle_follows_overlap():
    rng = np.random.default_rng(17)
    for _ in range(100):
        u, v = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        overlap = abs(np.vdot(u, v)) ** 2
        angles = principal_angles(Projector.onto(u), Projector.onto(v))
        assert angles == [pytest.approx(math.acos(math.sqrt(overlap)), abs=1e-9)]


def test_random_pairs_reconstruct_and_stay_unitary():
    rng = np.random.default_rng(23)
    for _ in range(50):
        d = int(rng.integers(2, 9))
        p = random_projector(d, int(rng.integers(1, d)), rng)
        q = random_projector(d, int(rng.integers(1, d)), rng)
        decomposition = jordan_decompose(p, q)
        assert sum(block.size for block in decomposition.blocks) == d
        assert reconstruction_residual(decomposition, p, q) <= 1e-9
        assert unitarity_residual(decomposition) <= 1e-10
        angles = angle_multiset(principal_angles(p, q))
        assert np.all((angles > 0) & (angles <= math.pi / 2 + 1e-12))


def test_angles_are_invariant_under_common_conjugation():
    rng = np.random.default_rng(29)
    p = random_projector(8, 3, rng)
    q = random_projector(8, 3, rng)
    unitary = haar_unitary(8, rng)

    def rotate(projector: Projector) -> Projector:
        matrix = unitary @ projector.entries @ unitary.conj().T
        return Projector(ComplexMatrix((matrix + matrix.conj().T) / 2), projector.rank)

    original = angle_multiset(principal_angles(p, q))
    rotated = angle_multiset(principal_angles(rotate(p), rotate(q)))
    np.testing.assert_allclose(rotated, original, atol=1e-9)
    p_rebuilt, q_rebuilt = reconstruct(jordan_decompose(p, q))
    np.testing.assert_allclose(p_rebuilt, p.entries, atol=1e-9)
    np.testing.assert_allclose(q_rebuilt, q.entries, atol=1e-9)


def test_rejects_mismatched_dimensions_and_non_projectors():
    with pytest.raises(DimensionMismatchError):
        jordan_decompose(_diag_projector(1, 0), _diag_projector(1, 0, 0))
    with pytest.raises(TypeError):
        jordan_decompose(np.eye(2), _diag_projector(1, 0))  # type: ignore[arg-type]


def test_decomposition_json_lists_blocks_in_order():
    p, q = canonical_pair(0.3, 3)
    payload = decomposition_to_json(jordan_decompose(p, q))
    assert payload["dim"] == 3
    assert payload["blocks"][0]["kind"] == "two_dim"
    assert payload["blocks"][0]["theta"] == pytest.approx(0.3)
    assert payload["blocks"][1] == {"kind": "one_dim", "p": 0, "q": 0}
    assert len(payload["basis"]["entries"]) == 3


@st.composite
def projector_pairs(draw):
    d = draw(st.integers(min_value=2, max_value=5))
    p_rank = draw(st.integers(min_value=1, max_value=d))
    q_rank = draw(st.integers(min_value=1, max_value=d))
    rng = SeededRng(draw(st.integers(min_value=0, max_value=2**32 - 1)))
    return random_projector(d, p_rank, rng.child(0)), random_projector(d, q_rank, rng.child(1))


@settings(max_examples=50, deadline=None)
@given(projector_pairs())
def test_swapping_the_projectors_keeps_the_angles(pair):
    p, q = pair
    np.testing.assert_allclose(
        angle_multiset(principal_angles(q, p)),
        angle_multiset(principal_angles(p, q)),
        atol=1e-8,
    )


@settings(max_examples=50, deadline=None)
@given(projector_pairs())
def test_two_dimensional_blocks_match_the_compressed_spectrum(pair):
    p, q = pair
    values, vectors = np.linalg.eigh(p.entries)
    range_p = vectors[:, values > 0.5]
    compressed = range_p.conj().T @ q.entries @ range_p
    cosines = np.linalg.eigvalsh((compressed + compressed.conj().T) / 2)
    expected = int(np.count_nonzero((cosines > 1e-8) & (cosines < 1 - 1e-8)))

    blocks = jordan_decompose(p, q).blocks
    assert sum(isinstance(block, TwoDim) for block in blocks) == expected
