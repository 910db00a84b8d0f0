"""Unit tests for :mod:`uregion.pipeline.regions`."""
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

from uregion.pipeline.qcore import ComplexMatrix, PureState, canonical_pair, pauli, variance
from uregion.pipeline.regions import (
    OUTSIDE,
    AngleOutOfRangeError,
    BoxBoundaryFallback,
    DimClass,
    InvalidPointError,
    OutOfAnalyticScopeError,
    Part,
    RegionSpec,
    UnattainablePointError,
    VariancePoint,
    Verdict,
    alpha_feasible,
    boundary_polyline,
    box_polyline,
    classify_grid,
    ellipse_arc,
    ellipse_form,
    ellipse_point,
    ellipse_residual,
    parabola_point,
    qubit_boundary,
    qubit_membership,
    qudit_boundary,
    qudit_membership,
    region_for_observables,
    witness_state,
)

PI_6 = math.pi / 6
PI_8 = math.pi / 8


def _variances(state: PureState, theta: float, d: int) -> tuple[float, float]:
    a, b = canonical_pair(theta, d)
    return variance(a, state), variance(b, state)


def test_qubit_membership_examples():
    on_ellipse = qubit_membership(VariancePoint(0.0, 3 / 16), PI_6)
    assert on_ellipse.verdict is Verdict.BOUNDARY
    assert on_ellipse.which_part is Part.R2
    assert on_ellipse.margin == pytest.approx(0.0, abs=1e-12)

    origin = qubit_membership(VariancePoint(0.0, 0.0), PI_6)
    assert origin.verdict is Verdict.OUTSIDE
    assert origin.which_part is None
    assert origin.margin == pytest.approx(-0.25)

    corner = qubit_membership(VariancePoint(0.25, 0.25), PI_6)
    assert corner.verdict is Verdict.INTERIOR
    assert corner.which_part is Part.R1


def test_qudit_membership_adds_the_origin_and_keeps_the_far_axis_out():
    origin = qudit_membership(VariancePoint(0.0, 0.0), PI_6)
    assert origin.verdict is Verdict.INTERIOR
    assert origin.which_part is Part.R2
    assert qudit_membership(VariancePoint(0.0, 3 / 16), PI_6).verdict is Verdict.BOUNDARY
    assert qudit_membership(VariancePoint(0.0, 0.2), PI_8).verdict is Verdict.OUTSIDE


def test_orthogonal_qubit_region_is_the_diagonal():
    theta = math.pi / 2
    assert qubit_membership(VariancePoint(0.1, 0.1), theta).verdict is Verdict.BOUNDARY
    assert qubit_membership(VariancePoint(0.1, 0.2), theta).verdict is Verdict.OUTSIDE


def test_parabola_points_are_qudit_boundary():
    c = math.cos(2 * PI_8)
    for u in np.linspace(c, 1.0, 11):
        point = parabola_point(float(u), PI_8)
        assert qudit_membership(point, PI_8).verdict is Verdict.BOUNDARY


def test_input_validation():
    with pytest.raises(InvalidPointError):
        VariancePoint(0.3, 0.0)
    with pytest.raises(AngleOutOfRangeError):
        RegionSpec(0.0, DimClass.QUBIT)
    with pytest.raises(AngleOutOfRangeError):
        qubit_membership(VariancePoint(0.1, 0.1), 2.0)
    assert RegionSpec(PI_6, "qudit").dim_class is DimClass.QUDIT


def test_ellipse_arc_endpoints_and_residual():
    arc = ellipse_arc(PI_6, 50)
    assert (arc[0].dA, arc[0].dB) == pytest.approx((1 / 16, 0.25))
    assert (arc[-1].dA, arc[-1].dB) == pytest.approx((0.25, 1 / 16))
    for point in arc:
        assert abs(ellipse_residual(point, PI_6)) <= 1e-9
        assert qubit_membership(point, PI_6).verdict is Verdict.BOUNDARY


def test_arc_at_quarter_turn_is_the_anti_diagonal():
    for point in ellipse_arc(math.pi / 4, 25):
        assert point.dA + point.dB == pytest.approx(0.25, abs=1e-12)


def test_ellipse_form_is_one_on_the_ellipse():
    for phi in np.linspace(0.0, math.pi, 13):
        point = ellipse_point(float(phi), PI_6)
        assert ellipse_form(point, PI_6) == pytest.approx(1.0, abs=1e-9)
        assert ellipse_residual(point, PI_6) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(OutOfAnalyticScopeError):
        ellipse_form(VariancePoint(0.1, 0.1), math.pi / 4)


def _verdicts(points, theta, check):
    return [check(point, theta).verdict for point in points]


@pytest.mark.parametrize("theta", [PI_8, PI_6])
def test_boundary_polylines_are_closed(theta):
    qubit = qubit_boundary(theta, 64)
    assert len(qubit) == 64
    assert qubit[0] == qubit[-1]
    corner = VariancePoint(0.25, 0.25)
    assert corner in qubit
    edges = [point for point in qubit if point != corner]
    assert set(_verdicts(edges, theta, qubit_membership)) == {Verdict.BOUNDARY}

    qudit = qudit_boundary(theta, 64)
    assert len(qudit) == 64
    assert qudit[0] == qudit[-1]
    assert (qudit[0].dA, qudit[0].dB) == pytest.approx((0.0, math.sin(2 * theta) ** 2 / 4))
    edges = [point for point in qudit if point != corner]
    assert set(_verdicts(edges, theta, qudit_membership)) == {Verdict.BOUNDARY}


def test_box_edges_are_boundary_but_the_corner_is_interior():
    edge = qubit_membership(VariancePoint(0.25, 0.2), PI_6)
    assert edge.verdict is Verdict.BOUNDARY
    assert edge.which_part is Part.R1
    assert qudit_membership(VariancePoint(0.1, 0.25), math.pi / 3).verdict is Verdict.BOUNDARY
    assert qubit_membership(VariancePoint(0.25, 0.25), PI_6).verdict is Verdict.INTERIOR
    below_arc = qubit_membership(VariancePoint(0.25, 0.01), PI_6)
    assert below_arc.verdict is Verdict.OUTSIDE


def test_qudit_boundary_above_quarter_turn_falls_back_to_the_box():
    with pytest.raises(BoxBoundaryFallback) as excinfo:
        qudit_boundary(math.pi / 3, 64)
    assert excinfo.value.box == box_polyline()
    assert boundary_polyline(RegionSpec(math.pi / 3, DimClass.QUDIT), 64) == box_polyline()


def test_alpha_feasible_examples():
    corner = alpha_feasible(VariancePoint(0.25, 0.25), PI_6)
    assert corner.feasible
    assert corner.alpha_witness == pytest.approx(1.0)

    origin = alpha_feasible(VariancePoint(0.0, 0.0), PI_6)
    assert origin.feasible
    assert origin.alpha_witness == pytest.approx(0.0)
    assert origin.signs == (-1, -1)

    far = alpha_feasible(VariancePoint(0.0, 0.2), PI_8)
    assert not far.feasible
    assert far.alpha_witness is None


@pytest.mark.parametrize("theta", [PI_8, PI_6])
def test_alpha_feasibility_agrees_with_the_closed_form(theta):
    grid = classify_grid(theta, DimClass.QUDIT, 40)
    for (dA, dB), verdict, margin in zip(grid.centers, grid.verdicts, grid.margins):
        if abs(margin) <= 1e-6:
            continue
        report = alpha_feasible(VariancePoint(float(dA), float(dB)), theta)
        assert report.feasible == (verdict != OUTSIDE)


def test_classify_grid_orders_cells_with_dA_outer():
    grid = classify_grid(PI_6, DimClass.QUBIT, 400)
    assert grid.centers.shape == (160_000, 2)
    assert grid.centers[0, 0] == grid.centers[1, 0]
    assert grid.centers[1, 1] > grid.centers[0, 1]
    assert len(grid.verdict_labels()) == 160_000


def test_qudit_region_fills_the_box_above_quarter_turn():
    grid = classify_grid(math.pi / 3, DimClass.QUDIT, 60)
    assert not np.any(grid.verdicts == OUTSIDE)


@settings(max_examples=80, deadline=None)
@given(
    st.floats(min_value=0.1, max_value=1.4),
    st.floats(min_value=0.0, max_value=math.pi),
    st.floats(min_value=0.0, max_value=2 * math.pi),
)
def test_witness_reproduces_qubit_points(theta, polar, azimuth):
    ket = np.array([math.cos(polar / 2), np.exp(1j * azimuth) * math.sin(polar / 2)])
    dA, dB = _variances(PureState.normalized(ket), theta, 2)
    point = VariancePoint(dA, dB)
    witness = witness_state(point, theta, 2)
    assert _variances(witness, theta, 2) == pytest.approx((dA, dB), abs=1e-9)


def test_witness_reaches_qudit_only_points():
    for point in (VariancePoint(0.0, 0.0), VariancePoint(0.02, 0.02)):
        witness = witness_state(point, PI_6, 3)
        assert witness.dim == 3
        assert _variances(witness, PI_6, 3) == pytest.approx((point.dA, point.dB), abs=1e-9)
    with pytest.raises(UnattainablePointError):
        witness_state(VariancePoint(0.0, 0.0), PI_6, 2)


def test_region_for_observables():
    sigma_x, _, sigma_z = pauli()
    spec, transform = region_for_observables(sigma_z, sigma_x)
    assert spec.theta == pytest.approx(math.pi / 4)
    assert spec.dim_class is DimClass.QUBIT
    assert (transform.scale_a, transform.scale_b) == pytest.approx((2.0, 2.0))
    assert transform.apply(VariancePoint(0.25, 0.25)) == pytest.approx((1.0, 1.0))

    a, b = canonical_pair(0.3, 3)
    spec, transform = region_for_observables(a, b)
    assert spec.theta == pytest.approx(0.3)
    assert spec.dim_class is DimClass.QUDIT

    spec, _ = region_for_observables(a, a)
    assert spec == RegionSpec(math.pi / 2, DimClass.QUBIT)

    with pytest.raises(OutOfAnalyticScopeError):
        region_for_observables(ComplexMatrix(np.diag([1.0, 1.0, 0.0])), b)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=0.25),
    st.floats(min_value=0.0, max_value=0.25),
    st.floats(min_value=0.01, max_value=math.pi / 2),
    st.floats(min_value=0.0, max_value=math.pi / 2),
)
def test_qudit_region_grows_with_the_angle(dA, dB, theta, step):
    point = VariancePoint(dA, dB)
    wider = min(theta + step, math.pi / 2)
    if qudit_membership(point, theta).margin >= 0.0:
        assert qudit_membership(point, wider).verdict is not Verdict.OUTSIDE
