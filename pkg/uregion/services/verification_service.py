"""Acceptance suite for the uncertainty-region toolkit, run as a domain service."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from uregion.config.loader import VerificationDefaults, load_verification_defaults
from uregion.pipeline.export import csv_bytes, panel_frame, region_frame, scatter_frame
from uregion.pipeline.jordan import (
    TwoDim,
    angle_multiset,
    jordan_decompose,
    reconstruction_residual,
    unitarity_residual,
)
from uregion.pipeline.photonics import default_plan, run_experiment
from uregion.pipeline.qcore import ComplexMatrix, Projector, UncertaintyRegionError
from uregion.pipeline.regions import (
    INTERIOR,
    OUTSIDE,
    DimClass,
    VariancePoint,
    alpha_feasible,
    classify_grid,
    classify_points,
)
from uregion.pipeline.sampling import (
    SeededRng,
    StateKind,
    haar_pure_batch,
    haar_unitary,
    oracle_region,
    random_projector,
    sample_scatter,
    sic_variance_points,
)
from uregion.pipeline.wavepacket import (
    GaussianPacket,
    analytic_moments,
    quadrature_moments,
    solve_packet_for,
    spreads,
)

logger = logging.getLogger(__name__)

QUBIT_ANGLES = (math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3)
ALPHA_ANGLES = (math.pi / 12, math.pi / 6, math.pi / 4)
FULL_BOX_ANGLE = math.pi / 3
COVERAGE_MARGIN = 1.0 / 200.0
COVERAGE_TARGET = 0.99
ALPHA_MARGIN = 1e-6
JORDAN_RESIDUAL_TOL = 1e-9
UNITARITY_TOL = 1e-10
ANGLE_INVARIANCE_TOL = 1e-9
EXPERIMENT_TARGET = 0.99
EQUALITY_TARGET = 0.005
SIC_SUM = 2.0 / 3.0
SIC_SUM_TOL = 1e-12
SIC_DISTANCE = 0.01
PRODUCT_RTOL = 1e-12
SOLVE_RTOL = 1e-9
QUADRATURE_RTOL = 1e-6
DETERMINISM_THREADS = (1, 8)
DETERMINISM_CHUNK = 1024
DETERMINISM_SHOTS = 2_000
DETERMINISM_STATES = 8
MIN_RESOLUTION = 20

CRITERIA = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10")


class VerificationError(UncertaintyRegionError, ValueError):
    """Raised when the verification request itself is invalid."""


@dataclass(slots=True)
class VerificationRequest:
    """Input parameters for a verification run."""

    seed: int = 0
    threads: int = 1
    scale: float = 1.0
    criteria: Optional[Sequence[str]] = None


@dataclass(slots=True)
class CriterionReport:
    criterion_id: str
    passed: bool
    measured: Optional[float]
    tolerance: float
    detail: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "criterion-id": self.criterion_id,
            "pass": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }
        if self.error is not None:
            payload["error"] = self.error
        return payload


@dataclass(slots=True)
class VerificationResult:
    """Result payload returned by :class:`VerificationService`."""

    criteria: List[CriterionReport]
    passed: bool

    def to_json(self) -> Dict[str, Any]:
        return {"pass": self.passed, "criteria": [report.to_json() for report in self.criteria]}


class VerificationService:
    """Runs every acceptance criterion and collects one report per criterion.

    Sample counts come from :class:`VerificationDefaults`; ``scale`` shrinks them
    (grid resolutions shrink with ``sqrt(scale)`` so oracle sample counts stay
    above ``resolution**2``). Reports carry no timings so identical requests
    serialize to identical bytes.
    """

    def __init__(self, defaults: Optional[VerificationDefaults] = None) -> None:
        self._defaults = defaults or load_verification_defaults()

    def run(self, request: VerificationRequest) -> VerificationResult:
        if not 0.0 < request.scale <= 1.0:
            raise VerificationError(f"scale must be in (0, 1]: {request.scale!r}")
        if request.threads < 1:
            raise VerificationError("threads must be at least 1")
        selected = list(request.criteria) if request.criteria else list(CRITERIA)
        unknown = [name for name in selected if name not in CRITERIA]
        if unknown:
            raise VerificationError(f"Unknown criteria: {', '.join(unknown)}")

        checks: Dict[str, Callable[[VerificationRequest], CriterionReport]] = {
            "A1": self._qubit_soundness,
            "A2": self._qubit_completeness,
            "A3": self._qudit_region,
            "A4": self._alpha_consistency,
            "A5": self._jordan,
            "A6": self._experiment,
            "A7": self._pure_mixed_equality,
            "A8": self._sic_counterexample,
            "A9": self._wavepacket,
            "A10": self._determinism,
        }
        reports: List[CriterionReport] = []
        for criterion_id in CRITERIA:
            if criterion_id not in selected:
                continue
            try:
                report = checks[criterion_id](request)
            except (UncertaintyRegionError, FloatingPointError, np.linalg.LinAlgError) as exc:
                logger.exception("%s raised during verification", criterion_id)
                report = CriterionReport(criterion_id, False, None, 0.0, error=str(exc))
            logger.info(
                "%s: pass=%s measured=%s tolerance=%s",
                report.criterion_id,
                report.passed,
                report.measured,
                report.tolerance,
            )
            reports.append(report)
        return VerificationResult(criteria=reports, passed=all(report.passed for report in reports))

    # ------------------------------------------------------------------
    # Sizing helpers

    @staticmethod
    def _count(value: int, request: VerificationRequest, minimum: int = 1) -> int:
        return max(minimum, int(round(value * request.scale)))

    @staticmethod
    def _resolution(value: int, request: VerificationRequest) -> int:
        return max(MIN_RESOLUTION, int(round(value * math.sqrt(request.scale))))

    @staticmethod
    def _rng(request: VerificationRequest, criterion: int) -> SeededRng:
        return SeededRng(request.seed, stream=100 + criterion)

    # ------------------------------------------------------------------
    # Region criteria

    def _soundness(self, request: VerificationRequest, d: int, stream: int) -> Dict[str, Any]:
        n = self._count(self._defaults.soundness_samples, request)
        rng = self._rng(request, stream)
        dim_class = DimClass.QUBIT if d == 2 else DimClass.QUDIT
        outside: Dict[str, int] = {}
        for index, theta in enumerate(QUBIT_ANGLES):
            count = 0
            for offset, kind in enumerate((StateKind.PURE, StateKind.MIXED)):
                points = sample_scatter(
                    theta, d, n, kind, rng.child(2 * index + offset), threads=request.threads
                )
                verdicts, _, _ = classify_points(points[:, 0], points[:, 1], theta, dim_class)
                count += int(np.count_nonzero(verdicts == OUTSIDE))
            outside[f"{theta:.6f}"] = count
        return {"samples_per_kind": n, "outside": outside}

    def _coverage(self, request: VerificationRequest, d: int, stream: int) -> Dict[str, float]:
        resolution = self._resolution(self._defaults.oracle_resolution, request)
        samples = max(resolution * resolution, self._count(self._defaults.oracle_samples, request))
        rng = self._rng(request, stream)
        dim_class = DimClass.QUBIT if d == 2 else DimClass.QUDIT
        coverage: Dict[str, float] = {}
        for index, theta in enumerate(QUBIT_ANGLES):
            grid = oracle_region(
                theta, d, samples, resolution, rng.child(index), kind="both", threads=request.threads
            )
            analytic = classify_grid(theta, dim_class, resolution)
            mask = (analytic.verdicts == INTERIOR) & (analytic.margins > COVERAGE_MARGIN)
            covered = grid.cells.ravel()[mask]
            coverage[f"{theta:.6f}"] = float(covered.mean()) if covered.size else 1.0
        return coverage

    def _qubit_soundness(self, request: VerificationRequest) -> CriterionReport:
        detail = self._soundness(request, 2, 1)
        worst = max(detail["outside"].values())
        return CriterionReport("A1", worst == 0, float(worst), 0.0, detail)

    def _qubit_completeness(self, request: VerificationRequest) -> CriterionReport:
        coverage = self._coverage(request, 2, 2)
        worst = min(coverage.values())
        return CriterionReport(
            "A2", worst >= COVERAGE_TARGET, worst, COVERAGE_TARGET, {"coverage": coverage}
        )

    def _qudit_region(self, request: VerificationRequest) -> CriterionReport:
        soundness = self._soundness(request, 3, 3)
        coverage = self._coverage(request, 3, 4)
        resolution = self._resolution(self._defaults.oracle_resolution, request)
        full_box = classify_grid(FULL_BOX_ANGLE, DimClass.QUDIT, resolution)
        box_outside = int(np.count_nonzero(full_box.verdicts == OUTSIDE))
        worst_outside = max(soundness["outside"].values())
        worst_coverage = min(coverage.values())
        passed = worst_outside == 0 and worst_coverage >= COVERAGE_TARGET and box_outside == 0
        detail = {**soundness, "coverage": coverage, "full_box_outside": box_outside}
        return CriterionReport("A3", passed, worst_coverage, COVERAGE_TARGET, detail)

    def _alpha_consistency(self, request: VerificationRequest) -> CriterionReport:
        resolution = self._resolution(self._defaults.alpha_resolution, request)
        mismatches: Dict[str, int] = {}
        for theta in ALPHA_ANGLES:
            grid = classify_grid(theta, DimClass.QUDIT, resolution)
            checked = np.abs(grid.margins) > ALPHA_MARGIN
            count = 0
            for (d_a, d_b), verdict in zip(grid.centers[checked], grid.verdicts[checked]):
                feasible = alpha_feasible(VariancePoint(float(d_a), float(d_b)), theta).feasible
                if feasible != (int(verdict) != OUTSIDE):
                    count += 1
            mismatches[f"{theta:.6f}"] = count
        worst = max(mismatches.values())
        detail = {"resolution": resolution, "mismatches": mismatches}
        return CriterionReport("A4", worst == 0, float(worst), 0.0, detail)

    # ------------------------------------------------------------------
    # Jordan decomposition

    def _jordan(self, request: VerificationRequest) -> CriterionReport:
        pairs = self._count(self._defaults.jordan_pairs, request, minimum=10)
        generator = self._rng(request, 5).generator()
        worst_reconstruction = 0.0
        worst_unitarity = 0.0
        worst_invariance = 0.0
        bad_angles = 0
        for _ in range(pairs):
            d = int(generator.integers(2, self._defaults.jordan_max_dim + 1))
            p = random_projector(d, int(generator.integers(1, d)), generator)
            q = random_projector(d, int(generator.integers(1, d)), generator)
            decomposition = jordan_decompose(p, q)
            worst_reconstruction = max(
                worst_reconstruction, reconstruction_residual(decomposition, p, q)
            )
            worst_unitarity = max(worst_unitarity, unitarity_residual(decomposition))
            angles = angle_multiset(
                [block.theta for block in decomposition.blocks if isinstance(block, TwoDim)]
            )
            bad_angles += int(np.count_nonzero((angles <= 0.0) | (angles > math.pi / 2 + 1e-12)))

            unitary = haar_unitary(d, generator)
            rotated = angle_multiset(
                [
                    block.theta
                    for block in jordan_decompose(
                        _conjugate(p, unitary), _conjugate(q, unitary)
                    ).blocks
                    if isinstance(block, TwoDim)
                ]
            )
            if rotated.shape != angles.shape:
                worst_invariance = math.inf
            elif angles.size:
                worst_invariance = max(worst_invariance, float(np.max(np.abs(rotated - angles))))
        passed = (
            worst_reconstruction <= JORDAN_RESIDUAL_TOL
            and worst_unitarity <= UNITARITY_TOL
            and bad_angles == 0
            and worst_invariance <= ANGLE_INVARIANCE_TOL
        )
        detail = {
            "pairs": pairs,
            "reconstruction": worst_reconstruction,
            "unitarity": worst_unitarity,
            "angles_out_of_range": bad_angles,
            "invariance": worst_invariance if math.isfinite(worst_invariance) else None,
        }
        return CriterionReport("A5", passed, worst_reconstruction, JORDAN_RESIDUAL_TOL, detail)

    # ------------------------------------------------------------------
    # Photonic experiment

    def _experiment(self, request: VerificationRequest) -> CriterionReport:
        plan = default_plan(
            seed=request.seed,
            generic=self._count(300, request, minimum=8),
            boundary=self._count(100, request, minimum=4),
        )
        dataset = run_experiment(plan, threads=request.threads)
        points = dataset.points
        inside = {
            str(dim_class): float(group["inflated_ok"].mean())
            for dim_class, group in points.groupby("dim_class", sort=True)
        }
        boundary = points[(points["dim_class"] == "qubit") & (points["family"] == "boundary")]
        on_ellipse = float(boundary["on_ellipse"].astype(bool).mean()) if len(boundary) else 1.0
        worst = min(*inside.values(), on_ellipse)
        passed = set(inside) == {"qubit", "qutrit"} and worst >= EXPERIMENT_TARGET
        detail = {
            "states": len(plan.states),
            "points": int(len(points)),
            "inflated_inside": inside,
            "boundary_on_ellipse": on_ellipse,
        }
        return CriterionReport("A6", passed, worst, EXPERIMENT_TARGET, detail)

    # ------------------------------------------------------------------
    # Pure versus mixed, SIC counterexample

    def _pure_mixed_equality(self, request: VerificationRequest) -> CriterionReport:
        resolution = self._resolution(self._defaults.equality_resolution, request)
        samples = max(resolution * resolution, self._count(self._defaults.equality_samples, request))
        rng = self._rng(request, 7)
        differences: Dict[str, float] = {}
        for index, theta in enumerate(QUBIT_ANGLES):
            pure = oracle_region(
                theta, 2, samples, resolution, rng.child(2 * index), "pure", request.threads
            )
            mixed = oracle_region(
                theta, 2, samples, resolution, rng.child(2 * index + 1), "mixed", request.threads
            )
            differences[f"{theta:.6f}"] = float(np.mean(pure.cells != mixed.cells))
        worst = max(differences.values())
        detail = {"resolution": resolution, "differences": differences}
        return CriterionReport("A7", worst < EQUALITY_TARGET, worst, EQUALITY_TARGET, detail)

    def _sic_counterexample(self, request: VerificationRequest) -> CriterionReport:
        n = self._count(self._defaults.sic_samples, request)
        kets = haar_pure_batch(2, n, self._rng(request, 8))
        variances = sic_variance_points(kets)
        sum_error = float(np.max(np.abs(variances.sum(axis=1) - SIC_SUM)))
        maximally_mixed = sic_variance_points(np.eye(2, dtype=complex)[np.newaxis] / 2.0)[0]
        center_error = float(np.max(np.abs(maximally_mixed - 0.25)))
        distance = float(np.min(np.linalg.norm(variances - 0.25, axis=1)))
        passed = sum_error <= SIC_SUM_TOL and center_error <= SIC_SUM_TOL and distance > SIC_DISTANCE
        detail = {"samples": n, "center_error": center_error, "min_distance": distance}
        return CriterionReport("A8", passed, sum_error, SIC_SUM_TOL, detail)

    # ------------------------------------------------------------------
    # Wave packets

    def _wavepacket(self, request: VerificationRequest) -> CriterionReport:
        n = self._count(self._defaults.packet_samples, request)
        generator = self._rng(request, 9).generator()

        worst_product = 0.0
        worst_equality = 0.0
        for _ in range(n):
            hbar = float(generator.uniform(0.5, 2.0))
            packet = GaussianPacket(
                a=float(np.exp(generator.uniform(-2.0, 2.0))),
                k0=float(generator.uniform(-3.0, 3.0)),
                m=float(generator.uniform(0.5, 2.0)),
                hbar=hbar,
                t=float(generator.uniform(0.0, 5.0)),
            )
            delta_x, delta_p = spreads(packet)
            worst_product = max(worst_product, (hbar / 2.0 - delta_x * delta_p) / hbar)
            at_rest = GaussianPacket(a=packet.a, k0=packet.k0, m=packet.m, hbar=hbar, t=0.0)
            rest_x, rest_p = spreads(at_rest)
            worst_equality = max(worst_equality, abs(rest_x * rest_p - hbar / 2.0) / hbar)

        worst_solve = 0.0
        for _ in range(n):
            hbar = float(generator.uniform(0.5, 2.0))
            y = float(np.exp(generator.uniform(-1.5, 1.5)))
            x = hbar / (2.0 * y) * (1.0 + float(generator.uniform(0.0, 3.0)))
            solved = spreads(solve_packet_for(x, y, m=float(generator.uniform(0.5, 2.0)), hbar=hbar))
            worst_solve = max(worst_solve, abs(solved[0] - x) / x, abs(solved[1] - y) / y)

        worst_quadrature = 0.0
        for _ in range(self._defaults.quadrature_packets):
            packet = GaussianPacket(
                a=float(generator.uniform(0.5, 2.0)),
                k0=float(generator.uniform(-2.0, 2.0)),
                t=float(generator.uniform(0.0, 3.0)),
            )
            worst_quadrature = max(worst_quadrature, _moment_error(packet))

        passed = (
            worst_product <= PRODUCT_RTOL
            and worst_equality <= PRODUCT_RTOL
            and worst_solve <= SOLVE_RTOL
            and worst_quadrature <= QUADRATURE_RTOL
        )
        detail = {
            "packets": n,
            "product_deficit": worst_product,
            "rest_equality": worst_equality,
            "solve_error": worst_solve,
            "quadrature_error": worst_quadrature,
        }
        return CriterionReport("A9", passed, worst_quadrature, QUADRATURE_RTOL, detail)

    # ------------------------------------------------------------------
    # Determinism

    def _determinism(self, request: VerificationRequest) -> CriterionReport:
        n = self._count(self._defaults.determinism_samples, request, minimum=4 * DETERMINISM_CHUNK)
        resolution = self._resolution(self._defaults.oracle_resolution, request)
        plan = default_plan(
            seed=request.seed,
            shots=DETERMINISM_SHOTS,
            repeats=1,
            generic=DETERMINISM_STATES,
            boundary=DETERMINISM_STATES // 2,
        )
        runs: List[Dict[str, bytes]] = []
        for threads in DETERMINISM_THREADS:
            points = sample_scatter(
                math.pi / 6,
                3,
                n,
                StateKind.MIXED,
                self._rng(request, 10),
                threads=threads,
                chunk_size=DETERMINISM_CHUNK,
            )
            payloads = {
                "sample": csv_bytes(scatter_frame(points, StateKind.MIXED.value)),
                "region": csv_bytes(
                    region_frame(classify_grid(math.pi / 6, DimClass.QUDIT, resolution))
                ),
            }
            dataset = run_experiment(plan, threads=threads)
            payloads["simulate"] = csv_bytes(dataset.points)
            for pair, dim_class, _ in dataset.panels():
                payloads[f"pair_{pair}_{dim_class}"] = csv_bytes(
                    panel_frame(dataset.panel(pair, dim_class))
                )
            runs.append(payloads)
        differing = sorted(
            name for name in runs[0] if any(run.get(name) != runs[0][name] for run in runs[1:])
        )
        identical = not differing and all(set(run) == set(runs[0]) for run in runs)
        detail = {
            "samples": n,
            "threads": list(DETERMINISM_THREADS),
            "outputs": sorted(runs[0]),
            "differing": differing,
        }
        return CriterionReport("A10", identical, float(len(differing)), 0.0, detail)


def _conjugate(projector: Projector, unitary: np.ndarray) -> Projector:
    matrix = unitary @ projector.entries @ unitary.conj().T
    return Projector(ComplexMatrix((matrix + matrix.conj().T) / 2), projector.rank)


def _moment_error(packet: GaussianPacket) -> float:
    """Largest relative deviation between quadrature and closed-form moments."""
    numeric = quadrature_moments(packet)
    exact = analytic_moments(packet)
    delta_x, delta_p = spreads(packet)
    references = {
        "x_mean": delta_x,
        "x_second": delta_x * delta_x,
        "p_mean": delta_p,
        "p_second": delta_p * delta_p,
    }
    return max(
        abs(numeric[key] - exact[key]) / max(abs(exact[key]), references[key]) for key in exact
    )


__all__ = [
    "CRITERIA",
    "CriterionReport",
    "VerificationError",
    "VerificationRequest",
    "VerificationResult",
    "VerificationService",
]
