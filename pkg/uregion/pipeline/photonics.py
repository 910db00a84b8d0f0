"""光学実験 (qutrit の状態準備・波長板測定・3 ポート検出) の計数統計シミュレーション。"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .qcore import ComplexMatrix, Projector, PureState, UncertaintyRegionError, expectation
from .regions import (
    DimClass,
    VariancePoint,
    Verdict,
    classify_points,
    ellipse_branch_margins,
    membership,
    RegionSpec,
)
from .sampling import SeededRng, as_generator, haar_pure_batch

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS: Tuple[float, ...] = (0.0, 5.0 * math.pi / 72.0, math.pi / 12.0, math.pi / 8.0)
# 0 始まりの設定番号の組 (P1,P2), (P1,P3), (P1,P4), (P3,P4)
DEFAULT_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (2, 3))
DEFAULT_SHOTS = 45_000
DEFAULT_REPEATS = 5
DEFAULT_GENERIC = 300
DEFAULT_BOUNDARY = 100
PROBABILITY_TOL = 1e-9
SIGMA_FACTOR = 3.0
INFLATION_SAMPLES = 5


class ProbabilityConsistencyError(UncertaintyRegionError):
    """ポート確率の和が 1 にならない。"""


class PostSelectionError(UncertaintyRegionError, ValueError):
    """D0, D1 に 1 件も検出がない。"""


class PlanError(UncertaintyRegionError, ValueError):
    """実験計画が不正。"""


@dataclass(frozen=True)
class PrepConfig:
    theta_A: float
    theta_B: float
    phi_1: float = 0.0
    phi_2: float = 0.0
    family: str = "generic"

    def __post_init__(self) -> None:
        values = (self.theta_A, self.theta_B, self.phi_1, self.phi_2)
        if not all(math.isfinite(value) for value in values):
            raise PlanError(f"有限でない角度があります: {values}")


@dataclass(frozen=True)
class MeasConfig:
    theta_2: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta_2):
            raise PlanError(f"theta_2={self.theta_2!r} が有限ではありません")


@dataclass(frozen=True)
class CountRecord:
    n0: int
    n1: int
    n2: int

    def __post_init__(self) -> None:
        if min(self.n0, self.n1, self.n2) < 0:
            raise PlanError("計数は 0 以上です")

    @property
    def total(self) -> int:
        return self.n0 + self.n1 + self.n2

    def __add__(self, other: "CountRecord") -> "CountRecord":
        return CountRecord(self.n0 + other.n0, self.n1 + other.n1, self.n2 + other.n2)


@dataclass(frozen=True)
class Perturbation:
    """波長板角度の揺らぎ (ラジアン, 標準偏差) と可視度 V。既定では無効。"""

    angle_jitter: float = 0.0
    visibility: float = 1.0

    def __post_init__(self) -> None:
        if self.angle_jitter < 0:
            raise PlanError("angle_jitter は 0 以上で指定してください")
        if not 0.0 <= self.visibility <= 1.0:
            raise PlanError("visibility は [0, 1] で指定してください")

    @property
    def active(self) -> bool:
        return self.angle_jitter > 0 or self.visibility < 1.0


@dataclass(frozen=True)
class ExperimentPlan:
    states: Tuple[PrepConfig, ...]
    settings: Tuple[MeasConfig, ...] = tuple(MeasConfig(value) for value in DEFAULT_SETTINGS)
    shots: int = DEFAULT_SHOTS
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    pairs: Tuple[Tuple[int, int], ...] = DEFAULT_PAIRS
    perturbation: Perturbation = field(default_factory=Perturbation)
    generic_count: Optional[int] = None
    boundary_count: Optional[int] = None

    def __post_init__(self) -> None:
        if self.shots < 1 or self.repeats < 1:
            raise PlanError("shots, repeats は 1 以上で指定してください")
        if not self.states:
            raise PlanError("状態が 1 つもありません")
        for first, second in self.pairs:
            if not (0 <= first < len(self.settings) and 0 <= second < len(self.settings)):
                raise PlanError(f"設定番号 ({first}, {second}) が settings の範囲外です")
        families = [state.family for state in self.states]
        for name, declared in (("generic", self.generic_count), ("boundary", self.boundary_count)):
            if declared is not None and families.count(name) != declared:
                raise PlanError(
                    f"{name} の状態数 {families.count(name)} が宣言値 {declared} と一致しません"
                )


@dataclass
class ExperimentDataset:
    """run_experiment の結果。points は (組, 次元クラス, 状態) ごとの 1 行。"""

    plan: ExperimentPlan
    counts: List[List[CountRecord]]
    points: pd.DataFrame

    def panel(self, pair_label: str, dim_class: str) -> pd.DataFrame:
        mask = (self.points["pair"] == pair_label) & (self.points["dim_class"] == dim_class)
        return self.points.loc[mask].reset_index(drop=True)

    def panels(self) -> List[Tuple[str, str, float]]:
        keys = self.points[["pair", "dim_class", "theta"]].drop_duplicates()
        return [(str(row.pair), str(row.dim_class), float(row.theta)) for row in keys.itertuples()]


def prepare_state(cfg: PrepConfig) -> PureState:
    """e^{iφ₁}cosθ_A|0⟩ + e^{iφ₂}sinθ_A sinθ_B|1⟩ − sinθ_A cosθ_B|2⟩。"""
    amplitudes = np.array(
        [
            np.exp(1j * cfg.phi_1) * np.cos(cfg.theta_A),
            np.exp(1j * cfg.phi_2) * np.sin(cfg.theta_A) * np.sin(cfg.theta_B),
            -np.sin(cfg.theta_A) * np.cos(cfg.theta_B),
        ]
    )
    return PureState.normalized(amplitudes)


def measurement_unitary(theta_2: float) -> ComplexMatrix:
    cos_t, sin_t = math.cos(2 * theta_2), math.sin(2 * theta_2)
    return ComplexMatrix(np.array([[cos_t, sin_t, 0.0], [sin_t, -cos_t, 0.0], [0.0, 0.0, 1.0]]))


def port_projectors(theta_2: float) -> Tuple[Projector, Projector, Projector]:
    """D0, D1, D2 に対応する射影 (U の各行への射影)。"""
    rows = measurement_unitary(theta_2).entries
    return tuple(Projector.onto(rows[index]) for index in range(3))  # type: ignore[return-value]


def pair_angle(theta_2j: float, theta_2k: float) -> float:
    return 2.0 * (theta_2k - theta_2j)


def _perturbed_density(state: PureState, visibility: float) -> np.ndarray:
    density = np.outer(state.amplitudes, state.amplitudes.conj())
    if visibility < 1.0:
        density[0, 1] *= visibility
        density[1, 0] *= visibility
    return density


def port_probabilities(
    state: PureState,
    theta_2: float,
    perturbation: Optional[Perturbation] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """p_j = ⟨ψ|P_Dj|ψ⟩。揺らぎが有効なら θ₂ と可視度を乱す。"""
    perturbation = perturbation or Perturbation()
    angle = theta_2
    if perturbation.angle_jitter > 0:
        if rng is None:
            raise PlanError("angle_jitter を使う場合は rng が必要です")
        angle = theta_2 + float(rng.normal(0.0, perturbation.angle_jitter))
    projectors = port_projectors(angle)
    if perturbation.visibility < 1.0:
        density = _perturbed_density(state, perturbation.visibility)
        values = [float(np.trace(p.entries @ density).real) for p in projectors]
    else:
        values = [expectation(p, state) for p in projectors]
    probabilities = np.array(values)
    if abs(probabilities.sum() - 1.0) > PROBABILITY_TOL:
        raise ProbabilityConsistencyError(f"ポート確率の和が 1 ではありません: {probabilities.sum()!r}")
    return probabilities


def simulate_counts(
    state: PureState,
    theta_2: float,
    shots: int,
    rng: np.random.Generator | SeededRng,
    perturbation: Optional[Perturbation] = None,
) -> CountRecord:
    """多項分布による 3 ポートの計数。"""
    if shots < 1:
        raise PlanError("shots は 1 以上で指定してください")
    generator = as_generator(rng)
    probabilities = np.clip(port_probabilities(state, theta_2, perturbation, generator), 0.0, 1.0)
    probabilities = probabilities / probabilities.sum()
    n0, n1, n2 = (int(value) for value in generator.multinomial(shots, probabilities))
    return CountRecord(n0, n1, n2)


def empirical_point(counts_j: Tuple[int, int], counts_k: Tuple[int, int]) -> VariancePoint:
    """(n, N) の組から (p̂_A(1−p̂_A), p̂_B(1−p̂_B))。"""
    values = []
    for hits, total in (counts_j, counts_k):
        if total <= 0:
            raise PlanError("N は正の値である必要があります")
        estimate = hits / total
        values.append(estimate * (1.0 - estimate))
    return VariancePoint(values[0], values[1])


def postselect_qubit(counts: CountRecord) -> Tuple[int, int, int]:
    """D2 の検出を捨てて qubit の 2 値記録にする。"""
    kept = counts.n0 + counts.n1
    if kept == 0:
        raise PostSelectionError("D0, D1 の検出がありません (状態が qubit 部分空間と直交しています)")
    return counts.n0, counts.n1, kept


def variance_sigma(hits: int, total: int) -> float:
    """p̂(1−p̂) の標準誤差の近似。p̂ が 1/2 付近では 2 次の項を使う。"""
    estimate = hits / total
    sigma_p = math.sqrt(estimate * (1.0 - estimate) / total)
    return max(abs(1.0 - 2.0 * estimate) * sigma_p, sigma_p * sigma_p)


def _inflated_box(point: VariancePoint, sigma: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    spans = []
    for value, width in ((point.dA, sigma[0]), (point.dB, sigma[1])):
        lower = max(0.0, value - SIGMA_FACTOR * width)
        upper = min(0.25, value + SIGMA_FACTOR * width)
        spans.append(np.unique(np.append(np.linspace(lower, upper, INFLATION_SAMPLES), value)))
    grid_a, grid_b = np.meshgrid(spans[0], spans[1], indexing="ij")
    return grid_a.ravel(), grid_b.ravel()


def inflated_membership(
    point: VariancePoint, sigma: Tuple[float, float], theta: float, dim_class: DimClass | str
) -> bool:
    """3σ の箱の中に領域内の点が 1 つでもあれば True。"""
    grid_a, grid_b = _inflated_box(point, sigma)
    verdicts, _, _ = classify_points(grid_a, grid_b, theta, DimClass(dim_class))
    return bool(np.any(verdicts != 2))


def near_ellipse(point: VariancePoint, sigma: Tuple[float, float], theta: float) -> bool:
    """3σ の箱が楕円 (どちらかの枝) をまたぐか。"""
    grid_a, grid_b = _inflated_box(point, sigma)
    for branch in ellipse_branch_margins(grid_a, grid_b, theta):
        if float(branch.min()) <= 0.0 <= float(branch.max()):
            return True
    return False


def _prep_from_ket(ket: np.ndarray, family: str) -> PrepConfig:
    """状態ベクトルを大域位相を除いて PrepConfig の角度に直す。"""
    if abs(ket[2]) > 0:
        ket = ket * (-np.exp(-1j * np.angle(ket[2])))
    theta_a = float(np.arccos(np.clip(abs(ket[0]), 0.0, 1.0)))
    theta_b = float(np.arctan2(abs(ket[1]), abs(ket[2])))
    return PrepConfig(
        theta_A=theta_a,
        theta_B=theta_b,
        phi_1=float(np.angle(ket[0])),
        phi_2=float(np.angle(ket[1])),
        family=family,
    )


def generic_family(n: int, rng: np.random.Generator | SeededRng) -> List[PrepConfig]:
    """Haar ランダムな qutrit 状態。"""
    return [_prep_from_ket(ket, "generic") for ket in haar_pure_batch(3, n, rng)]


def boundary_family(n: int, rng: np.random.Generator | SeededRng) -> List[PrepConfig]:
    """|2⟩ が空で実振幅 (位相 0 または π) の状態。"""
    generator = as_generator(rng)
    thetas = generator.uniform(0.0, math.pi / 2, n)
    phases = generator.integers(0, 2, n) * math.pi
    return [
        PrepConfig(theta_A=float(t), theta_B=math.pi / 2, phi_1=0.0, phi_2=float(p), family="boundary")
        for t, p in zip(thetas, phases)
    ]


def default_plan(
    seed: int = 0,
    shots: int = DEFAULT_SHOTS,
    repeats: int = DEFAULT_REPEATS,
    generic: int = DEFAULT_GENERIC,
    boundary: int = DEFAULT_BOUNDARY,
    settings: Sequence[float] = DEFAULT_SETTINGS,
    perturbation: Optional[Perturbation] = None,
) -> ExperimentPlan:
    """ランダム状態 300 + 境界状態 100、4 設定、45000 計数 × 5 回。"""
    root = SeededRng(seed, stream=1)
    states = generic_family(generic, root.child(0)) + boundary_family(boundary, root.child(1))
    return ExperimentPlan(
        states=tuple(states),
        settings=tuple(MeasConfig(value) for value in settings),
        shots=shots,
        repeats=repeats,
        seed=seed,
        perturbation=perturbation or Perturbation(),
        generic_count=generic,
        boundary_count=boundary,
    )


def plan_to_json(plan: ExperimentPlan) -> Dict[str, Any]:
    return {
        "seed": plan.seed,
        "shots": plan.shots,
        "repeats": plan.repeats,
        "settings": [setting.theta_2 for setting in plan.settings],
        "pairs": [list(pair) for pair in plan.pairs],
        "perturbation": asdict(plan.perturbation),
        "generic_count": plan.generic_count,
        "boundary_count": plan.boundary_count,
        "states": [asdict(state) for state in plan.states],
    }


def plan_from_json(payload: Dict[str, Any]) -> ExperimentPlan:
    try:
        states = tuple(PrepConfig(**entry) for entry in payload["states"])
        settings = tuple(MeasConfig(float(value)) for value in payload.get("settings", DEFAULT_SETTINGS))
        pairs = tuple(tuple(int(v) for v in pair) for pair in payload.get("pairs", DEFAULT_PAIRS))
        perturbation = Perturbation(**payload.get("perturbation", {}))
        return ExperimentPlan(
            states=states,
            settings=settings,
            shots=int(payload.get("shots", DEFAULT_SHOTS)),
            repeats=int(payload.get("repeats", DEFAULT_REPEATS)),
            seed=int(payload.get("seed", 0)),
            pairs=pairs,  # type: ignore[arg-type]
            perturbation=perturbation,
            generic_count=payload.get("generic_count"),
            boundary_count=payload.get("boundary_count"),
        )
    except (KeyError, TypeError) as exc:
        raise PlanError(f"計画ファイルの形式が不正です: {exc}") from exc


def pair_label(pair: Tuple[int, int]) -> str:
    return f"P{pair[0] + 1}-P{pair[1] + 1}"


def _simulate_state(plan: ExperimentPlan, index: int) -> List[CountRecord]:
    """1 状態ぶんの計数。繰り返しは合算する。"""
    state = prepare_state(plan.states[index])
    generator = SeededRng(plan.seed, stream=2).child(index).generator()
    pooled = [CountRecord(0, 0, 0) for _ in plan.settings]
    for _ in range(plan.repeats):
        for position, setting in enumerate(plan.settings):
            record = simulate_counts(state, setting.theta_2, plan.shots, generator, plan.perturbation)
            pooled[position] = pooled[position] + record
    return pooled


def _point_rows(plan: ExperimentPlan, counts: List[List[CountRecord]]) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for pair in plan.pairs:
        first, second = pair
        theta = abs(pair_angle(plan.settings[first].theta_2, plan.settings[second].theta_2))
        label = pair_label(pair)
        for dim_class in (DimClass.QUDIT, DimClass.QUBIT):
            spec = RegionSpec(theta, dim_class)
            for index, records in enumerate(counts):
                family = plan.states[index].family
                if dim_class is DimClass.QUDIT:
                    hits_j, total_j = records[first].n0, records[first].total
                    hits_k, total_k = records[second].n0, records[second].total
                else:
                    try:
                        hits_j, _, total_j = postselect_qubit(records[first])
                        hits_k, _, total_k = postselect_qubit(records[second])
                    except PostSelectionError:
                        logger.warning("状態 %d は qubit 部分空間に検出がないため除外します", index)
                        continue
                point = empirical_point((hits_j, total_j), (hits_k, total_k))
                sigma = (variance_sigma(hits_j, total_j), variance_sigma(hits_k, total_k))
                on_ellipse: Optional[bool] = None
                if dim_class is DimClass.QUBIT and family == "boundary":
                    on_ellipse = near_ellipse(point, sigma, theta)
                rows.append(
                    {
                        "pair": label,
                        "theta": theta,
                        "dim_class": "qutrit" if dim_class is DimClass.QUDIT else "qubit",
                        "state_index": index,
                        "family": family,
                        "dA": point.dA,
                        "dB": point.dB,
                        "sigma_A": sigma[0],
                        "sigma_B": sigma[1],
                        "verdict": membership(spec, point).verdict.value,
                        "inflated_ok": inflated_membership(point, sigma, theta, dim_class),
                        "on_ellipse": on_ellipse,
                    }
                )
    return rows


def run_experiment(plan: ExperimentPlan, threads: int = 1) -> ExperimentDataset:
    """全状態 × 全設定の計数から、射影の組ごとの qutrit / qubit 散布点を作る。"""
    indices = range(len(plan.states))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            counts = list(executor.map(lambda index: _simulate_state(plan, index), indices))
    else:
        counts = [_simulate_state(plan, index) for index in indices]
    points = pd.DataFrame(_point_rows(plan, counts))
    logger.info(
        "run_experiment: states=%d settings=%d shots=%d repeats=%d points=%d",
        len(plan.states),
        len(plan.settings),
        plan.shots,
        plan.repeats,
        len(points),
    )
    return ExperimentDataset(plan=plan, counts=counts, points=points)


def ideal_points(plan: ExperimentPlan, pair: Tuple[int, int]) -> np.ndarray:
    """計数の代わりに厳密な確率を使った qutrit の散布点。"""
    rows = []
    for cfg in plan.states:
        state = prepare_state(cfg)
        values = []
        for setting_index in pair:
            probability = port_probabilities(state, plan.settings[setting_index].theta_2)[0]
            values.append(probability * (1.0 - probability))
        rows.append(values)
    return np.array(rows)


__all__ = [
    "CountRecord",
    "DEFAULT_PAIRS",
    "DEFAULT_SETTINGS",
    "ExperimentDataset",
    "ExperimentPlan",
    "MeasConfig",
    "Perturbation",
    "PlanError",
    "PostSelectionError",
    "PrepConfig",
    "ProbabilityConsistencyError",
    "boundary_family",
    "default_plan",
    "empirical_point",
    "generic_family",
    "ideal_points",
    "inflated_membership",
    "measurement_unitary",
    "near_ellipse",
    "pair_angle",
    "pair_label",
    "plan_from_json",
    "plan_to_json",
    "port_probabilities",
    "port_projectors",
    "postselect_qubit",
    "prepare_state",
    "run_experiment",
    "simulate_counts",
    "variance_sigma",
]
