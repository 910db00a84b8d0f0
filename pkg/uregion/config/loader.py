"""設定ファイルおよび環境変数を読み込むユーティリティ。"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore

from dotenv import load_dotenv

ROOT_DIR = Path(__file__).resolve().parents[1]
ENV_PATH_DEFAULT = ROOT_DIR / ".env.local"
DEFAULTS_PATH = ROOT_DIR / "config" / "defaults.example.toml"


def load_env(dotenv_path: Path | None = None) -> None:
    """`.env` または `.env.local` を読み込む。"""
    if dotenv_path is None:
        dotenv_path = ENV_PATH_DEFAULT
    if dotenv_path.exists():
        load_dotenv(dotenv_path)


def _read_toml(path: Path) -> Dict[str, Any]:
    with path.open("rb") as f:
        return tomllib.load(f)


def _load_section(toml_path: Path | None, section: str) -> Dict[str, Any]:
    if toml_path is None:
        toml_path = DEFAULTS_PATH
    if not toml_path.exists():
        return {}
    return dict(_read_toml(toml_path).get(section, {}))


@dataclass
class RunDefaults:
    seed: int
    threads: int
    tolerance: float
    resolution: int
    chunk_size: int
    boundary_points: int
    log_level: str


@dataclass
class ExperimentDefaults:
    settings: Tuple[float, ...]
    shots: int
    repeats: int
    generic_states: int
    boundary_states: int
    angle_jitter: float
    visibility: float


@dataclass
class VerificationDefaults:
    soundness_samples: int
    oracle_samples: int
    oracle_resolution: int
    alpha_resolution: int
    jordan_pairs: int
    jordan_max_dim: int
    equality_resolution: int
    equality_samples: int
    sic_samples: int
    packet_samples: int
    quadrature_packets: int
    determinism_samples: int


def load_run_defaults(
    toml_path: Path | None = None,
    dotenv_path: Path | None = None,
) -> RunDefaults:
    """環境変数と設定ファイルから実行時の既定値を組み立てる。"""
    load_env(dotenv_path)
    run = _load_section(toml_path, "run")

    defaults = RunDefaults(
        seed=int(os.getenv("UREGION_SEED", run.get("seed", 0))),
        threads=int(os.getenv("UREGION_THREADS", run.get("threads", 1))),
        tolerance=float(run.get("tolerance", 1e-9)),
        resolution=int(os.getenv("UREGION_RESOLUTION", run.get("resolution", 400))),
        chunk_size=int(run.get("chunk_size", 1 << 16)),
        boundary_points=int(run.get("boundary_points", 720)),
        log_level=str(os.getenv("UREGION_LOG_LEVEL", run.get("log_level", "INFO"))).upper(),
    )
    if not 0 <= defaults.seed < 2**64:
        raise ValueError(f"seed は 64bit 符号なし整数で指定してください: {defaults.seed}")
    if defaults.threads < 1 or defaults.resolution < 1 or defaults.chunk_size < 1:
        raise ValueError("threads / resolution / chunk_size は 1 以上で指定してください")
    return defaults


def load_experiment_defaults(
    toml_path: Path | None = None,
    dotenv_path: Path | None = None,
) -> ExperimentDefaults:
    """光学実験シミュレーションの既定値。"""
    load_env(dotenv_path)
    experiment = _load_section(toml_path, "experiment")
    perturbation = experiment.get("perturbation", {})

    settings = experiment.get("settings_pi")
    if settings is None:
        values = (0.0, 5.0 * math.pi / 72.0, math.pi / 12.0, math.pi / 8.0)
    else:
        values = tuple(float(value) * math.pi for value in settings)

    return ExperimentDefaults(
        settings=values,
        shots=int(os.getenv("UREGION_SHOTS", experiment.get("shots", 45_000))),
        repeats=int(os.getenv("UREGION_REPEATS", experiment.get("repeats", 5))),
        generic_states=int(experiment.get("generic_states", 300)),
        boundary_states=int(experiment.get("boundary_states", 100)),
        angle_jitter=float(perturbation.get("angle_jitter", 0.0)),
        visibility=float(perturbation.get("visibility", 1.0)),
    )


def load_verification_defaults(toml_path: Path | None = None) -> VerificationDefaults:
    """受け入れ検証の各項目で使うサンプル数。"""
    verification = _load_section(toml_path, "verification")
    return VerificationDefaults(
        soundness_samples=int(verification.get("soundness_samples", 100_000)),
        oracle_samples=int(verification.get("oracle_samples", 200_000)),
        oracle_resolution=int(verification.get("oracle_resolution", 400)),
        alpha_resolution=int(verification.get("alpha_resolution", 200)),
        jordan_pairs=int(verification.get("jordan_pairs", 1_000)),
        jordan_max_dim=int(verification.get("jordan_max_dim", 8)),
        equality_resolution=int(verification.get("equality_resolution", 200)),
        equality_samples=int(verification.get("equality_samples", 100_000)),
        sic_samples=int(verification.get("sic_samples", 10_000)),
        packet_samples=int(verification.get("packet_samples", 10_000)),
        quadrature_packets=int(verification.get("quadrature_packets", 20)),
        determinism_samples=int(verification.get("determinism_samples", 20_000)),
    )
