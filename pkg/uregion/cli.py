#!/usr/bin/env python3
"""不確定性領域ツールキットのコマンドライン入口。

サブコマンド: region, sample, jordan, wavepacket, simulate, verify
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from uregion.config.loader import (
    RunDefaults,
    load_experiment_defaults,
    load_run_defaults,
    load_verification_defaults,
)
from uregion.pipeline.export import (
    atomic_write_bytes,
    csv_bytes,
    experiment_svg,
    json_bytes,
    panel_frame,
    polyline_payload,
    region_frame,
    region_svg,
    scatter_frame,
    write_csv,
    write_json,
    write_svg,
)
from uregion.pipeline.jordan import (
    TwoDim,
    block_forms,
    decomposition_to_json,
    jordan_decompose,
    reconstruction_residual,
)
from uregion.pipeline.photonics import (
    ExperimentPlan,
    Perturbation,
    default_plan,
    plan_from_json,
    plan_to_json,
    run_experiment,
)
from uregion.pipeline.qcore import (
    Projector,
    UncertaintyRegionError,
    matrix_from_json,
    matrix_to_json,
)
from uregion.pipeline.regions import (
    BOUNDARY,
    INTERIOR,
    OUTSIDE,
    DimClass,
    RegionSpec,
    boundary_polyline,
    classify_grid,
    region_for_observables,
)
from uregion.pipeline.sampling import SeededRng, StateKind, sample_scatter
from uregion.pipeline.wavepacket import (
    GaussianPacket,
    analytic_moments,
    quadrature_moments,
    solve_packet_for,
    spreads,
    xp_membership,
    xp_sweep,
)
from uregion.services.verification_service import (
    CRITERIA,
    VerificationRequest,
    VerificationService,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# ----------------------------------------------------------------------
# 引数の型


def positive_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"整数で指定してください: {value}") from exc
    if parsed < 1:
        raise argparse.ArgumentTypeError(f"1 以上で指定してください: {value}")
    return parsed


def seed_value(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed は整数で指定してください: {value}") from exc
    if not 0 <= parsed < 2**64:
        raise argparse.ArgumentTypeError(f"seed は 64bit 符号なし整数で指定してください: {value}")
    return parsed


def scale_value(value: str) -> float:
    parsed = float(value)
    if not 0.0 < parsed <= 1.0:
        raise argparse.ArgumentTypeError(f"scale は (0, 1] で指定してください: {value}")
    return parsed


def float_pair(value: str) -> Tuple[float, float]:
    """`x,y` 形式の 2 つの実数。"""
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"'x,y' の形式で指定してください: {value}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"実数で指定してください: {value}") from exc


def float_list(value: str) -> List[float]:
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"カンマ区切りの実数で指定してください: {value}") from exc


def criteria_list(value: str) -> List[str]:
    names = [item.strip().upper() for item in value.split(",") if item.strip()]
    unknown = [name for name in names if name not in CRITERIA]
    if unknown:
        raise argparse.ArgumentTypeError(f"未知の項目です: {', '.join(unknown)}")
    return names


# ----------------------------------------------------------------------
# 共通処理


def _angle(args: argparse.Namespace, value: float) -> float:
    return math.radians(value) if args.degrees else value


def _run_defaults(args: argparse.Namespace) -> RunDefaults:
    return load_run_defaults(toml_path=args.config)


def _seed(args: argparse.Namespace, defaults: RunDefaults) -> int:
    return defaults.seed if args.seed is None else args.seed


def _threads(args: argparse.Namespace, defaults: RunDefaults) -> int:
    return defaults.threads if args.threads is None else args.threads


def _emit(args: argparse.Namespace, data: bytes, default_name: str) -> None:
    """--out、--out-dir、標準出力の順に出力先を決める。"""
    if args.out is not None:
        atomic_write_bytes(args.out, data)
        logger.info("wrote %s", args.out)
    elif args.out_dir is not None:
        target = Path(args.out_dir) / default_name
        atomic_write_bytes(target, data)
        logger.info("wrote %s", target)
    else:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()


def _read_json(path: Path) -> Any:
    with Path(path).open("r", encoding="utf-8") as handle:
        return json.load(handle)


# ----------------------------------------------------------------------
# region


def cmd_region(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    defaults = _run_defaults(args)
    resolution = args.grid or defaults.resolution
    if args.a is not None or args.b is not None:
        if args.a is None or args.b is None:
            parser.error("--a と --b は両方指定してください")
        spec, transform = region_for_observables(
            matrix_from_json(_read_json(args.a)), matrix_from_json(_read_json(args.b))
        )
        logger.info(
            "observables -> theta=%.12g dim_class=%s scale=(%g, %g)",
            spec.theta,
            spec.dim_class.value,
            transform.scale_a,
            transform.scale_b,
        )
    else:
        if args.theta is None:
            parser.error("--theta または --a/--b を指定してください")
        spec = RegionSpec(_angle(args, args.theta), DimClass(args.dim_class))

    fmt = args.format or "csv"
    if fmt == "svg":
        _emit(args, region_svg(spec, n_boundary=args.boundary_points), "region.svg")
        return EXIT_OK

    grid = classify_grid(spec.theta, spec.dim_class, resolution, defaults.tolerance)
    if fmt == "csv":
        _emit(args, csv_bytes(region_frame(grid)), "region.csv")
        return EXIT_OK

    payload = {
        "theta": spec.theta,
        "dim_class": spec.dim_class.value,
        "resolution": resolution,
        "counts": {
            "interior": int(np.count_nonzero(grid.verdicts == INTERIOR)),
            "boundary": int(np.count_nonzero(grid.verdicts == BOUNDARY)),
            "outside": int(np.count_nonzero(grid.verdicts == OUTSIDE)),
        },
        "boundary": polyline_payload(boundary_polyline(spec, args.boundary_points)),
    }
    _emit(args, json_bytes(payload), "region.json")
    return EXIT_OK


# ----------------------------------------------------------------------
# sample


def cmd_sample(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    defaults = _run_defaults(args)
    theta = _angle(args, args.theta)
    kind = StateKind(args.kind)
    points = sample_scatter(
        theta,
        args.dim,
        args.samples,
        kind,
        SeededRng(_seed(args, defaults)),
        threads=_threads(args, defaults),
        chunk_size=defaults.chunk_size,
    )
    fmt = args.format or "csv"
    if fmt == "csv":
        _emit(args, csv_bytes(scatter_frame(points, kind.value)), "sample.csv")
    elif fmt == "json":
        payload = {
            "theta": theta,
            "d": args.dim,
            "kind": kind.value,
            "points": points.tolist(),
        }
        _emit(args, json_bytes(payload), "sample.json")
    else:
        dim_class = DimClass.QUBIT if args.dim == 2 else DimClass.QUDIT
        _emit(args, region_svg(RegionSpec(theta, dim_class), scatter=points), "sample.svg")
    return EXIT_OK


# ----------------------------------------------------------------------
# jordan


def cmd_jordan(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.format not in (None, "json"):
        parser.error("jordan の出力は json のみです")
    p = Projector.from_matrix(matrix_from_json(_read_json(args.p)).entries)
    q = Projector.from_matrix(matrix_from_json(_read_json(args.q)).entries)
    decomposition = jordan_decompose(p, q)
    p_canon, q_canon = block_forms(decomposition)
    payload = decomposition_to_json(decomposition)
    payload["angles"] = [
        block.theta for block in decomposition.blocks if isinstance(block, TwoDim)
    ]
    payload["canonical"] = {"p": matrix_to_json(p_canon), "q": matrix_to_json(q_canon)}
    payload["residual"] = reconstruction_residual(decomposition, p, q)
    _emit(args, json_bytes(payload), "jordan.json")
    return EXIT_OK


# ----------------------------------------------------------------------
# wavepacket


def _packet_payload(packet: GaussianPacket, with_quadrature: bool) -> Dict[str, Any]:
    delta_x, delta_p = spreads(packet)
    payload: Dict[str, Any] = {
        "a": packet.a,
        "k0": packet.k0,
        "m": packet.m,
        "hbar": packet.hbar,
        "t": packet.t,
        "delta_x": delta_x,
        "delta_p": delta_p,
        "product": delta_x * delta_p,
        "in_region": xp_membership(delta_x, delta_p, packet.hbar),
        "moments": analytic_moments(packet),
    }
    if with_quadrature:
        payload["quadrature_moments"] = quadrature_moments(packet)
    return payload


def cmd_wavepacket(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.sweep:
        rows = xp_sweep(hbar=args.hbar, m=args.m, n=args.sweep_points)
        frame = pd.DataFrame(rows, columns=["a", "t", "delta_x", "delta_p"])
        if (args.format or "csv") == "csv":
            _emit(args, csv_bytes(frame), "xp_sweep.csv")
        else:
            _emit(args, json_bytes(frame.to_dict(orient="records")), "xp_sweep.json")
        return EXIT_OK

    if args.format not in (None, "json"):
        parser.error("--sweep 以外の wavepacket の出力は json のみです")
    if args.target is not None:
        x_target, y_target = args.target
        packet = solve_packet_for(x_target, y_target, m=args.m, hbar=args.hbar)
    else:
        if args.a is None:
            parser.error("--a、--target、--sweep のいずれかを指定してください")
        packet = GaussianPacket(a=args.a, k0=args.k0, m=args.m, hbar=args.hbar, t=args.t)
    _emit(args, json_bytes(_packet_payload(packet, args.quadrature)), "wavepacket.json")
    return EXIT_OK


# ----------------------------------------------------------------------
# simulate


def _build_plan(args: argparse.Namespace, parser: argparse.ArgumentParser, seed: int) -> ExperimentPlan:
    experiment = load_experiment_defaults(toml_path=args.config)
    if args.plan is not None:
        plan = plan_from_json(_read_json(args.plan))
        if args.shots is None and args.repeats is None:
            return plan
        return ExperimentPlan(
            states=plan.states,
            settings=plan.settings,
            shots=args.shots or plan.shots,
            repeats=args.repeats or plan.repeats,
            seed=plan.seed,
            pairs=plan.pairs,
            perturbation=plan.perturbation,
            generic_count=plan.generic_count,
            boundary_count=plan.boundary_count,
        )
    if not args.default_plan:
        parser.error("--plan または --default-plan を指定してください")
    settings = experiment.settings
    if args.settings:
        settings = tuple(_angle(args, value) for value in args.settings)
    return default_plan(
        seed=seed,
        shots=args.shots or experiment.shots,
        repeats=args.repeats or experiment.repeats,
        generic=experiment.generic_states,
        boundary=experiment.boundary_states,
        settings=settings,
        perturbation=Perturbation(experiment.angle_jitter, experiment.visibility),
    )


def _counts_frame(plan: ExperimentPlan, counts: Sequence[Sequence[Any]]) -> pd.DataFrame:
    rows = []
    for index, records in enumerate(counts):
        for position, record in enumerate(records):
            rows.append(
                {
                    "state-index": index,
                    "family": plan.states[index].family,
                    "setting": position,
                    "theta_2": plan.settings[position].theta_2,
                    "n0": record.n0,
                    "n1": record.n1,
                    "n2": record.n2,
                }
            )
    return pd.DataFrame(rows)


def _summary(points: pd.DataFrame) -> Dict[str, Any]:
    summary: Dict[str, Any] = {}
    for (pair, dim_class), group in points.groupby(["pair", "dim_class"], sort=True):
        boundary = group[group["family"] == "boundary"]
        summary[f"{pair}/{dim_class}"] = {
            "theta": float(group["theta"].iloc[0]),
            "points": int(len(group)),
            "inflated_inside": float(group["inflated_ok"].mean()),
            "strict_outside": int((group["verdict"] == "outside").sum()),
            "boundary_on_ellipse": (
                float(boundary["on_ellipse"].astype(bool).mean())
                if dim_class == "qubit" and len(boundary)
                else None
            ),
        }
    return summary


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    defaults = _run_defaults(args)
    plan = _build_plan(args, parser, _seed(args, defaults))
    dataset = run_experiment(plan, threads=_threads(args, defaults))

    if args.out_dir is None:
        fmt = args.format or "csv"
        if fmt == "svg":
            parser.error("simulate の SVG 出力には --out-dir が必要です")
        data = (
            csv_bytes(dataset.points)
            if fmt == "csv"
            else json_bytes(dataset.points.to_dict(orient="records"))
        )
        _emit(args, data, f"points.{fmt}")
        return EXIT_OK

    out_dir = Path(args.out_dir)
    write_json(plan_to_json(plan), out_dir / "plan.json")
    write_csv(dataset.points, out_dir / "points.csv")
    write_csv(_counts_frame(plan, dataset.counts), out_dir / "counts.csv")
    write_json(_summary(dataset.points), out_dir / "summary.json")
    for pair, dim_class, theta in dataset.panels():
        panel = dataset.panel(pair, dim_class)
        write_csv(panel_frame(panel), out_dir / f"pair_{pair}_{dim_class}.csv")
        spec = RegionSpec(theta, DimClass.QUBIT if dim_class == "qubit" else DimClass.QUDIT)
        svg = experiment_svg(panel, spec, f"{pair} {dim_class} θ = {theta:.6f}")
        write_svg(svg, out_dir / f"panel_{pair}_{dim_class}.svg")
    logger.info("simulate: wrote %d panels to %s", len(dataset.panels()), out_dir)
    return EXIT_OK


# ----------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.format not in (None, "json"):
        parser.error("verify の出力は json のみです")
    defaults = _run_defaults(args)
    service = VerificationService(load_verification_defaults(args.config))
    result = service.run(
        VerificationRequest(
            seed=_seed(args, defaults),
            threads=_threads(args, defaults),
            scale=args.scale,
            criteria=args.only,
        )
    )
    _emit(args, json_bytes(result.to_json()), "verify.json")
    failed = [report.criterion_id for report in result.criteria if not report.passed]
    if failed:
        logger.error("verification failed: %s", ", ".join(failed))
        return EXIT_FAILURE
    logger.info("verification passed: %d criteria", len(result.criteria))
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=seed_value, help="64bit 符号なし整数のシード")
    common.add_argument("--threads", type=positive_int, help="ワーカースレッド数")
    common.add_argument("--out", type=Path, help="出力ファイル (未指定なら標準出力)")
    common.add_argument("--out-dir", type=Path, help="出力ディレクトリ")
    common.add_argument("--format", choices=["csv", "json", "svg"], help="出力形式")
    common.add_argument("--degrees", action="store_true", help="角度を度で受け付ける")
    common.add_argument("--verbose", action="store_true", help="DEBUG ログを出力する")
    common.add_argument("--config", type=Path, help="既定値を読む TOML ファイル")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="uregion",
        description="射影の組に対する分散の不確定性領域を計算・検証する",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    region = subparsers.add_parser("region", parents=[common], help="解析領域のセル判定と境界")
    region.add_argument("--theta", type=float, help="Jordan 角 (ラジアン)")
    region.add_argument("--dim-class", choices=["qubit", "qudit"], default="qubit")
    region.add_argument("--grid", type=positive_int, help="グリッドの分割数")
    region.add_argument("--boundary-points", type=positive_int, default=720)
    region.add_argument("--a", type=Path, help="観測量 A の JSON 行列")
    region.add_argument("--b", type=Path, help="観測量 B の JSON 行列")
    region.set_defaults(handler=cmd_region)

    sample = subparsers.add_parser("sample", parents=[common], help="ランダム状態の散布点")
    sample.add_argument("--theta", type=float, required=True)
    sample.add_argument("--dim", type=positive_int, default=2, help="ヒルベルト空間の次元 d")
    sample.add_argument("--samples", type=int, default=10_000, help="サンプル数")
    kinds = sample.add_mutually_exclusive_group()
    for kind in StateKind:
        kinds.add_argument(
            f"--{kind.value}",
            dest="kind",
            action="store_const",
            const=kind.value,
            help=f"{kind.value} 状態をサンプルする",
        )
    sample.set_defaults(kind=StateKind.PURE.value, handler=cmd_sample)

    jordan = subparsers.add_parser("jordan", parents=[common], help="射影の組の Jordan 分解")
    jordan.add_argument("--p", type=Path, required=True, help="射影 P の JSON 行列")
    jordan.add_argument("--q", type=Path, required=True, help="射影 Q の JSON 行列")
    jordan.set_defaults(handler=cmd_jordan)

    wavepacket = subparsers.add_parser("wavepacket", parents=[common], help="ガウス波束の Δx, Δp")
    wavepacket.add_argument("--a", type=float, help="初期幅 a")
    wavepacket.add_argument("--k0", type=float, default=0.0)
    wavepacket.add_argument("--m", type=float, default=1.0)
    wavepacket.add_argument("--hbar", type=float, default=1.0)
    wavepacket.add_argument("--t", type=float, default=0.0)
    wavepacket.add_argument("--target", type=float_pair, help="目標の 'Δx,Δp'")
    wavepacket.add_argument("--quadrature", action="store_true", help="数値積分のモーメントも出力")
    wavepacket.add_argument("--sweep", action="store_true", help="(a, t) 格子の Δx, Δp を出力")
    wavepacket.add_argument("--sweep-points", type=positive_int, default=40)
    wavepacket.set_defaults(handler=cmd_wavepacket)

    simulate = subparsers.add_parser("simulate", parents=[common], help="光学実験の計数シミュレーション")
    simulate.add_argument("--plan", type=Path, help="実験計画の JSON ファイル")
    simulate.add_argument("--default-plan", action="store_true", help="既定の計画を使う")
    simulate.add_argument("--shots", type=positive_int, help="1 回あたりの計数")
    simulate.add_argument("--repeats", type=positive_int, help="繰り返し回数")
    simulate.add_argument("--settings", type=float_list, help="θ₂ の設定値 (カンマ区切り)")
    simulate.set_defaults(handler=cmd_simulate)

    verify = subparsers.add_parser("verify", parents=[common], help="受け入れ検証をすべて実行")
    verify.add_argument("--scale", type=scale_value, default=1.0, help="サンプル数の縮小率")
    verify.add_argument("--only", type=criteria_list, help="実行する項目 (例: A1,A5)")
    verify.set_defaults(handler=cmd_verify)
    return parser


def _configure_logging(verbose: bool, config: Optional[Path]) -> None:
    level_name = "DEBUG" if verbose else load_run_defaults(toml_path=config).log_level
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT, stream=sys.stderr
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    handler: Callable[[argparse.Namespace, argparse.ArgumentParser], int] = args.handler
    try:
        _configure_logging(args.verbose, args.config)
        return handler(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UncertaintyRegionError, OSError, json.JSONDecodeError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
