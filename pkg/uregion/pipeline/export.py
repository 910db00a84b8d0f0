"""CSV / JSON / SVG の出力。ファイルは一時ファイルに書いてから置き換える。"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from io import BytesIO
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from .regions import GridClassification, RegionSpec, VariancePoint, boundary_polyline

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
SVG_SIZE_PX = 600
SVG_DPI = 72
SVG_HASH_SALT = "uregion"
BOUNDARY_POINTS = 720
# 辺の線が切れないための軸の余白
AXIS_PAD = 0.005
PANEL_COLUMNS = {
    "state_index": "state-index",
    "family": "family",
    "dA": "dA",
    "dB": "dB",
    "verdict": "verdict",
}

_SVG_RC = {
    "svg.hashsalt": SVG_HASH_SALT,
    "svg.fonttype": "none",
    "path.simplify": False,
}


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """同じディレクトリの一時ファイルに書いて os.replace で置き換える。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug("wrote %s (%d bytes)", path, len(data))
    return path


def csv_bytes(frame: pd.DataFrame) -> bytes:
    """ヘッダ付き、'.' 小数点、実数は 17 桁。"""
    text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return text.encode("utf-8")


def json_bytes(payload: Any) -> bytes:
    text = json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True, allow_nan=False)
    return (text + "\n").encode("utf-8")


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    return atomic_write_bytes(path, csv_bytes(frame))


def write_json(payload: Any, path: Path) -> Path:
    return atomic_write_bytes(path, json_bytes(payload))


def write_svg(svg: bytes, path: Path) -> Path:
    return atomic_write_bytes(path, svg)


def region_frame(grid: GridClassification) -> pd.DataFrame:
    """セル中心ごとの (dA, dB, verdict, part)。ΔA が外側のループ。"""
    return pd.DataFrame(
        {
            "dA": grid.centers[:, 0],
            "dB": grid.centers[:, 1],
            "verdict": grid.verdict_labels(),
            "part": grid.part_labels(),
        }
    )


def scatter_frame(points: np.ndarray, kinds: Sequence[str] | str) -> pd.DataFrame:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if isinstance(kinds, str):
        kinds = [kinds] * len(points)
    return pd.DataFrame({"dA": points[:, 0], "dB": points[:, 1], "state-kind": list(kinds)})


def panel_frame(panel: pd.DataFrame) -> pd.DataFrame:
    """1 パネル (組 × 次元クラス) の点を state-index, family, dA, dB, verdict の列で。"""
    return panel.loc[:, list(PANEL_COLUMNS)].rename(columns=PANEL_COLUMNS)


def polyline_payload(points: Iterable[VariancePoint]) -> list:
    return [[point.dA, point.dB] for point in points]


def _new_figure(title: str) -> tuple[Figure, Any]:
    size = SVG_SIZE_PX / SVG_DPI
    figure = Figure(figsize=(size, size), dpi=SVG_DPI)
    axes = figure.add_axes((0.12, 0.1, 0.83, 0.82))
    axes.set_xlim(-AXIS_PAD, 0.25 + AXIS_PAD)
    axes.set_ylim(-AXIS_PAD, 0.25 + AXIS_PAD)
    axes.set_aspect("equal")
    axes.set_xlabel("ΔA")
    axes.set_ylabel("ΔB")
    axes.set_title(title)
    return figure, axes


def _render(figure: Figure) -> bytes:
    buffer = BytesIO()
    with matplotlib.rc_context(_SVG_RC):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def _draw_boundary(axes: Any, spec: RegionSpec, n: int) -> None:
    polyline = np.array(polyline_payload(boundary_polyline(spec, n)))
    axes.fill(polyline[:, 0], polyline[:, 1], color="#c6dbef", linewidth=0)
    axes.plot(polyline[:, 0], polyline[:, 1], color="#08519c", linewidth=1.2)


def region_svg(
    spec: RegionSpec,
    scatter: Optional[np.ndarray] = None,
    n_boundary: int = BOUNDARY_POINTS,
) -> bytes:
    """解析領域 (塗り + 境界線) と任意の散布点を 600×600 の SVG にする。"""
    figure, axes = _new_figure(f"θ = {spec.theta:.6f} ({spec.dim_class.value})")
    _draw_boundary(axes, spec, n_boundary)
    if scatter is not None and len(scatter):
        points = np.asarray(scatter, dtype=float).reshape(-1, 2)
        axes.scatter(points[:, 0], points[:, 1], s=1.0, color="#cb181d", linewidths=0)
    return _render(figure)


def experiment_svg(
    panel: pd.DataFrame,
    spec: RegionSpec,
    title: str,
    n_boundary: int = BOUNDARY_POINTS,
) -> bytes:
    """1 パネル分の実験点 (family ごとに色分け) と解析境界。"""
    figure, axes = _new_figure(title)
    _draw_boundary(axes, spec, n_boundary)
    colors = {"generic": "#238b45", "boundary": "#cb181d"}
    for family, group in panel.groupby("family", sort=True):
        axes.scatter(
            group["dA"].to_numpy(),
            group["dB"].to_numpy(),
            s=6.0,
            color=colors.get(str(family), "#525252"),
            linewidths=0,
            label=str(family),
        )
    if len(panel):
        axes.legend(loc="lower right")
    return _render(figure)


__all__ = [
    "CSV_FLOAT_FORMAT",
    "atomic_write_bytes",
    "csv_bytes",
    "experiment_svg",
    "json_bytes",
    "panel_frame",
    "polyline_payload",
    "region_frame",
    "region_svg",
    "scatter_frame",
    "write_csv",
    "write_json",
    "write_svg",
]
