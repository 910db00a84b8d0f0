"""Command-line tests for :mod:`uregion.cli`."""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from uregion.cli import main
from uregion.pipeline.export import json_bytes
from uregion.pipeline.qcore import canonical_pair, matrix_to_json, pauli
from uregion.services.verification_service import CriterionReport, VerificationService


def _write_matrix(path: Path, matrix) -> Path:
    path.write_bytes(json_bytes(matrix_to_json(matrix)))
    return path


@pytest.fixture
def small_config(tmp_path) -> Path:
    config = tmp_path / "small.toml"
    config.write_text(
        "[run]\nseed = 0\nthreads = 1\n\n"
        "[experiment]\nshots = 500\nrepeats = 1\ngeneric_states = 6\nboundary_states = 4\n",
        encoding="utf-8",
    )
    return config


def test_region_csv_has_one_row_per_cell(capsys):
    assert main(["region", "--theta", str(math.pi / 6), "--grid", "400"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "dA,dB,verdict,part"
    assert len(lines) == 160_001


def test_region_json_accepts_degrees(capsys):
    code = main(
        [
            "region",
            "--theta",
            "30",
            "--degrees",
            "--dim-class",
            "qudit",
            "--grid",
            "20",
            "--boundary-points",
            "64",
            "--format",
            "json",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["theta"] == pytest.approx(math.pi / 6)
    assert payload["dim_class"] == "qudit"
    assert sum(payload["counts"].values()) == 400
    assert len(payload["boundary"]) == 64


def test_region_from_observables(tmp_path, capsys):
    sigma_x, _, sigma_z = pauli()
    a = _write_matrix(tmp_path / "a.json", sigma_z)
    b = _write_matrix(tmp_path / "b.json", sigma_x)
    out = tmp_path / "region.json"
    code = main(
        ["region", "--a", str(a), "--b", str(b), "--grid", "10", "--format", "json", "--out", str(out)]
    )
    assert code == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text(encoding="utf-8"))["theta"] == pytest.approx(math.pi / 4)


def test_sample_writes_requested_count(tmp_path):
    code = main(
        [
            "sample",
            "--theta",
            "0.5",
            "--dim",
            "3",
            "--samples",
            "250",
            "--mixed",
            "--seed",
            "4",
            "--out-dir",
            str(tmp_path),
        ]
    )
    assert code == 0
    lines = (tmp_path / "sample.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "dA,dB,state-kind"
    assert len(lines) == 251
    assert lines[1].endswith(",mixed")


def test_jordan_reports_angles(tmp_path, capsys):
    p, q = canonical_pair(0.3, 3)
    code = main(
        [
            "jordan",
            "--p",
            str(_write_matrix(tmp_path / "p.json", p)),
            "--q",
            str(_write_matrix(tmp_path / "q.json", q)),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["angles"] == [pytest.approx(0.3)]
    assert payload["residual"] <= 1e-12
    assert payload["canonical"]["p"]["dim"] == 3


def test_wavepacket_target(capsys):
    assert main(["wavepacket", "--target", "2,1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["a"] == pytest.approx(1 / math.sqrt(2))
    assert payload["t"] == pytest.approx(math.sqrt(15) / 2)
    assert payload["in_region"] is True
    assert (payload["delta_x"], payload["delta_p"]) == pytest.approx((2.0, 1.0))


def test_wavepacket_infeasible_target_fails(capsys):
    assert main(["wavepacket", "--target", "0.5,0.5"]) == 1
    assert capsys.readouterr().out == ""


def test_simulate_default_plan_is_reproducible(tmp_path, small_config):
    outputs = []
    for name in ("first", "second"):
        out_dir = tmp_path / name
        code = main(
            [
                "simulate",
                "--default-plan",
                "--seed",
                "7",
                "--config",
                str(small_config),
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        outputs.append({path.name: path.read_bytes() for path in sorted(out_dir.iterdir())})

    first, second = outputs
    assert first == second
    panels = [
        f"{pair}_{dim_class}"
        for pair in ("P1-P2", "P1-P3", "P1-P4", "P3-P4")
        for dim_class in ("qubit", "qutrit")
    ]
    expected = {"plan.json", "points.csv", "counts.csv", "summary.json"}
    expected |= {f"pair_{panel}.csv" for panel in panels}
    expected |= {f"panel_{panel}.svg" for panel in panels}
    assert set(first) == expected
    header = first["pair_P1-P2_qutrit.csv"].decode("utf-8").splitlines()[0]
    assert header == "state-index,family,dA,dB,verdict"
    assert len(first["pair_P1-P2_qutrit.csv"].decode("utf-8").splitlines()) == 11
    plan = json.loads(first["plan.json"])
    assert (plan["seed"], plan["shots"], len(plan["states"])) == (7, 500, 10)


def test_verify_selected_criterion(capsys):
    assert main(["verify", "--only", "a8", "--scale", "0.01"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pass"] is True
    assert [item["criterion-id"] for item in payload["criteria"]] == ["A8"]


def test_verify_exits_one_when_a_criterion_fails(monkeypatch, capsys):
    def failing(self, request):
        return CriterionReport("A8", False, 1.0, 0.0)

    monkeypatch.setattr(VerificationService, "_sic_counterexample", failing)
    assert main(["verify", "--only", "A8", "--scale", "0.01"]) == 1
    assert json.loads(capsys.readouterr().out)["pass"] is False


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["region", "--bogus"],
        ["region"],
        ["sample", "--theta", "0.5", "--threads", "0"],
        ["sample", "--theta", "0.5", "--pure", "--mixed"],
        ["verify", "--scale", "2"],
        ["verify", "--only", "A42"],
        ["simulate"],
    ],
)
def test_usage_errors_exit_two(argv):
    assert main(argv) == 2


def test_missing_input_file_exits_one(tmp_path):
    missing = tmp_path / "absent.json"
    assert main(["jordan", "--p", str(missing), "--q", str(missing)]) == 1
