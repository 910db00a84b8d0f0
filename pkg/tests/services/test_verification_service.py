"""Unit tests for :mod:`uregion.services.verification_service`."""
from __future__ import annotations

import sys
from pathlib import Path
from types import SimpleNamespace

import pandas as pd
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from uregion.pipeline import regions
from uregion.pipeline.export import json_bytes
from uregion.services import (
    VerificationError,
    VerificationRequest,
    VerificationResult,
    VerificationService,
    verification_service,
)

FAST = 0.01


@pytest.fixture
def service() -> VerificationService:
    return VerificationService()


def test_fast_criteria_pass_at_reduced_scale(service):
    result = service.run(VerificationRequest(seed=0, scale=FAST, criteria=["A9", "A5", "A8"]))
    assert isinstance(result, VerificationResult)
    assert [report.criterion_id for report in result.criteria] == ["A5", "A8", "A9"]
    assert result.passed, result.to_json()


def test_report_json_shape(service):
    result = service.run(VerificationRequest(scale=FAST, criteria=["A8"]))
    payload = result.to_json()
    assert payload["pass"] is True
    (criterion,) = payload["criteria"]
    assert set(criterion) == {"criterion-id", "pass", "measured", "tolerance", "detail"}
    assert criterion["criterion-id"] == "A8"
    assert criterion["detail"]["min_distance"] > 0.01


def test_identical_requests_serialize_identically(service):
    request = VerificationRequest(seed=3, threads=2, scale=FAST, criteria=["A8", "A10"])
    first = json_bytes(service.run(request).to_json())
    second = json_bytes(service.run(request).to_json())
    assert first == second


def test_soundness_check_fails_when_the_region_test_is_broken(service, monkeypatch):
    original = regions.qubit_margin

    def inverted(dA, dB, theta):
        return -original(dA, dB, theta) - 1.0

    monkeypatch.setattr(regions, "qubit_margin", inverted)
    result = service.run(VerificationRequest(scale=FAST, criteria=["A1"]))
    assert not result.passed
    assert result.criteria[0].measured > 0


def test_raised_domain_errors_become_failed_reports(service, monkeypatch):
    def explode(*_args, **_kwargs):
        raise regions.OutOfAnalyticScopeError("boom")

    monkeypatch.setattr(VerificationService, "_sic_counterexample", explode)
    result = service.run(VerificationRequest(scale=FAST, criteria=["A8"]))
    assert not result.passed
    assert result.criteria[0].error == "boom"
    assert result.to_json()["criteria"][0]["error"] == "boom"


def test_experiment_threshold_applies_to_each_dimension_class(service, monkeypatch):
    rows = [
        {"dim_class": "qutrit", "family": "generic", "inflated_ok": True, "on_ellipse": None}
    ] * 200
    rows.append({"dim_class": "qubit", "family": "generic", "inflated_ok": False, "on_ellipse": None})
    dataset = SimpleNamespace(points=pd.DataFrame(rows))
    monkeypatch.setattr(verification_service, "run_experiment", lambda plan, threads=1: dataset)

    (report,) = service.run(VerificationRequest(scale=FAST, criteria=["A6"])).criteria
    assert not report.passed
    assert report.measured == 0.0
    assert report.detail["inflated_inside"] == {"qubit": 0.0, "qutrit": 1.0}


def test_determinism_covers_sample_region_and_simulate_outputs(service, monkeypatch):
    (report,) = service.run(VerificationRequest(scale=FAST, criteria=["A10"])).criteria
    assert report.passed
    outputs = report.detail["outputs"]
    assert {"sample", "region", "simulate", "pair_P1-P2_qutrit", "pair_P3-P4_qubit"} <= set(outputs)

    original = verification_service.run_experiment

    def thread_dependent(plan, threads=1):
        dataset = original(plan, threads=threads)
        if threads > 1:
            dataset.points.loc[0, "dA"] = dataset.points.loc[0, "dA"] / 2 + 1e-3
        return dataset

    monkeypatch.setattr(verification_service, "run_experiment", thread_dependent)
    (report,) = service.run(VerificationRequest(scale=FAST, criteria=["A10"])).criteria
    assert not report.passed
    assert "simulate" in report.detail["differing"]


@pytest.mark.parametrize(
    "request_",
    [
        VerificationRequest(scale=0.0),
        VerificationRequest(scale=1.5),
        VerificationRequest(threads=0),
        VerificationRequest(criteria=["A11"]),
    ],
)
def test_invalid_requests_raise(service, request_):
    with pytest.raises(VerificationError):
        service.run(request_)
