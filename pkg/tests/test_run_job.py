"""Testes da execução isolada de cenários e da varredura de dt."""

import json

import pytest

from app.services.engine import IntegrationBlowupError
from app.services.presets import load_preset_text
from app.services.run_job import execute_run, run_sweep, sweep_dir_name
from app.services.scenario_loader import ScenarioError
from app.utils.dead_letter_logger import DeadLetterLogger

LINE = {
    "schema_version": 1,
    "name": "line_two_agents",
    "p": 1,
    "graph": {"n_nodes": 2, "edges": [[2, 1]]},
    "formation": {"z_star": [[1.0]]},
    "controller": {"mode": "known_velocity", "sign_mode": "smooth", "eps": 0.01},
    "reference": {"kind": "constant", "value": [0.5]},
    "initial": {"x": [0.0, 0.0]},
    "integration": {"dt": 0.001, "t_final": 0.2, "stride": 10},
}


@pytest.fixture
def journal(tmp_path):
    return DeadLetterLogger(log_file=tmp_path / "failures.jsonl")


def test_execute_run_writes_outputs(tmp_path, journal):
    result = execute_run(json.dumps(LINE), "line.json", out_dir=tmp_path / "out", journal=journal)

    assert (tmp_path / "out" / "line_two_agents.csv").is_file()
    assert (tmp_path / "out" / "line_two_agents_summary.json").is_file()
    assert result.summary.steps == 200
    assert journal.get_log_count() == 0


def test_execute_run_without_out_dir_writes_nothing(tmp_path, journal):
    execute_run(json.dumps(LINE), "line.json", journal=journal)

    assert list(tmp_path.iterdir()) == []


def test_execute_run_applies_overrides(journal):
    result = execute_run(
        json.dumps(LINE),
        "line.json",
        overrides={"dt": 0.002, "scheme": "euler", "sign_mode": None},
        journal=journal,
    )

    assert result.summary.dt == 0.002
    assert result.summary.scheme == "euler"
    assert result.summary.sign_mode == "smooth(eps=0.01)"


def test_validation_failure_is_journaled(journal):
    """Testa que o cenário inválido vai para o journal com o texto do cenário."""
    text = load_preset_text("invalid/caseII_cyclic")

    with pytest.raises(ScenarioError, match="tree"):
        execute_run(text, "presets/invalid/caseII_cyclic", journal=journal)

    assert journal.get_log_count() == 1
    entry = json.loads(journal.log_file.read_text(encoding="utf-8"))
    assert entry["scenario"] == "presets/invalid/caseII_cyclic"
    assert entry["state_snippet"].startswith("{")


def test_blowup_is_journaled_with_last_record(journal):
    doc = {**LINE, "integration": {"dt": 3.0, "t_final": 6000.0, "scheme": "euler", "stride": 1}}

    with pytest.raises(IntegrationBlowupError):
        execute_run(json.dumps(doc), "line.json", journal=journal)

    entry = json.loads(journal.log_file.read_text(encoding="utf-8"))
    assert entry["error_type"] == "IntegrationBlowupError"
    assert entry["state_snippet"].startswith("t=")


def test_sweep_dir_name():
    assert sweep_dir_name(0.001) == "dt_0.001"
    assert sweep_dir_name(0.0005) == "dt_0.0005"


def test_run_sweep_sequential(tmp_path, monkeypatch):
    """Testa um subdiretório por dt, na ordem pedida."""
    from app.core.config import settings

    monkeypatch.setattr(settings, "dead_letter_file", tmp_path / "failures.jsonl")

    report = run_sweep(
        json.dumps(LINE),
        "line.json",
        [0.002, 0.001],
        tmp_path / "sweep",
        overrides={"t_final": 0.2},
        max_workers=1,
    )

    assert [o.dt for o in report.outcomes] == [0.002, 0.001]
    assert (tmp_path / "sweep" / "dt_0.002" / "line_two_agents.csv").is_file()
    assert report.outcomes[1].summary["steps"] == 200
    assert report.outcomes[1].summary["dt"] == 0.001
    assert report.failures == []
