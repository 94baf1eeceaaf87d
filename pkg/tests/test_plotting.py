"""Testes da geração de gráficos SVG."""

import json

import pytest

from app.services.csv_io import CsvError, write_run_outputs
from app.services.engine import run
from app.services.plotting import QUANTITIES, PlotError, emit_plot, plot_csv
from app.services.presets import load_preset_text
from app.services.scenario_loader import parse_scenario_text


@pytest.fixture(scope="module")
def observer_result():
    """Execução curta do preset com observador (todos os blocos de colunas presentes)."""
    text = load_preset_text("observer_mixed")
    return run(parse_scenario_text(text, "presets/observer_mixed", t_final=0.2))


def _is_svg(path) -> bool:
    head = path.read_text(encoding="utf-8")[:400]
    return "<svg" in head


@pytest.mark.parametrize("quantity", list(QUANTITIES))
def test_emit_plot_from_records(observer_result, tmp_path, quantity):
    """Testa um SVG não vazio para cada quantidade suportada."""
    path = emit_plot(
        observer_result.records, quantity, tmp_path / f"{quantity}.svg", meta=observer_result.meta
    )

    assert path.is_file()
    assert path.stat().st_size > 0
    assert _is_svg(path)


def test_unknown_quantity(observer_result, tmp_path):
    with pytest.raises(PlotError, match="desconhecida"):
        emit_plot(observer_result.records, "speed", tmp_path / "x.svg", meta=observer_result.meta)


def test_empty_records(observer_result, tmp_path):
    with pytest.raises(PlotError, match="Nenhum registro"):
        emit_plot([], "V", tmp_path / "x.svg", meta=observer_result.meta)


def test_records_require_meta(observer_result, tmp_path):
    with pytest.raises(PlotError, match="meta"):
        emit_plot(observer_result.records, "V", tmp_path / "x.svg")


def test_trajectory2d_requires_planar_agents(tmp_path):
    """Testa que trajectory2d rejeita p = 1."""
    doc = {
        "schema_version": 1,
        "name": "line",
        "p": 1,
        "graph": {"n_nodes": 2, "edges": [[2, 1]]},
        "formation": {"z_star": [[1.0]]},
        "controller": {"mode": "known_velocity"},
        "reference": {"kind": "constant", "value": [0.5]},
        "initial": {"x": [0.0, 0.0]},
        "integration": {"t_final": 0.05},
    }
    result = run(parse_scenario_text(json.dumps(doc), "line"))

    with pytest.raises(PlotError, match="p = 2"):
        emit_plot(result.records, "trajectory2d", tmp_path / "x.svg", meta=result.meta)


def test_missing_block_for_mode(tmp_path):
    """Testa que θ̃ não existe no modo sem distúrbio."""
    text = load_preset_text("pentagon_known_velocity")
    result = run(parse_scenario_text(text, "presets/A", t_final=0.05))

    with pytest.raises(PlotError, match="ausente"):
        emit_plot(result.records, "theta_tilde", tmp_path / "x.svg", meta=result.meta)


def test_plot_csv_uses_positions_companion(observer_result, tmp_path):
    """Testa trajectory2d a partir do CSV principal (lê <nome>_positions.csv ao lado)."""
    paths = write_run_outputs(observer_result, tmp_path)

    out = plot_csv(paths["csv"], "trajectory2d", tmp_path / "plots" / "traj.svg")

    assert _is_svg(out)


def test_plot_csv_time_series(observer_result, tmp_path):
    paths = write_run_outputs(observer_result, tmp_path)

    out = plot_csv(paths["csv"], "ztilde", tmp_path / "z.svg")

    assert _is_svg(out)


def test_plot_csv_missing_file(tmp_path):
    with pytest.raises(CsvError):
        plot_csv(tmp_path / "missing.csv", "V", tmp_path / "v.svg")
