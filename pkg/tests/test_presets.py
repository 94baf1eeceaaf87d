"""Testes dos cenários embutidos."""

import json

import pytest

from app.services.presets import (
    list_presets,
    load_preset_text,
    preset_names,
    resolve_scenario_source,
)
from app.services.scenario_loader import ScenarioError, parse_scenario_text

EXPECTED = [
    "pentagon_known_velocity",
    "pentagon_leader_follower",
    "caseI",
    "caseII_tree",
    "observer_mixed",
]


def test_preset_names_in_listing_order():
    """Testa os cinco presets na ordem A-E."""
    assert preset_names() == EXPECTED


def test_list_presets_labels_and_modes():
    infos = list_presets()

    assert [info.label for info in infos] == ["A", "B", "C", "D", "E"]
    assert [info.mode for info in infos] == [
        "known_velocity",
        "leader_follower",
        "leader_follower_const_dist",
        "known_velocity_harmonic_dist",
        "observer_based",
    ]
    assert all(info.description for info in infos)


@pytest.mark.parametrize("name", EXPECTED)
def test_every_preset_validates(name):
    """Testa que cada preset passa por todas as verificações de hipótese."""
    scenario = parse_scenario_text(load_preset_text(name), f"presets/{name}")

    assert scenario.name
    assert scenario.n_agents == 5


def test_invalid_cyclic_preset_is_rejected():
    """Testa que o caso II sobre o grafo com ciclos falha por não ser árvore."""
    text = load_preset_text("invalid/caseII_cyclic")

    with pytest.raises(ScenarioError, match="tree"):
        parse_scenario_text(text, "presets/invalid/caseII_cyclic")


def test_unknown_preset():
    with pytest.raises(ScenarioError, match="não encontrado"):
        load_preset_text("hexagon")


@pytest.mark.parametrize("argument", ["caseI", "presets/caseI", "presets/caseI.json"])
def test_resolve_preset_forms(argument):
    text, origin = resolve_scenario_source(argument)

    assert origin == "presets/caseI"
    assert json.loads(text)["controller"]["mode"] == "leader_follower_const_dist"


def test_resolve_file_path(tmp_path):
    path = tmp_path / "mine.json"
    path.write_text(load_preset_text("caseII_tree"), encoding="utf-8")

    text, origin = resolve_scenario_source(str(path))

    assert origin == str(path)
    assert json.loads(text)["name"]


def test_resolve_missing_source(tmp_path):
    with pytest.raises(ScenarioError, match="inexistente"):
        resolve_scenario_source(str(tmp_path / "nope.json"))
