"""Cenários embutidos (formação pentagonal, casos com distúrbio e observador)."""

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import List, Tuple

from app.services.scenario_loader import ScenarioError, load_document

logger = logging.getLogger(__name__)

PRESET_PACKAGE = "app.presets"

# Ordem de listagem e rótulo curto de cada preset
PRESET_LABELS = {
    "pentagon_known_velocity": "A",
    "pentagon_leader_follower": "B",
    "caseI": "C",
    "caseII_tree": "D",
    "observer_mixed": "E",
}


@dataclass(frozen=True)
class PresetInfo:
    name: str
    label: str
    mode: str
    description: str


def _preset_dir():
    return resources.files(PRESET_PACKAGE)


def preset_names() -> List[str]:
    available = {
        entry.name[: -len(".json")]
        for entry in _preset_dir().iterdir()
        if entry.is_file() and entry.name.endswith(".json")
    }
    ordered = [name for name in PRESET_LABELS if name in available]
    return ordered + sorted(available - set(ordered))


def load_preset_text(name: str) -> str:
    """
    Retorna o JSON de um preset.

    Raises:
        ScenarioError: Se o preset não existe
    """
    entry = _preset_dir().joinpath(*f"{name}.json".split("/"))
    if not entry.is_file():
        raise ScenarioError(
            f"Preset '{name}' não encontrado; disponíveis: {', '.join(preset_names())}"
        )
    return entry.read_text(encoding="utf-8")


def list_presets() -> List[PresetInfo]:
    infos = []
    for name in preset_names():
        document = load_document(load_preset_text(name), f"presets/{name}")
        infos.append(
            PresetInfo(
                name=name,
                label=PRESET_LABELS.get(name, "-"),
                mode=document.controller.mode,
                description=document.description or "",
            )
        )
    return infos


def resolve_scenario_source(argument: str) -> Tuple[str, str]:
    """
    Resolve o argumento de cenário da CLI/API em (texto JSON, origem).

    Aceita um caminho de arquivo existente, `presets/<nome>` ou apenas `<nome>` de um preset.

    Raises:
        ScenarioError: Se nada corresponde ao argumento
    """
    path = Path(argument)
    if path.is_file():
        try:
            return path.read_text(encoding="utf-8"), str(path)
        except OSError as e:
            raise ScenarioError(f"{path}: não foi possível ler o arquivo ({e.strerror})") from e

    name = argument
    if name.startswith("presets/"):
        name = name[len("presets/") :]
    if name.endswith(".json"):
        name = name[: -len(".json")]
    if _preset_dir().joinpath(*f"{name}.json".split("/")).is_file():
        logger.debug("Usando preset embutido '%s'", name)
        return load_preset_text(name), f"presets/{name}"
    raise ScenarioError(f"{argument}: arquivo ou preset inexistente")
