"""Modelos Pydantic dos arquivos de cenário."""

from app.models.scenario import ScenarioFile

__all__ = ["ScenarioFile"]
