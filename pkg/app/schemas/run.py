"""Schemas das rotas de presets e execuções."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PresetSchema(BaseModel):
    """Resumo de um preset embutido."""

    name: str
    label: str
    mode: str
    description: str


class RunOverrides(BaseModel):
    """Campos de integração/controle sobrescritos na execução."""

    dt: Optional[float] = Field(default=None, gt=0)
    t_final: Optional[float] = Field(default=None, gt=0)
    sign_mode: Optional[Literal["strict", "hysteresis", "smooth"]] = None
    eps: Optional[float] = Field(default=None, gt=0)
    scheme: Optional[Literal["euler", "rk4"]] = None
    stride: Optional[int] = Field(default=None, ge=1)


class RunRequest(BaseModel):
    """Cenário (JSON completo ou nome de preset) e sobrescritas."""

    scenario: Optional[Dict[str, Any]] = None
    preset: Optional[str] = None
    overrides: RunOverrides = RunOverrides()
    include_records: bool = False
    max_records: int = Field(default=200, ge=2, le=5000)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "preset": "caseI",
                "overrides": {"t_final": 5.0, "sign_mode": "smooth", "eps": 0.01},
                "include_records": True,
                "max_records": 100,
            }
        }
    )

    @model_validator(mode="after")
    def check_source(self):
        if (self.scenario is None) == (self.preset is None):
            raise ValueError("informe exatamente um de 'scenario' ou 'preset'")
        return self


class RecordSchema(BaseModel):
    """Amostra reduzida da trajetória."""

    t: float
    V: float
    znorm1: float
    z_tilde: List[float]
    xi: List[float]
    x: List[float]


class RunResponse(BaseModel):
    summary: Dict[str, Any]
    records: Optional[List[RecordSchema]] = None
