"""Modelo Pydantic do arquivo de cenário (JSON versionado)."""

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1

Matrix = List[List[float]]


class StrictModel(BaseModel):
    """Base dos blocos do cenário: chaves desconhecidas são rejeitadas em qualquer nível."""

    model_config = ConfigDict(extra="forbid")


class GraphModel(StrictModel):
    """Grafo de comunicação; arestas (head, tail) com nós 1-based."""

    n_nodes: int = Field(ge=1)
    edges: List[List[int]]

    @field_validator("edges")
    @classmethod
    def check_pairs(cls, v):
        for k, edge in enumerate(v, start=1):
            if len(edge) != 2:
                raise ValueError(f"aresta {k} deve ser um par [head, tail]")
        return v


class FormationModel(StrictModel):
    """Posições relativas desejadas z_k*, uma por aresta."""

    z_star: Matrix


class AgentModelDecl(StrictModel):
    """Agente estritamente passivo: linear (ξ̇ = -aξ + bu) ou cubic_damping (-aξ - cξ³ + bu)."""

    kind: Literal["linear", "cubic_damping"] = "linear"
    a: float = Field(default=1.0, gt=0)
    b: float = Field(default=1.0, gt=0)
    c: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_cubic(self):
        if self.kind == "linear" and self.c is not None:
            raise ValueError("agente linear não aceita o parâmetro c")
        return self


class ConstantExo(StrictModel):
    kind: Literal["constant"]
    value: List[float]


class HarmonicExo(StrictModel):
    kind: Literal["harmonic"]
    frequencies: List[float]
    gain_rows: Matrix
    w0: Optional[List[float]] = None


class HarmonicComponent(StrictModel):
    frequency: float
    gain: List[float]


class MixedChannel(StrictModel):
    constant_gain: Optional[float] = None
    harmonics: List[HarmonicComponent] = []


class MixedExo(StrictModel):
    kind: Literal["mixed"]
    channels: List[MixedChannel]
    w0: Optional[List[float]] = None


class MatrixExo(StrictModel):
    kind: Literal["matrix"]
    Phi: Matrix
    Gamma: Matrix
    w0: List[float]


ExosystemDecl = Annotated[
    Union[ConstantExo, HarmonicExo, MixedExo, MatrixExo], Field(discriminator="kind")
]


class ObserverModel(StrictModel):
    """Ganhos do observador: uma matriz comum ou uma lista com uma matriz por agente."""

    H: Union[Matrix, List[Matrix]]
    G_d: Optional[Union[Matrix, List[Matrix]]] = None


class ControllerModel(StrictModel):
    mode: Literal[
        "known_velocity",
        "leader_follower",
        "leader_follower_const_dist",
        "known_velocity_harmonic_dist",
        "leader_follower_disturbance",
        "observer_based",
    ]
    sign_mode: Literal["strict", "hysteresis", "smooth"] = "smooth"
    eps: Optional[float] = Field(default=1e-2, gt=0)
    leader: int = Field(default=1, ge=1)
    observer: Optional[ObserverModel] = None


class InitialModel(StrictModel):
    """Condições iniciais; tudo exceto x é opcional e assume zero."""

    x: List[float]
    xi: Optional[List[float]] = None
    # Uma entrada por seguidor, em ordem crescente de índice (líder omitido)
    eta: Optional[List[List[float]]] = None
    theta: Optional[List[List[float]]] = None
    xi_hat: Optional[List[float]] = None


class IntegrationModel(StrictModel):
    dt: float = Field(default=1e-3, gt=0)
    t_final: float = Field(default=30.0, gt=0)
    scheme: Literal["euler", "rk4"] = "rk4"
    stride: int = Field(default=10, ge=1)
    position_band: Optional[float] = Field(default=None, gt=0)
    velocity_band: Optional[float] = Field(default=None, gt=0)


class ScenarioFile(StrictModel):
    """Arquivo de cenário completo."""

    schema_version: int
    name: str
    description: Optional[str] = None
    p: int = Field(ge=1)
    graph: GraphModel
    formation: FormationModel
    agents: Union[AgentModelDecl, List[AgentModelDecl]] = AgentModelDecl()
    controller: ControllerModel
    reference: ExosystemDecl
    disturbances: Optional[List[ExosystemDecl]] = None
    initial: InitialModel
    integration: IntegrationModel = IntegrationModel()

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "schema_version": 1,
                "name": "line_two_agents",
                "p": 1,
                "graph": {"n_nodes": 2, "edges": [[2, 1]]},
                "formation": {"z_star": [[1.0]]},
                "agents": {"kind": "linear", "a": 1.0, "b": 1.0},
                "controller": {"mode": "known_velocity", "sign_mode": "smooth", "eps": 0.01},
                "reference": {"kind": "constant", "value": [0.5]},
                "initial": {"x": [0.0, 0.0]},
                "integration": {"dt": 0.001, "t_final": 5.0, "scheme": "rk4", "stride": 10},
            }
        },
    )

    @field_validator("schema_version")
    @classmethod
    def check_version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"schema_version {v} não suportado (esperado {SCHEMA_VERSION})")
        return v
