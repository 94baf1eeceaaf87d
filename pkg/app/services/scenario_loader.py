"""Leitura, validação e serialização de cenários."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import FormsimError
from app.models.scenario import ScenarioFile
from app.services.agents import AgentModel, CubicDampingAgent, LinearPassiveAgent
from app.services.controllers import (
    ControlMode,
    SignMode,
    assemble_closed_loop,
    observer_gains,
)
from app.services.engine import SCHEMES
from app.services.exosystem import (
    ExosystemSpec,
    make_constant,
    make_harmonic,
    make_matrix,
    make_mixed,
)
from app.services.graphalg import (
    FormationSpec,
    Graph,
    check_formation_consistency,
    is_connected,
)

logger = logging.getLogger(__name__)

SIGN_MODE_CHOICES = SignMode.VARIANTS
SCHEME_CHOICES = SCHEMES


class ScenarioError(FormsimError):
    """Exceção lançada para cenários inválidos; a mensagem indica a origem e a localização."""

    pass


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float
    t_final: float
    scheme: str
    stride: int


@dataclass(frozen=True)
class ObserverGains:
    H: Tuple[np.ndarray, ...]
    G_d: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Cenário validado, pronto para assemble_closed_loop/run."""

    name: str
    p: int
    graph: Graph
    formation: FormationSpec
    agents: Tuple[AgentModel, ...]
    mode: ControlMode
    sign_mode: SignMode
    leader: int
    reference: ExosystemSpec
    disturbances: Optional[Tuple[ExosystemSpec, ...]]
    observer: Optional[ObserverGains]
    x0: np.ndarray
    xi0: Tuple[np.ndarray, ...]
    eta0: Tuple[Optional[np.ndarray], ...]
    theta0: Tuple[np.ndarray, ...]
    xi_hat0: Tuple[np.ndarray, ...]
    integration: IntegrationConfig
    position_band: Optional[float]
    velocity_band: Optional[float]
    document: ScenarioFile

    @property
    def n_agents(self) -> int:
        return self.graph.n_nodes


def _line_of(text: str, loc: Sequence) -> Optional[int]:
    """Linha aproximada da chave indicada por `loc` (busca as chaves em sequência)."""
    position = 0
    found = False
    for key in loc:
        if not isinstance(key, str):
            continue
        index = text.find(f'"{key}"', position)
        if index < 0:
            break
        position = index
        found = True
    return text.count("\n", 0, position) + 1 if found else None


def _format_validation_error(error: ValidationError, text: str, origin: str) -> str:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        line = _line_of(text, item["loc"])
        where = f"{origin}:{line}" if line else origin
        messages.append(f"{where}: {location}: {item['msg']}")
    return "; ".join(messages)


def load_document(text: str, origin: str = "<scenario>") -> ScenarioFile:
    """
    Decodifica o JSON e valida o esquema.

    Raises:
        ScenarioError: JSON inválido (com linha e coluna) ou campo fora do esquema
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{origin}:{e.lineno}:{e.colno}: JSON inválido: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ScenarioError(f"{origin}: o cenário deve ser um objeto JSON")
    if "schema_version" not in raw:
        raise ScenarioError(f"{origin}: campo obrigatório 'schema_version' ausente")
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as e:
        raise ScenarioError(_format_validation_error(e, text, origin)) from e


def _agent_factory(decl) -> Callable[..., AgentModel]:
    if decl.kind == "cubic_damping":
        return CubicDampingAgent
    return LinearPassiveAgent


def _build_exosystem(decl, p: int) -> ExosystemSpec:
    if decl.kind == "constant":
        return make_constant(p, decl.value)
    if decl.kind == "harmonic":
        return make_harmonic(decl.frequencies, decl.gain_rows, decl.w0)
    if decl.kind == "mixed":
        channels = [c.model_dump() for c in decl.channels]
        return make_mixed(channels, decl.w0)
    return make_matrix(decl.Phi, decl.Gamma, decl.w0)


def _vectors(
    values: Optional[Sequence], count: int, dims: Sequence[int], label: str
) -> Tuple[np.ndarray, ...]:
    if values is None:
        return tuple(np.zeros(d) for d in dims)
    if len(values) != count:
        raise ScenarioError(f"initial.{label}: esperado {count} vetores, recebido {len(values)}")
    out = []
    for k, (value, d) in enumerate(zip(values, dims), start=1):
        array = np.asarray(value, dtype=float).reshape(-1)
        if array.shape != (d,):
            raise ScenarioError(
                f"initial.{label}[{k}]: esperado comprimento {d}, recebido {array.size}"
            )
        out.append(array)
    return tuple(out)


def _split_flat(values: Optional[Sequence[float]], dims: Sequence[int], label: str):
    total = int(sum(dims))
    if values is None:
        return tuple(np.zeros(d) for d in dims)
    flat = np.asarray(values, dtype=float).reshape(-1)
    if flat.shape != (total,):
        raise ScenarioError(f"initial.{label}: esperado comprimento {total}, recebido {flat.size}")
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    return tuple(flat[offsets[i] : offsets[i + 1]] for i in range(len(dims)))


def build_scenario(document: ScenarioFile, origin: str = "<scenario>") -> Scenario:
    """
    Constrói e valida o cenário de execução a partir do documento.

    Validação: grafo conexo, formação consistente, certificado de passividade dos agentes,
    dimensões coerentes e hipóteses do modo de controle (incluindo o certificado do observador).

    Raises:
        ScenarioError: Com a origem e a hipótese violada
    """
    try:
        return _build(document)
    except ScenarioError as e:
        raise ScenarioError(f"{origin}: {e}") from e
    except FormsimError as e:
        raise ScenarioError(f"{origin}: {type(e).__name__}: {e}") from e


def _build(document: ScenarioFile) -> Scenario:
    p = document.p
    graph = Graph.from_one_based(document.graph.n_nodes, document.graph.edges)
    N = graph.n_nodes
    if not is_connected(graph):
        raise ScenarioError("graph must be connected")

    formation = FormationSpec(p=p, z_star=np.asarray(document.formation.z_star, dtype=float))
    consistency = check_formation_consistency(graph, formation)
    if not consistency.consistent:
        raise ScenarioError(
            f"formation z_star is inconsistent with the graph (residual {consistency.residual:.3e})"
        )

    decls = document.agents if isinstance(document.agents, list) else [document.agents] * N
    if len(decls) != N:
        raise ScenarioError(f"agents: esperado 1 ou {N} declarações, recebido {len(decls)}")
    cache = {}
    agents = []
    for decl in decls:
        key = decl.model_dump_json()
        if key not in cache:
            params = {"a": decl.a, "b": decl.b}
            if decl.kind == "cubic_damping":
                params["c"] = 1.0 if decl.c is None else decl.c
            cache[key] = _agent_factory(decl)(p, **params)
        agents.append(cache[key])

    controller = document.controller
    mode = ControlMode(controller.mode)
    sign_mode = SignMode(controller.sign_mode, controller.eps)
    if controller.leader > N:
        raise ScenarioError(f"controller.leader={controller.leader} fora do intervalo [1, {N}]")
    leader = controller.leader - 1

    reference = _build_exosystem(document.reference, p)
    disturbances = None
    if document.disturbances is not None:
        if len(document.disturbances) != N:
            raise ScenarioError(
                f"disturbances: esperado {N} exossistemas, recebido {len(document.disturbances)}"
            )
        disturbances = tuple(_build_exosystem(d, p) for d in document.disturbances)

    observer = None
    if controller.observer is not None:
        if not disturbances:
            raise ScenarioError("controller.observer requer disturbances")
        H, G_d = observer_gains(controller.observer.H, controller.observer.G_d, disturbances)
        observer = ObserverGains(H=H, G_d=G_d)

    initial = document.initial
    x0 = np.asarray(initial.x, dtype=float).reshape(-1)
    if x0.shape != (N * p,):
        raise ScenarioError(f"initial.x: esperado comprimento {N * p}, recebido {x0.size}")
    state_dims = [agent.state_dim for agent in agents]
    xi0 = _split_flat(initial.xi, state_dims, "xi")
    xi_hat0 = _split_flat(initial.xi_hat, state_dims, "xi_hat")

    followers = [i for i in range(N) if i != leader]
    follower_eta = _vectors(initial.eta, len(followers), [reference.q] * len(followers), "eta")
    eta0 = [None] * N
    for i, eta in zip(followers, follower_eta):
        eta0[i] = eta

    theta_dims = [d.q for d in disturbances] if disturbances else []
    theta0 = _vectors(initial.theta, len(theta_dims), theta_dims, "theta") if disturbances else ()

    integration = document.integration
    scenario = Scenario(
        name=document.name,
        p=p,
        graph=graph,
        formation=formation,
        agents=tuple(agents),
        mode=mode,
        sign_mode=sign_mode,
        leader=leader,
        reference=reference,
        disturbances=disturbances,
        observer=observer,
        x0=x0,
        xi0=xi0,
        eta0=tuple(eta0),
        theta0=theta0,
        xi_hat0=xi_hat0,
        integration=IntegrationConfig(
            dt=integration.dt,
            t_final=integration.t_final,
            scheme=integration.scheme,
            stride=integration.stride,
        ),
        position_band=integration.position_band,
        velocity_band=integration.velocity_band,
        document=document,
    )
    # Hipóteses do modo e certificado do observador
    assemble_closed_loop(scenario)
    return scenario


def apply_overrides(
    document: ScenarioFile,
    *,
    dt: Optional[float] = None,
    t_final: Optional[float] = None,
    sign_mode: Optional[str] = None,
    eps: Optional[float] = None,
    scheme: Optional[str] = None,
    stride: Optional[int] = None,
) -> ScenarioFile:
    """Retorna uma cópia do documento com os campos sobrescritos (flags da CLI/API)."""
    integration = {
        k: v
        for k, v in {"dt": dt, "t_final": t_final, "scheme": scheme, "stride": stride}.items()
        if v is not None
    }
    controller = {k: v for k, v in {"sign_mode": sign_mode, "eps": eps}.items() if v is not None}
    raw = document.model_dump()
    raw["integration"].update(integration)
    raw["controller"].update(controller)
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as e:
        raise ScenarioError(_format_validation_error(e, "", "overrides")) from e


def parse_scenario_text(text: str, origin: str = "<scenario>", **overrides) -> Scenario:
    document = load_document(text, origin)
    if overrides:
        document = apply_overrides(document, **overrides)
    return build_scenario(document, origin)


def parse_scenario(source: Union[str, Path], **overrides) -> Scenario:
    """
    Lê e valida um arquivo de cenário.

    Args:
        source: Caminho do arquivo JSON
        **overrides: dt, t_final, sign_mode, eps, scheme, stride

    Returns:
        Scenario validado

    Raises:
        ScenarioError: Arquivo ilegível, JSON inválido, esquema ou hipótese violada
    """
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: não foi possível ler o arquivo ({e.strerror})") from e
    return parse_scenario_text(text, str(path), **overrides)


def dump_scenario(scenario: Union[Scenario, ScenarioFile]) -> str:
    """Serializa o cenário como JSON (parse(dump(parse(f))) reproduz o mesmo documento)."""
    document = scenario.document if isinstance(scenario, Scenario) else scenario
    return document.model_dump_json(indent=2)
