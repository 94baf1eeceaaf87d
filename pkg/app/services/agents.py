"""Dinâmica de agentes estritamente passivos e camada cinemática de posição."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from app.core.errors import FormsimError

logger = logging.getLogger(__name__)

# Certificação por amostragem
PASSIVITY_TOL = 1e-9
RANK_TOL = 1e-10
SAMPLE_SEED = 20240607
N_RANDOM_PROBES = 64
SHELL_RADII = (0.1, 1.0, 5.0)

# Tolerância do audit: C·Δ² + piso absoluto
AUDIT_C = 1.0
AUDIT_FLOOR = 1e-8


class AgentError(FormsimError):
    """Erro de configuração ou de dimensão de um modelo de agente."""

    pass


class PassivityError(AgentError):
    """Exceção lançada quando o certificado de passividade amostrado falha."""

    pass


Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class AgentModel:
    """
    Sistema estritamente passivo ξ̇ = f(ξ) + g(ξ)·u, y = h(ξ).

    O certificado (S, W, ∇S) é verificado na construção por amostragem: f(0)=0, h(0)=0,
    g(0) de posto coluna completo, S e W nulos na origem e positivos numa casca amostrada,
    e a desigualdade ∇S·(f + g·u) ≤ -W + yᵀu em pares (ξ, u) amostrados.
    """

    kind: str
    state_dim: int
    p: int
    f: Callable[[Vector], Vector]
    g: Callable[[Vector], np.ndarray]
    h: Callable[[Vector], Vector]
    storage: Callable[[Vector], float]
    dissipation: Callable[[Vector], float]
    storage_gradient: Callable[[Vector], Vector]
    # Definidos quando g é constante / y = ξ (requisitos do caminho com observador)
    g_constant: Optional[np.ndarray] = None
    output_is_state: bool = False
    params: dict = field(default_factory=dict)
    # Preenchidos pelo certificado amostrado
    dissipation_semidefinite: bool = field(init=False, default=False)
    dissipation_dominates_quadratic: bool = field(init=False, default=False)

    def __post_init__(self):
        self._certify()

    def _certify(self) -> None:
        n, p = self.state_dim, self.p
        zero = np.zeros(n)

        if np.linalg.norm(self.f(zero)) > PASSIVITY_TOL:
            raise PassivityError(f"{self.kind}: f(0) != 0")
        if np.linalg.norm(self.h(zero)) > PASSIVITY_TOL:
            raise PassivityError(f"{self.kind}: h(0) != 0")

        g0 = np.atleast_2d(self.g(zero))
        if g0.shape != (n, p):
            raise AgentError(f"{self.kind}: g(0) deve ter formato {(n, p)}, recebido {g0.shape}")
        singular_values = np.linalg.svd(g0, compute_uv=False)
        if singular_values.min() <= RANK_TOL * max(1.0, singular_values.max()):
            raise PassivityError(f"{self.kind}: g(0) não tem posto coluna completo")

        if abs(self.storage(zero)) > PASSIVITY_TOL or abs(self.dissipation(zero)) > PASSIVITY_TOL:
            raise PassivityError(f"{self.kind}: S(0) e W(0) devem ser nulos")

        rng = np.random.default_rng(SAMPLE_SEED)
        directions = rng.standard_normal((N_RANDOM_PROBES, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        # Grade: eixos coordenados (±) + direções aleatórias, em cada raio
        axes = np.vstack([np.eye(n), -np.eye(n)])
        shell = np.vstack([r * np.vstack([axes, directions]) for r in SHELL_RADII])
        inputs = rng.standard_normal((shell.shape[0], p)) * 2.0

        semidefinite = False
        quadratic = True
        for k, (xi, u) in enumerate(zip(shell, inputs)):
            storage = self.storage(xi)
            dissipation = self.dissipation(xi)
            if storage <= 0.0:
                raise PassivityError(f"{self.kind}: S não é positiva na amostra #{k} ξ={xi}")
            if dissipation <= 0.0:
                semidefinite = True
            if dissipation < float(xi @ xi) - PASSIVITY_TOL:
                quadratic = False

            xi_dot = self.f(xi) + np.atleast_2d(self.g(xi)) @ u
            lhs = float(self.storage_gradient(xi) @ xi_dot)
            rhs = -dissipation + float(self.h(xi) @ u)
            scale = 1.0 + abs(lhs) + abs(rhs)
            if lhs - rhs > PASSIVITY_TOL * scale:
                raise PassivityError(
                    f"{self.kind}: desigualdade de passividade violada na amostra #{k} "
                    f"(ξ={np.array2string(xi, precision=4)}, u={np.array2string(u, precision=4)}, "
                    f"excesso={lhs - rhs:.3e})"
                )

        if semidefinite:
            logger.warning(
                "%s: W não é positiva em toda a casca amostrada (semidefinida?)", self.kind
            )
        object.__setattr__(self, "dissipation_semidefinite", semidefinite)
        object.__setattr__(self, "dissipation_dominates_quadratic", quadratic)


def LinearPassiveAgent(p: int, a: float = 1.0, b: float = 1.0) -> AgentModel:
    """
    Agente linear ξ̇ = -a·ξ + b·u, y = ξ.

    Armazenamento S = ξᵀξ/(2b) e dissipação W = (a/b)·ξᵀξ; a desigualdade de passividade
    vale com igualdade. W ≥ ‖ξ‖² exatamente quando a/b ≥ 1.
    """
    if a <= 0 or b <= 0:
        raise AgentError(f"Agente linear requer a > 0 e b > 0 (recebido a={a}, b={b})")

    g_matrix = b * np.eye(p)
    g_matrix.setflags(write=False)

    return AgentModel(
        kind="linear",
        state_dim=p,
        p=p,
        f=lambda xi: -a * xi,
        g=lambda xi: g_matrix,
        h=lambda xi: xi,
        storage=lambda xi: float(xi @ xi) / (2.0 * b),
        dissipation=lambda xi: (a / b) * float(xi @ xi),
        storage_gradient=lambda xi: xi / b,
        g_constant=g_matrix,
        output_is_state=True,
        params={"a": a, "b": b},
    )


def CubicDampingAgent(p: int, a: float = 1.0, c: float = 1.0, b: float = 1.0) -> AgentModel:
    """Agente com amortecimento cúbico ξ̇ = -a·ξ - c·ξ³ + b·u, y = ξ."""
    if a <= 0 or b <= 0 or c < 0:
        raise AgentError(f"Agente cúbico requer a > 0, b > 0, c ≥ 0 (recebido a={a}, b={b}, c={c})")

    g_matrix = b * np.eye(p)
    g_matrix.setflags(write=False)

    return AgentModel(
        kind="cubic_damping",
        state_dim=p,
        p=p,
        f=lambda xi: -a * xi - c * xi**3,
        g=lambda xi: g_matrix,
        h=lambda xi: xi,
        storage=lambda xi: float(xi @ xi) / (2.0 * b),
        dissipation=lambda xi: (a * float(xi @ xi) + c * float(np.sum(xi**4))) / b,
        storage_gradient=lambda xi: xi / b,
        g_constant=g_matrix,
        output_is_state=True,
        params={"a": a, "c": c, "b": b},
    )


def agent_rhs(model: AgentModel, xi: Vector, u: Vector) -> Vector:
    """
    Retorna f(ξ) + g(ξ)·u.

    Raises:
        AgentError: Se as dimensões de ξ ou u não batem com o modelo
    """
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    if xi.shape != (model.state_dim,) or u.shape != (model.p,):
        raise AgentError(
            f"{model.kind}: esperado ξ∈R^{model.state_dim}, u∈R^{model.p}; "
            f"recebido {xi.shape}, {u.shape}"
        )
    return model.f(xi) + np.atleast_2d(model.g(xi)) @ u


@dataclass(frozen=True)
class KinematicLayer:
    """Camada de posição ẋ_i = y_i + v_iʳ (forma compacta empilhada)."""

    n_agents: int
    p: int

    def rate(self, outputs: Vector, v_r: Vector) -> Vector:
        expected = self.n_agents * self.p
        if outputs.shape != (expected,) or v_r.shape != (expected,):
            raise AgentError(f"Camada cinemática espera vetores em R^{expected}")
        return outputs + v_r


@dataclass(frozen=True, eq=False)
class PassivitySamples:
    """Trajetória amostrada em grade uniforme para o audit de passividade."""

    t: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    y: np.ndarray
    # ∫(yᵀu - W)dt integrado junto com o estado (opcional)
    supply: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PassivityReport:
    """Resultado de passivity_audit."""

    max_violation: float
    tolerance: float
    passed: bool
    worst_time: Optional[float]
    method: str
    dissipation_semidefinite: bool


def passivity_audit(
    model: AgentModel,
    samples: PassivitySamples,
    c: float = AUDIT_C,
) -> PassivityReport:
    """
    Audita a desigualdade de passividade ao longo de uma trajetória.

    Ṡ é estimada por diferença central de S. Quando a trajetória traz a integral de suprimento,
    a comparação é feita contra a mesma diferença central dessa integral; caso contrário,
    contra -W + yᵀu pontual.

    Args:
        model: Modelo do agente
        samples: Amostras (t, ξ, u, y) em grade uniforme
        c: Constante C da tolerância C·Δ² + 1e-8

    Returns:
        PassivityReport com a maior violação encontrada

    Raises:
        AgentError: Se houver menos de 3 amostras ou a grade não for uniforme
    """
    t = np.asarray(samples.t, dtype=float)
    if t.shape[0] < 3:
        raise AgentError("passivity_audit requer pelo menos 3 amostras")
    steps = np.diff(t)
    delta = float(steps.mean())
    if delta <= 0 or np.max(np.abs(steps - delta)) > 1e-9 * max(1.0, abs(t[-1])):
        raise AgentError("passivity_audit requer amostras em grade uniforme")

    storage = np.array([model.storage(xi) for xi in samples.xi])
    storage_rate = (storage[2:] - storage[:-2]) / (2.0 * delta)

    if samples.supply is not None:
        supply = np.asarray(samples.supply, dtype=float)
        violation = storage_rate - (supply[2:] - supply[:-2]) / (2.0 * delta)
        method = "supply_integral"
    else:
        dissipation = np.array([model.dissipation(xi) for xi in samples.xi[1:-1]])
        power = np.einsum("ij,ij->i", samples.y[1:-1], samples.u[1:-1])
        violation = storage_rate + dissipation - power
        method = "central_difference"

    worst = int(np.argmax(violation))
    max_violation = float(max(violation[worst], 0.0))
    tolerance = c * delta**2 + AUDIT_FLOOR

    return PassivityReport(
        max_violation=max_violation,
        tolerance=tolerance,
        passed=max_violation <= tolerance,
        worst_time=float(t[worst + 1]) if max_violation > 0 else None,
        method=method,
        dissipation_semidefinite=model.dissipation_semidefinite,
    )
