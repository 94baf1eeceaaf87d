"""
Leis de controle: controle de formação binário, modelos internos de velocidade e distúrbio,
compensador baseado em observador e montagem do laço fechado.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag, solve_continuous_lyapunov

from app.core.errors import FormsimError
from app.services.agents import AgentModel, KinematicLayer
from app.services.exosystem import (
    ExosystemSpec,
    exo_solution,
    is_observable,
    is_skew,
    stack_exosystems,
)
from app.services.graphalg import Graph, apply_B_kron, apply_BT_kron, is_tree

if TYPE_CHECKING:
    from app.services.scenario_loader import Scenario

logger = logging.getLogger(__name__)

HURWITZ_MARGIN = 1e-9
CERTIFICATE_RESIDUAL_TOL = 1e-8
NONSINGULAR_RTOL = 1e-10


class ControllerError(FormsimError):
    """Erro de configuração do controlador (ε inválido, dimensões, modo não suportado)."""

    pass


class HypothesisError(ControllerError):
    """Hipótese do modo de controle violada; a mensagem nomeia a hipótese."""

    pass


class CertificateError(ControllerError):
    """Matriz de erro do observador não é Hurwitz ou o certificado não pôde ser obtido."""

    pass


class ControlMode(str, Enum):
    KNOWN_VELOCITY = "known_velocity"
    LEADER_FOLLOWER = "leader_follower"
    # Caso I: velocidade e distúrbios constantes
    LEADER_FOLLOWER_CONST_DIST = "leader_follower_const_dist"
    # Caso II: distúrbio harmônico com velocidade conhecida, grafo árvore
    KNOWN_VELOCITY_HARMONIC_DIST = "known_velocity_harmonic_dist"
    LEADER_FOLLOWER_DISTURBANCE = "leader_follower_disturbance"
    OBSERVER_BASED = "observer_based"

    @property
    def uses_velocity_model(self) -> bool:
        return self not in (ControlMode.KNOWN_VELOCITY, ControlMode.KNOWN_VELOCITY_HARMONIC_DIST)

    @property
    def uses_disturbance_model(self) -> bool:
        return self not in (ControlMode.KNOWN_VELOCITY, ControlMode.LEADER_FOLLOWER)

    @property
    def uses_observer(self) -> bool:
        return self is ControlMode.OBSERVER_BASED

    @property
    def claims_formation(self) -> bool:
        """False apenas para o modo geral com distúrbio, em que só ξ → 0 é garantido."""
        return self is not ControlMode.LEADER_FOLLOWER_DISTURBANCE


# ---------------------------------------------------------------------------
# Seleção do sinal
# ---------------------------------------------------------------------------


@dataclass
class SignMode:
    """
    Seleção da função sinal sobre z̃.

    - strict: sign(0) = +1
    - hysteresis(ε): latch por componente, só troca ao cruzar ±ε contra o sinal travado
    - smooth(ε): clamp(ζ/ε, -1, 1)
    """

    variant: str = "smooth"
    eps: Optional[float] = 1e-2
    latch: Optional[np.ndarray] = field(default=None, repr=False)

    VARIANTS = ("strict", "hysteresis", "smooth")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ControllerError(
                f"sign_mode '{self.variant}' desconhecido; use um de {', '.join(self.VARIANTS)}"
            )
        if self.variant == "strict":
            self.eps = None
        elif self.eps is None or not self.eps > 0:
            raise ControllerError(f"sign_mode {self.variant} requer eps > 0 (recebido {self.eps})")

    @classmethod
    def strict(cls) -> "SignMode":
        return cls("strict", None)

    @classmethod
    def hysteresis(cls, eps: float) -> "SignMode":
        return cls("hysteresis", eps)

    @classmethod
    def smooth(cls, eps: float) -> "SignMode":
        return cls("smooth", eps)

    @property
    def discontinuous(self) -> bool:
        return self.variant != "smooth"

    def fresh(self) -> "SignMode":
        """Cópia sem latch, para uma nova execução."""
        return SignMode(self.variant, self.eps)

    def describe(self) -> str:
        return self.variant if self.eps is None else f"{self.variant}(eps={self.eps:g})"


def _strict_sign(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0.0, 1.0, -1.0)


def sign_vec(z_tilde: np.ndarray, mode: SignMode, update: bool = True) -> np.ndarray:
    """
    Aplica a seleção do sinal componente a componente.

    Em modo hysteresis o latch é inicializado com o sinal estrito da primeira entrada e
    atualizado em `mode` (efeito colateral) quando `update` é True.

    Args:
        z_tilde: Vetor de erros de posição relativa
        mode: Seleção do sinal (com o latch, se houver)
        update: Se False, consulta o latch sem modificá-lo

    Returns:
        Vetor com o mesmo comprimento de z_tilde
    """
    z = np.asarray(z_tilde, dtype=float)
    if mode.variant == "strict":
        return _strict_sign(z)
    if mode.variant == "smooth":
        return np.clip(z / mode.eps, -1.0, 1.0)

    latch = mode.latch
    if latch is None or latch.shape != z.shape:
        latch = _strict_sign(z)
    else:
        latch = latch.copy()
        latch[z > mode.eps] = 1.0
        latch[z < -mode.eps] = -1.0
    if update:
        mode.latch = latch
    return latch.copy()


def formation_control(graph: Graph, p: int, z_tilde: np.ndarray, mode: SignMode) -> np.ndarray:
    """
    Controle binário u = -(B ⊗ I_p)·sign(z̃).

    Raises:
        ControllerError: Se z̃ não tem comprimento M·p
    """
    z = np.asarray(z_tilde, dtype=float)
    if z.shape != (graph.n_edges * p,):
        raise ControllerError(
            f"z_tilde deve ter comprimento {graph.n_edges * p}, recebido {z.shape}"
        )
    return -apply_B_kron(graph, p, sign_vec(z, mode))


# ---------------------------------------------------------------------------
# Modelos internos e observador
# ---------------------------------------------------------------------------


def velocity_im_rhs(
    eta_i: np.ndarray,
    Phi: np.ndarray,
    Gamma_v: np.ndarray,
    u_tilde_i: np.ndarray,
    *,
    agent: int = 1,
    leader: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Modelo interno da velocidade de referência de um seguidor.

    Returns:
        Tupla (η̇_i, v_iʳ) com η̇_i = Φη_i + Γᵛᵀũ_i e v_iʳ = Γᵛη_i

    Raises:
        ControllerError: Se chamado para o líder (que conhece v* e não tem η)
    """
    if agent == leader:
        raise ControllerError(
            f"Agente {agent + 1} é o líder e não possui modelo interno de velocidade"
        )
    if Gamma_v.shape[1] != eta_i.shape[0] or Gamma_v.shape[0] != u_tilde_i.shape[0]:
        raise ControllerError(
            f"Dimensões incompatíveis: Gamma_v {Gamma_v.shape}, eta {eta_i.shape}, "
            f"u {u_tilde_i.shape}"
        )
    return Phi @ eta_i + Gamma_v.T @ u_tilde_i, Gamma_v @ eta_i


def disturbance_im_rhs(
    theta_i: np.ndarray,
    Phi_d_i: np.ndarray,
    Gamma_d_i: np.ndarray,
    u_check_i: np.ndarray,
    G_d_i: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Modelo interno do distúrbio casado de um agente (líder incluído).

    Args:
        theta_i: Estado do modelo interno
        Phi_d_i: Matriz do exossistema do distúrbio
        Gamma_d_i: Matriz de saída do distúrbio
        u_check_i: Entrada ǔ_i (h(ξ_i), ou y_i - ξ̂_i com observador)
        G_d_i: Ganho de injeção; (Γᵈ_i)ᵀ quando omitido

    Returns:
        Tupla (θ̇_i, d̂_i) com d̂_i = Γᵈ_iθ_i
    """
    G = Gamma_d_i.T if G_d_i is None else G_d_i
    if G.shape != (theta_i.shape[0], u_check_i.shape[0]) or Phi_d_i.shape[0] != theta_i.shape[0]:
        raise ControllerError(
            f"Dimensões incompatíveis: theta {theta_i.shape}, Phi_d {Phi_d_i.shape}, "
            f"G_d {G.shape}, u_check {u_check_i.shape}"
        )
    return Phi_d_i @ theta_i + G @ u_check_i, Gamma_d_i @ theta_i


def observer_rhs(
    model: AgentModel,
    xi_hat_i: np.ndarray,
    y_i: np.ndarray,
    u_i: np.ndarray,
    theta_i: np.ndarray,
    H_i: np.ndarray,
    Gamma_d_i: np.ndarray,
) -> np.ndarray:
    """
    Observador do estado do agente: ξ̂̇ = f(y) + g·(u + Γᵈθ) + H·(y - ξ̂).

    Raises:
        ControllerError: Se o agente não tem g constante ou y ≠ ξ
    """
    if model.g_constant is None or not model.output_is_state:
        raise ControllerError(
            f"Observador requer g constante e h(ξ) = ξ (agente '{model.kind}' não suportado)"
        )
    return model.f(y_i) + model.g_constant @ (u_i + Gamma_d_i @ theta_i) + H_i @ (y_i - xi_hat_i)


@dataclass(frozen=True, eq=False)
class ObserverCertificate:
    """Matrizes P_i ≻ 0 com AᵢᵀPᵢ + PᵢAᵢ = -2·diag(I, γI) e o γ comum."""

    P: Tuple[np.ndarray, ...]
    gamma: float
    residuals: Tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def observer_error_matrix(
    H: np.ndarray, G_d: np.ndarray, Phi_d: np.ndarray, g: np.ndarray, Gamma_d: np.ndarray
) -> np.ndarray:
    """A = [[-H, -gΓᵈ], [Gᵈ, Φᵈ]] sobre o erro (ξ̃, θ̃)."""
    return np.block([[-H, -g @ Gamma_d], [G_d, Phi_d]])


def _as_list(value, n: Optional[int] = None) -> List[np.ndarray]:
    if isinstance(value, np.ndarray) and value.ndim == 2:
        return [value] * (n or 1)
    return [np.atleast_2d(np.asarray(v, dtype=float)) for v in value]


def solve_observer_certificate(H, G_d, Phi_d, g, Gamma_d) -> ObserverCertificate:
    """
    Calcula o certificado de Lyapunov do erro de estimação de cada agente.

    Aceita matrizes únicas ou listas (uma por agente). γ = max(1, maxᵢ ‖Γᵈᵢᵀ Γᵈᵢ‖₂) é comum a
    todos os agentes.

    Raises:
        CertificateError: Se algum Aᵢ não é Hurwitz (nomeia o autovalor)
            ou Pᵢ não é definida positiva
    """
    gammas = _as_list(Gamma_d)
    n_agents = len(gammas)
    Hs, Gs, Phis, gs = (_as_list(m, n_agents) for m in (H, G_d, Phi_d, g))
    if not len(Hs) == len(Gs) == len(Phis) == len(gs) == n_agents:
        raise ControllerError(
            "solve_observer_certificate: listas de ganhos com tamanhos diferentes"
        )

    gamma = max(1.0, max(float(np.linalg.norm(G.T @ G, 2)) for G in gammas))

    certificates, residuals = [], []
    for i, (H_i, G_i, Phi_i, g_i, Gamma_i) in enumerate(zip(Hs, Gs, Phis, gs, gammas), start=1):
        try:
            A = observer_error_matrix(H_i, G_i, Phi_i, g_i, Gamma_i)
        except ValueError as e:
            raise ControllerError(f"Agente {i}: blocos da matriz de erro incompatíveis ({e})")
        eigenvalues = np.linalg.eigvals(A)
        worst = eigenvalues[np.argmax(eigenvalues.real)]
        if worst.real >= -HURWITZ_MARGIN:
            raise CertificateError(
                f"Agente {i}: matriz de erro do observador não é Hurwitz "
                f"(autovalor {worst.real:.4g}{worst.imag:+.4g}j); revise H e G_d"
            )

        n, q = H_i.shape[0], Phi_i.shape[0]
        Q = 2.0 * block_diag(np.eye(n), gamma * np.eye(q))
        P = solve_continuous_lyapunov(A.T, -Q)
        P = 0.5 * (P + P.T)
        residual = float(np.linalg.norm(A.T @ P + P @ A + Q))
        if residual > CERTIFICATE_RESIDUAL_TOL:
            raise CertificateError(f"Agente {i}: resíduo da equação de Lyapunov {residual:.3e}")
        min_eig = float(np.linalg.eigvalsh(P).min())
        if min_eig <= 0.0:
            raise CertificateError(f"Agente {i}: P não é definida positiva (λ_min = {min_eig:.3e})")

        logger.debug("Certificado do agente %d: λ_min(P)=%.4g resíduo=%.2e", i, min_eig, residual)
        certificates.append(P)
        residuals.append(residual)

    return ObserverCertificate(P=tuple(certificates), gamma=gamma, residuals=tuple(residuals))


# ---------------------------------------------------------------------------
# Laço fechado
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateLayout:
    """Fatias nomeadas do vetor de estado concatenado."""

    x: slice
    xi: slice
    eta: slice
    theta: slice
    xi_hat: slice
    supply: slice
    size: int


@dataclass
class ControllerState:
    """Estados internos do controlador extraídos do vetor concatenado."""

    eta: np.ndarray  # (seguidores, q); vazio quando a velocidade é conhecida
    theta: Tuple[np.ndarray, ...]
    xi_hat: Optional[np.ndarray]
    latch: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Signals:
    """Sinais instantâneos do laço fechado num ponto (t, estado)."""

    t: float
    x: np.ndarray
    xi: np.ndarray
    z_tilde: np.ndarray
    selection: np.ndarray
    u_tilde: np.ndarray
    u: np.ndarray
    disturbance: np.ndarray
    y: np.ndarray
    v_ref: np.ndarray
    v_r: np.ndarray
    w_v: np.ndarray
    eta_tilde: np.ndarray
    theta_tilde: Tuple[np.ndarray, ...]
    xi_tilde: Optional[np.ndarray]
    controller: ControllerState

    @property
    def plant_input(self) -> np.ndarray:
        return self.u + self.disturbance


def check_hypotheses(scenario: "Scenario") -> None:
    """
    Verifica as hipóteses do modo de controle do cenário.

    Raises:
        HypothesisError: Com o nome do modo e da hipótese violada
    """
    mode = scenario.mode
    label = mode.value
    reference = scenario.reference
    disturbances = scenario.disturbances or ()

    if reference.p != scenario.p:
        raise HypothesisError(f"{label}: reference output must be in R^{scenario.p}")
    if not is_skew(reference.Phi):
        raise HypothesisError(f"{label} requires skew-symmetric reference Phi")
    if scenario.observer is not None and not mode.uses_observer:
        raise HypothesisError(f"{label} takes no observer gains (G_d = Gamma_d^T is fixed)")

    if mode.uses_velocity_model and not is_observable(reference.Gamma, reference.Phi):
        raise HypothesisError(f"{label} requires (Gamma_v, Phi) observable")

    if mode.uses_disturbance_model:
        if len(disturbances) != scenario.n_agents:
            raise HypothesisError(f"{label} requires one disturbance exosystem per agent")
        for i, spec in enumerate(disturbances, start=1):
            if spec.p != scenario.p:
                raise HypothesisError(
                    f"{label}: disturbance of agent {i} must be in R^{scenario.p}"
                )
            if not is_skew(spec.Phi):
                raise HypothesisError(f"{label} requires skew-symmetric Phi_d (agent {i})")
    elif disturbances:
        raise HypothesisError(f"{label} declares no disturbance model; remove the disturbances")

    if mode is ControlMode.LEADER_FOLLOWER_CONST_DIST:
        if np.any(reference.Phi):
            raise HypothesisError("Case I requires constant reference velocity (Phi = 0)")
        if not _square_nonsingular(reference.Gamma):
            raise HypothesisError("Case I requires square nonsingular Gamma_v")
        for i, spec in enumerate(disturbances, start=1):
            if np.any(spec.Phi):
                raise HypothesisError(
                    f"Case I requires constant disturbance (Phi_d = 0, agent {i})"
                )
            if not _square_nonsingular(spec.Gamma):
                raise HypothesisError(f"Case I requires square nonsingular Gamma_d (agent {i})")

    if mode is ControlMode.KNOWN_VELOCITY_HARMONIC_DIST:
        if not is_tree(scenario.graph):
            raise HypothesisError("Case II requires tree graph")
        for i, spec in enumerate(disturbances, start=1):
            if not is_observable(spec.Gamma, spec.Phi):
                raise HypothesisError(f"Case II requires (Gamma_d, Phi_d) observable (agent {i})")

    if mode is ControlMode.OBSERVER_BASED:
        if scenario.observer is None:
            raise HypothesisError("observer_based requires observer gains H")
        for i, (agent, spec) in enumerate(zip(scenario.agents, disturbances), start=1):
            if agent.g_constant is None or not agent.output_is_state:
                raise HypothesisError(
                    "observer_based requires constant g and output y = xi "
                    f"(agent {i}, '{agent.kind}')"
                )
            if not agent.dissipation_dominates_quadratic:
                raise HypothesisError(f"observer_based requires W(xi) >= |xi|^2 (agent {i})")
            if not is_observable(spec.Gamma, spec.Phi):
                raise HypothesisError(
                    f"observer_based requires (Gamma_d, Phi_d) observable (agent {i})"
                )


def _square_nonsingular(matrix: np.ndarray) -> bool:
    if matrix.shape[0] != matrix.shape[1]:
        return False
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    return bool(singular_values.min() > NONSINGULAR_RTOL * max(1.0, singular_values.max()))


class ClosedLoop:
    """
    Avaliador do campo vetorial do laço fechado sobre o estado concatenado
    (x, ξ, η, θ, ξ̂, integral de suprimento).

    Os exossistemas são avaliados em forma fechada em t e não fazem parte do estado.
    """

    def __init__(self, scenario: "Scenario", certificate: Optional[ObserverCertificate] = None):
        self.scenario = scenario
        self.graph = scenario.graph
        self.p = scenario.p
        self.n_agents = scenario.n_agents
        self.mode = scenario.mode
        self.agents = tuple(scenario.agents)
        self.sign_mode = scenario.sign_mode.fresh()
        self.leader = scenario.leader
        self.followers = [i for i in range(self.n_agents) if i != self.leader]
        self.z_star = scenario.formation.flat()
        self.certificate = certificate
        self.kinematics = KinematicLayer(scenario.n_agents, scenario.p)

        self.reference = scenario.reference
        self.disturbances = tuple(scenario.disturbances or ())
        self.exosystem = stack_exosystems((self.reference,) + self.disturbances)
        self._wd_offsets = np.cumsum([self.reference.q] + [d.q for d in self.disturbances])

        dims = [agent.state_dim for agent in self.agents]
        self._xi_offsets = np.concatenate([[0], np.cumsum(dims)])
        self._theta_offsets = np.concatenate([[0], np.cumsum([d.q for d in self.disturbances])])
        if self.mode.uses_observer:
            self.H = tuple(scenario.observer.H)
            self.G_d = tuple(scenario.observer.G_d)
        else:
            self.H, self.G_d = (), tuple(d.Gamma.T for d in self.disturbances)

        N, p = self.n_agents, self.p
        n_xi = int(self._xi_offsets[-1])
        n_eta = len(self.followers) * self.reference.q if self.mode.uses_velocity_model else 0
        n_theta = int(self._theta_offsets[-1]) if self.mode.uses_disturbance_model else 0
        n_hat = n_xi if self.mode.uses_observer else 0
        edges = np.cumsum([0, N * p, n_xi, n_eta, n_theta, n_hat, N])
        self.layout = StateLayout(
            x=slice(edges[0], edges[1]),
            xi=slice(edges[1], edges[2]),
            eta=slice(edges[2], edges[3]),
            theta=slice(edges[3], edges[4]),
            xi_hat=slice(edges[4], edges[5]),
            supply=slice(edges[5], edges[6]),
            size=int(edges[6]),
        )

    # -- utilitários de acesso ------------------------------------------------

    def agent_xi(self, xi: np.ndarray, i: int) -> np.ndarray:
        return xi[self._xi_offsets[i] : self._xi_offsets[i + 1]]

    def initial_state(self) -> np.ndarray:
        s = self.scenario
        state = np.zeros(self.layout.size)
        state[self.layout.x] = np.asarray(s.x0, dtype=float).reshape(-1)
        state[self.layout.xi] = np.concatenate([np.asarray(v, dtype=float) for v in s.xi0])
        if self.mode.uses_velocity_model:
            state[self.layout.eta] = np.concatenate(
                [np.asarray(s.eta0[i], dtype=float) for i in self.followers]
            )
        if self.mode.uses_disturbance_model:
            state[self.layout.theta] = np.concatenate(
                [np.asarray(v, dtype=float) for v in s.theta0]
            )
        if self.mode.uses_observer:
            state[self.layout.xi_hat] = np.concatenate(
                [np.asarray(v, dtype=float) for v in s.xi_hat0]
            )
        return state

    def z_tilde(self, state: np.ndarray) -> np.ndarray:
        return apply_BT_kron(self.graph, self.p, state[self.layout.x]) - self.z_star

    def select(self, state: np.ndarray) -> np.ndarray:
        """Amostra a seleção do sinal no início de um passo (atualiza o latch)."""
        return sign_vec(self.z_tilde(state), self.sign_mode, update=True)

    # -- avaliação -------------------------------------------------------------

    def evaluate(
        self, t: float, state: np.ndarray, selection: Optional[np.ndarray] = None
    ) -> Signals:
        """
        Calcula todos os sinais do laço no ponto (t, estado).

        Args:
            t: Instante
            state: Vetor de estado concatenado
            selection: Seleção do sinal mantida do início do passo (modos descontínuos);
                recalculada a partir do estado quando omitida
        """
        N, p, L = self.n_agents, self.p, self.layout
        w, exo_out = exo_solution(self.exosystem, t)
        q_v = self.reference.q
        w_v = w[:q_v]
        v_ref = exo_out[:p]
        disturbance = exo_out[p:].reshape(N, p) if self.disturbances else np.zeros((N, p))

        x = state[L.x]
        xi = state[L.xi]
        z = apply_BT_kron(self.graph, p, x) - self.z_star
        if selection is None:
            selection = sign_vec(z, self.sign_mode, update=False)
        u_tilde = (-apply_B_kron(self.graph, p, selection)).reshape(N, p)

        y = np.stack([agent.h(self.agent_xi(xi, i)) for i, agent in enumerate(self.agents)])

        v_r = np.tile(v_ref, (N, 1))
        eta = np.zeros((0, q_v))
        if self.mode.uses_velocity_model:
            eta = state[L.eta].reshape(len(self.followers), q_v)
            for j, i in enumerate(self.followers):
                v_r[i] = self.reference.Gamma @ eta[j]
        eta_tilde = eta - w_v

        theta = ()
        if self.mode.uses_disturbance_model:
            theta_block = state[L.theta]
            theta = tuple(
                theta_block[self._theta_offsets[i] : self._theta_offsets[i + 1]]
                for i in range(len(self.disturbances))
            )
        theta_tilde = tuple(
            th - w[self._wd_offsets[i] : self._wd_offsets[i + 1]] for i, th in enumerate(theta)
        )
        d_hat = np.zeros((N, p))
        for i, th in enumerate(theta):
            d_hat[i] = self.disturbances[i].Gamma @ th
        u = u_tilde - d_hat

        xi_hat = state[L.xi_hat] if self.mode.uses_observer else None
        xi_tilde = xi - xi_hat if xi_hat is not None else None

        return Signals(
            t=t,
            x=x,
            xi=xi,
            z_tilde=z,
            selection=selection,
            u_tilde=u_tilde,
            u=u,
            disturbance=disturbance,
            y=y,
            v_ref=v_ref,
            v_r=v_r,
            w_v=w_v,
            eta_tilde=eta_tilde,
            theta_tilde=theta_tilde,
            xi_tilde=xi_tilde,
            controller=ControllerState(
                eta=eta, theta=theta, xi_hat=xi_hat, latch=self.sign_mode.latch
            ),
        )

    def derivative(self, signals: Signals) -> np.ndarray:
        """Campo vetorial do laço fechado a partir dos sinais já avaliados."""
        L = self.layout
        out = np.empty(L.size)
        out[L.x] = self.kinematics.rate(signals.y.reshape(-1), signals.v_r.reshape(-1))

        plant_input = signals.plant_input
        xi_dot = []
        supply_dot = np.empty(self.n_agents)
        for i, agent in enumerate(self.agents):
            xi_i = self.agent_xi(signals.xi, i)
            xi_dot.append(agent.f(xi_i) + np.atleast_2d(agent.g(xi_i)) @ plant_input[i])
            supply_dot[i] = float(signals.y[i] @ plant_input[i]) - agent.dissipation(xi_i)
        out[L.xi] = np.concatenate(xi_dot)
        out[L.supply] = supply_dot

        if self.mode.uses_velocity_model:
            eta_dot = [
                velocity_im_rhs(
                    signals.controller.eta[j],
                    self.reference.Phi,
                    self.reference.Gamma,
                    signals.u_tilde[i],
                    agent=i,
                    leader=self.leader,
                )[0]
                for j, i in enumerate(self.followers)
            ]
            out[L.eta] = np.concatenate(eta_dot)

        if self.mode.uses_disturbance_model:
            theta_dot, hat_dot = [], []
            for i, spec in enumerate(self.disturbances):
                theta_i = signals.controller.theta[i]
                if self.mode.uses_observer:
                    xi_hat_i = self.agent_xi(signals.controller.xi_hat, i)
                    u_check = signals.y[i] - xi_hat_i
                    hat_dot.append(
                        observer_rhs(
                            self.agents[i],
                            xi_hat_i,
                            signals.y[i],
                            signals.u[i],
                            theta_i,
                            self.H[i],
                            spec.Gamma,
                        )
                    )
                else:
                    u_check = signals.y[i]
                theta_dot.append(
                    disturbance_im_rhs(theta_i, spec.Phi, spec.Gamma, u_check, self.G_d[i])[0]
                )
            out[L.theta] = np.concatenate(theta_dot)
            if hat_dot:
                out[L.xi_hat] = np.concatenate(hat_dot)

        return out

    def __call__(
        self, t: float, state: np.ndarray, selection: Optional[np.ndarray] = None
    ) -> np.ndarray:
        return self.derivative(self.evaluate(t, state, selection))


def assemble_closed_loop(scenario: "Scenario") -> ClosedLoop:
    """
    Verifica as hipóteses do modo e monta o avaliador do laço fechado.

    No modo com observador o certificado de Lyapunov é resolvido aqui e guardado no laço.

    Raises:
        HypothesisError: Hipótese do modo violada
        CertificateError: Matriz de erro do observador não Hurwitz
    """
    check_hypotheses(scenario)

    certificate = None
    if scenario.mode.uses_observer:
        certificate = solve_observer_certificate(
            scenario.observer.H,
            scenario.observer.G_d,
            [d.Phi for d in scenario.disturbances],
            [a.g_constant for a in scenario.agents],
            [d.Gamma for d in scenario.disturbances],
        )
        logger.info(
            "Certificado do observador: γ=%.4g, resíduo máximo %.2e",
            certificate.gamma,
            certificate.max_residual,
        )

    loop = ClosedLoop(scenario, certificate)
    logger.debug("Laço fechado '%s' montado: %d estados", scenario.mode.value, loop.layout.size)
    return loop


def observer_gains(
    H: Sequence, G_d: Optional[Sequence], disturbances: Sequence[ExosystemSpec]
) -> Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]:
    """Normaliza os ganhos do observador por agente; G_d padrão é (Γᵈ_i)ᵀ."""
    n = len(disturbances)
    Hs = _as_list(np.asarray(H, dtype=float), n) if np.ndim(H) == 2 else _as_list(H)
    if G_d is None:
        Gs = [d.Gamma.T for d in disturbances]
    else:
        Gs = _as_list(np.asarray(G_d, dtype=float), n) if np.ndim(G_d) == 2 else _as_list(G_d)
    if len(Hs) != n or len(Gs) != n:
        raise ControllerError(f"Ganhos do observador devem ser informados para {n} agentes")
    return tuple(Hs), tuple(Gs)
