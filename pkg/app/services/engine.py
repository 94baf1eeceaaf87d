"""Integração de passo fixo do laço fechado, monitoramento de Lyapunov e métricas de execução."""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import FormsimError
from app.services.agents import PassivitySamples, passivity_audit
from app.services.controllers import (
    CertificateError,
    ClosedLoop,
    Signals,
    SignMode,
    assemble_closed_loop,
)
from app.services.exosystem import exo_solution

logger = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4")
SMOOTH_MONITOR_TOL = 1e-6
DISCONTINUOUS_MONITOR_FACTOR = 10.0
DEFAULT_VELOCITY_BAND = 0.02

Rhs = Callable[[float, np.ndarray, Optional[np.ndarray]], np.ndarray]


class IntegrationBlowupError(FormsimError):
    """Estado não finito durante a integração; carrega o último registro finito."""

    def __init__(self, message: str, last_record: Optional["TrajectoryRecord"] = None):
        super().__init__(message)
        self.last_record = last_record


@dataclass
class SimState:
    """Instante e vetor de estado concatenado (x, ξ, η, θ, ξ̂, suprimento)."""

    t: float
    vector: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Amostra gravada da trajetória; todas as grandezas de erro derivam do estado e de t."""

    t: float
    z_tilde: np.ndarray
    xi: np.ndarray
    eta_tilde: np.ndarray
    theta_tilde: np.ndarray
    xi_tilde: Optional[np.ndarray]
    V: float
    znorm1: float
    xi_norm2: float
    u: np.ndarray
    flips_total: int
    flips: np.ndarray
    x: np.ndarray
    v_r: np.ndarray
    plant_input: np.ndarray
    y: np.ndarray
    supply: np.ndarray


@dataclass(frozen=True)
class LyapunovReport:
    max_increment: float
    first_violation_time: Optional[float]
    tolerance: float
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


@dataclass
class RunSummary:
    """Resumo de uma execução, serializado em `<nome>_summary.json`."""

    scenario: str
    mode: str
    sign_mode: str
    scheme: str
    dt: float
    t_final: float
    steps: int
    elapsed_s: float
    z_tilde_final_inf: float
    znorm1_final: float
    xi_final_inf: float
    eta_tilde_final_inf: Optional[float]
    v_r_final_max_deviation: Optional[float]
    theta_tilde_initial: Optional[float]
    theta_tilde_final: Optional[float]
    theta_tilde_sup: Optional[float]
    xi_tilde_final_inf: Optional[float]
    position_band: float
    velocity_band: float
    time_to_threshold: Optional[float]
    converged: Optional[bool]
    max_lyapunov_increase: float
    lyapunov_tolerance: float
    lyapunov_first_violation: Optional[float]
    lyapunov_ok: bool
    flips_total: int
    passivity: List[dict] = field(default_factory=list)
    passivity_ok: bool = True
    certificate: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RecordMeta:
    """Estrutura dos vetores gravados (dimensões e índices 1-based dos blocos)."""

    p: int
    n_edges: int
    xi_dims: Tuple[int, ...]
    followers: Tuple[int, ...]
    eta_dim: int
    theta_dims: Tuple[int, ...]
    has_xi_tilde: bool

    @property
    def n_agents(self) -> int:
        return len(self.xi_dims)


def record_meta(loop: ClosedLoop) -> RecordMeta:
    return RecordMeta(
        p=loop.p,
        n_edges=loop.graph.n_edges,
        xi_dims=tuple(agent.state_dim for agent in loop.agents),
        followers=tuple(i + 1 for i in loop.followers) if loop.mode.uses_velocity_model else (),
        eta_dim=loop.reference.q,
        theta_dims=(
            tuple(d.q for d in loop.disturbances) if loop.mode.uses_disturbance_model else ()
        ),
        has_xi_tilde=loop.mode.uses_observer,
    )


@dataclass
class RunResult:
    records: List[TrajectoryRecord]
    summary: RunSummary
    loop: ClosedLoop = field(repr=False)

    @property
    def meta(self) -> RecordMeta:
        return record_meta(self.loop)


def _check_finite(vector: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(vector)):
        raise IntegrationBlowupError(f"Estado não finito em t={t:.6g}")


def step(
    state: SimState,
    rhs: Rhs,
    dt: float,
    scheme: str = "rk4",
    selection: Optional[np.ndarray] = None,
    k1: Optional[np.ndarray] = None,
) -> SimState:
    """
    Avança um passo explícito de tamanho dt.

    A seleção do sinal (modos descontínuos) é mantida constante em todos os estágios.

    Args:
        state: Estado atual
        rhs: Campo vetorial rhs(t, vetor, seleção)
        dt: Passo (> 0)
        scheme: "euler" ou "rk4"
        selection: Seleção do sinal amostrada no início do passo
        k1: Derivada já avaliada em (t, vetor), se disponível

    Raises:
        FormsimError: dt inválido ou esquema desconhecido
        IntegrationBlowupError: Se o novo estado não é finito
    """
    if not dt > 0:
        raise FormsimError(f"dt deve ser positivo (recebido {dt})")
    if scheme not in SCHEMES:
        raise FormsimError(f"Esquema '{scheme}' desconhecido; use {' ou '.join(SCHEMES)}")

    t, y = state.t, state.vector
    if k1 is None:
        k1 = rhs(t, y, selection)

    if scheme == "euler":
        y_next = y + dt * k1
    else:
        half = 0.5 * dt
        k2 = rhs(t + half, y + half * k1, selection)
        k3 = rhs(t + half, y + half * k2, selection)
        k4 = rhs(t + dt, y + dt * k3, selection)
        y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    _check_finite(y_next, t + dt)
    return SimState(t=t + dt, vector=y_next)


def huber_primitive(z: np.ndarray, eps: float) -> np.ndarray:
    """ψ_ε(ζ) = ζ²/(2ε) para |ζ| < ε e |ζ| - ε/2 caso contrário (gradiente = clamp(ζ/ε))."""
    a = np.abs(z)
    return np.where(a < eps, z * z / (2.0 * eps), a - 0.5 * eps)


def lyapunov_value(loop: ClosedLoop, signals: Signals) -> float:
    """
    Função de Lyapunov do modo ativo.

    V = ‖z̃‖₁ (ou Σψ_ε(z̃) em modo smooth) + ΣS_i(ξ_i) + ½‖η̃‖² + ½‖θ̃‖²; no modo com
    observador o termo de θ̃ é substituído por Σ ½·eᵢᵀPᵢeᵢ com eᵢ = (ξ̃ᵢ, θ̃ᵢ).

    Raises:
        CertificateError: No modo com observador sem certificado
    """
    mode = loop.sign_mode
    if mode.variant == "smooth":
        value = float(np.sum(huber_primitive(signals.z_tilde, mode.eps)))
    else:
        value = float(np.sum(np.abs(signals.z_tilde)))

    for i, agent in enumerate(loop.agents):
        value += agent.storage(loop.agent_xi(signals.xi, i))

    value += 0.5 * float(np.sum(signals.eta_tilde**2))

    if loop.mode.uses_observer:
        if loop.certificate is None:
            raise CertificateError("Modo com observador sem certificado de Lyapunov")
        for i, P in enumerate(loop.certificate.P):
            e = np.concatenate([loop.agent_xi(signals.xi_tilde, i), signals.theta_tilde[i]])
            value += 0.5 * float(e @ P @ e)
    else:
        value += 0.5 * sum(float(th @ th) for th in signals.theta_tilde)
    return value


def lyapunov_tolerance(sign_mode: SignMode, dt: float) -> float:
    if sign_mode.discontinuous:
        return DISCONTINUOUS_MONITOR_FACTOR * dt
    return SMOOTH_MONITOR_TOL


def monitor_increments(
    times: Sequence[float], values: Sequence[float], tolerance: float
) -> LyapunovReport:
    """
    Sinaliza incrementos V(t_{k+1}) - V(t_k) acima da tolerância.

    Args:
        times: Instantes das amostras
        values: Valores de V correspondentes (≥ 2 amostras)
        tolerance: Incremento máximo aceito por intervalo

    Returns:
        LyapunovReport com o maior incremento positivo e o instante da primeira violação
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        return LyapunovReport(0.0, None, tolerance, 0)
    increments = np.diff(values)
    violating = np.flatnonzero(increments > tolerance)
    first = float(times[violating[0] + 1]) if violating.size else None
    return LyapunovReport(
        max_increment=float(max(increments.max(), 0.0)),
        first_violation_time=first,
        tolerance=tolerance,
        violations=int(violating.size),
    )


def monitor_lyapunov(
    records: Sequence[TrajectoryRecord], sign_mode: SignMode, dt: float
) -> LyapunovReport:
    """Monitora V nos registros gravados com a tolerância do modo de sinal (10·dt ou 1e-6)."""
    return monitor_increments(
        [r.t for r in records], [r.V for r in records], lyapunov_tolerance(sign_mode, dt)
    )


def _make_record(
    loop: ClosedLoop, signals: Signals, state: np.ndarray, V: float, flips: np.ndarray
) -> TrajectoryRecord:
    theta_tilde = np.concatenate(signals.theta_tilde) if signals.theta_tilde else np.zeros(0)
    return TrajectoryRecord(
        t=signals.t,
        z_tilde=signals.z_tilde.copy(),
        xi=signals.xi.copy(),
        eta_tilde=signals.eta_tilde.reshape(-1).copy(),
        theta_tilde=theta_tilde,
        xi_tilde=None if signals.xi_tilde is None else signals.xi_tilde.copy(),
        V=V,
        znorm1=float(np.sum(np.abs(signals.z_tilde))),
        xi_norm2=float(np.linalg.norm(signals.xi)),
        u=signals.u.reshape(-1).copy(),
        flips_total=int(flips.sum()),
        flips=flips.copy(),
        x=signals.x.copy(),
        v_r=signals.v_r.reshape(-1).copy(),
        plant_input=signals.plant_input.reshape(-1).copy(),
        y=signals.y.reshape(-1).copy(),
        supply=state[loop.layout.supply].copy(),
    )


def _strict(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0.0, 1.0, -1.0)


def integrate(loop: ClosedLoop, dt: float, t_final: float, scheme: str = "rk4", stride: int = 1):
    """
    Integra o laço fechado de 0 a t_final com passo fixo.

    Returns:
        Tupla (registros, maior incremento de V por passo, instante da primeira violação)

    Raises:
        IntegrationBlowupError: Com o último registro finito anexado
    """
    if not dt > 0 or not t_final > 0:
        raise FormsimError(f"dt e t_final devem ser positivos (dt={dt}, t_final={t_final})")
    if stride < 1:
        raise FormsimError(f"stride deve ser ≥ 1 (recebido {stride})")
    if scheme not in SCHEMES:
        raise FormsimError(f"Esquema '{scheme}' desconhecido; use {' ou '.join(SCHEMES)}")

    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        logger.warning("t_final=%g não é múltiplo de dt=%g; usando %d passos", t_final, dt, n_steps)
    tolerance = lyapunov_tolerance(loop.sign_mode, dt)

    state = SimState(0.0, loop.initial_state())
    flips = np.zeros(loop.graph.n_edges * loop.p, dtype=int)
    previous_binary = None
    previous_V = None
    max_increase = 0.0
    first_violation = None
    records: List[TrajectoryRecord] = []
    last_record = None

    for k in range(n_steps + 1):
        t = k * dt
        state.t = t
        selection = loop.select(state.vector) if loop.sign_mode.discontinuous else None
        signals = loop.evaluate(t, state.vector, selection)
        binary = signals.selection if selection is not None else _strict(signals.z_tilde)
        if previous_binary is not None:
            flips += binary != previous_binary
        previous_binary = binary

        V = lyapunov_value(loop, signals)
        if previous_V is not None:
            increase = V - previous_V
            if increase > max_increase:
                max_increase = increase
            if increase > tolerance and first_violation is None:
                first_violation = t
        previous_V = V

        if k % stride == 0 or k == n_steps:
            last_record = _make_record(loop, signals, state.vector, V, flips)
            records.append(last_record)
        if k == n_steps:
            break

        try:
            state = step(state, loop, dt, scheme, selection, k1=loop.derivative(signals))
        except IntegrationBlowupError as e:
            if last_record is None or last_record.t != t:
                last_record = _make_record(loop, signals, state.vector, V, flips)
            logger.error("❌ Integração divergiu em t=%.6g (dt=%g, %s)", t + dt, dt, scheme)
            raise IntegrationBlowupError(str(e), last_record=last_record) from e

    return records, max_increase, first_violation


def _inf(vector: Optional[np.ndarray]) -> Optional[float]:
    if vector is None or vector.size == 0:
        return None
    return float(np.max(np.abs(vector)))


def _audit(loop: ClosedLoop, records: Sequence[TrajectoryRecord]) -> List[dict]:
    if len(records) < 3:
        return []
    t = np.array([r.t for r in records])
    p = loop.p
    reports = []
    for i, agent in enumerate(loop.agents):
        samples = PassivitySamples(
            t=t,
            xi=np.array([loop.agent_xi(r.xi, i) for r in records]),
            u=np.array([r.plant_input[i * p : (i + 1) * p] for r in records]),
            y=np.array([r.y[i * p : (i + 1) * p] for r in records]),
            supply=np.array([r.supply[i] for r in records]),
        )
        report = passivity_audit(agent, samples)
        reports.append({"agent": i + 1, **asdict(report)})
    return reports


def summarize(
    loop: ClosedLoop,
    records: Sequence[TrajectoryRecord],
    dt: float,
    scheme: str,
    max_increase: float,
    first_violation: Optional[float],
    elapsed: float,
) -> RunSummary:
    """Calcula as métricas finais, as faixas de convergência e o audit de passividade."""
    scenario = loop.scenario
    final = records[-1]
    eps = loop.sign_mode.eps or 0.0
    position_band = scenario.position_band or (2.0 * eps + 10.0 * dt)
    velocity_band = scenario.velocity_band or DEFAULT_VELOCITY_BAND

    z_inf = np.array([np.max(np.abs(r.z_tilde)) for r in records])
    time_to_threshold = None
    above = np.flatnonzero(z_inf > position_band)
    if above.size == 0:
        time_to_threshold = records[0].t
    elif above[-1] + 1 < len(records):
        time_to_threshold = records[above[-1] + 1].t

    v_r_dev = None
    if loop.mode.uses_velocity_model:
        v_ref = exo_solution(loop.reference, final.t)[1]
        v_r = final.v_r.reshape(loop.n_agents, loop.p)[loop.followers]
        v_r_dev = float(np.max(np.abs(v_r - v_ref))) if v_r.size else 0.0

    theta_norms = []
    if final.theta_tilde.size:
        theta_norms = [float(np.linalg.norm(r.theta_tilde)) for r in records]

    converged = None
    if loop.mode.claims_formation:
        converged = bool(
            z_inf[-1] <= position_band
            and _inf(final.xi) <= velocity_band
            and (_inf(final.eta_tilde) or 0.0) <= velocity_band
        )

    passivity = _audit(loop, records)
    certificate = None
    if loop.certificate is not None:
        certificate = {
            "gamma": loop.certificate.gamma,
            "max_residual": loop.certificate.max_residual,
        }

    tolerance = lyapunov_tolerance(loop.sign_mode, dt)
    return RunSummary(
        scenario=scenario.name,
        mode=loop.mode.value,
        sign_mode=loop.sign_mode.describe(),
        scheme=scheme,
        dt=dt,
        t_final=final.t,
        steps=int(round(final.t / dt)),
        elapsed_s=round(elapsed, 3),
        z_tilde_final_inf=float(z_inf[-1]),
        znorm1_final=final.znorm1,
        xi_final_inf=_inf(final.xi),
        eta_tilde_final_inf=_inf(final.eta_tilde),
        v_r_final_max_deviation=v_r_dev,
        theta_tilde_initial=theta_norms[0] if theta_norms else None,
        theta_tilde_final=_inf(final.theta_tilde),
        theta_tilde_sup=max(theta_norms) if theta_norms else None,
        xi_tilde_final_inf=_inf(final.xi_tilde),
        position_band=position_band,
        velocity_band=velocity_band,
        time_to_threshold=time_to_threshold,
        converged=converged,
        max_lyapunov_increase=max_increase,
        lyapunov_tolerance=tolerance,
        lyapunov_first_violation=first_violation,
        lyapunov_ok=first_violation is None,
        flips_total=final.flips_total,
        passivity=passivity,
        passivity_ok=all(r["passed"] for r in passivity),
        certificate=certificate,
    )


def run(scenario, loop: Optional[ClosedLoop] = None) -> RunResult:
    """
    Executa um cenário validado do início ao fim.

    Args:
        scenario: Cenário (ver scenario_loader.Scenario)
        loop: Laço já montado (opcional)

    Returns:
        RunResult com os registros na cadência configurada e o resumo

    Raises:
        FormsimError: Erros de validação ou de integração
    """
    loop = loop or assemble_closed_loop(scenario)
    integration = scenario.integration
    logger.info(
        "▶ Iniciando '%s' (%s, %s, %s, dt=%g, T=%g)",
        scenario.name,
        scenario.mode.value,
        loop.sign_mode.describe(),
        integration.scheme,
        integration.dt,
        integration.t_final,
    )
    started = time.perf_counter()
    records, max_increase, first_violation = integrate(
        loop, integration.dt, integration.t_final, integration.scheme, integration.stride
    )
    elapsed = time.perf_counter() - started

    summary = summarize(
        loop, records, integration.dt, integration.scheme, max_increase, first_violation, elapsed
    )
    logger.info(
        "✅ '%s' concluído em %.2fs: ‖z̃‖∞=%.3e, ‖ξ‖∞=%.3e, flips=%d",
        scenario.name,
        elapsed,
        summary.z_tilde_final_inf,
        summary.xi_final_inf,
        summary.flips_total,
    )
    if not summary.lyapunov_ok:
        logger.warning(
            "⚠️ V aumentou %.3e (> %.1e) a partir de t=%.4g",
            max_increase,
            summary.lyapunov_tolerance,
            first_violation,
        )
    return RunResult(records=records, summary=summary, loop=loop)
