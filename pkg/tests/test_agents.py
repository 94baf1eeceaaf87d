"""Testes dos modelos de agente estritamente passivos e do audit de passividade."""

import numpy as np
import pytest

from app.services.agents import (
    AgentError,
    AgentModel,
    CubicDampingAgent,
    KinematicLayer,
    LinearPassiveAgent,
    PassivityError,
    PassivitySamples,
    agent_rhs,
    passivity_audit,
)


def test_linear_agent_certificate():
    """Testa o agente padrão f = -ξ, g = I."""
    agent = LinearPassiveAgent(p=2)

    assert agent.state_dim == 2
    assert agent.output_is_state
    assert np.array_equal(agent.g_constant, np.eye(2))
    assert agent.dissipation_dominates_quadratic
    assert not agent.dissipation_semidefinite


def test_linear_agent_weak_damping_does_not_dominate_quadratic():
    """Testa a flag W ≥ ‖ξ‖² com a/b < 1."""
    agent = LinearPassiveAgent(p=2, a=0.5, b=1.0)

    assert not agent.dissipation_dominates_quadratic


def test_observer_scenario_agent_dominates_quadratic():
    """Testa f = -30ξ, g = 10I (W = 3‖ξ‖²)."""
    agent = LinearPassiveAgent(p=2, a=30.0, b=10.0)

    assert agent.dissipation_dominates_quadratic
    assert agent.storage(np.array([1.0, 1.0])) == pytest.approx(0.1)


def test_agent_rhs_values():
    agent = LinearPassiveAgent(p=2, a=2.0, b=3.0)

    rhs = agent_rhs(agent, np.array([1.0, -1.0]), np.array([0.5, 0.0]))

    assert np.allclose(rhs, [-2.0 + 1.5, 2.0])


def test_agent_rhs_dimension_mismatch():
    agent = LinearPassiveAgent(p=2)

    with pytest.raises(AgentError):
        agent_rhs(agent, np.zeros(3), np.zeros(2))


def test_invalid_linear_parameters():
    with pytest.raises(AgentError):
        LinearPassiveAgent(p=2, a=0.0)
    with pytest.raises(AgentError):
        LinearPassiveAgent(p=2, b=-1.0)


def test_cubic_damping_agent():
    """Testa o agente não linear com amortecimento cúbico."""
    agent = CubicDampingAgent(p=2, a=1.0, c=2.0, b=1.0)
    xi = np.array([0.5, -1.0])

    assert agent.kind == "cubic_damping"
    assert agent.dissipation(xi) == pytest.approx(1.25 + 2.0 * (0.0625 + 1.0))
    assert np.allclose(agent_rhs(agent, xi, np.zeros(2)), -xi - 2.0 * xi**3)


def test_non_passive_model_is_rejected():
    """Testa que um certificado falso (W maior do que a dissipação real) é rejeitado."""
    with pytest.raises(PassivityError, match="desigualdade"):
        AgentModel(
            kind="fake",
            state_dim=1,
            p=1,
            f=lambda xi: -xi,
            g=lambda xi: np.eye(1),
            h=lambda xi: xi,
            storage=lambda xi: 0.5 * float(xi @ xi),
            dissipation=lambda xi: 5.0 * float(xi @ xi),
            storage_gradient=lambda xi: xi,
        )


def test_rank_deficient_input_matrix_is_rejected():
    with pytest.raises(PassivityError, match="posto"):
        AgentModel(
            kind="degenerate",
            state_dim=2,
            p=2,
            f=lambda xi: -xi,
            g=lambda xi: np.array([[1.0, 1.0], [1.0, 1.0]]),
            h=lambda xi: xi,
            storage=lambda xi: 0.5 * float(xi @ xi),
            dissipation=lambda xi: float(xi @ xi),
            storage_gradient=lambda xi: xi,
        )


def test_nonzero_equilibrium_is_rejected():
    with pytest.raises(PassivityError, match="f\\(0\\)"):
        AgentModel(
            kind="biased",
            state_dim=1,
            p=1,
            f=lambda xi: -xi + 1.0,
            g=lambda xi: np.eye(1),
            h=lambda xi: xi,
            storage=lambda xi: 0.5 * float(xi @ xi),
            dissipation=lambda xi: float(xi @ xi),
            storage_gradient=lambda xi: xi,
        )


def test_audit_passes_on_free_decay():
    """Testa o audit por diferença central numa trajetória exata ξ(t) = e^{-t}ξ0."""
    agent = LinearPassiveAgent(p=2)
    t = np.arange(201) * 0.01
    xi = np.exp(-t)[:, None] * np.array([1.0, 0.5])

    report = passivity_audit(agent, PassivitySamples(t=t, xi=xi, u=np.zeros_like(xi), y=xi))

    assert report.passed
    assert report.method == "central_difference"


def test_audit_flags_energy_growth():
    """Testa que ξ crescente sem entrada viola a desigualdade."""
    agent = LinearPassiveAgent(p=2)
    t = np.arange(201) * 0.01
    xi = np.exp(t)[:, None] * np.array([1.0, 0.5])

    report = passivity_audit(agent, PassivitySamples(t=t, xi=xi, u=np.zeros_like(xi), y=xi))

    assert not report.passed
    assert report.max_violation > report.tolerance
    assert report.worst_time is not None


def test_audit_with_supply_integral():
    """Testa o audit contra a integral de suprimento ∫(yᵀu - W)dt."""
    agent = LinearPassiveAgent(p=1)
    t = np.arange(101) * 0.01
    xi = np.exp(-t)[:, None]
    # S(t) - S(0) = ∫ -W dt para u = 0
    supply = 0.5 * np.exp(-2 * t) - 0.5

    report = passivity_audit(
        agent, PassivitySamples(t=t, xi=xi, u=np.zeros_like(xi), y=xi, supply=supply)
    )

    assert report.passed
    assert report.method == "supply_integral"
    assert report.tolerance == pytest.approx(1e-4 + 1e-8)


def test_audit_requires_three_samples():
    agent = LinearPassiveAgent(p=1)
    xi = np.zeros((2, 1))

    with pytest.raises(AgentError, match="3 amostras"):
        passivity_audit(agent, PassivitySamples(t=np.array([0.0, 0.1]), xi=xi, u=xi, y=xi))


def test_audit_requires_uniform_grid():
    agent = LinearPassiveAgent(p=1)
    xi = np.zeros((3, 1))

    with pytest.raises(AgentError, match="uniforme"):
        passivity_audit(agent, PassivitySamples(t=np.array([0.0, 0.1, 0.3]), xi=xi, u=xi, y=xi))


def test_kinematic_layer_rate():
    layer = KinematicLayer(n_agents=2, p=2)

    rate = layer.rate(np.array([1.0, 2.0, 3.0, 4.0]), np.ones(4))

    assert np.array_equal(rate, [2.0, 3.0, 4.0, 5.0])


def test_linear_agent_storage_identity():
    """Testa ∇S·(f + g·u) + W - yᵀu = 0 (a desigualdade vale com igualdade) em sorteios."""
    rng = np.random.default_rng(11)
    agents = [LinearPassiveAgent(p=2, a=a, b=b) for a, b in rng.uniform(0.5, 2.0, size=(10, 2))]

    for agent in agents:
        for _ in range(20):
            xi, u = rng.standard_normal(2), rng.standard_normal(2)
            residual = (
                agent.storage_gradient(xi) @ agent_rhs(agent, xi, u)
                + agent.dissipation(xi)
                - agent.h(xi) @ u
            )
            assert abs(residual) <= 1e-12


def test_agent_rhs_is_affine_in_input():
    agent = CubicDampingAgent(p=2, a=1.0, c=0.5, b=2.0)
    xi = np.array([0.7, -1.2])
    u1, u2 = np.array([1.0, -0.5]), np.array([-2.0, 3.0])
    alpha, beta = 0.3, -1.7

    drift = agent_rhs(agent, xi, np.zeros(2))
    combined = agent_rhs(agent, xi, alpha * u1 + beta * u2) - drift
    separate = alpha * (agent_rhs(agent, xi, u1) - drift)
    separate += beta * (agent_rhs(agent, xi, u2) - drift)

    assert np.allclose(combined, separate, rtol=0.0, atol=1e-12)
