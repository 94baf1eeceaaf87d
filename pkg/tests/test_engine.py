"""Testes do integrador de passo fixo, do monitor de Lyapunov e do resumo de execução."""

import json

import numpy as np
import pytest

from app.core.errors import FormsimError
from app.services.controllers import SignMode, assemble_closed_loop
from app.services.engine import (
    IntegrationBlowupError,
    SimState,
    huber_primitive,
    integrate,
    lyapunov_tolerance,
    lyapunov_value,
    monitor_increments,
    monitor_lyapunov,
    record_meta,
    run,
    step,
)
from app.services.graphalg import build_incidence
from app.services.presets import load_preset_text
from app.services.scenario_loader import parse_scenario_text


def line_doc(**integration) -> dict:
    """Dois agentes em linha (p = 1), velocidade 0.5 conhecida, z* = 1."""
    return {
        "schema_version": 1,
        "name": "line_two_agents",
        "p": 1,
        "graph": {"n_nodes": 2, "edges": [[2, 1]]},
        "formation": {"z_star": [[1.0]]},
        "agents": {"kind": "linear", "a": 1.0, "b": 1.0},
        "controller": {"mode": "known_velocity", "sign_mode": "smooth", "eps": 0.01},
        "reference": {"kind": "constant", "value": [0.5]},
        "initial": {"x": [0.0, 0.0]},
        "integration": {"dt": 0.001, "t_final": 10.0, "scheme": "rk4", "stride": 10, **integration},
    }


def line_scenario(sign_mode: str = "smooth", **integration):
    doc = line_doc(**integration)
    doc["controller"]["sign_mode"] = sign_mode
    return parse_scenario_text(json.dumps(doc), "line")


def decay(t, y, selection=None):
    return -y


# ---------------------------------------------------------------------------
# step
# ---------------------------------------------------------------------------


def test_euler_step():
    state = step(SimState(0.0, np.array([1.0, 2.0])), decay, 0.1, "euler")

    assert state.t == pytest.approx(0.1)
    assert np.allclose(state.vector, [0.9, 1.8])


def test_rk4_step_matches_exponential():
    """Testa o erro local de RK4 em ẏ = -y (ordem dt⁵)."""
    state = step(SimState(0.0, np.array([1.0])), decay, 0.1, "rk4")

    assert abs(state.vector[0] - np.exp(-0.1)) < 1e-7


def test_rk4_holds_selection_across_stages():
    """Testa que a seleção recebida é repassada a todos os estágios."""
    seen = []

    def rhs(t, y, selection):
        seen.append(selection)
        return np.zeros_like(y)

    marker = np.array([1.0, -1.0])
    step(SimState(0.0, np.zeros(1)), rhs, 0.01, "rk4", selection=marker)

    assert len(seen) == 4
    assert all(s is marker for s in seen)


def test_step_reuses_given_k1():
    calls = []

    def rhs(t, y, selection):
        calls.append(t)
        return -y

    step(SimState(0.0, np.ones(1)), rhs, 0.1, "euler", k1=np.array([-1.0]))

    assert calls == []


def test_euler_step_on_line_pair():
    """Testa um passo de Euler do par em linha contra o cálculo à mão."""
    loop = assemble_closed_loop(line_scenario("strict"))
    L = loop.layout
    start = SimState(0.0, loop.initial_state())

    # z̃ = x2 - x1 - 1 = -1: u = (-1, +1), ξ̇ = u, ẋ = ξ + 0.5
    state = step(start, loop, 0.1, "euler", loop.select(start.vector))

    assert np.allclose(state.vector[L.x], [0.05, 0.05])
    assert np.allclose(state.vector[L.xi], [-0.1, 0.1])
    assert np.allclose(state.vector[L.supply], [0.0, 0.0])


def test_step_rejects_bad_arguments():
    with pytest.raises(FormsimError):
        step(SimState(0.0, np.ones(1)), decay, 0.0, "rk4")
    with pytest.raises(FormsimError, match="desconhecido"):
        step(SimState(0.0, np.ones(1)), decay, 0.1, "midpoint")


def test_step_detects_non_finite_state():
    def explode(t, y, selection=None):
        return np.array([np.inf])

    with pytest.raises(IntegrationBlowupError):
        step(SimState(0.0, np.ones(1)), explode, 0.1, "euler")


# ---------------------------------------------------------------------------
# Lyapunov
# ---------------------------------------------------------------------------


def test_huber_primitive_values():
    z = np.array([0.0, 0.005, -0.01, 0.5])

    values = huber_primitive(z, 0.01)

    assert np.allclose(values, [0.0, 0.00125, 0.005, 0.495])


def test_huber_gradient_is_smooth_selection():
    """Testa ψ'(ζ) = clamp(ζ/ε, -1, 1) por diferença central."""
    eps, h = 0.01, 1e-7
    z = np.array([-0.3, -0.004, 0.0, 0.007, 2.0])
    gradient = (huber_primitive(z + h, eps) - huber_primitive(z - h, eps)) / (2 * h)

    assert np.allclose(gradient, np.clip(z / eps, -1.0, 1.0), atol=1e-6)


@pytest.mark.parametrize("sign_mode", ["strict", "smooth"])
def test_lyapunov_value_zero_at_formation(sign_mode):
    doc = line_doc()
    doc["controller"]["sign_mode"] = sign_mode
    doc["initial"] = {"x": [0.0, 1.0]}
    loop = assemble_closed_loop(parse_scenario_text(json.dumps(doc), "line"))

    signals = loop.evaluate(0.0, loop.initial_state())

    assert lyapunov_value(loop, signals) == 0.0


def test_lyapunov_value_is_one_norm_in_strict_mode():
    """Testa V = ‖z̃‖₁ = 3 para z̃ = (1, -2) com ξ = 0."""
    doc = line_doc()
    doc.update(
        name="line_three_agents",
        graph={"n_nodes": 3, "edges": [[2, 1], [3, 2]]},
        formation={"z_star": [[1.0], [1.0]]},
        initial={"x": [0.0, 2.0, 1.0]},
    )
    doc["controller"]["sign_mode"] = "strict"
    loop = assemble_closed_loop(parse_scenario_text(json.dumps(doc), "line3"))

    signals = loop.evaluate(0.0, loop.initial_state())

    assert np.allclose(signals.z_tilde, [1.0, -2.0])
    assert lyapunov_value(loop, signals) == pytest.approx(3.0)


def test_lyapunov_value_at_start_of_pentagon_run():
    """Testa V(0) do pentágono com velocidade conhecida contra Σψ_ε(z̃) + Σ‖ξ‖²/(2b)."""
    doc = json.loads(load_preset_text("pentagon_known_velocity"))
    doc["initial"]["xi"] = [0.2, -0.1, 0.0, 0.3, -0.4, 0.1, 0.0, 0.0, 0.5, -0.5]
    scenario = parse_scenario_text(json.dumps(doc), "pentagon")
    loop = assemble_closed_loop(scenario)

    eps, b = doc["controller"]["eps"], doc["agents"]["b"]
    x0 = np.array(doc["initial"]["x"])
    xi0 = np.array(doc["initial"]["xi"])
    z_star = np.array(doc["formation"]["z_star"]).reshape(-1)
    z = np.kron(build_incidence(scenario.graph), np.eye(2)).T @ x0 - z_star
    psi = np.where(np.abs(z) < eps, z**2 / (2 * eps), np.abs(z) - eps / 2)
    expected = psi.sum() + xi0 @ xi0 / (2 * b)

    signals = loop.evaluate(0.0, loop.initial_state())

    assert lyapunov_value(loop, signals) == pytest.approx(expected, rel=1e-12)


def test_lyapunov_tolerance_by_mode():
    assert lyapunov_tolerance(SignMode.smooth(0.01), 1e-3) == 1e-6
    assert lyapunov_tolerance(SignMode.strict(), 1e-3) == pytest.approx(1e-2)
    assert lyapunov_tolerance(SignMode.hysteresis(0.01), 2e-3) == pytest.approx(2e-2)


def test_monitor_increments_flags_first_violation():
    report = monitor_increments([0.0, 0.1, 0.2, 0.3], [3.0, 2.0, 2.5, 2.4], tolerance=0.1)

    assert not report.ok
    assert report.violations == 1
    assert report.first_violation_time == pytest.approx(0.2)
    assert report.max_increment == pytest.approx(0.5)


def test_monitor_increments_on_decreasing_series():
    report = monitor_increments([0.0, 1.0, 2.0], [1.0, 0.5, 0.25], tolerance=1e-6)

    assert report.ok
    assert report.max_increment == 0.0
    assert report.first_violation_time is None


# ---------------------------------------------------------------------------
# integrate / run
# ---------------------------------------------------------------------------


def test_integrate_time_grid_and_stride():
    """Testa t = k·dt e a cadência de gravação."""
    loop = assemble_closed_loop(line_scenario(t_final=1.0))

    records, _, _ = integrate(loop, 0.001, 1.0, "rk4", stride=100)

    assert len(records) == 11
    assert records[0].t == 0.0
    assert records[-1].t == pytest.approx(1.0, abs=1e-12)
    assert [round(r.t, 9) for r in records[:3]] == [0.0, 0.1, 0.2]


def test_integrate_rejects_bad_arguments():
    loop = assemble_closed_loop(line_scenario())

    with pytest.raises(FormsimError):
        integrate(loop, -0.001, 1.0)
    with pytest.raises(FormsimError):
        integrate(loop, 0.001, 1.0, stride=0)
    with pytest.raises(FormsimError):
        integrate(loop, 0.001, 1.0, scheme="heun")


def test_smooth_run_converges_and_lyapunov_decreases():
    """Testa a convergência do par em linha e V não crescente (tolerância 1e-6)."""
    result = run(line_scenario())
    summary = result.summary

    assert summary.converged
    assert summary.z_tilde_final_inf <= 0.03
    assert summary.xi_final_inf <= 0.02
    assert summary.lyapunov_ok
    assert summary.max_lyapunov_increase <= 1e-6
    assert summary.passivity_ok
    assert summary.passivity and summary.passivity[0]["method"] == "supply_integral"
    report = monitor_lyapunov(result.records, SignMode.smooth(0.01), 0.001)
    assert report.ok


def test_final_record_matches_summary():
    result = run(line_scenario(t_final=2.0))

    assert result.records[-1].znorm1 == result.summary.znorm1_final
    assert result.summary.steps == 2000
    assert result.summary.position_band == pytest.approx(0.03)
    assert result.summary.velocity_band == pytest.approx(0.02)


def test_strict_run_chatters():
    """Testa que o modo estrito alterna a seleção perto de z̃ = 0."""
    result = run(line_scenario("strict", t_final=5.0))

    assert result.records[-1].flips_total > 100
    assert result.summary.sign_mode == "strict"
    assert result.summary.z_tilde_final_inf <= 0.05


def test_hysteresis_run_switches_less_than_strict():
    strict = run(line_scenario("strict", t_final=5.0))
    hysteresis = run(line_scenario("hysteresis", t_final=5.0))

    assert hysteresis.records[-1].flips_total < strict.records[-1].flips_total


def test_euler_blowup_carries_last_record():
    """Testa a divergência de Euler com dt grande e o último registro finito anexado."""
    scenario = line_scenario(dt=3.0, t_final=6000.0, scheme="euler", stride=1)

    with pytest.raises(IntegrationBlowupError) as info:
        run(scenario)

    last = info.value.last_record
    assert last is not None
    assert np.all(np.isfinite(last.x))
    assert last.t > 0


def test_record_meta_for_line_scenario():
    loop = assemble_closed_loop(line_scenario())

    meta = record_meta(loop)

    assert meta.p == 1 and meta.n_edges == 1
    assert meta.xi_dims == (1, 1)
    assert meta.followers == ()
    assert meta.theta_dims == ()
    assert not meta.has_xi_tilde


# ---------------------------------------------------------------------------
# Refinamento do passo (pentágono com velocidade conhecida, t ∈ [0, 1])
# ---------------------------------------------------------------------------

REFINEMENT_DTS = (4e-3, 2e-3, 1e-3)


@pytest.fixture(scope="module")
def pentagon_runs():
    """Execuções de 1 s do pentágono em modo smooth (ε = 0.1), gravando a cada 0.1 s."""
    runs = {}
    for scheme in ("euler", "rk4"):
        for dt in REFINEMENT_DTS:
            scenario = parse_scenario_text(
                load_preset_text("pentagon_known_velocity"),
                "pentagon",
                dt=dt,
                t_final=1.0,
                scheme=scheme,
                eps=0.1,
                stride=int(round(0.1 / dt)),
            )
            runs[scheme, dt] = run(scenario)
    return runs


def test_halving_dt_shrinks_final_error_change(pentagon_runs):
    """Testa que a variação de ‖z̃(1)‖₁ ao dividir dt por 2 cai como primeira ordem."""
    final = [pentagon_runs["euler", dt].summary.znorm1_final for dt in REFINEMENT_DTS]

    coarse_change = abs(final[0] - final[1])
    fine_change = abs(final[1] - final[2])

    assert coarse_change > 0
    assert fine_change <= 0.75 * coarse_change


def test_rk4_and_euler_agree_to_first_order(pentagon_runs):
    deviations = []
    for dt in REFINEMENT_DTS:
        euler, rk4 = pentagon_runs["euler", dt].records, pentagon_runs["rk4", dt].records
        assert [round(r.t, 9) for r in euler] == [round(r.t, 9) for r in rk4]
        deviations.append(
            max(
                max(np.max(np.abs(a.x - b.x)), np.max(np.abs(a.xi - b.xi)))
                for a, b in zip(euler, rk4)
            )
        )

    assert deviations[0] > deviations[1] > deviations[2]
    constant = deviations[0] / REFINEMENT_DTS[0]
    for dt, deviation in zip(REFINEMENT_DTS[1:], deviations[1:]):
        assert deviation <= 1.5 * constant * dt
