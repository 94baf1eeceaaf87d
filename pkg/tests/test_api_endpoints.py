"""Testes dos endpoints HTTP (health, presets, execuções)."""

import json

import pytest
from httpx import ASGITransport, AsyncClient

from app.core.config import settings
from app.core.rate_limit import limiter
from app.main import app
from app.services.presets import load_preset_text

LINE = {
    "schema_version": 1,
    "name": "line_two_agents",
    "p": 1,
    "graph": {"n_nodes": 2, "edges": [[2, 1]]},
    "formation": {"z_star": [[1.0]]},
    "controller": {"mode": "known_velocity"},
    "reference": {"kind": "constant", "value": [0.5]},
    "initial": {"x": [0.0, 0.0]},
    "integration": {"t_final": 0.5},
}


@pytest.fixture
async def client(tmp_path, monkeypatch):
    """Fixture para criar um cliente HTTP assíncrono para os testes."""
    monkeypatch.setattr(settings, "dead_letter_file", tmp_path / "failures.jsonl")
    monkeypatch.setattr(limiter, "enabled", False)

    # Usa AsyncClient com ASGITransport para evitar problemas de thread/loop
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://testserver") as ac:
        yield ac


@pytest.mark.asyncio
async def test_root(client):
    response = await client.get("/")

    assert response.status_code == 200
    assert response.json()["message"] == "formsim API"


@pytest.mark.asyncio
async def test_health(client):
    """Testa o health check com a contagem de presets."""
    response = await client.get("/api/v1/health")

    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "ok"
    assert data["presets"] == 5


@pytest.mark.asyncio
async def test_list_presets(client):
    response = await client.get("/api/v1/presets")

    assert response.status_code == 200
    data = response.json()
    assert [item["label"] for item in data] == ["A", "B", "C", "D", "E"]
    assert data[3]["name"] == "caseII_tree"


@pytest.mark.asyncio
async def test_get_preset(client):
    response = await client.get("/api/v1/presets/observer_mixed")

    assert response.status_code == 200
    assert response.json()["controller"]["mode"] == "observer_based"


@pytest.mark.asyncio
async def test_get_unknown_preset(client):
    response = await client.get("/api/v1/presets/hexagon")

    assert response.status_code == 404


@pytest.mark.asyncio
async def test_run_preset_with_overrides(client):
    """Testa a execução curta de um preset com registros reduzidos."""
    body = {
        "preset": "pentagon_leader_follower",
        "overrides": {"t_final": 0.1, "scheme": "euler"},
        "include_records": True,
        "max_records": 5,
    }

    response = await client.post("/api/v1/runs", json=body)

    assert response.status_code == 200
    data = response.json()
    assert data["summary"]["scenario"] == "pentagon_leader_follower"
    assert data["summary"]["scheme"] == "euler"
    assert data["summary"]["steps"] == 100
    records = data["records"]
    assert 2 <= len(records) <= 6
    assert records[0]["t"] == 0.0
    assert records[-1]["t"] == pytest.approx(0.1)
    assert len(records[0]["z_tilde"]) == 12


@pytest.mark.asyncio
async def test_run_inline_scenario(client):
    response = await client.post("/api/v1/runs", json={"scenario": LINE})

    assert response.status_code == 200
    data = response.json()
    assert data["records"] is None
    assert data["summary"]["mode"] == "known_velocity"


@pytest.mark.asyncio
async def test_run_step_limit(client, monkeypatch):
    monkeypatch.setattr(settings, "max_api_steps", 1000)

    response = await client.post(
        "/api/v1/runs", json={"preset": "caseI", "overrides": {"t_final": 2.0}}
    )

    assert response.status_code == 422
    assert "2000 passos" in response.json()["detail"]


@pytest.mark.asyncio
async def test_run_invalid_scenario(client):
    """Testa que a hipótese violada volta como 422 com a mensagem de diagnóstico."""
    scenario = json.loads(load_preset_text("invalid/caseII_cyclic"))

    response = await client.post("/api/v1/runs", json={"scenario": scenario})

    assert response.status_code == 422
    assert "tree" in response.json()["detail"]


@pytest.mark.asyncio
@pytest.mark.parametrize("name", ["hexagon", "invalid/caseII_cyclic", "../../core/config"])
async def test_run_unlisted_preset(client, name):
    """Testa que só os presets listados podem ser executados pelo nome."""
    response = await client.post("/api/v1/runs", json={"preset": name})

    assert response.status_code == 404
    assert "não encontrado" in response.json()["detail"]


@pytest.mark.asyncio
async def test_run_schema_error(client):
    scenario = {**LINE, "colour": "blue"}

    response = await client.post("/api/v1/runs", json={"scenario": scenario})

    assert response.status_code == 422
    assert "colour" in response.json()["detail"]


@pytest.mark.asyncio
@pytest.mark.parametrize(
    "body",
    [
        {},
        {"preset": "caseI", "scenario": LINE},
        {"preset": "caseI", "overrides": {"dt": -1}},
        {"preset": "caseI", "overrides": {"sign_mode": "wobbly"}},
        {"preset": "caseI", "max_records": 1},
    ],
)
async def test_run_request_validation(client, body):
    response = await client.post("/api/v1/runs", json=body)

    assert response.status_code == 422


@pytest.mark.asyncio
async def test_run_rate_limit(client, monkeypatch):
    """Testa o 429 após exceder o limite por minuto do endpoint de execução."""
    monkeypatch.setattr(limiter, "enabled", True)
    limiter.reset()

    statuses = []
    for _ in range(11):
        response = await client.post("/api/v1/runs", json={"preset": "hexagon"})
        statuses.append(response.status_code)
    limiter.reset()

    assert statuses[:10] == [404] * 10
    assert statuses[10] == 429
