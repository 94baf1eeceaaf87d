"""Rota de execução em lote de cenários."""

import json
import logging

from fastapi import APIRouter, HTTPException, Request
from starlette.concurrency import run_in_threadpool

from app.core.config import settings
from app.core.errors import FormsimError
from app.core.rate_limit import run_limit
from app.schemas.run import RecordSchema, RunRequest, RunResponse
from app.services.engine import IntegrationBlowupError, run
from app.services.presets import load_preset_text, preset_names
from app.services.scenario_loader import parse_scenario_text
from app.utils.dead_letter_logger import DeadLetterLogger, record_snippet

logger = logging.getLogger(__name__)

router = APIRouter(
    prefix="/runs",
    tags=["runs"],
)


def _downsample(records, max_records: int):
    if len(records) <= max_records:
        return list(records)
    stride = -(-len(records) // max_records)
    picked = list(records[::stride])
    if picked[-1] is not records[-1]:
        picked.append(records[-1])
    return picked


@router.post(
    "",
    response_model=RunResponse,
    summary="Executar um cenário",
    description=(
        "Valida e integra um cenário (JSON completo ou preset) e devolve o resumo. "
        "O número de passos t_final/dt é limitado por FORMSIM_MAX_API_STEPS."
    ),
    responses={
        200: {"description": "Execução concluída"},
        404: {"description": "Preset não encontrado"},
        422: {"description": "Cenário inválido, limite de passos ou integração divergente"},
        429: {"description": "Limite de requisições excedido"},
    },
)
@run_limit
async def create_run(request: Request, body: RunRequest):  # noqa: ARG001
    if body.preset is not None:
        if body.preset not in preset_names():
            raise HTTPException(status_code=404, detail=f"Preset '{body.preset}' não encontrado")
        text, origin = load_preset_text(body.preset), f"presets/{body.preset}"
    else:
        text, origin = json.dumps(body.scenario), "request"

    scenario = parse_scenario_text(text, origin, **body.overrides.model_dump(exclude_none=True))
    steps = int(round(scenario.integration.t_final / scenario.integration.dt))
    if steps > settings.max_api_steps:
        raise HTTPException(
            status_code=422,
            detail=f"{steps} passos excedem o limite da API ({settings.max_api_steps})",
        )

    try:
        result = await run_in_threadpool(run, scenario)
    except FormsimError as e:
        snippet = record_snippet(e.last_record) if isinstance(e, IntegrationBlowupError) else ""
        DeadLetterLogger().log_run_failure(scenario.name, e, snippet)
        raise

    records = None
    if body.include_records:
        records = [
            RecordSchema(
                t=r.t,
                V=r.V,
                znorm1=r.znorm1,
                z_tilde=r.z_tilde.tolist(),
                xi=r.xi.tolist(),
                x=r.x.tolist(),
            )
            for r in _downsample(result.records, body.max_records)
        ]
    return RunResponse(summary=result.summary.to_dict(), records=records)
