"""Rotas dos cenários embutidos."""

import json
from typing import List

from fastapi import APIRouter, HTTPException

from app.schemas.run import PresetSchema
from app.services.presets import list_presets, load_preset_text, preset_names

router = APIRouter(
    prefix="/presets",
    tags=["presets"],
)


@router.get(
    "",
    response_model=List[PresetSchema],
    summary="Listar presets",
    description="Cenários embutidos, na ordem A–E.",
)
async def get_presets():
    return [PresetSchema(**vars(info)) for info in list_presets()]


@router.get(
    "/{name}",
    summary="JSON de um preset",
    responses={
        200: {"description": "Documento de cenário completo"},
        404: {"description": "Preset não encontrado"},
    },
)
async def get_preset(name: str):
    """
    Retorna o documento de cenário de um preset.

    Args:
        name: Nome do preset (ver GET /presets)

    Raises:
        HTTPException: 404 se o preset não existe
    """
    if name not in preset_names():
        raise HTTPException(status_code=404, detail=f"Preset '{name}' não encontrado")
    return json.loads(load_preset_text(name))
