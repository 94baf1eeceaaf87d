"""Rotas de health check."""

from fastapi import APIRouter

from app import __version__
from app.services.presets import preset_names

router = APIRouter(
    prefix="/health",
    tags=["health"],
)


@router.get(
    "",
    summary="Health check",
    description="Verifica se a API está no ar e se os presets embutidos estão acessíveis.",
    responses={200: {"description": "Status da API"}},
)
async def health_check():
    return {"status": "ok", "version": __version__, "presets": len(preset_names())}
