"""Aplicação FastAPI principal (interface em lote; sem controle interativo)."""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.api.v1.routers import health, presets, runs
from app.core.config import settings
from app.core.errors import FormsimError
from app.core.rate_limit import (
    RateLimitExceeded,
    SlowAPIMiddleware,
    _rate_limit_exceeded_handler,
    limiter,
)

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    logger.info(
        "✅ formsim API %s pronta (limite de execução: %s)", __version__, settings.run_rate_limit
    )
    yield
    logger.info("formsim API encerrada")


async def formsim_error_handler(request: Request, exc: FormsimError):  # noqa: ARG001
    """Erros de domínio viram 422 com a mensagem de diagnóstico."""
    logger.warning("⚠️ %s: %s", type(exc).__name__, exc)
    return JSONResponse(status_code=422, content={"detail": str(exc)})


app = FastAPI(
    title="formsim API",
    description="""
    Execução em lote do simulador de controle de formação com informação binária.

    ## Funcionalidades

    * **Presets** dos cenários de referência (A–E)
    * **Execução** de um cenário com sobrescritas de dt, t_final, modo de sinal e esquema
    * **Health check** para monitoramento
    """,
    version=__version__,
    lifespan=lifespan,
    redoc_url=None,
)

# Rate limiting (slowapi)
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)
app.add_exception_handler(FormsimError, formsim_error_handler)
app.add_middleware(SlowAPIMiddleware)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)

app.include_router(health.router, prefix="/api/v1")
app.include_router(presets.router, prefix="/api/v1")
app.include_router(runs.router, prefix="/api/v1")


@app.get("/")
async def root():
    return {"message": "formsim API", "version": __version__}
