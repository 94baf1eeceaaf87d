"""Rate limiting das execuções de simulação (slowapi)."""

from slowapi import Limiter, _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded
from slowapi.middleware import SlowAPIMiddleware
from slowapi.util import get_remote_address

from app.core.config import settings

RUNS_SCOPE = "runs"

limiter = Limiter(key_func=get_remote_address)

# Simulações são CPU-bound: todas as rotas de execução dividem a mesma cota por IP;
# health e presets ficam sem limite
run_limit = limiter.shared_limit(settings.run_rate_limit, scope=RUNS_SCOPE)

__all__ = [
    "Limiter",
    "SlowAPIMiddleware",
    "RateLimitExceeded",
    "_rate_limit_exceeded_handler",
    "limiter",
    "run_limit",
    "RUNS_SCOPE",
]
