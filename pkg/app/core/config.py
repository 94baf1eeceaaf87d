"""Configurações do formsim usando Pydantic Settings."""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Configurações do simulador (variáveis de ambiente com prefixo FORMSIM_)."""

    # Diretório padrão de saída do comando `run` (FORMSIM_OUT)
    out: Path = Path("runs")

    log_level: str = "INFO"

    # Journal JSONL de execuções que falharam
    dead_letter_file: Path = Path("logs") / "run_failures.jsonl"

    # Paralelismo do dt-sweep
    max_workers: int = 4

    # API HTTP
    run_rate_limit: str = "10/minute"
    max_api_steps: int = 100_000

    model_config = SettingsConfigDict(
        env_prefix="FORMSIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",  # Ignora variáveis extras do ambiente
    )


# Cria instância das configurações
settings = Settings()
