"""Journal JSONL de execuções que falharam (validação ou integração)."""

import json
import logging
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

MAX_SNIPPET_LENGTH = 500


class DeadLetterLogger:
    """Registra cada execução com falha como uma linha JSON."""

    def __init__(self, log_file: Optional[Path] = None):
        """
        Args:
            log_file: Caminho do journal (padrão: settings.dead_letter_file)
        """
        if log_file is None:
            from app.core.config import settings

            log_file = settings.dead_letter_file
        self.log_file = Path(log_file)

    def _get_traceback_summary(self, exception: BaseException) -> str:
        """Últimas 3 linhas do traceback (ou a mensagem, se não houver traceback)."""
        try:
            tb_lines = traceback.format_exception(
                type(exception), exception, exception.__traceback__
            )
            return "".join(tb_lines[-3:]).strip()
        except Exception:
            return str(exception)

    def _truncate_snippet(self, text: str, max_length: int = MAX_SNIPPET_LENGTH) -> str:
        if not text:
            return ""
        if len(text) <= max_length:
            return text
        return text[:max_length] + "..."

    def log_run_failure(
        self,
        scenario_name: str,
        error: BaseException,
        state_snippet: Optional[str] = None,
    ) -> None:
        """
        Acrescenta uma entrada ao journal.

        Args:
            scenario_name: Nome ou origem do cenário
            error: Exceção capturada
            state_snippet: Contexto textual (último registro finito, trecho do cenário)
        """
        try:
            log_entry = {
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "scenario": scenario_name,
                "error_type": type(error).__name__,
                "error_message": self._get_traceback_summary(error),
                "state_snippet": self._truncate_snippet(state_snippet or ""),
            }
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_file, "a", encoding="utf-8") as f:
                json.dump(log_entry, f, ensure_ascii=False)
                f.write("\n")
            logger.debug(f"Falha registrada para {scenario_name}")
        except Exception as e:
            # Falha no journal nunca mascara o erro original
            logger.error(f"Erro ao escrever dead letter log: {e}")

    def get_log_count(self) -> int:
        try:
            if not self.log_file.exists():
                return 0
            with open(self.log_file, "r", encoding="utf-8") as f:
                return sum(1 for line in f if line.strip())
        except Exception as e:
            logger.error(f"Erro ao contar entradas no log: {e}")
            return 0

    def clear_logs(self) -> None:
        """Remove o journal (útil para testes)."""
        try:
            if self.log_file.exists():
                self.log_file.unlink()
        except Exception as e:
            logger.error(f"Erro ao limpar log: {e}")


def record_snippet(record) -> str:
    """Representação compacta de um TrajectoryRecord para o journal."""
    if record is None:
        return ""
    return (
        f"t={record.t:.6g} V={record.V:.6g} znorm1={record.znorm1:.6g} "
        f"x={record.x.tolist()} xi={record.xi.tolist()}"
    )
