"""Execução de cenários usada pela CLI e pela API: run único e varredura de dt.

Cada execução é isolada: valida o cenário, integra, grava os artefatos e registra
falhas no journal JSONL antes de propagar o erro.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from app.core.errors import FormsimError
from app.services.csv_io import write_run_outputs
from app.services.engine import IntegrationBlowupError, RunResult, run
from app.services.scenario_loader import parse_scenario_text
from app.utils.dead_letter_logger import DeadLetterLogger, record_snippet

logger = logging.getLogger(__name__)


@dataclass
class SweepOutcome:
    dt: float
    out_dir: str
    summary: Optional[dict] = None
    error: Optional[str] = None


@dataclass
class SweepReport:
    outcomes: List[SweepOutcome] = field(default_factory=list)

    @property
    def failures(self) -> List[SweepOutcome]:
        return [o for o in self.outcomes if o.error is not None]


def execute_run(
    text: str,
    origin: str,
    overrides: Optional[Dict] = None,
    out_dir: Optional[Path] = None,
    journal: Optional[DeadLetterLogger] = None,
) -> RunResult:
    """
    Valida, executa e (opcionalmente) grava os artefatos de um cenário.

    Args:
        text: JSON do cenário
        origin: Origem usada nas mensagens (caminho ou presets/<nome>)
        overrides: dt, t_final, sign_mode, eps, scheme, stride
        out_dir: Diretório de saída; None não grava nada
        journal: Journal de falhas (padrão: settings.dead_letter_file)

    Raises:
        FormsimError: Após registrar a falha no journal
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        scenario = parse_scenario_text(text, origin, **overrides)
        result = run(scenario)
        if out_dir is not None:
            paths = write_run_outputs(result, out_dir)
            logger.info("Artefatos gravados em %s", Path(paths["csv"]).parent)
        return result
    except FormsimError as e:
        snippet = record_snippet(e.last_record) if isinstance(e, IntegrationBlowupError) else text
        (journal or DeadLetterLogger()).log_run_failure(origin, e, snippet)
        raise


def _sweep_worker(text: str, origin: str, dt: float, overrides: Dict, out_dir: str) -> SweepOutcome:
    # Roda em outro processo: só dados serializáveis entram e saem
    try:
        result = execute_run(text, origin, {**overrides, "dt": dt}, Path(out_dir))
        return SweepOutcome(dt=dt, out_dir=out_dir, summary=result.summary.to_dict())
    except FormsimError as e:
        return SweepOutcome(dt=dt, out_dir=out_dir, error=f"{type(e).__name__}: {e}")


def sweep_dir_name(dt: float) -> str:
    return f"dt_{dt:g}"


def run_sweep(
    text: str,
    origin: str,
    dts: Sequence[float],
    out_dir: Path,
    overrides: Optional[Dict] = None,
    max_workers: int = 1,
) -> SweepReport:
    """
    Executa o mesmo cenário para cada dt, um subdiretório por dt.

    Com max_workers > 1 as execuções rodam em um pool de processos.

    Returns:
        SweepReport com um resultado por dt, na ordem de `dts`
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None and k != "dt"}
    jobs = [(dt, str(Path(out_dir) / sweep_dir_name(dt))) for dt in dts]
    logger.info("▶ Varredura de dt %s (%d workers)", list(dts), max_workers)

    if max_workers <= 1 or len(jobs) == 1:
        outcomes = [_sweep_worker(text, origin, dt, overrides, d) for dt, d in jobs]
    else:
        by_dt = {}
        with ProcessPoolExecutor(max_workers=min(max_workers, len(jobs))) as pool:
            futures = {
                pool.submit(_sweep_worker, text, origin, dt, overrides, d): dt for dt, d in jobs
            }
            for future in as_completed(futures):
                by_dt[futures[future]] = future.result()
        outcomes = [by_dt[dt] for dt, _ in jobs]

    report = SweepReport(outcomes=outcomes)
    if report.failures:
        logger.warning("⚠️ %d de %d execuções falharam", len(report.failures), len(outcomes))
    else:
        logger.info("✅ Varredura concluída (%d execuções)", len(outcomes))
    return report
