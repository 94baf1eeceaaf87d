"""Escrita e leitura dos CSVs de trajetória (colunas fixas, 17 dígitos significativos)."""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from app.core.errors import FormsimError
from app.services.engine import RecordMeta, RunResult, RunSummary, TrajectoryRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.17g}"


class CsvError(FormsimError):
    """Falha ao escrever ou ler um CSV de trajetória."""

    pass


def _block(prefix: str, ids: Sequence[int], dims: Sequence[int]) -> List[str]:
    return [f"{prefix}[{i}][{l}]" for i, d in zip(ids, dims) for l in range(1, d + 1)]


def trajectory_columns(meta: RecordMeta) -> List[str]:
    """
    Colunas do CSV principal, na ordem do contrato.

    t, z_tilde[k][l], xi[i][l], eta_tilde[i][l] (seguidores), theta_tilde[i][l],
    xi_tilde[i][l], V, znorm1, u[i][l], flips_total. Blocos ausentes no modo são omitidos.
    """
    agents = range(1, meta.n_agents + 1)
    columns = ["t"]
    columns += _block("z_tilde", range(1, meta.n_edges + 1), [meta.p] * meta.n_edges)
    columns += _block("xi", agents, meta.xi_dims)
    if meta.followers:
        columns += _block("eta_tilde", meta.followers, [meta.eta_dim] * len(meta.followers))
    if meta.theta_dims:
        columns += _block("theta_tilde", agents, meta.theta_dims)
    if meta.has_xi_tilde:
        columns += _block("xi_tilde", agents, meta.xi_dims)
    columns += ["V", "znorm1"]
    columns += _block("u", agents, [meta.p] * meta.n_agents)
    columns.append("flips_total")
    return columns


def _row(record: TrajectoryRecord, meta: RecordMeta) -> List[str]:
    values = [record.t, *record.z_tilde, *record.xi]
    if meta.followers:
        values += list(record.eta_tilde)
    if meta.theta_dims:
        values += list(record.theta_tilde)
    if meta.has_xi_tilde:
        values += list(record.xi_tilde)
    values += [record.V, record.znorm1, *record.u]
    return [FLOAT_FORMAT.format(float(v)) for v in values] + [str(int(record.flips_total))]


def _write(path: Path, header: List[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise CsvError(f"Falha ao escrever {path}: {e.strerror}") from e


def write_csv(
    records: Sequence[TrajectoryRecord], path: Union[str, Path], meta: RecordMeta
) -> Path:
    """
    Escreve o CSV da trajetória: cabeçalho e uma linha por registro.

    Raises:
        CsvError: Lista de registros vazia, colunas inconsistentes ou falha de I/O
    """
    if not records:
        raise CsvError("write_csv requer pelo menos um registro")
    path = Path(path)
    header = trajectory_columns(meta)
    rows = [_row(r, meta) for r in records]
    if len(rows[0]) != len(header):
        raise CsvError(
            f"Registro com {len(rows[0])} valores para {len(header)} colunas (layout inconsistente)"
        )
    _write(path, header, rows)
    logger.info("CSV gravado: %s (%d linhas)", path, len(rows))
    return path


def write_positions_csv(
    records: Sequence[TrajectoryRecord], path: Union[str, Path], meta: RecordMeta
) -> Path:
    """Arquivo complementar com t e as posições x[i][l] (usado pelo gráfico trajectory2d)."""
    if not records:
        raise CsvError("write_positions_csv requer pelo menos um registro")
    path = Path(path)
    header = ["t"] + _block("x", range(1, meta.n_agents + 1), [meta.p] * meta.n_agents)
    rows = [[FLOAT_FORMAT.format(float(v)) for v in (r.t, *r.x)] for r in records]
    _write(path, header, rows)
    return path


@dataclass(frozen=True, eq=False)
class CsvTable:
    """Tabela lida de um CSV de trajetória."""

    columns: List[str]
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise CsvError(f"Coluna '{name}' ausente")

    def block(self, prefix: str) -> Dict[str, np.ndarray]:
        """Colunas cujo nome começa com `prefix[`, na ordem do arquivo."""
        marker = f"{prefix}["
        return {
            name: self.data[:, k] for k, name in enumerate(self.columns) if name.startswith(marker)
        }

    def __len__(self) -> int:
        return self.data.shape[0]


def read_csv(path: Union[str, Path]) -> CsvTable:
    """
    Lê um CSV gravado por write_csv/write_positions_csv.

    Raises:
        CsvError: Arquivo ausente, vazio ou com valores não numéricos
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            rows = [row for row in reader if row]
    except OSError as e:
        raise CsvError(f"Falha ao ler {path}: {e.strerror}") from e
    if not header:
        raise CsvError(f"{path}: arquivo vazio")
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as e:
        raise CsvError(f"{path}: valor não numérico ({e})") from e
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return CsvTable(columns=header, data=data)


def write_summary(summary: RunSummary, path: Union[str, Path]) -> Path:
    """Grava o resumo da execução como JSON indentado."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        text = json.dumps(summary.to_dict(), indent=2, ensure_ascii=False)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise CsvError(f"Falha ao escrever {path}: {e.strerror}") from e
    return path


def write_run_outputs(result: RunResult, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Grava os artefatos de uma execução em `out_dir`.

    Returns:
        Caminhos de `<nome>.csv`, `<nome>_positions.csv` e `<nome>_summary.json`
    """
    out_dir = Path(out_dir)
    name = result.summary.scenario
    meta = result.meta
    return {
        "csv": write_csv(result.records, out_dir / f"{name}.csv", meta),
        "positions": write_positions_csv(result.records, out_dir / f"{name}_positions.csv", meta),
        "summary": write_summary(result.summary, out_dir / f"{name}_summary.json"),
    }


def records_to_table(records: Sequence[TrajectoryRecord], meta: RecordMeta) -> CsvTable:
    """Tabela em memória com as mesmas colunas de write_csv mais as posições x[i][l]."""
    if not records:
        raise CsvError("records_to_table requer pelo menos um registro")
    columns = trajectory_columns(meta)
    columns += _block("x", range(1, meta.n_agents + 1), [meta.p] * meta.n_agents)
    data = np.array([[float(v) for v in _row(r, meta)] + list(r.x) for r in records], dtype=float)
    return CsvTable(columns=columns, data=data)
