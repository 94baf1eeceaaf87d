"""Gráficos SVG das grandezas gravadas (backend Agg, sem janela)."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from app.core.errors import FormsimError  # noqa: E402
from app.services.csv_io import CsvTable, read_csv, records_to_table  # noqa: E402
from app.services.engine import RecordMeta, TrajectoryRecord  # noqa: E402

logger = logging.getLogger(__name__)

# quantidade -> (prefixo da coluna, rótulo do eixo y)
QUANTITIES = {
    "ztilde": ("z_tilde", "z̃ (m)"),
    "xi": ("xi", "ξ (m/s)"),
    "eta_tilde": ("eta_tilde", "η̃ (m/s)"),
    "theta_tilde": ("theta_tilde", "θ̃ (u.a.)"),
    "u": ("u", "u (m/s)"),
    "V": ("V", "V (u.a.)"),
    "trajectory2d": ("x", "y (m)"),
}


class PlotError(FormsimError):
    """Quantidade desconhecida, ausente nos dados ou sem amostras."""

    pass


def _trajectory2d(fig: Figure, table: CsvTable) -> None:
    positions = table.block("x")
    if not positions:
        raise PlotError("trajectory2d requer as colunas x[i][l] (arquivo *_positions.csv)")
    n_agents = len({name.split("]")[0] for name in positions})
    if len(positions) != 2 * n_agents:
        raise PlotError("trajectory2d requer p = 2")
    ax = fig.add_subplot()
    for i in range(1, n_agents + 1):
        x, y = table.column(f"x[{i}][1]"), table.column(f"x[{i}][2]")
        (line,) = ax.plot(x, y, linewidth=1.5, label=f"agente {i}")
        ax.plot(x[0], y[0], "o", color=line.get_color(), markersize=4)
        ax.plot(x[-1], y[-1], "s", color=line.get_color(), markersize=5)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title("Trajetórias dos agentes no plano")
    ax.legend(fontsize="small")


def _time_series(fig: Figure, table: CsvTable, quantity: str) -> None:
    prefix, ylabel = QUANTITIES[quantity]
    series = {prefix: table.column(prefix)} if quantity == "V" else table.block(prefix)
    if not series:
        raise PlotError(f"Quantidade '{quantity}' ausente neste modo de controle")
    t = table.column("t")
    ax = fig.add_subplot()
    for name, values in series.items():
        ax.plot(t, values, linewidth=1.0, label=name)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(f"{ylabel.split(' ')[0]} ao longo do tempo")
    ax.grid(True, alpha=0.3)
    if len(series) <= 12:
        ax.legend(fontsize="x-small", ncol=2)


def emit_plot(
    source: Union[Sequence[TrajectoryRecord], CsvTable],
    quantity: str,
    path: Union[str, Path],
    meta: Optional[RecordMeta] = None,
) -> Path:
    """
    Gera um gráfico SVG autocontido.

    Args:
        source: Registros da execução (com `meta`) ou tabela lida do CSV
        quantity: ztilde, xi, eta_tilde, theta_tilde, u, V ou trajectory2d
        path: Arquivo de saída (.svg)
        meta: Estrutura dos registros, obrigatória quando `source` são registros

    Raises:
        PlotError: Quantidade desconhecida/ausente ou dados vazios
    """
    if quantity not in QUANTITIES:
        raise PlotError(f"Quantidade '{quantity}' desconhecida; use {', '.join(QUANTITIES)}")
    if isinstance(source, CsvTable):
        table = source
    else:
        if not source:
            raise PlotError("Nenhum registro para plotar")
        if meta is None:
            raise PlotError("emit_plot com registros requer meta")
        table = records_to_table(source, meta)
    if len(table) == 0:
        raise PlotError("Nenhum registro para plotar")

    fig = Figure(figsize=(7, 4.5))
    if quantity == "trajectory2d":
        _trajectory2d(fig, table)
    else:
        _time_series(fig, table, quantity)
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    logger.info("Gráfico '%s' gravado em %s", quantity, path)
    return path


def plot_csv(csv_path: Union[str, Path], quantity: str, out: Union[str, Path]) -> Path:
    """
    Plota a partir de um CSV gravado; trajectory2d usa o `<nome>_positions.csv` ao lado.

    Raises:
        PlotError: Quantidade desconhecida ou ausente
        CsvError: Arquivo ilegível
    """
    csv_path = Path(csv_path)
    if quantity == "trajectory2d" and not csv_path.stem.endswith("_positions"):
        companion = csv_path.with_name(f"{csv_path.stem}_positions.csv")
        if companion.is_file():
            csv_path = companion
    return emit_plot(read_csv(csv_path), quantity, out)
