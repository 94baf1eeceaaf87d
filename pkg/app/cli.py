"""Interface de linha de comando `formsim`."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import settings
from app.core.errors import FormsimError
from app.services.plotting import QUANTITIES, plot_csv
from app.services.presets import list_presets, load_preset_text, resolve_scenario_source
from app.services.run_job import execute_run, run_sweep
from app.services.scenario_loader import SCHEME_CHOICES, SIGN_MODE_CHOICES, parse_scenario_text

logger = logging.getLogger(__name__)

PROG = "formsim"


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' não é um número")
    if not number > 0:
        raise argparse.ArgumentTypeError(f"{value} deve ser positivo")
    return number


def _dt_list(value: str) -> List[float]:
    return [_positive_float(part) for part in value.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Simulador de controle de formação com informação binária",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        help=f"Nível de log (padrão: FORMSIM_LOG_LEVEL ou {settings.log_level})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="Valida um cenário (arquivo ou preset)")
    validate.add_argument("scenario", help="Arquivo JSON, presets/<nome> ou <nome>")

    run = sub.add_parser("run", help="Executa um cenário e grava CSV e resumo")
    run.add_argument("scenario", help="Arquivo JSON, presets/<nome> ou <nome>")
    run.add_argument("--dt", type=_positive_float)
    run.add_argument("--t-final", type=_positive_float, dest="t_final")
    run.add_argument("--sign-mode", choices=SIGN_MODE_CHOICES, dest="sign_mode")
    run.add_argument("--eps", type=_positive_float)
    run.add_argument("--scheme", choices=SCHEME_CHOICES)
    run.add_argument("--stride", type=int)
    run.add_argument(
        "--out", type=Path, default=None, help=f"Diretório de saída (padrão: {settings.out})"
    )
    run.add_argument(
        "--dt-sweep",
        type=_dt_list,
        dest="dt_sweep",
        metavar="DT[,DT...]",
        help="Executa uma vez por dt, em paralelo (FORMSIM_MAX_WORKERS)",
    )

    plot = sub.add_parser("plot", help="Gera um SVG a partir de um CSV gravado")
    plot.add_argument("csv", type=Path)
    plot.add_argument("--quantity", required=True, choices=list(QUANTITIES))
    plot.add_argument("--out", type=Path, required=True)

    presets = sub.add_parser("presets", help="Cenários embutidos")
    presets_sub = presets.add_subparsers(dest="presets_command", required=True)
    presets_sub.add_parser("list", help="Lista os presets")
    show = presets_sub.add_parser("show", help="Imprime o JSON de um preset")
    show.add_argument("name")
    return parser


def _cmd_validate(args) -> int:
    text, origin = resolve_scenario_source(args.scenario)
    scenario = parse_scenario_text(text, origin)
    print(
        f"OK {origin}: '{scenario.name}' ({scenario.mode.value}, "
        f"{scenario.n_agents} agentes, {scenario.graph.n_edges} arestas, p={scenario.p})"
    )
    return 0


def _overrides(args) -> dict:
    return {
        "dt": args.dt,
        "t_final": args.t_final,
        "sign_mode": args.sign_mode,
        "eps": args.eps,
        "scheme": args.scheme,
        "stride": args.stride,
    }


def _format_summary(summary: dict) -> List[str]:
    keys = (
        "z_tilde_final_inf",
        "xi_final_inf",
        "eta_tilde_final_inf",
        "theta_tilde_final",
        "xi_tilde_final_inf",
        "converged",
        "lyapunov_ok",
        "passivity_ok",
        "flips_total",
    )
    return [f"  {key} = {summary[key]}" for key in keys if summary.get(key) is not None]


def _cmd_run(args) -> int:
    text, origin = resolve_scenario_source(args.scenario)
    out_dir = args.out or settings.out

    if args.dt_sweep:
        report = run_sweep(
            text,
            origin,
            args.dt_sweep,
            out_dir,
            overrides=_overrides(args),
            max_workers=settings.max_workers,
        )
        for outcome in report.outcomes:
            if outcome.error:
                print(f"dt={outcome.dt:g}: FALHOU: {outcome.error}", file=sys.stderr)
            else:
                print(f"dt={outcome.dt:g}: {outcome.out_dir}")
                print("\n".join(_format_summary(outcome.summary)))
        return 1 if report.failures else 0

    result = execute_run(text, origin, _overrides(args), out_dir)
    print(f"{result.summary.scenario}: {Path(out_dir)}")
    print("\n".join(_format_summary(result.summary.to_dict())))
    return 0


def _cmd_plot(args) -> int:
    path = plot_csv(args.csv, args.quantity, args.out)
    print(path)
    return 0


def _cmd_presets(args) -> int:
    if args.presets_command == "show":
        print(load_preset_text(args.name), end="")
        return 0
    for info in list_presets():
        print(f"{info.label}  {info.name:<26} {info.mode:<30} {info.description}")
    return 0


COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "plot": _cmd_plot,
    "presets": _cmd_presets,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Ponto de entrada da CLI.

    Returns:
        Código de saída: 0 sucesso, 1 falha de validação/execução, 2 uso incorreto
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.log_level or settings.log_level)

    try:
        return COMMANDS[args.command](args)
    except FormsimError as e:
        print(f"{PROG}: erro: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        logger.debug("Erro inesperado", exc_info=True)
        print(f"{PROG}: erro inesperado: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
