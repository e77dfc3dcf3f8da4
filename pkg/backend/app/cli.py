"""
WSN Routing Simulator — Command Line

Batch entry point:

    python -m backend.app.cli run      --preset table2 --protocol SPMH --seed 3
    python -m backend.app.cli compare  --preset table2 --protocols MARL SPMH --seeds 1 2 3
    python -m backend.app.cli compare  --config a.json --config b.json --seeds 1 2
    python -m backend.app.cli sweep    --preset table2 --lambdas 0.25 0.5 0.75 --seeds 1 2
    python -m backend.app.cli export   --report results/report.json --format csv --out run.csv

Exit codes: 0 success, 1 configuration error, 2 runtime error.
The default output directory comes from ``WSN_SIM_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from backend.app.config.loader import PRESET_NAMES, load_config, output_dir
from backend.app.engine.errors import ConfigurationError
from backend.app.engine.experiment_runner import (
    compare,
    export_series,
    export_snapshots,
    load_report,
    sweep,
)
from backend.app.engine.simulation_engine import run_simulation
from backend.app.schema.config_schema import ComputeMode, Protocol, SimConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


# Arguments
def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_sets(pairs: Sequence[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"--set expects key.path=value, got '{pair}'")
        out[key.strip()] = _parse_value(value.strip())
    return out


def _add_config_args(p: argparse.ArgumentParser, repeatable: bool = False) -> None:
    if repeatable:
        p.add_argument("--config", type=Path, action="append",
                       help="JSON config file (repeatable; one cell group each)")
        p.add_argument("--preset", choices=PRESET_NAMES, action="append",
                       help="built-in preset (repeatable; a single one is the base of every --config)")
    else:
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--preset", choices=PRESET_NAMES, help="built-in base preset")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. rl.epsilon=0.2 (repeatable)")
    p.add_argument("--episodes", type=int)
    p.add_argument("--mode", choices=[m.value for m in ComputeMode])
    p.add_argument("--out", type=Path, help="output directory (default: $WSN_SIM_OUTPUT_DIR or results/)")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsn-sim", description="Energy-aware WSN routing simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="per-episode debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulation")
    _add_config_args(run)
    run.add_argument("--protocol", choices=[p.value for p in Protocol])
    run.add_argument("--seed", type=int)

    cmp_ = sub.add_parser("compare", help="compare protocols or configs over seeds")
    _add_config_args(cmp_, repeatable=True)
    cmp_.add_argument("--protocols", nargs="+", choices=[p.value for p in Protocol],
                      help="protocols to run on every config (default: MARL SPMH for a single "
                           "config, each config's own protocol otherwise)")
    cmp_.add_argument("--seeds", nargs="+", type=int, default=[0])

    swp = sub.add_parser("sweep", help="grid over fusion lambda, epsilon and alpha")
    _add_config_args(swp)
    swp.add_argument("--lambdas", nargs="+", type=float)
    swp.add_argument("--epsilons", nargs="+", type=float)
    swp.add_argument("--alphas", nargs="+", type=float)
    swp.add_argument("--seeds", nargs="+", type=int, default=[0])

    exp = sub.add_parser("export", help="convert a saved JSON report")
    exp.add_argument("--report", type=Path, required=True)
    exp.add_argument("--format", choices=["csv", "json", "snapshots"], default="csv")
    exp.add_argument("--checkpoints", nargs="+", type=int)
    exp.add_argument("--out", type=Path, required=True)
    return parser


def _overrides_from_args(args: argparse.Namespace, **flags: Any) -> dict[str, Any]:
    overrides = _parse_sets(args.sets)
    for key in ("episodes", "mode"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return overrides


def _config_from_args(args: argparse.Namespace, **flags: Any) -> SimConfig:
    if args.config is None and args.preset is None:
        raise ConfigurationError("give --config and/or --preset")
    return load_config(args.config, preset=args.preset, overrides=_overrides_from_args(args, **flags))


def _configs_from_args(args: argparse.Namespace) -> list[SimConfig]:
    """One config per --config / --preset; a lone preset is the base of every file."""
    files = args.config or []
    presets = args.preset or []
    if not files and not presets:
        raise ConfigurationError("give at least one --config or --preset")
    overrides = _overrides_from_args(args)
    if files and len(presets) == 1:
        return [load_config(f, preset=presets[0], overrides=overrides) for f in files]
    return [
        *(load_config(f, overrides=overrides) for f in files),
        *(load_config(preset=p, overrides=overrides) for p in presets),
    ]


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out if args.out is not None else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


# Commands
def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args, protocol=args.protocol, seed=args.seed)
    report = run_simulation(config)
    out = _out_dir(args)
    export_series(report, "json", out / "report.json")
    export_series(report, "csv", out / "episodes.csv")
    export_snapshots(report, out / "soc_snapshots.csv")
    last = report.episodes[-1]
    print(
        f"{config.name} {config.protocol.value} seed={config.seed}: "
        f"{len(report.episodes)} episodes, status={report.status.value}, "
        f"mean SoC={last.mean_soc:.2f}, var={last.var_soc:.2f}, alive={last.alive} -> {out}"
    )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    configs = _configs_from_args(args)
    if args.protocols is not None:
        protocols = [Protocol(p) for p in args.protocols]
    elif len(configs) == 1:
        protocols = [Protocol.MARL, Protocol.SPMH]
    else:
        protocols = None
    if len(configs) < 2 and len(protocols) < 2:
        raise ConfigurationError("compare needs at least two configs or two protocols")
    result = compare(configs, args.seeds, protocols=protocols, workers=args.workers)
    paths = result.write(_out_dir(args))
    print(result.summary.to_string(index=False))
    print(f"-> {paths['episodes']}, {paths['summary']}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    frame = sweep(config, args.seeds, lambdas=args.lambdas, epsilons=args.epsilons,
                  alphas=args.alphas, workers=args.workers)
    path = _out_dir(args) / "sweep.csv"
    frame.to_csv(path, index=False, lineterminator="\n")
    print(frame.to_string(index=False))
    print(f"-> {path}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "snapshots":
        export_snapshots(report, args.out, args.checkpoints)
    else:
        export_series(report, args.format, args.out)
    print(f"-> {args.out}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, ValidationError) as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:
        logger.exception("Run failed: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
