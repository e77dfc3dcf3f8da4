"""
Experiment Runner

Batch driver over many (config, protocol, seed) cells.

    compare        protocol/config comparison with a per-checkpoint summary
    sweep          grid over fusion lambda, epsilon and alpha
    export_series  per-episode CSV / JSON report / SoC snapshot CSV

Cells may run in a process pool; results are always folded in sorted
cell order so output never depends on completion order.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from backend.app.engine.errors import ConfigurationError
from backend.app.engine.simulation_engine import run_simulation
from backend.app.schema.config_schema import Protocol, SimConfig
from backend.app.schema.metrics_schema import EPISODE_CSV_COLUMNS, RunReport

logger = logging.getLogger(__name__)

SUMMARY_CHECKPOINTS: tuple[int, ...] = (1, 25, 50, 75, 99)
SNAPSHOT_COLUMNS = ["episode", "node_id", "soc"]

CellKey = tuple[str, str, int]


@dataclass
class ComparisonReport:
    """Aligned episode rows, summary table and the underlying reports."""

    episodes: pd.DataFrame
    summary: pd.DataFrame
    reports: dict[CellKey, RunReport] = field(default_factory=dict)

    def write(self, out_dir: Union[str, Path]) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"episodes": out / "compare_episodes.csv", "summary": out / "compare_summary.csv"}
        self.episodes.to_csv(paths["episodes"], index=False, lineterminator="\n")
        self.summary.to_csv(paths["summary"], index=False, lineterminator="\n")
        return paths


# Cell execution
def _run_cells(configs: Sequence[SimConfig], workers: int) -> list[RunReport]:
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_simulation, configs))
    return [run_simulation(c) for c in configs]


def _cell_key(config: SimConfig) -> CellKey:
    return (config.name, config.protocol.value, config.seed)


def _checkpoint_soc(report: RunReport, episode: int) -> float:
    if episode < len(report.episodes):
        return report.episodes[episode].mean_soc
    return float("nan")


def _mean_delay(report: RunReport) -> float:
    """Mean of the per-episode delays, skipping episodes that delivered nothing."""
    delays = [m.mean_delay_ms for m in report.episodes if m.mean_delay_ms is not None]
    return float(np.mean(delays)) if delays else float("nan")


def _summary_row(key: CellKey, report: RunReport) -> dict:
    row: dict = {"config": key[0], "protocol": key[1], "seed": str(key[2])}
    for ep in SUMMARY_CHECKPOINTS:
        row[f"avg_soc_ep{ep}"] = _checkpoint_soc(report, ep)
    variances = [m.var_soc for m in report.episodes]
    row["max_variance"] = max(variances) if variances else 0.0
    alive = sum(report.final_alive)
    row["eliminated_nodes"] = len(report.final_alive) - alive
    row["active_nodes"] = alive
    row["delivered_packets"] = sum(m.delivered_packets for m in report.episodes)
    row["dropped_packets"] = sum(m.dropped_packets for m in report.episodes)
    row["mean_delay_ms"] = _mean_delay(report)
    return row


def compare(
    configs: Sequence[SimConfig],
    seeds: Iterable[int],
    protocols: Optional[Sequence[Protocol]] = None,
    workers: int = 1,
) -> ComparisonReport:
    """Run every (config, protocol, seed) cell and tabulate the results."""
    seeds = sorted(set(seeds))
    if not configs or not seeds:
        raise ConfigurationError("compare needs at least one config and one seed")
    horizons = {c.episodes for c in configs}
    if len(horizons) > 1:
        raise ConfigurationError(f"mismatched episode horizons: {sorted(horizons)}")

    cells: dict[CellKey, SimConfig] = {}
    for config in configs:
        for protocol in (protocols or [config.protocol]):
            for seed in seeds:
                cell = config.model_copy(update={"protocol": Protocol(protocol), "seed": seed})
                key = _cell_key(cell)
                if key in cells:
                    raise ConfigurationError(f"duplicate comparison cell {key}; give configs distinct names")
                cells[key] = cell

    keys = sorted(cells)
    logger.info("Comparing %d cells with %d worker(s).", len(keys), workers)
    reports = dict(zip(keys, _run_cells([cells[k] for k in keys], workers)))

    frames = []
    for key in keys:
        frame = pd.DataFrame([m.model_dump() for m in reports[key].episodes])
        frame.insert(0, "seed", key[2])
        frame.insert(0, "protocol", key[1])
        frame.insert(0, "config", key[0])
        frames.append(frame)
    episodes = pd.concat(frames, ignore_index=True)
    episodes = episodes[
        ["config", "protocol", "seed", *EPISODE_CSV_COLUMNS,
         "min_delay_ms", "max_delay_ms", "delivered_packets", "transmitter_id"]
    ]

    rows = [_summary_row(key, reports[key]) for key in keys]
    summary = pd.DataFrame(rows)
    if len(seeds) > 1:
        numeric = [c for c in summary.columns if c not in ("config", "protocol", "seed")]
        means = summary.groupby(["config", "protocol"], sort=True)[numeric].mean().reset_index()
        means.insert(2, "seed", "mean")
        summary = pd.concat([summary, means], ignore_index=True)

    return ComparisonReport(episodes=episodes, summary=summary, reports=reports)


# Sweep
def sweep(
    base: SimConfig,
    seeds: Iterable[int],
    lambdas: Optional[Sequence[float]] = None,
    epsilons: Optional[Sequence[float]] = None,
    alphas: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """Final-state metrics over a grid of fusion lambda, epsilon and alpha."""
    lambdas = list(lambdas or [base.routing.fusion_lambda])
    epsilons = list(epsilons or [base.rl.epsilon])
    alphas = list(alphas or [base.rl.alpha])
    seeds = sorted(set(seeds))

    grid = list(itertools.product(sorted(lambdas), sorted(epsilons), sorted(alphas), seeds))
    configs = []
    for lam, eps, alpha, seed in grid:
        data = base.model_dump()
        data["routing"]["fusion_lambda"] = lam
        data["rl"]["epsilon"] = eps
        data["rl"]["alpha"] = alpha
        data["seed"] = seed
        try:
            configs.append(SimConfig.model_validate(data))
        except ValueError as exc:
            raise ConfigurationError(f"invalid sweep point lambda={lam} eps={eps} alpha={alpha}: {exc}") from exc

    logger.info("Sweeping %d grid points.", len(configs))
    rows = []
    for (lam, eps, alpha, seed), report in zip(grid, _run_cells(configs, workers)):
        last = report.episodes[-1]
        rows.append({
            "fusion_lambda": lam,
            "epsilon": eps,
            "alpha": alpha,
            "seed": seed,
            "episodes_run": len(report.episodes),
            "final_mean_soc": last.mean_soc,
            "final_var_soc": last.var_soc,
            "max_var_soc": max(m.var_soc for m in report.episodes),
            "final_alive": last.alive,
            "total_reward": sum(m.total_reward for m in report.episodes),
            "mean_delay_ms": _mean_delay(report),
            "dropped_packets": sum(m.dropped_packets for m in report.episodes),
        })
    return pd.DataFrame(rows)


# Export
def episode_frame(report: RunReport) -> pd.DataFrame:
    return pd.DataFrame([m.csv_row() for m in report.episodes], columns=EPISODE_CSV_COLUMNS)


def snapshot_frame(report: RunReport, checkpoints: Optional[Iterable[int]] = None) -> pd.DataFrame:
    """Long-format per-node SoC at the requested checkpoints."""
    wanted = sorted(report.soc_snapshots) if checkpoints is None else sorted(set(checkpoints))
    missing = [c for c in wanted if c not in report.soc_snapshots]
    if missing:
        raise ValueError(f"no SoC snapshot recorded for episodes {missing}")
    rows = [
        {"episode": ep, "node_id": node, "soc": soc}
        for ep in wanted
        for node, soc in enumerate(report.soc_snapshots[ep])
    ]
    return pd.DataFrame(rows, columns=SNAPSHOT_COLUMNS)


def export_series(report: RunReport, fmt: str, path: Union[str, Path]) -> Path:
    """Write the report as per-episode CSV or as JSON."""
    path = Path(path)
    if fmt == "csv":
        episode_frame(report).to_csv(path, index=False, lineterminator="\n")
    elif fmt == "json":
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    else:
        raise ValueError(f"unknown export format '{fmt}'; use 'csv' or 'json'")
    logger.info("Exported %d episodes to %s.", len(report.episodes), path)
    return path


def export_snapshots(
    report: RunReport,
    path: Union[str, Path],
    checkpoints: Optional[Iterable[int]] = None,
) -> Path:
    path = Path(path)
    snapshot_frame(report, checkpoints).to_csv(path, index=False, lineterminator="\n")
    return path


def load_report(path: Union[str, Path]) -> RunReport:
    return RunReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
