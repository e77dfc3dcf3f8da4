"""
Metrics Schema

Per-episode metrics and the final report of a run.

``EpisodeMetrics`` rows are what the CSV export writes; ``RunReport``
bundles them with the config, the final per-node state and the SoC
snapshots used for boxplots.  Both round-trip through JSON unchanged.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field

from backend.app.schema.config_schema import SimConfig

# Column order of the per-episode CSV.
EPISODE_CSV_COLUMNS: list[str] = [
    "episode",
    "mean_soc",
    "var_soc",
    "min_soc",
    "max_soc",
    "alive",
    "total_reward",
    "mean_delay_ms",
    "dropped_packets",
]


class RunStatus(str, Enum):
    COMPLETED = "completed"
    NETWORK_DEAD = "network_dead"


class EpisodeMetrics(BaseModel):
    """Summary of one episode."""

    episode: int
    mean_soc: float
    var_soc: float
    min_soc: float = 0.0
    max_soc: float = 0.0
    alive: int
    total_reward: float = 0.0
    mean_delay_ms: Optional[float] = Field(None, description="None when no packet arrived this episode.")
    min_delay_ms: Optional[float] = None
    max_delay_ms: Optional[float] = None
    dropped_packets: int = 0
    delivered_packets: int = 0
    unstable_packets: int = 0
    transmitter_id: Optional[int] = None
    decision_delay_ms: float = 0.0
    energy_spent: float = 0.0
    energy_by_category: dict[str, float] = Field(
        default_factory=dict,
        description="SoC removed this episode per cost category (hop, sink, sense, idle, ...).",
    )

    def csv_row(self) -> dict:
        return {col: getattr(self, col) for col in EPISODE_CSV_COLUMNS}


class RunReport(BaseModel):
    """Everything a finished run produced."""

    config: SimConfig
    status: RunStatus = RunStatus.COMPLETED
    max_hops: int
    episodes: list[EpisodeMetrics] = Field(default_factory=list)
    final_soc: list[float] = Field(default_factory=list)
    final_alive: list[bool] = Field(default_factory=list)
    soc_snapshots: dict[int, list[float]] = Field(
        default_factory=dict,
        description="Episode index -> per-node SoC at the end of that episode.",
    )
    pruned_edges: int = 0
    no_route_events: int = 0
    warnings: list[str] = Field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.config.seed
