"""
API Schema

Request and response bodies of the simulation endpoints.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field

from backend.app.schema.config_schema import ComputeMode, Protocol
from backend.app.schema.metrics_schema import EpisodeMetrics, RunStatus


class SimulationRequest(BaseModel):
    """One run: a preset plus optional overrides."""

    preset: Optional[str] = Field("table2", description="Base preset; null for a fully explicit config.")
    overrides: dict[str, Any] = Field(
        default_factory=dict,
        description="Dotted-key overrides, e.g. {'rl.epsilon': 0.2}.",
    )
    protocol: Optional[Protocol] = None
    mode: Optional[ComputeMode] = None
    seed: Optional[int] = None
    episodes: Optional[int] = None

    def resolved_overrides(self) -> dict[str, Any]:
        out = dict(self.overrides)
        for key in ("protocol", "mode", "seed", "episodes"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value.value if hasattr(value, "value") else value
        return out


class CompareRequest(SimulationRequest):
    protocols: list[Protocol] = Field(default_factory=lambda: [Protocol.MARL, Protocol.SPMH])
    seeds: list[int] = Field(default_factory=lambda: [0])


class RunSummaryResponse(BaseModel):
    name: str
    protocol: Protocol
    seed: int
    status: RunStatus
    max_hops: int
    final_mean_soc: float
    final_alive: int
    pruned_edges: int
    no_route_events: int
    episodes: list[EpisodeMetrics]


class CompareResponse(BaseModel):
    summary: list[dict[str, Any]]


class PresetListResponse(BaseModel):
    presets: list[str]
