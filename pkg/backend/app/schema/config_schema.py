"""
Simulation Config Schema

Pydantic models for a single simulation run.

A ``SimConfig`` is the only input of the engine: region, node count,
coverage radius, energy costs, RL hyper-parameters, the reward
schedule, routing knobs, delay parameters, protocol and seed.

Every model forbids unknown keys so a typo in a config file fails
loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Enums
class Protocol(str, Enum):
    """Routing protocol driving a run."""

    MARL = "MARL"
    SPMH = "SPMH"
    SINGLE_HOP = "SingleHop"
    LEACH = "LEACH"


class ComputeMode(str, Enum):
    """Where Q-learning decisions are computed."""

    LOCAL = "Local"
    CLOUD = "Cloud"


class SingleHopTarget(str, Enum):
    """Destination of the direct-transmission baseline."""

    TRANSMITTER = "transmitter"
    SINK = "sink"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Geometry
class Region(_Strict):
    """Axis-aligned deployment box anchored at the origin."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dimensions: int = Field(2, description="2 or 3.")
    extents: tuple[float, ...] = Field((100.0, 100.0), description="Side lengths per axis.")

    @model_validator(mode="after")
    def _check_extents(self) -> "Region":
        if self.dimensions not in (2, 3):
            raise ValueError(f"region.dimensions must be 2 or 3, got {self.dimensions}")
        if len(self.extents) != self.dimensions:
            raise ValueError(
                f"region.extents has {len(self.extents)} values for "
                f"{self.dimensions} dimensions"
            )
        if any(not (e > 0 and math.isfinite(e)) for e in self.extents):
            raise ValueError(f"region.extents must be positive, got {self.extents}")
        return self

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(e / 2.0 for e in self.extents)

    @property
    def diagonal(self) -> float:
        return math.sqrt(sum(e * e for e in self.extents))

    def contains(self, position: tuple[float, ...]) -> bool:
        if len(position) != self.dimensions:
            return False
        return all(0.0 <= p <= e for p, e in zip(position, self.extents))


# Energy
class CostSchedule(_Strict):
    """SoC points removed per event."""

    hop_cost: float = Field(2.0, ge=0)
    sink_cost: float = Field(8.0, ge=0)
    sense_cost: float = Field(1.0, ge=0)
    idle_cost: float = Field(0.0, ge=0)
    sleep_cost: float = Field(0.0, ge=0)
    report_cost: float = Field(0.1, ge=0, description="Cloud mode, per alive node per episode.")
    local_compute_cost: float = Field(0.05, ge=0, description="Local mode, per decision.")


# Learning
class RlParams(_Strict):
    alpha: float = Field(0.1, gt=0, le=1)
    gamma: float = Field(0.9, ge=0, lt=1)
    epsilon: float = Field(0.3, ge=0, le=1)
    epsilon_decay: float = Field(0.98, gt=0, le=1)
    epsilon_floor: float = Field(0.05, ge=0, le=1)
    q_tie_tolerance: float = Field(
        0.1, ge=0,
        description="Relative gap under which two Q-values count as equivalent.",
    )


class RewardSchedule(_Strict):
    sink_delivery: float = 10.0
    forward: float = 5.0
    sense_and_send: float = 3.0
    sleep: float = 1.0
    drop: float = 0.0
    request_transmitter: float = 0.0
    avoid_centrality: float = 2.0
    overuse_penalty: float = Field(4.0, ge=0, description="Magnitude; subtracted.")
    overuse_threshold: int = Field(4, ge=1, description="usage_count at which the penalty applies.")
    overuse_ratio: float = Field(
        2.0, ge=0, description="Overused also means at least this multiple of the mean alive usage.",
    )
    no_failure: float = 3.0
    variance_decrease: float = 2.0
    high_energy: float = 2.0
    high_energy_threshold: float = Field(40.0, ge=0, le=100)
    centrality_percentile: float = Field(80.0, ge=0, le=100)

    @property
    def max_abs_reward(self) -> float:
        """Largest single-decision reward magnitude the schedule allows."""
        role = max(
            abs(v) for v in (
                self.sink_delivery, self.forward, self.sense_and_send,
                self.sleep, self.drop, self.request_transmitter,
            )
        )
        return (
            role + abs(self.avoid_centrality) + self.overuse_penalty
            + abs(self.no_failure) + abs(self.variance_decrease) + abs(self.high_energy)
        )


# Routing
class RoutingParams(_Strict):
    fusion_lambda: float = Field(0.5, description="Weight of MERA vs MST in the fused cost.")
    off_tree_penalty: float = Field(3.0, ge=1)
    cost_cutoff_factor: float = Field(5.0, gt=0, description="Multiplier on the median fused weight.")
    attenuation_pct: float = Field(5.0, gt=0, lt=100)
    integrity_floor: float = Field(0.70, gt=0, lt=1)
    hop_cap: int = Field(10, ge=1)
    k_max: int = Field(32, ge=1)
    energy_guard: bool = True
    critical_soc: float = Field(5.0, ge=0, le=100)
    centrality_samples: Optional[int] = Field(None, ge=1)
    usage_decay_period: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _check_lambda(self) -> "RoutingParams":
        if not 0.0 <= self.fusion_lambda <= 1.0:
            raise ValueError(
                f"routing.fusion_lambda must lie in [0, 1], got {self.fusion_lambda}"
            )
        return self


# Delay
class DelayParams(_Strict):
    packet_bits: float = Field(1000.0, gt=0)
    rate_bps: float = Field(250_000.0, gt=0)
    processing_s: float = Field(0.001, ge=0)
    service_rate: float = Field(20.0, gt=0, description="mu, packets per second per node.")
    decision_time_s: float = Field(0.002, ge=0, description="T_Q, local Q decision latency.")
    state_bits: float = Field(8000.0, ge=0)
    action_bits: float = Field(2000.0, ge=0)
    link_rate_bps: float = Field(1_000_000.0, gt=0)
    compute_s: float = Field(0.005, ge=0)
    episode_duration_s: float = Field(1.0, gt=0)
    queue_sum_mode: bool = False


class LeachParams(_Strict):
    ch_probability: float = Field(0.1, gt=0, lt=1)
    setup_delay_s: float = Field(0.005, ge=0)
    recluster_delay_s: float = Field(0.05, ge=0)


# Run
class SimConfig(_Strict):
    """Complete description of one simulation run."""

    name: str = "custom"
    region: Region
    node_count: int = Field(..., ge=2)
    coverage_radius: float = Field(..., gt=0)
    sink_position: Optional[tuple[float, ...]] = None
    node_positions: Optional[list[tuple[float, ...]]] = None

    costs: CostSchedule = Field(default_factory=CostSchedule)
    rl: RlParams = Field(default_factory=RlParams)
    rewards: RewardSchedule = Field(default_factory=RewardSchedule)
    routing: RoutingParams = Field(default_factory=RoutingParams)
    delay: DelayParams = Field(default_factory=DelayParams)
    leach: LeachParams = Field(default_factory=LeachParams)

    episodes: int = Field(100, ge=1)
    sources_per_episode: int = Field(10, ge=0, description="0 allowed as an override.")
    buffer_capacity: int = Field(10, ge=1)
    protocol: Protocol = Protocol.MARL
    mode: ComputeMode = ComputeMode.LOCAL
    seed: int = 0
    single_hop_target: SingleHopTarget = SingleHopTarget.TRANSMITTER
    strict_range: bool = False
    snapshot_episodes: list[int] = Field(default_factory=lambda: [0, 25, 50, 75, 99])

    @model_validator(mode="after")
    def _check_geometry(self) -> "SimConfig":
        if self.sink_position is not None and not self.region.contains(self.sink_position):
            raise ValueError(f"sink_position {self.sink_position} lies outside the region")
        if self.node_positions is not None:
            if len(self.node_positions) != self.node_count:
                raise ValueError(
                    f"node_positions has {len(self.node_positions)} entries, "
                    f"node_count is {self.node_count}"
                )
            for idx, pos in enumerate(self.node_positions):
                if not self.region.contains(pos):
                    raise ValueError(f"node_positions[{idx}] = {pos} lies outside the region")
        if any(e < 0 for e in self.snapshot_episodes):
            raise ValueError("snapshot_episodes must be non-negative")
        return self

    @property
    def resolved_sink(self) -> tuple[float, ...]:
        return self.sink_position if self.sink_position is not None else self.region.center
