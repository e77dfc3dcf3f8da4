"""
Reward Schedule

A decision's reward is the sum of a role component (what the node did),
a hotspot component (avoided a central path, or was overused) and a
global component (network health at the end of the episode).

Agents learn from the full sum.  The episode total reported in the
metrics counts the health component once per episode rather than once
per decision, so it tracks what the agents chose instead of how many
nodes happened to decide.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from backend.app.schema.config_schema import RewardSchedule


class StepOutcome(str, Enum):
    SINK_DELIVERY = "sink_delivery"
    FORWARD = "forward"
    SENSE_AND_SEND = "sense_and_send"
    SLEEP = "sleep"
    DROP = "drop"
    REQUEST_TRANSMITTER = "request_transmitter"


@dataclass(frozen=True)
class StepEvents:
    """Everything a single decision is rewarded for."""

    outcomes: tuple[StepOutcome, ...]
    avoided_hotspot: bool = False
    overused: bool = False
    node_failure: bool = False
    variance_decreased: bool = False
    mean_soc: float = 100.0


@dataclass(frozen=True)
class RewardBreakdown:
    role: float
    hotspot: float
    health: float

    @property
    def local(self) -> float:
        return self.role + self.hotspot

    @property
    def total(self) -> float:
        return self.role + self.hotspot + self.health


def _role_value(outcome: StepOutcome, schedule: RewardSchedule) -> float:
    return {
        StepOutcome.SINK_DELIVERY: schedule.sink_delivery,
        StepOutcome.FORWARD: schedule.forward,
        StepOutcome.SENSE_AND_SEND: schedule.sense_and_send,
        StepOutcome.SLEEP: schedule.sleep,
        StepOutcome.DROP: schedule.drop,
        StepOutcome.REQUEST_TRANSMITTER: schedule.request_transmitter,
    }[outcome]


def health_reward(node_failure: bool, variance_decreased: bool, mean_soc: float,
                  schedule: RewardSchedule | None = None) -> float:
    """Network-wide component, identical for every decision of an episode."""
    schedule = schedule or RewardSchedule()
    health = 0.0
    if not node_failure:
        health += schedule.no_failure
    if variance_decreased:
        health += schedule.variance_decrease
    if mean_soc > schedule.high_energy_threshold:
        health += schedule.high_energy
    return health


def reward_breakdown(events: StepEvents, schedule: RewardSchedule | None = None) -> RewardBreakdown:
    schedule = schedule or RewardSchedule()
    role = sum(_role_value(o, schedule) for o in events.outcomes)

    hotspot = 0.0
    if events.avoided_hotspot:
        hotspot += schedule.avoid_centrality
    if events.overused:
        hotspot -= schedule.overuse_penalty

    health = health_reward(events.node_failure, events.variance_decreased, events.mean_soc, schedule)
    return RewardBreakdown(role=role, hotspot=hotspot, health=health)


def compute_reward(events: StepEvents, schedule: RewardSchedule | None = None) -> float:
    return reward_breakdown(events, schedule).total
