"""
Energy Ledger

Per-node state of charge (SoC, 0-100), alive flags and usage counters.

Costs are subtracted in place and clipped at zero; a node whose SoC
reaches zero is dead for the rest of the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from backend.app.engine.errors import SimulationLogicError

logger = logging.getLogger(__name__)

FULL_CHARGE = 100.0
DEATH_THRESHOLD = 0.0


class SocLevel(IntEnum):
    """Five equal SoC bands."""

    VERY_LOW = 0   # [0, 20)
    LOW = 1        # [20, 40)
    MEDIUM = 2     # [40, 60)
    HIGH = 3       # [60, 80)
    VERY_HIGH = 4  # [80, 100]


@dataclass(frozen=True)
class SocStats:
    mean: float
    variance: float
    minimum: float
    maximum: float
    alive_count: int


def discretize_soc(soc: float) -> SocLevel:
    """Band of a SoC value; 100 belongs to the top band."""
    if not 0.0 <= soc <= FULL_CHARGE:
        raise ValueError(f"soc must lie in [0, 100], got {soc}")
    return SocLevel(min(int(soc // 20.0), SocLevel.VERY_HIGH))


class EnergyLedger:
    """Mutable energy state of the sensor nodes ``0 .. n-1``."""

    def __init__(self, n: int, initial_soc: float = FULL_CHARGE):
        if n < 1:
            raise ValueError(f"ledger needs at least one node, got {n}")
        if not 0.0 < initial_soc <= FULL_CHARGE:
            raise ValueError(f"initial_soc must lie in (0, 100], got {initial_soc}")
        self.soc = np.full(n, float(initial_soc))
        self.alive = np.ones(n, dtype=bool)
        self.usage_count = np.zeros(n, dtype=np.int64)

    @classmethod
    def from_levels(cls, levels: Iterable[float]) -> "EnergyLedger":
        values = np.asarray(list(levels), dtype=float)
        if np.any((values < 0) | (values > FULL_CHARGE)):
            raise ValueError("SoC levels must lie in [0, 100]")
        ledger = cls(len(values))
        ledger.soc = values.copy()
        ledger.alive = values > DEATH_THRESHOLD
        return ledger

    def __len__(self) -> int:
        return len(self.soc)

    # Mutation

    def charge(self, node: int, cost: float) -> float:
        """Subtract ``cost`` from ``node``; returns the amount actually removed."""
        if cost < 0:
            raise ValueError(f"cost must be non-negative, got {cost}")
        if not self.alive[node]:
            raise SimulationLogicError(f"cost charged to dead node {node}")
        before = self.soc[node]
        after = max(before - cost, 0.0)
        self.soc[node] = after
        if after <= DEATH_THRESHOLD:
            self.alive[node] = False
            logger.debug("Node %d depleted its energy.", node)
        return before - after

    def record_use(self, node: int) -> None:
        self.usage_count[node] += 1

    def decay_usage(self) -> None:
        """Halve every usage counter (integer division)."""
        self.usage_count //= 2

    # Queries

    def is_alive(self, node: int) -> bool:
        return bool(self.alive[node])

    def alive_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.alive)]

    def total(self) -> float:
        return float(self.soc.sum())

    def percentile_alive(self, q: float) -> Optional[float]:
        """``q``-th percentile of alive SoC, ``None`` when nothing is alive."""
        values = self.soc[self.alive]
        if values.size == 0:
            return None
        return float(np.percentile(values, q))

    def snapshot(self) -> pd.DataFrame:
        return pd.DataFrame({
            "node_id": np.arange(len(self.soc)),
            "soc": self.soc.copy(),
            "alive": self.alive.copy(),
            "usage_count": self.usage_count.copy(),
        })


def apply_cost(ledger: EnergyLedger, node: int, cost: float) -> EnergyLedger:
    """Charge ``cost`` to ``node`` and return the (mutated) ledger."""
    ledger.charge(node, cost)
    return ledger


def soc_stats(ledger: EnergyLedger) -> SocStats:
    """Population statistics over all nodes (dead nodes count at 0)."""
    soc = ledger.soc
    return SocStats(
        mean=float(soc.mean()),
        variance=float(soc.var()),
        minimum=float(soc.min()),
        maximum=float(soc.max()),
        alive_count=int(ledger.alive.sum()),
    )
