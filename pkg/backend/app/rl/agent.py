"""
Q-Learning Agent

Routing actions, the Q-value store, feasible-action construction,
epsilon-greedy selection and the one-step Q-learning update.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Hashable, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from backend.app.network.energy import EnergyLedger
from backend.app.network.routing_graph import FusedGraph
from backend.app.schema.config_schema import RlParams

logger = logging.getLogger(__name__)

GLOBAL_OWNER = "global"
REQUEST_PERCENTILE = 70.0


class ActionKind(str, Enum):
    TRANSMIT_TO = "transmit_to"
    SLEEP = "sleep"
    DROP = "drop"
    REQUEST_TRANSMITTER = "request_transmitter"


_KIND_ORDER = {kind: i for i, kind in enumerate(ActionKind)}


@dataclass(frozen=True)
class RoutingAction:
    kind: ActionKind
    target: Optional[int] = None

    @classmethod
    def transmit_to(cls, node: int) -> "RoutingAction":
        return cls(ActionKind.TRANSMIT_TO, int(node))

    def sort_key(self) -> tuple[int, int]:
        return (_KIND_ORDER[self.kind], -1 if self.target is None else self.target)

    def __str__(self) -> str:
        if self.kind is ActionKind.TRANSMIT_TO:
            return f"{self.kind.value}:{self.target}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "RoutingAction":
        kind, _, target = text.partition(":")
        return cls(ActionKind(kind), int(target) if target else None)


SLEEP = RoutingAction(ActionKind.SLEEP)
DROP = RoutingAction(ActionKind.DROP)
REQUEST_TRANSMITTER = RoutingAction(ActionKind.REQUEST_TRANSMITTER)


def ordered(actions: Iterable[RoutingAction]) -> list[RoutingAction]:
    """TransmitTo by target id, then Sleep, Drop, RequestTransmitter."""
    return sorted(set(actions), key=RoutingAction.sort_key)


# Q-table
class QStore:
    """Sparse Q-table; missing entries read as zero."""

    def __init__(self, owner: Union[int, str] = GLOBAL_OWNER):
        self.owner = owner
        self._table: dict[tuple[Hashable, RoutingAction], float] = {}

    def __len__(self) -> int:
        return len(self._table)

    def value(self, state: Hashable, action: RoutingAction) -> float:
        return self._table.get((state, action), 0.0)

    def set(self, state: Hashable, action: RoutingAction, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"Q-value for {state!r}/{action} must be finite, got {value}")
        self._table[(state, action)] = value

    def max_value(self, state: Hashable, actions: Iterable[RoutingAction]) -> float:
        values = [self.value(state, a) for a in actions]
        return max(values) if values else 0.0

    def max_abs(self) -> float:
        return max((abs(v) for v in self._table.values()), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"state": "|".join(str(x) for x in state), "action": str(action), "value": value}
            for (state, action), value in sorted(
                self._table.items(), key=lambda kv: (kv[0][0], kv[0][1].sort_key()),
            )
        ]
        return pd.DataFrame(rows, columns=["state", "action", "value"])

    def save(self, path: Union[str, Path]) -> None:
        """Write (state, action, value) triples; state keys must be int tuples."""
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def load(cls, path: Union[str, Path], owner: Union[int, str] = GLOBAL_OWNER) -> "QStore":
        store = cls(owner)
        frame = pd.read_csv(path, dtype={"state": str, "action": str})
        for row in frame.itertuples(index=False):
            state = tuple(int(x) for x in row.state.split("|"))
            store.set(state, RoutingAction.parse(row.action), float(row.value))
        return store


# Actions
def request_eligible(node: int, ledger: EnergyLedger) -> bool:
    """True when the node is in the top 30% of alive SoC."""
    threshold = ledger.percentile_alive(REQUEST_PERCENTILE)
    return threshold is not None and ledger.is_alive(node) and ledger.soc[node] >= threshold


def feasible_actions(node: int, fg: FusedGraph, ledger: EnergyLedger) -> list[RoutingAction]:
    """Every legal action of an alive node, in canonical order."""
    if not ledger.is_alive(node):
        raise ValueError(f"node {node} is dead")
    actions = [
        RoutingAction.transmit_to(j)
        for j in fg.successors(node)
        if j < len(ledger) and ledger.is_alive(j)
    ]
    actions += [SLEEP, DROP]
    if request_eligible(node, ledger):
        actions.append(REQUEST_TRANSMITTER)
    return ordered(actions)


def select_action(
    q: QStore,
    state: Hashable,
    actions: Iterable[RoutingAction],
    eps: float,
    rng: np.random.Generator,
    tolerance: float = 0.0,
    preference: Optional[Callable[[RoutingAction], tuple]] = None,
) -> RoutingAction:
    """Epsilon-greedy choice.

    Exploitation keeps every action whose Q-value is within ``tolerance``
    (relative) of the best, then picks the first by ``preference`` and
    canonical order.
    """
    choices = ordered(actions)
    if not choices:
        raise ValueError("select_action needs at least one action")
    if eps > 0 and rng.random() < eps:
        return choices[int(rng.integers(len(choices)))]

    values = [q.value(state, a) for a in choices]
    best = max(values)
    slack = tolerance * max(abs(best), 1.0)
    top = [a for a, v in zip(choices, values) if v >= best - slack]
    if preference is not None:
        top.sort(key=preference)
    return top[0]


def q_update(
    q: QStore,
    state: Hashable,
    action: RoutingAction,
    reward: float,
    next_state: Hashable,
    next_actions: Sequence[RoutingAction],
    params: RlParams,
) -> float:
    """Standard one-step Q-learning update; returns the new value."""
    current = q.value(state, action)
    target = reward + params.gamma * q.max_value(next_state, next_actions)
    updated = current + params.alpha * (target - current)
    q.set(state, action, updated)
    return updated
