"""
Network Schema

Records describing deployed nodes.
"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict


class NodeRole(str, Enum):
    """Per-episode role of a node."""

    SENSOR = "Sensor"
    FORWARDER = "Forwarder"
    TRANSMITTER = "Transmitter"
    SINK = "Sink"


ROLE_INDEX: dict[NodeRole, int] = {role: i for i, role in enumerate(NodeRole)}


class NodeRecord(BaseModel):
    """Identity and fixed position of a node."""

    model_config = ConfigDict(frozen=True)

    id: int
    position: tuple[float, ...]
    role: NodeRole = NodeRole.SENSOR
