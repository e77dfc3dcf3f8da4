"""
Simulation Errors

Exception types raised by the simulator.  Each one subclasses a builtin
so callers that only catch ``ValueError`` / ``RuntimeError`` still work.
"""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration."""


class SimulationLogicError(RuntimeError):
    """An internal invariant of the simulation was violated."""


class UnstableQueueError(ValueError):
    """Arrival rate at a node is at or above its service rate."""


class NoRouteError(LookupError):
    """No candidate path exists between a source and its destination."""


class NetworkDeadError(RuntimeError):
    """Every sensor node has depleted its energy."""
