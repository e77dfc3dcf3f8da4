"""
Delay Model

End-to-end packet delay for local and cloud decision making.

Per hop a packet pays transmission (``L / R``), processing (``t_p``) and
an M/M/1 waiting term at the sending node.  The decision term is the
local Q lookup time ``T_Q`` or the cloud round trip
``T_D = (s + a) / b + T_compute``.
"""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence

from backend.app.engine.errors import UnstableQueueError
from backend.app.network.routing_graph import CandidatePath
from backend.app.schema.config_schema import ComputeMode, DelayParams

UNSTABLE = math.inf


def queue_wait(lambda_h: float, mu: float) -> float:
    """M/M/1 waiting time ``lambda / (mu^2 (1 - lambda/mu))``."""
    if mu <= 0:
        raise ValueError(f"service rate must be positive, got {mu}")
    if lambda_h < 0:
        raise ValueError(f"arrival rate must be non-negative, got {lambda_h}")
    if lambda_h >= mu:
        raise UnstableQueueError(f"arrival rate {lambda_h} >= service rate {mu}")
    return lambda_h / (mu ** 2 * (1.0 - lambda_h / mu))


def cloud_decision_delay(params: DelayParams) -> float:
    if params.link_rate_bps <= 0:
        raise ValueError(f"link rate must be positive, got {params.link_rate_bps}")
    return (params.state_bits + params.action_bits) / params.link_rate_bps + params.compute_s


def decision_delay(params: DelayParams, mode: ComputeMode) -> float:
    if mode is ComputeMode.CLOUD:
        return cloud_decision_delay(params)
    return params.decision_time_s


def end_to_end_delay(
    path: CandidatePath | Sequence[int],
    params: DelayParams,
    mode: ComputeMode = ComputeMode.LOCAL,
    arrival_rates: Optional[Mapping[int, float]] = None,
    include_decision: bool = True,
) -> float:
    """Seconds from source to destination; ``inf`` if any hop is unstable.

    Queue waits are taken at the sending node of every hop.  By default
    they are averaged over the path and that average is paid on each
    hop; ``queue_sum_mode`` adds each hop's own wait instead.
    """
    nodes = path.nodes if isinstance(path, CandidatePath) else tuple(path)
    hops = max(len(nodes) - 1, 0)
    rates = arrival_rates or {}
    tail = decision_delay(params, mode) if include_decision else 0.0
    if hops == 0:
        return tail

    try:
        waits = [queue_wait(rates.get(n, 0.0), params.service_rate) for n in nodes[:-1]]
    except UnstableQueueError:
        return UNSTABLE

    link = params.packet_bits / params.rate_bps + params.processing_s
    if params.queue_sum_mode:
        return sum(link + w for w in waits) + tail
    mean_wait = sum(waits) / hops
    return hops * (link + mean_wait) + tail
