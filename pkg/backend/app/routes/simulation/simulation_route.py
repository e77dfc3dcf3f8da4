"""
Simulation API Routes

Synchronous endpoints for presets, single runs and small comparisons.
Large batches should go through ``/api/jobs/submit`` instead.

Endpoints
---------
GET   /api/simulations/presets   - list built-in presets
POST  /api/simulations/run       - run one simulation, return its metrics
POST  /api/simulations/compare   - compare protocols over seeds
"""

from __future__ import annotations

import logging
import math
from typing import Any

from fastapi import APIRouter, HTTPException

from backend.app.config.loader import PRESET_NAMES, load_config
from backend.app.engine.errors import ConfigurationError
from backend.app.engine.experiment_runner import compare
from backend.app.engine.simulation_engine import run_simulation
from backend.app.schema.api_schema import (
    CompareRequest,
    CompareResponse,
    PresetListResponse,
    RunSummaryResponse,
    SimulationRequest,
)
from backend.app.schema.metrics_schema import RunReport

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/simulations", tags=["simulations"])


def _summarise(report: RunReport) -> RunSummaryResponse:
    last = report.episodes[-1]
    return RunSummaryResponse(
        name=report.config.name,
        protocol=report.config.protocol,
        seed=report.seed,
        status=report.status,
        max_hops=report.max_hops,
        final_mean_soc=last.mean_soc,
        final_alive=last.alive,
        pruned_edges=report.pruned_edges,
        no_route_events=report.no_route_events,
        episodes=report.episodes,
    )


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# Workers (shared with the job routes)

def run_worker(payload: dict[str, Any]) -> dict[str, Any]:
    request = SimulationRequest(**payload)
    config = load_config(preset=request.preset, overrides=request.resolved_overrides())
    return _summarise(run_simulation(config)).model_dump(mode="json")


def compare_worker(payload: dict[str, Any]) -> dict[str, Any]:
    request = CompareRequest(**payload)
    config = load_config(preset=request.preset, overrides=request.resolved_overrides())
    result = compare([config], request.seeds, protocols=request.protocols)
    rows = [
        {k: _json_safe(v) for k, v in row.items()}
        for row in result.summary.to_dict(orient="records")
    ]
    return CompareResponse(summary=rows).model_dump(mode="json")


# Endpoints

@router.get("/presets", response_model=PresetListResponse)
def list_presets() -> PresetListResponse:
    return PresetListResponse(presets=list(PRESET_NAMES))


@router.post("/run", response_model=RunSummaryResponse)
def run(request: SimulationRequest) -> RunSummaryResponse:
    """Run a single simulation to completion."""
    try:
        return RunSummaryResponse(**run_worker(request.model_dump(mode="json")))
    except ConfigurationError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except Exception as exc:
        logger.exception("Simulation run failed: %s", exc)
        raise HTTPException(status_code=500, detail=str(exc))


@router.post("/compare", response_model=CompareResponse)
def compare_protocols(request: CompareRequest) -> CompareResponse:
    """Run every protocol over every seed and return the summary table."""
    try:
        return CompareResponse(**compare_worker(request.model_dump(mode="json")))
    except ConfigurationError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except Exception as exc:
        logger.exception("Comparison failed: %s", exc)
        raise HTTPException(status_code=500, detail=str(exc))
