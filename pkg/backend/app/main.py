"""
WSN Routing Simulator — Backend Entry Point

FastAPI application exposing the batch simulator over HTTP.

Responsibilities:
    - Configures logging, CORS, and application lifespan.
    - Registers the simulation and job routers.
    - Performs a preflight check that the built-in presets resolve.
"""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from backend.app.config.loader import PRESET_NAMES, load_config
from backend.app.routes.simulation import job_router, simulation_router

# Logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
)

logger = logging.getLogger(__name__)


def _presets_ok() -> bool:
    try:
        for name in PRESET_NAMES:
            load_config(preset=name)
    except Exception:
        logger.exception("Preset check failed.")
        return False
    return True


# Application lifespan (startup / shutdown)
@asynccontextmanager
async def lifespan(app: FastAPI):
    """Run startup and shutdown logic for the FastAPI application."""
    logger.info("Starting WSN Routing Simulator...")
    if _presets_ok():
        logger.info("All presets resolved.")

    yield  # Application runs here.

    logger.info("Shutting down WSN Routing Simulator.")


# Application factory
app = FastAPI(
    title="WSN Routing Simulator",
    description="Energy-aware multi-agent Q-learning routing for wireless sensor networks",
    version="0.1.0",
    lifespan=lifespan,
)

# Middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Routes
app.include_router(simulation_router)
app.include_router(job_router)


# Health check
@app.get("/health")
async def health_check():
    """Liveness probe: also verifies the presets load."""
    ok = _presets_ok()
    return {
        "status": "healthy" if ok else "degraded",
        "presets": list(PRESET_NAMES),
    }
