"""Simulation route package exports."""

from backend.app.routes.simulation.job_route import router as job_router
from backend.app.routes.simulation.simulation_route import router as simulation_router

__all__ = ["job_router", "simulation_router"]
