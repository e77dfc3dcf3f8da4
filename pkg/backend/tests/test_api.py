"""
Tests for the job store and the HTTP routes.

Route tests drive the routers through FastAPI's TestClient.
"""

from __future__ import annotations

import pytest
from fastapi import FastAPI
from fastapi.testclient import TestClient

from backend.app.engine.job_store import JobStatus, JobStore
from backend.app.routes.simulation import job_router, simulation_router

SMALL = {"preset": "table1", "episodes": 2, "overrides": {"node_count": 15}}


# Fixtures

@pytest.fixture(autouse=True)
def _clean_store():
    """Reset the singleton store before each test."""
    store = JobStore()
    store.reset()
    yield
    store.reset()


@pytest.fixture
def store() -> JobStore:
    return JobStore()


@pytest.fixture
def client() -> TestClient:
    app = FastAPI()
    app.include_router(simulation_router)
    app.include_router(job_router)
    return TestClient(app)


class TestJobStore:
    def test_singleton(self):
        assert JobStore() is JobStore()

    def test_completed_job(self, store: JobStore):
        job = store.submit("run", {"x": 2}, lambda p: {"double": p["x"] * 2}, "double it")
        done = store.wait(job.id, timeout=10)
        assert done.status is JobStatus.COMPLETED
        assert done.result == {"double": 4}
        assert done.completed_at is not None

    def test_failed_job(self, store: JobStore):
        def boom(_):
            raise RuntimeError("bad batch")

        job = store.submit("compare", {}, boom)
        done = store.wait(job.id, timeout=10)
        assert done.status is JobStatus.FAILED
        assert "bad batch" in done.error

    def test_unknown_job(self, store: JobStore):
        assert store.get("missing") is None

    def test_finished_thread_released(self, store: JobStore):
        job = store.submit("run", {}, lambda p: {})
        store.wait(job.id, timeout=10)
        assert job.id not in store._threads

    def test_oldest_finished_jobs_evicted(self, store: JobStore):
        store.max_finished = 2
        ids = []
        for i in range(4):
            job = store.submit("run", {"i": i}, lambda p: {"i": p["i"]})
            store.wait(job.id, timeout=10)
            ids.append(job.id)
        assert [store.get(i) is not None for i in ids] == [False, False, True, True]
        assert store._threads == {}


class TestSimulationRoutes:
    def test_presets(self, client: TestClient):
        resp = client.get("/api/simulations/presets")
        assert resp.status_code == 200
        assert resp.json()["presets"] == ["table1", "table2", "delay_study"]

    def test_run(self, client: TestClient):
        resp = client.post("/api/simulations/run", json={**SMALL, "protocol": "SPMH", "seed": 4})
        assert resp.status_code == 200
        data = resp.json()
        assert data["protocol"] == "SPMH"
        assert data["seed"] == 4
        assert len(data["episodes"]) == 2

    def test_bad_override_is_400(self, client: TestClient):
        resp = client.post("/api/simulations/run", json={**SMALL, "overrides": {"rl.alpha": 5}})
        assert resp.status_code == 400
        assert "alpha" in resp.json()["detail"]

    def test_compare(self, client: TestClient):
        resp = client.post("/api/simulations/compare", json={**SMALL, "seeds": [0, 1]})
        assert resp.status_code == 200
        summary = resp.json()["summary"]
        assert len(summary) == 2 * 2 + 2
        # checkpoints past the horizon come back as null
        assert summary[0]["avg_soc_ep99"] is None


class TestJobRoutes:
    def test_submit_and_poll(self, client: TestClient, store: JobStore):
        resp = client.post("/api/jobs/submit", json={"kind": "run", "payload": SMALL})
        assert resp.status_code == 202
        job_id = resp.json()["job_id"]

        store.wait(job_id, timeout=60)
        polled = client.get(f"/api/jobs/{job_id}").json()
        assert polled["status"] == "completed"
        assert polled["result"]["final_alive"] <= 15

    def test_unknown_kind_rejected(self, client: TestClient):
        resp = client.post("/api/jobs/submit", json={"kind": "sweep"})
        assert resp.status_code == 422

    def test_404_for_missing_job(self, client: TestClient):
        assert client.get("/api/jobs/nope").status_code == 404

    def test_active_list(self, client: TestClient):
        assert client.get("/api/jobs/active").json() == []
