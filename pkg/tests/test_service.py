import json

import pytest
from fastapi.testclient import TestClient

from opeq import __version__
from opeq.problems import validate_problem_data
from opeq.runner import run_check, run_solve
from opeq.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def problem_data(**overrides):
    data = {
        "domain": {"intervals": [[0.0, 1.0]]},
        "quadrature": {"rule": "trapezoid", "nodes_per_dim": 31},
        "linear_kernels": ["0.5"],
        "rhs": "1",
        "solver": {"method": "picard", "tol": 1e-10, "max_iter": 200, "seed": 0},
    }
    data.update(overrides)
    return data


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body == {"status": "ok", "version": __version__}


class TestSolveEndpoint:
    def test_success(self, client):
        response = client.post("/solve", json={"problem": problem_data()})
        assert response.status_code == 200
        assert response.headers["X-Exit-Code"] == "0"
        doc = json.loads(response.content)
        assert set(doc) == {"problem_digest", "solve", "checks", "timings_ms", "version"}
        assert doc["solve"]["converged"] is True
        assert doc["timings_ms"] is None

    def test_body_matches_in_process_pipeline(self, client):
        data = problem_data()
        response = client.post("/solve", json={"problem": data})
        outcome = run_solve(validate_problem_data(data))
        assert response.content == outcome.body

    def test_expression_error_400(self, client):
        response = client.post("/solve", json={"problem": problem_data(linear_kernels=["sin("])})
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert "linear_kernels[0]" in detail
        assert "position 4" in detail

    def test_unknown_key_422(self, client):
        response = client.post("/solve", json={"problem": dict(problem_data(), bogus=1)})
        assert response.status_code == 422

    def test_solver_failure_returns_report(self, client):
        response = client.post(
            "/solve", json={"problem": problem_data(), "tol": 1e-99}
        )
        assert response.status_code == 200
        assert response.headers["X-Exit-Code"] == "2"
        doc = json.loads(response.content)
        assert doc["solve"]["converged"] is False
        assert doc["solve"]["failure"] == "max_iter_exceeded"

    def test_overrides_respected(self, client):
        response = client.post(
            "/solve", json={"problem": problem_data(), "nodes": 11, "method": "newton"}
        )
        doc = json.loads(response.content)
        assert doc["solve"]["method"] == "newton"
        assert len(doc["solve"]["solution"]) == 11


class TestCheckEndpoint:
    def test_statuses(self, client):
        response = client.post("/check", json={"problem": problem_data()})
        assert response.status_code == 200
        doc = json.loads(response.content)
        statuses = {c["name"]: c["status"] for c in doc["checks"]}
        assert statuses["contraction"] == "pass"
        assert statuses["norm_separation"] == "pass"
        assert statuses["frechet"] == "skipped"
        assert doc["solve"] is None

    def test_body_matches_in_process_pipeline(self, client):
        data = problem_data(hammerstein_kernel="0.1*tanh(u)")
        response = client.post("/check", json={"problem": data})
        outcome = run_check(validate_problem_data(data))
        assert response.content == outcome.body


class TestReproduceEndpoint:
    def test_example2(self, client):
        response = client.post("/reproduce", json={"example_id": "example2"})
        assert response.status_code == 200
        assert response.headers["X-Exit-Code"] == "0"
        doc = json.loads(response.content)
        names = [c["name"] for c in doc["checks"]]
        assert "uniqueness_probe" in names and "cross_solver_agreement" in names

    def test_unknown_example_404(self, client):
        response = client.post("/reproduce", json={"example_id": "example3"})
        assert response.status_code == 404

    def test_deterministic_bytes(self, client):
        first = client.post("/reproduce", json={"example_id": "example1"})
        second = client.post("/reproduce", json={"example_id": "example1"})
        assert first.content == second.content
