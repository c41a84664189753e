"""HTTP service exposing solve / check / reproduce.

Request bodies carry the problem document plus optional overrides mirroring
the CLI flags.  Responses are the canonical report JSON, byte-identical to
the files the CLI writes, so clients may hash or diff them directly.
Structural schema violations are rejected by FastAPI with 422; expression
or semantic errors return 400 with a single-line detail.  A failed solve is
still a 200: the partial report is the product, and its "solve.converged" /
check statuses carry the outcome.
"""

from __future__ import annotations

from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .problems import (
    ProblemFileModel,
    ProblemInputError,
    UnknownExampleError,
    apply_overrides,
    canonical_example,
)
from .runner import PipelineOutcome, run_check, run_reproduce, run_solve


class Overrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol: Optional[float] = Field(default=None, gt=0)
    nodes: Optional[int] = Field(default=None, ge=2)
    seed: Optional[int] = None
    method: Optional[Literal["picard", "newton"]] = None


class HealthResponse(BaseModel):
    status: str
    version: str


class SolveRequest(Overrides):
    problem: ProblemFileModel


class CheckRequest(Overrides):
    problem: ProblemFileModel


class ReproduceRequest(Overrides):
    example_id: str


app = FastAPI(
    title="opeq",
    version=__version__,
    description="Solve perturbed operator equations u + Ku + C(u) = v on "
    "quadrature grids and check the hypotheses behind unique solvability.",
)


def _report_response(outcome: PipelineOutcome) -> Response:
    return Response(
        content=outcome.body,
        media_type="application/json",
        headers={"X-Exit-Code": str(outcome.exit_code)},
    )


def _effective_model(problem: ProblemFileModel, overrides: Overrides) -> ProblemFileModel:
    return apply_overrides(
        problem,
        tol=overrides.tol,
        nodes=overrides.nodes,
        seed=overrides.seed,
        method=overrides.method,
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/solve")
def solve(request: SolveRequest) -> Response:
    try:
        outcome = run_solve(_effective_model(request.problem, request))
    except ProblemInputError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return _report_response(outcome)


@app.post("/check")
def check(request: CheckRequest) -> Response:
    try:
        outcome = run_check(_effective_model(request.problem, request))
    except ProblemInputError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return _report_response(outcome)


@app.post("/reproduce")
def reproduce(request: ReproduceRequest) -> Response:
    try:
        model = _effective_model(canonical_example(request.example_id), request)
        outcome = run_reproduce(model)
    except UnknownExampleError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except ProblemInputError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return _report_response(outcome)
