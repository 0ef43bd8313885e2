"""HTTP front end: scenario runs, sweeps and the structural verify suite.

Stateless service around the core package.  Every request carries the
whole scenario document, a response carries the report (plus the trace
as CSV text on demand), so many clients can share one instance and runs
stay reproducible.  Start with:

    uvicorn parbuck.service:app
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__, report as report_mod
from .config import build_scenario
from .errors import ConfigError, ParameterError, SimulationDiverged
from .schemas import (HealthResponse, RunRequest, RunResponse,
                      StructuralCheckModel, SweepRequest, SweepResponse,
                      VerifyRequest, VerifyResponse)
from .sim import run
from .verify import residual_table, run_structural_suite

app = FastAPI(
    title="parbuck",
    description="Scenario simulator for decoupled control of parallel buck "
                "converter banks",
    version=__version__,
)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/run", response_model=RunResponse)
def run_scenario(request: RunRequest) -> RunResponse:
    try:
        scenario = build_scenario(request.scenario)
        trace = run(scenario, engine=request.engine)
    except (ConfigError, ParameterError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except SimulationDiverged as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    rep = report_mod.build_report(request.scenario, scenario, trace)
    return RunResponse(report=rep,
                       trace_csv=trace.to_csv_text() if request.include_trace else None)


@app.post("/verify", response_model=VerifyResponse)
def verify(request: VerifyRequest) -> VerifyResponse:
    if request.m_max < request.m_min:
        raise HTTPException(status_code=400, detail="m_max must be >= m_min")
    results = run_structural_suite(draws=request.draws, seed=request.seed,
                                   m_min=request.m_min, m_max=request.m_max)
    return VerifyResponse(
        passed=all(r.passed for r in results),
        checks=[StructuralCheckModel(name=r.name, max_residual=r.max_residual,
                                     tolerance=r.tolerance, passed=r.passed)
                for r in results],
        table=residual_table(results),
    )


def _apply_sweep_value(scenario, parameter: str, value: float):
    if parameter == "R":
        scenario.bank.R = float(value)
    elif parameter in ("k_d", "k_i", "k_mu"):
        try:
            scenario.controller = replace(scenario.controller, **{parameter: float(value)})
        except TypeError as exc:
            raise ConfigError(f"{type(scenario.controller).__name__} has no "
                              f"gain {parameter!r}") from exc
    elif parameter == "K_lambda":
        dim = scenario.bank.m - 1
        scenario.controller = replace(scenario.controller,
                                      K_lambda=float(value) * np.eye(dim))
    elif parameter == "r_scale":
        scenario.bank.r = scenario.bank.r * float(value)
    else:
        raise ConfigError(f"parameter {parameter!r} is not sweepable")
    return scenario


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest) -> SweepResponse:
    def one(value: float):
        try:
            scenario = build_scenario(request.scenario)
            scenario = _apply_sweep_value(scenario, request.parameter, value)
            scenario.validate()
            trace = run(scenario)
        except (ConfigError, ParameterError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except SimulationDiverged as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return report_mod.sweep_row(value, trace)

    workers = min(len(request.values), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, request.values))
    return SweepResponse(
        parameter=request.parameter,
        rows=rows,
        csv=report_mod.sweep_csv(request.parameter, rows),
        passed=all(r.passed for r in rows),
    )
