"""Pydantic models: scenario file schema and service request/response types.

The same ScenarioModel validates YAML scenario files (CLI side) and JSON
request bodies (service side), so a file on disk and a wire payload are
the same document.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BankModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: list[float] = Field(min_length=2, description="inductances (H)")
    C: float = Field(gt=0, description="output capacitance (F)")
    R: float = Field(gt=0, description="initial load resistance (ohm)")
    E: list[float] = Field(min_length=2, description="source voltages (V)")
    r: Optional[list[float]] = Field(default=None, description="coil series resistance (ohm)")


class TransformModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    E_tilde: Optional[Union[float, list[float]]] = None
    E_eq: Optional[float] = None


class ControllerModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["known_load", "robust"]
    Q_r: float = Field(description="charge reference (C)")
    K_lambda: Union[float, list[list[float]]] = Field(
        description="repartition gain, scalar or full matrix")
    k_mu: Optional[float] = None
    k_d: Optional[float] = None
    k_i: Optional[float] = None
    R_assumed: Optional[float] = Field(
        default=None, description="load the known_load controller designs for; "
                                  "defaults to the bank's initial R")

    @model_validator(mode="after")
    def _gains_for_type(self):
        if self.type == "known_load" and self.k_mu is None:
            raise ValueError("known_load controller requires k_mu")
        if self.type == "robust" and (self.k_d is None or self.k_i is None):
            raise ValueError("robust controller requires k_d and k_i")
        return self


class CostModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["tracking", "quadratic"]
    C_star: float = 0.0
    K1: Optional[list[float]] = None
    K2: Optional[list[float]] = None

    @model_validator(mode="after")
    def _coeffs_for_type(self):
        if self.type == "quadratic" and (self.K1 is None or self.K2 is None):
            raise ValueError("quadratic cost requires K1 and K2")
        return self


class InitialModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    phi: Optional[list[float]] = None
    Q: float = 0.0
    xi: float = 0.0


class SimModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    duration: float = Field(ge=0)
    dt: float = Field(default=1e-5, gt=0)
    decimate: int = Field(default=10, ge=1)
    mode: Literal["continuous", "sampled"] = "continuous"
    sample_rate: float = Field(default=1e4, gt=0)
    initial: Optional[InitialModel] = None


class PlantModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    esr: bool = False
    pre_feedback: bool = False
    controller_r: Optional[list[float]] = None


class EventModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: float = Field(ge=0)
    action: Literal["set_load", "set_reference", "set_cost_param"]
    value: float
    name: Optional[str] = None


class CheckModel(BaseModel):
    """In-scenario assertion evaluated after the run."""

    model_config = ConfigDict(extra="forbid")

    type: Literal["charge_regulation", "casimir_hold", "charge_hold",
                  "flux_matches_oracle", "no_saturation"]
    rel_tol: float = 0.005
    start: Optional[float] = None
    end: Optional[float] = None
    max_drift: Optional[float] = None
    max_dev: Optional[float] = None


class ScenarioModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    description: str = ""
    bank: BankModel
    controller: ControllerModel
    cost: CostModel
    sim: SimModel
    transform: Optional[TransformModel] = None
    plant: PlantModel = PlantModel()
    events: list[EventModel] = []
    checks: list[CheckModel] = []


class CheckOutcomeModel(BaseModel):
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


class PhaseMetricsModel(BaseModel):
    t_start: float
    t_end: float
    R: float
    Q_r: float
    final_Q: float
    final_v: float
    final_phi: list[float]
    final_ccas: list[float]
    settling_time: Optional[float] = None
    max_ccas_deviation: float
    saturation_steps: int


class RunReportModel(BaseModel):
    scenario: str
    passed: bool
    checks: list[CheckOutcomeModel]
    phases: list[PhaseMetricsModel]
    columns: list[str]
    n_records: int
    artifacts: list[str] = []


class RunRequest(BaseModel):
    scenario: ScenarioModel
    include_trace: bool = True
    engine: Literal["auto", "fast", "reference"] = "auto"


class RunResponse(BaseModel):
    report: RunReportModel
    trace_csv: Optional[str] = None


class VerifyRequest(BaseModel):
    draws: int = Field(default=100, ge=1, le=100000)
    seed: int = 0
    m_min: int = Field(default=2, ge=2)
    m_max: int = Field(default=8, ge=2)


class StructuralCheckModel(BaseModel):
    name: str
    max_residual: float
    tolerance: float
    passed: bool


class VerifyResponse(BaseModel):
    passed: bool
    checks: list[StructuralCheckModel]
    table: str


class SweepRequest(BaseModel):
    scenario: ScenarioModel
    parameter: Literal["R", "k_d", "k_i", "k_mu", "K_lambda", "r_scale"]
    values: list[float] = Field(min_length=1)


class SweepRowModel(BaseModel):
    value: float
    passed: bool
    final_Q: float
    Q_rel_err: float
    final_phi: list[float]
    final_ccas: list[float]
    settling_time: Optional[float] = None
    saturation_steps: int


class SweepResponse(BaseModel):
    parameter: str
    rows: list[SweepRowModel]
    csv: str
    passed: bool


class HealthResponse(BaseModel):
    status: str
    version: str
