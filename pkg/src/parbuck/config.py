"""Scenario files: YAML parsing, validation and domain construction.

A scenario file is one YAML document matching `schemas.ScenarioModel`;
see the bundled files under `parbuck/configs/` for the layout.  All
units are SI base units (H, F, ohm, V, C, Wb, s).
"""

from __future__ import annotations

from importlib import resources

import numpy as np
import yaml
from pydantic import ValidationError

from .controllers import KnownLoadConfig, RobustConfig
from .costs import QuadraticCost, TrackingCost
from .errors import ConfigError
from .model import BankParams, PchState
from .schemas import ScenarioModel
from .sim import Event, Scenario

BUNDLED = ("exp1", "exp2", "exp2_esr")


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_scenario_text(text: str, source: str = "<string>") -> ScenarioModel:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    try:
        return ScenarioModel.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation_error(exc)}") from exc


def load_scenario_file(path) -> ScenarioModel:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario_text(text, source=str(path))


def bundled_scenario(name: str) -> ScenarioModel:
    """Load one of the packaged scenarios (exp1, exp2, exp2_esr)."""
    if name not in BUNDLED:
        raise ConfigError(f"no bundled scenario {name!r}, have {BUNDLED}")
    text = resources.files("parbuck.configs").joinpath(f"{name}.yaml").read_text()
    return parse_scenario_text(text, source=f"bundled:{name}")


def gain_matrix(value, dim: int) -> np.ndarray:
    """Promote a scalar gain to dim x dim (scalar times identity)."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    return arr


def build_scenario(spec: ScenarioModel) -> Scenario:
    """Turn a validated scenario document into the domain object."""
    bank = BankParams(L=spec.bank.L, C=spec.bank.C, R=spec.bank.R,
                      E=spec.bank.E, r=spec.bank.r)
    kdim = bank.m - 1

    c = spec.controller
    if c.type == "known_load":
        controller = KnownLoadConfig(
            k_mu=c.k_mu, K_lambda=gain_matrix(c.K_lambda, kdim), Q_r=c.Q_r,
            R=c.R_assumed if c.R_assumed is not None else bank.R)
    else:
        controller = RobustConfig(k_d=c.k_d, k_i=c.k_i,
                                  K_lambda=gain_matrix(c.K_lambda, kdim), Q_r=c.Q_r)

    if spec.cost.type == "tracking":
        cost = TrackingCost(C_star=spec.cost.C_star)
    else:
        cost = QuadraticCost(K1=spec.cost.K1, K2=spec.cost.K2)

    initial = None
    initial_xi = 0.0
    if spec.sim.initial is not None:
        phi = spec.sim.initial.phi if spec.sim.initial.phi is not None \
            else np.zeros(bank.m)
        initial = PchState(phi=phi, Q=spec.sim.initial.Q)
        initial_xi = spec.sim.initial.xi

    events = tuple(Event(time=e.t, action=e.action, value=e.value, name=e.name or "")
                   for e in spec.events)

    transform = spec.transform
    scenario = Scenario(
        name=spec.name,
        bank=bank,
        controller=controller,
        cost=cost,
        duration=spec.sim.duration,
        dt=spec.sim.dt,
        initial=initial,
        initial_xi=initial_xi,
        events=events,
        esr_enabled=spec.plant.esr,
        pre_feedback_enabled=spec.plant.pre_feedback,
        controller_r=None if spec.plant.controller_r is None
        else np.asarray(spec.plant.controller_r, dtype=float),
        control_mode=spec.sim.mode,
        sample_rate=spec.sim.sample_rate,
        E_tilde=None if transform is None or transform.E_tilde is None
        else np.atleast_1d(np.asarray(transform.E_tilde, dtype=float)),
        E_eq=None if transform is None else transform.E_eq,
        decimate=spec.sim.decimate,
    )
    scenario.validate()
    return scenario
