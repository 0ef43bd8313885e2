"""Post-run evaluation: in-scenario checks, phase metrics, sweep tables."""

from __future__ import annotations

import io

import numpy as np

from .controllers import phi_t_star
from .coordinates import build_maps
from .costs import argmin_oracle
from .schemas import (CheckModel, CheckOutcomeModel, PhaseMetricsModel,
                      RunReportModel, ScenarioModel, SweepRowModel)
from .sim import Scenario, _update_cost
from .trace import Trace, steady_state_metrics


def _phase_cost(scenario: Scenario, t_end: float):
    """Cost instance in force during the phase ending at t_end."""
    cost = scenario.cost
    for ev in scenario.events:
        if ev.action == "set_cost_param" and ev.time < t_end:
            cost = _update_cost(cost, ev.name, ev.value)
    return cost


def evaluate_checks(spec: ScenarioModel, scenario: Scenario, trace: Trace) -> list[CheckOutcomeModel]:
    outcomes = []
    for check in spec.checks:
        outcomes.append(_evaluate_check(check, scenario, trace))
    return outcomes


def _evaluate_check(check: CheckModel, scenario: Scenario, trace: Trace) -> CheckOutcomeModel:
    if check.type == "charge_regulation":
        worst = 0.0
        details = []
        for phase in trace.phases:
            idx = trace.at_time(phase.t_end)
            err = abs(trace.Q[idx] - phase.Q_r) / abs(phase.Q_r)
            worst = max(worst, err)
            details.append(f"t={phase.t_end:g}s err={err:.2e}")
        return CheckOutcomeModel(
            name="charge_regulation", value=float(worst), threshold=check.rel_tol,
            passed=bool(worst <= check.rel_tol), detail="; ".join(details))

    if check.type == "casimir_hold":
        t0 = check.start if check.start is not None else trace.t[0]
        t1 = check.end if check.end is not None else trace.t[-1]
        limit = check.max_drift if check.max_drift is not None else 1e-8
        mask = trace.window(t0, t1)
        ccas = trace.ccas[mask]
        drift = float(np.max(np.abs(ccas - ccas[0]))) if len(ccas) else 0.0
        return CheckOutcomeModel(
            name=f"casimir_hold[{t0:g},{t1:g}]", value=drift, threshold=limit,
            passed=bool(drift <= limit),
            detail="max repartition drift over the window (Wb)")

    if check.type == "charge_hold":
        t0 = check.start if check.start is not None else trace.t[0]
        t1 = check.end if check.end is not None else trace.t[-1]
        limit = check.max_dev if check.max_dev is not None else 1e-6
        mask = trace.window(t0, t1)
        q_r = None
        for phase in trace.phases:
            if phase.t_start <= t0 + 1e-12:
                q_r = phase.Q_r
        dev = float(np.max(np.abs(trace.Q[mask] - q_r)))
        return CheckOutcomeModel(
            name=f"charge_hold[{t0:g},{t1:g}]", value=dev, threshold=limit,
            passed=bool(dev <= limit),
            detail="max charge deviation from reference (C)")

    if check.type == "flux_matches_oracle":
        maps = build_maps(scenario.bank, E_tilde=scenario.E_tilde, E_eq=scenario.E_eq)
        worst = 0.0
        details = []
        for phase in trace.phases:
            cost = _phase_cost(scenario, phase.t_end)
            target = phi_t_star(phase.Q_r, phase.R, maps)
            best = argmin_oracle(cost, maps, target, phase.Q_r)
            idx = trace.at_time(phase.t_end)
            err = float(np.linalg.norm(trace.phi[idx] - best.phi)
                        / np.linalg.norm(best.phi))
            worst = max(worst, err)
            details.append(f"t={phase.t_end:g}s err={err:.2e}")
        return CheckOutcomeModel(
            name="flux_matches_oracle", value=float(worst), threshold=check.rel_tol,
            passed=bool(worst <= check.rel_tol), detail="; ".join(details))

    if check.type == "no_saturation":
        count = int(np.sum(np.any(trace.sat != 0, axis=1)))
        return CheckOutcomeModel(
            name="no_saturation", value=float(count), threshold=0.0,
            passed=count == 0, detail="records with any clamped duty entry")

    raise ValueError(f"unknown check type {check.type!r}")


def phase_metrics(trace: Trace) -> list[PhaseMetricsModel]:
    out = []
    for phase in trace.phases:
        m = steady_state_metrics(trace, (phase.t_start, phase.t_end), q_r=phase.Q_r)
        out.append(PhaseMetricsModel(
            t_start=phase.t_start, t_end=phase.t_end, R=phase.R, Q_r=phase.Q_r,
            final_Q=m.final_Q, final_v=float(trace.v[trace.at_time(phase.t_end)]),
            final_phi=list(m.final_phi), final_ccas=list(m.final_ccas),
            settling_time=None if np.isnan(m.settling_time) else m.settling_time,
            max_ccas_deviation=m.max_ccas_deviation,
            saturation_steps=m.saturation_steps))
    return out


def build_report(spec: ScenarioModel, scenario: Scenario, trace: Trace) -> RunReportModel:
    checks = evaluate_checks(spec, scenario, trace)
    return RunReportModel(
        scenario=spec.name,
        passed=all(c.passed for c in checks),
        checks=checks,
        phases=phase_metrics(trace),
        columns=trace.columns(),
        n_records=trace.n_records,
    )


def sweep_row(value: float, trace: Trace) -> SweepRowModel:
    last = trace.phases[-1]
    m = steady_state_metrics(trace, (last.t_start, last.t_end), q_r=last.Q_r)
    rel = abs(m.final_Q - last.Q_r) / abs(last.Q_r)
    return SweepRowModel(
        value=value, passed=bool(rel <= 0.01),
        final_Q=m.final_Q, Q_rel_err=float(rel),
        final_phi=list(m.final_phi), final_ccas=list(m.final_ccas),
        settling_time=None if np.isnan(m.settling_time) else m.settling_time,
        saturation_steps=int(np.sum(np.any(trace.sat != 0, axis=1))))


def sweep_csv(parameter: str, rows: list[SweepRowModel]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    m = len(rows[0].final_phi)
    cols = [parameter, "final_Q", "Q_rel_err"] \
        + [f"final_phi_{k + 1}" for k in range(m)] \
        + [f"final_C_{k + 1}" for k in range(m - 1)] \
        + ["settling_time", "saturation_steps", "passed"]
    buf.write(",".join(cols) + "\n")
    for row in rows:
        vals = [row.value, row.final_Q, row.Q_rel_err, *row.final_phi, *row.final_ccas,
                row.settling_time if row.settling_time is not None else float("nan"),
                row.saturation_steps, int(row.passed)]
        buf.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                           for v in vals) + "\n")
    return buf.getvalue()
