"""End-to-end acceptance suite.

Ten numbered criteria covering voltage regulation, exact decoupling,
optimal repartition, the known-load design, the shifted-coordinate
equivalence of the robust loop, the structural identities, resistance
robustness, open-loop invariant conservation and the integration order.
Each criterion prints one PASS/FAIL line with its measured value
(run with -s to see them all).

Criterion 03 is known to fail and is left failing on purpose: with the
experiment gains (k_d=1, k_i=10) the slowest closed-loop mode is about
-10.1 rad/s at 5 ohm, so the charge transient inherited from the load
step at t=1 s still sits at ~2e-6 C when the repartition step fires at
t=2 s, above the 1e-6 C bound for the whole window.  The repartition
step itself injects nothing: the counterfactual run without that event
matches to ~1e-16 C, which the test prints alongside the literal metric.
"""

import inspect

import numpy as np
import pytest

from conftest import BENCH_QR
from parbuck.config import build_scenario, bundled_scenario
from parbuck.controllers import (KnownLoadConfig, RobustConfig, chi_rhs,
                                 chi_transform, phi_t_star, robust_lambda,
                                 robust_mu)
from parbuck.coordinates import build_maps
from parbuck.costs import TrackingCost, argmin_oracle
from parbuck.model import BankParams, PchState, build_pch
from parbuck.sim import Scenario, run
from parbuck.verify import residual_table, run_structural_suite

QR_TOL = 0.005          # criterion 1: relative charge regulation band
CAS_HOLD_TOL = 1e-8     # criterion 2: repartition drift across the load step (Wb)
CHARGE_HOLD_TOL = 1e-6  # criterion 3: charge deviation during the repartition step (C)
ORACLE_TOL = 0.005      # criterion 4: relative distance to the constrained optimum
KNOWN_TOL = 0.01        # criterion 5: relative convergence of the known-load loop
CHI_FD_TOL = 1e-6       # criterion 6: normalized chi-dynamics residual
HD_STEP_TOL = 1e-12     # criterion 6: per-step energy increase allowance (J)
ESR_MATCH_TOL = 1e-6    # criterion 8: compensated vs ideal trajectory (normalized)
CAS_DRIFT_TOL = 1e-9    # criterion 9: open-loop invariant drift (Wb)
ORDER_RANGE = (8.0, 32.0)  # criterion 10: Richardson ratio window


def report(num: int, name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {num:02d}] {name}: {status} ({detail})")


@pytest.fixture(scope="module")
def exp1_trace():
    spec = bundled_scenario("exp1")
    spec.sim.decimate = 1
    return run(build_scenario(spec))


@pytest.fixture(scope="module")
def exp2_trace():
    spec = bundled_scenario("exp2")
    spec.sim.decimate = 1
    return run(build_scenario(spec))


def test_01_voltage_regulation(exp1_trace, exp2_trace):
    worst = 0.0
    for trace in (exp1_trace, exp2_trace):
        for phase in trace.phases:
            err = abs(trace.Q[trace.at_time(phase.t_end)] - phase.Q_r) / phase.Q_r
            worst = max(worst, err)
    # the controller cannot receive the load even by accident
    structurally_blind = (
        "R" not in RobustConfig.__dataclass_fields__
        and "R" not in inspect.signature(robust_mu).parameters
        and "R" not in inspect.signature(robust_lambda).parameters)
    passed = worst <= QR_TOL and structurally_blind
    report(1, "voltage regulation at 20 and 5 ohm", passed,
           f"worst phase-end rel err {worst:.3e} <= {QR_TOL}, "
           f"load unreadable by controller: {structurally_blind}")
    assert passed


def test_02_load_step_leaves_repartition(exp1_trace):
    tr = exp1_trace
    mask = (tr.t >= 1.0 - 1e-12) & (tr.t < 2.0 - 1e-12)
    drift = float(np.max(np.abs(tr.ccas[mask] - tr.ccas[mask][0])))
    passed = drift <= CAS_HOLD_TOL
    report(2, "load step does not move the repartition", passed,
           f"max drift {drift:.3e} Wb <= {CAS_HOLD_TOL}")
    assert passed


def test_03_repartition_step_leaves_charge(exp1_trace):
    tr = exp1_trace
    mask = tr.window(2.0, 3.0)
    dev = float(np.max(np.abs(tr.Q[mask] - BENCH_QR)))

    # supplementary: deviation attributable to the repartition step alone,
    # from a counterfactual run without the t=2 s event
    spec = bundled_scenario("exp1")
    spec.sim.decimate = 1
    spec.events = [e for e in spec.events if e.t < 2.0]
    counterfactual = run(build_scenario(spec))
    coupling = float(np.max(np.abs(tr.Q[mask] - counterfactual.Q[mask])))

    passed = dev <= CHARGE_HOLD_TOL
    report(3, "repartition step does not move the charge", passed,
           f"max |Q - Q_r| {dev:.3e} C vs bound {CHARGE_HOLD_TOL}; "
           f"event-attributable coupling {coupling:.3e} C; the excess is the "
           f"decaying load-step remnant from t=1 s")
    assert passed, (
        f"literal window metric {dev:.3e} C exceeds {CHARGE_HOLD_TOL} C; the "
        f"true event coupling is {coupling:.3e} C (see decisions ledger)")


def test_04_optimal_repartition(exp2_trace):
    tr = exp2_trace
    scenario = build_scenario(bundled_scenario("exp2"))
    maps = build_maps(scenario.bank)
    worst = 0.0
    signs_ok = True
    for phase in tr.phases:
        target = phi_t_star(phase.Q_r, phase.R, maps)
        best = argmin_oracle(scenario.cost, maps, target, phase.Q_r)
        phi_end = tr.phi[tr.at_time(phase.t_end)]
        worst = max(worst, float(np.linalg.norm(phi_end - best.phi)
                                 / np.linalg.norm(best.phi)))
        if phase.R == 20.0:
            signs_ok &= phi_end[1] > phi_end[0] and best.phi[1] > best.phi[0]
        else:
            signs_ok &= phi_end[0] > phi_end[1] and best.phi[0] > best.phi[1]
    passed = worst <= ORACLE_TOL and signs_ok
    report(4, "repartition lands on the constrained optimum", passed,
           f"worst rel distance {worst:.3e} <= {ORACLE_TOL}, "
           f"coil priority ordering correct: {signs_ok}")
    assert passed


def test_05_known_load_controller_randomized(bench):
    rng = np.random.default_rng(20250811)
    maps = build_maps(bench)
    worst_q = worst_pt = 0.0
    for _ in range(20):
        R = float(10 ** rng.uniform(0, 2))
        bank = BankParams(L=bench.L, C=bench.C, R=R, E=bench.E)
        x0 = PchState(phi=rng.uniform(-3e-3, 3e-3, 2), Q=float(rng.uniform(0, 0.4)))
        cfg = KnownLoadConfig(k_mu=1.0, K_lambda=0.1, Q_r=BENCH_QR, R=R)
        trace = run(Scenario(name="draw", bank=bank, controller=cfg,
                             cost=TrackingCost(C_star=0.0), duration=2.0,
                             initial=x0, decimate=100))
        target = phi_t_star(BENCH_QR, R, maps)
        worst_q = max(worst_q, abs(trace.Q[-1] - BENCH_QR) / BENCH_QR)
        worst_pt = max(worst_pt, abs(trace.phi_T[-1] - target) / target)
    passed = worst_q <= KNOWN_TOL and worst_pt <= KNOWN_TOL
    report(5, "known-load loop converges for random loads/states", passed,
           f"20 draws, worst rel err Q {worst_q:.3e}, "
           f"total flux {worst_pt:.3e} <= {KNOWN_TOL}")
    assert passed


def test_06_chi_equivalence(bench):
    cfg = RobustConfig(k_d=1.0, k_i=10.0, K_lambda=0.1, Q_r=BENCH_QR)
    trace = run(Scenario(name="chi", bank=bench, controller=cfg,
                         cost=TrackingCost(C_star=0.0), duration=0.3, decimate=1))
    maps = build_maps(bench)
    chi = np.array([chi_transform(cfg, pt, q, xi, 20.0, maps)
                    for pt, q, xi in zip(trace.phi_T, trace.Q, trace.xi)])
    h = trace.dt
    fd = (-chi[4:] + 8 * chi[3:-1] - 8 * chi[1:-3] + chi[:-4]) / (12 * h)
    rhs = np.array([chi_rhs(cfg, c, 20.0, maps) for c in chi[2:-2]])
    residual = float(np.max(np.abs(fd - rhs)) / np.max(np.abs(rhs)))

    worst_step = float(np.max(np.diff(trace.H_d)))
    passed = residual <= CHI_FD_TOL and worst_step <= HD_STEP_TOL
    report(6, "shifted-coordinate dynamics match the analysis", passed,
           f"normalized FD residual {residual:.3e} <= {CHI_FD_TOL}, "
           f"worst per-step energy increase {worst_step:.3e} J <= {HD_STEP_TOL}")
    assert passed


def test_07_structural_suite():
    results = run_structural_suite(draws=100, seed=0, m_min=2, m_max=8)
    passed = all(r.passed for r in results)
    worst = max(results, key=lambda r: (r.max_residual / r.tolerance
                                        if r.tolerance else 0.0))
    report(7, "structural identities over 100 random banks", passed,
           f"{len(results)} checks, tightest margin on "
           f"{worst.name}: {worst.max_residual:.3e} vs {worst.tolerance:.0e}")
    if not passed:
        print(residual_table(results))
    assert passed


def test_08_series_resistance_robustness(exp1_trace):
    # uncompensated: the integral action still regulates the charge
    spec = bundled_scenario("exp2_esr")
    spec.sim.decimate = 1
    lossy = run(build_scenario(spec))
    worst = max(abs(lossy.Q[lossy.at_time(p.t_end)] - p.Q_r) / p.Q_r
                for p in lossy.phases)

    # compensated: the ideal trajectory is recovered to rounding level.
    # Exact cancellation needs the duty interior (a clamped entry clips
    # the compensation term off), so the comparison runs the clamp-free
    # first experiment on the resistive plant.
    spec_pf = bundled_scenario("exp1")
    spec_pf.sim.decimate = 1
    spec_pf.bank.r = [0.1, 0.1]
    spec_pf.plant.esr = True
    spec_pf.plant.pre_feedback = True
    compensated = run(build_scenario(spec_pf))
    assert not compensated.sat.any() and not exp1_trace.sat.any()
    match = 0.0
    for a, b in ((compensated.phi[:, 0], exp1_trace.phi[:, 0]),
                 (compensated.phi[:, 1], exp1_trace.phi[:, 1]),
                 (compensated.Q, exp1_trace.Q),
                 (compensated.xi, exp1_trace.xi)):
        match = max(match, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))

    passed = worst <= QR_TOL and match <= ESR_MATCH_TOL
    report(8, "series-resistance robustness", passed,
           f"uncompensated phase-end rel err {worst:.3e} <= {QR_TOL}; "
           f"compensated trajectory deviation {match:.3e} <= {ESR_MATCH_TOL}")
    assert passed


def _open_loop_invariant_drift(params, mu_fn, T=1.0, dt=1e-5):
    """Drive the plant with lambda = 0 and a prescribed mu signal."""
    sys = build_pch(params)
    maps = build_maps(params)
    n = int(round(T / dt))
    m = params.m
    A = (sys.J - sys.Rdiss) @ sys.Qform
    mu_column = sys.B @ maps.U[:, m - 1]
    x = np.zeros(m + 1)
    states = np.empty((n + 1, m + 1))
    states[0] = x
    for k in range(n):
        t = k * dt
        k1 = A @ x + mu_column * mu_fn(t)
        k2 = A @ (x + 0.5 * dt * k1) + mu_column * mu_fn(t + 0.5 * dt)
        k3 = A @ (x + 0.5 * dt * k2) + mu_column * mu_fn(t + 0.5 * dt)
        k4 = A @ (x + dt * k3) + mu_column * mu_fn(t + dt)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        states[k + 1] = x
    ccas = states[:, :m] @ maps.Gamma_T.T
    return float(np.max(np.abs(ccas - ccas[0])))


def test_09_open_loop_invariant_conservation(bench):
    def mu_fn(t):
        return 0.35 + 0.1 * np.sin(2 * np.pi * 50 * t) + 0.05 * np.sin(2 * np.pi * 333 * t)

    drift2 = _open_loop_invariant_drift(bench, mu_fn)
    three = BankParams(L=[2.83e-3, 1.3e-3, 2.2e-3], C=22e-3, R=20.0,
                       E=[24.0, 24.0, 24.0])
    drift3 = _open_loop_invariant_drift(three, mu_fn)
    worst = max(drift2, drift3)
    passed = worst <= CAS_DRIFT_TOL
    report(9, "repartition coordinates inert under total-flux drive", passed,
           f"worst drift over 1 s: {worst:.3e} Wb <= {CAS_DRIFT_TOL} "
           f"(2-branch {drift2:.2e}, 3-branch {drift3:.2e})")
    assert passed


def test_10_integration_order(bench):
    scenario = build_scenario(bundled_scenario("exp2"))
    cfg, cost = scenario.controller, scenario.cost
    warm = run(Scenario(name="warm", bank=bench, controller=cfg, cost=cost,
                        duration=0.05, decimate=1))
    x0 = PchState(phi=warm.phi[-1] + np.array([2e-4, -1.5e-4]),
                  Q=warm.Q[-1] + 0.005)
    xi0 = float(warm.xi[-1])

    def final_state(dt):
        tr = run(Scenario(name="rich", bank=bench, controller=cfg, cost=cost,
                          duration=0.002, dt=dt, decimate=1,
                          initial=x0, initial_xi=xi0))
        assert not tr.sat.any(), "order measurement window must be clamp-free"
        return np.concatenate([tr.phi[-1], [tr.Q[-1], tr.xi[-1]]])

    x1, x2, x4 = final_state(2e-5), final_state(1e-5), final_state(5e-6)
    ratio = float(np.linalg.norm(x1 - x2) / np.linalg.norm(x2 - x4))
    passed = ORDER_RANGE[0] <= ratio <= ORDER_RANGE[1]
    report(10, "step-halving error ratio is fourth order", passed,
           f"ratio {ratio:.2f} within [{ORDER_RANGE[0]:.0f}, {ORDER_RANGE[1]:.0f}]")
    assert passed
