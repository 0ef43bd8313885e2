"""Scenario simulation: fixed-step RK4 of the closed loop with timed events.

A scenario pins the bank, one controller, one cost, a duration/step and
an ordered list of events (load steps, reference steps, cost-parameter
steps).  Integration is split at event times so discontinuities land
exactly on step boundaries, never smeared across a step.  Runs are
deterministic: the same scenario yields a bit-identical trace.

Two engines share the same stepping semantics: a numba kernel for the
built-in cost families (see `_kernel`) and a reference loop built on the
public module functions, used for user-defined costs and as the
cross-check in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel
from .controllers import (KnownLoadConfig, RobustConfig, RobustState,
                          chi_hamiltonian, chi_transform, ida_pbc_mu,
                          known_lambda, known_load_hamiltonian, phi_t_star,
                          pre_feedback, robust_lambda, robust_mu)
from .coordinates import CoordinateMaps, build_maps, input_to_d
from .costs import CostFunction, QuadraticCost, TrackingCost
from .errors import ConfigError, SimulationDiverged
from .model import BankParams, PchState
from .trace import PhaseInfo, Trace

EVENT_ACTIONS = ("set_load", "set_reference", "set_cost_param")


@dataclass(frozen=True)
class Event:
    """Timed scenario event.

    set_load replaces the load resistance, set_reference the charge
    reference, set_cost_param a named cost coefficient (name required,
    e.g. "C_star", "K1_0").
    """

    time: float
    action: str
    value: float
    name: str = ""

    def __post_init__(self):
        if self.action not in EVENT_ACTIONS:
            raise ConfigError(f"unknown event action {self.action!r}, "
                              f"expected one of {EVENT_ACTIONS}")
        if self.action == "set_load" and self.value <= 0:
            raise ConfigError(f"set_load value must be > 0, got {self.value}")
        if self.action == "set_cost_param" and not self.name:
            raise ConfigError("set_cost_param events need a parameter name")


@dataclass
class Scenario:
    """Everything needed for one reproducible run."""

    name: str
    bank: BankParams
    controller: KnownLoadConfig | RobustConfig
    cost: CostFunction
    duration: float
    dt: float = 1e-5
    initial: PchState = None
    initial_xi: float = 0.0
    events: tuple = ()
    esr_enabled: bool = False
    pre_feedback_enabled: bool = False
    controller_r: np.ndarray = None
    control_mode: str = "continuous"
    sample_rate: float = 1e4
    E_tilde: np.ndarray = None
    E_eq: float = None
    decimate: int = 10

    def validate(self):
        if self.duration < 0:
            raise ConfigError(f"duration must be >= 0, got {self.duration}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.decimate < 1:
            raise ConfigError(f"decimate must be >= 1, got {self.decimate}")
        if self.control_mode not in ("continuous", "sampled"):
            raise ConfigError(f"unknown control mode {self.control_mode!r}")
        if self.control_mode == "sampled" and self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be > 0, got {self.sample_rate}")
        times = [e.time for e in self.events]
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ConfigError("events must be sorted by time")
        if any(t < 0 or t > self.duration for t in times):
            raise ConfigError("event times must lie within [0, duration]")
        if self.initial is not None and len(self.initial.phi) != self.bank.m:
            raise ConfigError(f"initial state has {len(self.initial.phi)} fluxes, "
                              f"bank has {self.bank.m}")
        if isinstance(self.cost, TrackingCost) and self.bank.m != 2:
            raise ConfigError("tracking cost requires exactly 2 branches")
        kdim = self.controller.K_lambda.shape[0]
        if kdim != self.bank.m - 1:
            raise ConfigError(f"K_lambda is {kdim}x{kdim}, bank needs "
                              f"{self.bank.m - 1}x{self.bank.m - 1}")


def _update_cost(cost: CostFunction, name: str, value: float) -> CostFunction:
    if isinstance(cost, TrackingCost) and name == "C_star":
        return TrackingCost(C_star=value)
    if isinstance(cost, QuadraticCost) and (name.startswith("K1_") or name.startswith("K2_")):
        vec, idx = name.split("_", 1)
        k1, k2 = cost.K1.copy(), cost.K2.copy()
        (k1 if vec == "K1" else k2)[int(idx)] = value
        return QuadraticCost(K1=k1, K2=k2)
    raise ConfigError(f"cost {type(cost).__name__} has no tunable parameter {name!r}")


def _split_steps(span: float, dt: float) -> tuple[int, float]:
    """Number of whole dt steps in span plus the remainder step (0 if exact)."""
    n = int(math.floor(span / dt + 1e-9))
    rem = span - n * dt
    if rem < 1e-9 * dt:
        rem = 0.0
    return n, rem


class _ReferenceEngine:
    """Plain-python mirror of the jitted kernel, built on the public API."""

    def __init__(self, scenario: Scenario, maps: CoordinateMaps,
                 r_plant: np.ndarray, r_ctrl: np.ndarray):
        self.sc = scenario
        self.maps = maps
        self.r_plant = r_plant
        self.r_ctrl = r_ctrl
        self.inv_l = 1.0 / scenario.bank.L

    def controller_output(self, y, cfg, cost):
        maps = self.maps
        m = maps.m
        x = PchState(phi=y[:m], Q=y[m])
        phi_T = float(maps.phi_T_row @ x.phi)
        ccas = maps.Gamma_T @ x.phi
        if isinstance(cfg, KnownLoadConfig):
            mu = ida_pbc_mu(cfg, phi_T, maps)
            xi_dot = 0.0
            lam = known_lambda(cfg, ccas, phi_t_star(cfg.Q_r, cfg.R, maps), cost, maps)
        else:
            mu, xi_dot = robust_mu(cfg, RobustState(xi=y[m + 1]), phi_T, x.Q, maps)
            lam = robust_lambda(cfg, ccas, phi_T, cost, maps)
        # compensation applies to the physical duty, before the clamp
        raw = pre_feedback(self.sc.bank, x, input_to_d(maps, lam, mu), self.r_ctrl)
        d = np.clip(raw, 0.0, 1.0)
        sat = (raw != d).astype(np.int8)
        return lam, mu, d, sat, xi_dot

    def plant_rhs(self, y, d, xi_dot, R):
        m = self.maps.m
        phi = y[:m]
        Q = y[m]
        dy = np.empty_like(y)
        dy[:m] = -Q / self.sc.bank.C + self.sc.bank.E * d \
            - self.r_plant * phi * self.inv_l
        dy[m] = float(phi @ self.inv_l) - Q / (R * self.sc.bank.C)
        dy[m + 1] = xi_dot
        return dy

    def _stage(self, ys, cfg, cost, R):
        _, _, d, _, xi_dot = self.controller_output(ys, cfg, cost)
        return self.plant_rhs(ys, d, xi_dot, R)

    def segment(self, y0, n_steps, dt, cfg, cost, R, hold_steps,
                Y, D, LAM, MU, SAT):
        y = y0.copy()
        Y[0] = y
        held = self.controller_output(y, cfg, cost) if hold_steps > 0 else None
        for step in range(n_steps):
            if hold_steps > 0:
                if step % hold_steps == 0:
                    held = self.controller_output(y, cfg, cost)
                lam, mu, d, sat, xi_dot = held
                LAM[step], MU[step], D[step], SAT[step] = lam, mu, d, sat
                k1 = self.plant_rhs(y, d, xi_dot, R)
                k2 = self.plant_rhs(y + 0.5 * dt * k1, d, xi_dot, R)
                k3 = self.plant_rhs(y + 0.5 * dt * k2, d, xi_dot, R)
                k4 = self.plant_rhs(y + dt * k3, d, xi_dot, R)
            else:
                lam, mu, d, sat, xi_dot = self.controller_output(y, cfg, cost)
                LAM[step], MU[step], D[step], SAT[step] = lam, mu, d, sat
                k1 = self.plant_rhs(y, d, xi_dot, R)
                k2 = self._stage(y + 0.5 * dt * k1, cfg, cost, R)
                k3 = self._stage(y + 0.5 * dt * k2, cfg, cost, R)
                k4 = self._stage(y + dt * k3, cfg, cost, R)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            Y[step + 1] = y
            if not np.all(np.isfinite(y)):
                return step + 1
        if held is not None:
            lam, mu, d, sat, _ = held
        else:
            lam, mu, d, sat, _ = self.controller_output(y, cfg, cost)
        LAM[n_steps], MU[n_steps], D[n_steps], SAT[n_steps] = lam, mu, d, sat
        return -1


def _kernel_args(cfg, cost, maps: CoordinateMaps):
    m = maps.m
    if isinstance(cfg, KnownLoadConfig):
        ctrl = (0, cfg.k_mu, 0.0, 0.0, cfg.Q_r, cfg.R, cfg.K_lambda)
    else:
        ctrl = (1, 0.0, cfg.k_d, cfg.k_i, cfg.Q_r, 1.0, cfg.K_lambda)
    if isinstance(cost, QuadraticCost):
        cst = (0, cost.K1, cost.K2, 0.0)
    elif isinstance(cost, TrackingCost):
        cst = (1, np.zeros(m), np.zeros(m), cost.C_star)
    else:
        raise TypeError(f"kernel cannot represent cost {type(cost).__name__}")
    return ctrl, cst


def _supports_kernel(cost: CostFunction) -> bool:
    return isinstance(cost, (QuadraticCost, TrackingCost))


def run(scenario: Scenario, engine: str = "auto") -> Trace:
    """Simulate a scenario and return its trace.

    engine: "auto" picks the jitted kernel when the cost family allows
    it, "fast" forces it, "reference" forces the plain-python loop.
    Raises SimulationDiverged (with the partial trace attached) if the
    state leaves the finite range.
    """
    scenario.validate()
    sc = scenario
    bank = sc.bank.copy()
    maps = build_maps(bank, E_tilde=sc.E_tilde, E_eq=sc.E_eq)
    m = bank.m

    if engine == "auto":
        engine = "fast" if (_kernel.HAVE_NUMBA and _supports_kernel(sc.cost)) else "reference"
    if engine == "fast" and not _supports_kernel(sc.cost):
        raise ConfigError(f"fast engine cannot run cost {type(sc.cost).__name__}")

    r_plant = bank.r.copy() if sc.esr_enabled else np.zeros(m)
    if sc.pre_feedback_enabled:
        r_ctrl = np.asarray(sc.controller_r, dtype=float) if sc.controller_r is not None \
            else bank.r.copy()
    else:
        r_ctrl = np.zeros(m)

    hold_steps = 0
    if sc.control_mode == "sampled":
        hold_steps = max(1, int(round(1.0 / (sc.sample_rate * sc.dt))))

    x0 = sc.initial if sc.initial is not None else PchState.zero(m)
    y = np.concatenate([x0.phi, [x0.Q, sc.initial_xi]])

    cfg = sc.controller
    cost = sc.cost
    ref = _ReferenceEngine(sc, maps, r_plant, r_ctrl) if engine == "reference" else None

    # segment boundaries: event times plus the endpoints
    boundaries = [0.0]
    grouped: dict[float, list[Event]] = {}
    for ev in sc.events:
        grouped.setdefault(ev.time, []).append(ev)
        if 0.0 < ev.time < sc.duration and ev.time not in boundaries:
            boundaries.append(ev.time)
    boundaries.append(sc.duration)

    # events exactly at t; ones at 0 configure the run before it starts
    def apply_events(t, bank, cfg, cost):
        for ev in grouped.get(t, []):
            if ev.action == "set_load":
                bank.R = float(ev.value)
            elif ev.action == "set_reference":
                cfg = replace(cfg, Q_r=float(ev.value))
            else:
                cost = _update_cost(cost, ev.name, float(ev.value))
        return cfg, cost

    cfg, cost = apply_events(0.0, bank, cfg, cost)

    chunks = []       # (t_array, Y, D, LAM, MU, SAT) per integrated piece
    phases = []
    diverged_at = None

    for seg_idx in range(len(boundaries) - 1):
        t0, t1 = boundaries[seg_idx], boundaries[seg_idx + 1]
        phases.append(PhaseInfo(t_start=t0, t_end=t1, R=bank.R, Q_r=cfg.Q_r))
        pieces = []
        n_full, rem = _split_steps(t1 - t0, sc.dt)
        if n_full > 0:
            pieces.append((n_full, sc.dt))
        if rem > 0.0:
            pieces.append((1, rem))
        if not pieces:
            pieces.append((0, sc.dt))
        t_piece = t0
        for n_steps, dt in pieces:
            Y = np.empty((n_steps + 1, m + 2))
            D = np.empty((n_steps + 1, m))
            LAM = np.empty((n_steps + 1, m - 1))
            MU = np.empty(n_steps + 1)
            SAT = np.zeros((n_steps + 1, m), np.int8)
            if engine == "fast":
                ctrl, cst = _kernel_args(cfg, cost, maps)
                bad = _kernel.integrate_segment(
                    y, n_steps, dt,
                    1.0 / bank.L, bank.E, bank.C, bank.R, r_plant, r_ctrl,
                    maps.Gamma_T, maps.phi_T_row.copy(), maps.U,
                    1.0 / maps.E_tilde, maps.E_eq, maps.L_eq_m,
                    *ctrl, *cst, maps.Gamma_plus,
                    hold_steps, Y, D, LAM, MU, SAT)
            else:
                bad = ref.segment(y, n_steps, dt, cfg, cost, bank.R,
                                  hold_steps, Y, D, LAM, MU, SAT)
            times = t_piece + dt * np.arange(n_steps + 1)
            if bad >= 0:
                # controller columns of the aborted row were never written
                D[bad] = np.nan
                LAM[bad] = np.nan
                MU[bad] = np.nan
                SAT[bad] = 0
                chunks.append((times[: bad + 1], Y[: bad + 1], D[: bad + 1],
                               LAM[: bad + 1], MU[: bad + 1], SAT[: bad + 1], cfg, cost, bank.R))
                diverged_at = (times[bad], Y[bad])
                break
            chunks.append((times, Y, D, LAM, MU, SAT, cfg, cost, bank.R))
            y = Y[-1].copy()
            t_piece = t_piece + n_steps * dt
        if diverged_at is not None:
            break
        cfg, cost = apply_events(t1, bank, cfg, cost)

    trace = _assemble(sc, maps, chunks, phases, complete=diverged_at is None)
    if diverged_at is not None:
        t_bad, y_bad = diverged_at
        raise SimulationDiverged(t_bad, PchState(phi=y_bad[:m], Q=y_bad[m]), trace)
    return trace


def _evaluate_cost_rows(cost: CostFunction, phi_rows: np.ndarray) -> np.ndarray:
    if isinstance(cost, QuadraticCost):
        return (phi_rows ** 2) @ cost.K1 + phi_rows @ cost.K2
    if isinstance(cost, TrackingCost):
        return 0.5 * (phi_rows[:, 0] - phi_rows[:, 1] - cost.C_star) ** 2
    return np.array([cost.evaluate(row) for row in phi_rows])


def _assemble(sc: Scenario, maps: CoordinateMaps, chunks, phases, complete: bool = True) -> Trace:
    # derived columns of a diverged partial trace may overflow; keep the dump
    with np.errstate(over="ignore", invalid="ignore"):
        return _assemble_columns(sc, maps, chunks, phases, complete)


def _assemble_columns(sc, maps, chunks, phases, complete):
    m = maps.m
    parts = {k: [] for k in ("t", "Y", "D", "LAM", "MU", "SAT", "H_d", "J")}
    first = True
    for times, Y, D, LAM, MU, SAT, cfg, cost, R in chunks:
        n = len(times)
        keep = np.arange(0, n, sc.decimate)
        if keep[-1] != n - 1:
            keep = np.append(keep, n - 1)
        if not first:
            # segment-initial row duplicates the previous final row
            keep = keep[keep != 0] if len(keep) > 1 else keep[1:]
        first = False

        phi = Y[keep, :m]
        Q = Y[keep, m]
        xi = Y[keep, m + 1]
        phi_T = phi @ maps.phi_T_row
        if isinstance(cfg, KnownLoadConfig):
            h_d = np.array([known_load_hamiltonian(cfg, pt, q, maps)
                            for pt, q in zip(phi_T, Q)])
        else:
            h_d = np.array([
                chi_hamiltonian(cfg, chi_transform(cfg, pt, q, x, R, maps), maps)
                for pt, q, x in zip(phi_T, Q, xi)])
        parts["t"].append(times[keep])
        parts["Y"].append(Y[keep])
        parts["D"].append(D[keep])
        parts["LAM"].append(LAM[keep])
        parts["MU"].append(MU[keep])
        parts["SAT"].append(SAT[keep])
        parts["H_d"].append(h_d)
        parts["J"].append(_evaluate_cost_rows(cost, phi))

    if parts["t"]:
        t = np.concatenate(parts["t"])
        Y = np.vstack(parts["Y"])
        D = np.vstack(parts["D"])
        LAM = np.vstack(parts["LAM"])
        MU = np.concatenate(parts["MU"])
        SAT = np.vstack(parts["SAT"])
        H_d = np.concatenate(parts["H_d"])
        J = np.concatenate(parts["J"])
    else:  # zero-duration scenario: single initial record handled by caller
        raise ConfigError("scenario produced no records")

    phi = Y[:, :m]
    Q = Y[:, m]
    xi = Y[:, m + 1]
    inv_l = 1.0 / maps.L
    H = 0.5 * ((phi ** 2) @ inv_l + Q ** 2 / maps.C)
    return Trace(
        t=t, phi=phi, Q=Q, v=Q / maps.C,
        ccas=phi @ maps.Gamma_T.T, phi_T=phi @ maps.phi_T_row,
        d=D, lam=LAM, mu=MU, xi=xi, H=H, H_d=H_d, J_cost=J, sat=SAT,
        name=sc.name, dt=sc.dt, decimate=sc.decimate, phases=tuple(phases),
        complete=complete,
    )
