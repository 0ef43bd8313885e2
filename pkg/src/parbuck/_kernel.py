"""Hot loop of the scenario simulator.

The closed loop (plant + controller + cost gradient) is integrated with
classical fixed-step RK4.  A pure-numpy step costs tens of microseconds,
which at dt = 1e-5 s would put a 3 s scenario in the minutes; the jitted
kernel below runs the same arithmetic in under a microsecond per step.
Only the two built-in cost families are representable here - scenarios
with user-defined costs fall back to the reference engine in `sim`,
which mirrors this loop step for step using the public module functions
(the test suite pins the two engines against each other).

Controller kinds: 0 = known-load energy shaping, 1 = load-independent
PID-like.  Cost kinds: 0 = quadratic, 1 = tracking.  hold_steps > 0
emulates a sampled controller: outputs are recomputed every hold_steps
steps and held (zero-order hold) in between, integrator drift included.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

HAVE_NUMBA = njit is not None


def _controller(y, lam, grad, d, sat, ccas, phi_eval,
                invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus):
    """Evaluate controller and physical duty at state y; returns (mu, xi_dot)."""
    m = invL.shape[0]
    phi = y[:m]
    Q = y[m]
    xi = y[m + 1]
    phiT = 0.0
    for j in range(m):
        phiT += w[j] * phi[j]

    # equivalent-converter input
    if ctrl_kind == 0:
        target = Leqm * Qr / (R_assumed * C)
        mu = (-k_mu * (phiT - target) / Leqm + Qr / C) / Eeq
        xi_dot = 0.0
    else:
        xi_dot = k_i * (Q - Qr) / C
        mu = -(k_d * phiT / Leqm + k_d * xi + Leqm * xi_dot) / Eeq

    # repartition gradient; the known-load law evaluates it at the
    # equilibrium total flux, the robust law at the measured state
    # (embedding the measured z reproduces the measured flux exactly)
    if cost_kind == 1:
        acc = -Cstar
        for j in range(m):
            acc += GammaT[0, j] * phi[j]
        grad[0] = acc
    else:
        if ctrl_kind == 0:
            phiT_eval = Leqm * Qr / (R_assumed * C)
            for i in range(m - 1):
                acc = 0.0
                for j in range(m):
                    acc += GammaT[i, j] * phi[j]
                ccas[i] = acc
            for j in range(m):
                acc = phiT_eval
                for i in range(m - 1):
                    acc += Gplus[j, i] * ccas[i]
                phi_eval[j] = acc
        else:
            for j in range(m):
                phi_eval[j] = phi[j]
        for i in range(m - 1):
            acc = 0.0
            for j in range(m):
                acc += Gplus[j, i] * (2.0 * K1[j] * phi_eval[j] + K2[j])
            grad[i] = acc

    for i in range(m - 1):
        acc = 0.0
        for j in range(m - 1):
            acc += Klam[i, j] * grad[j]
        lam[i] = -invEt[i] * acc

    for i in range(m):
        acc = 0.0
        for j in range(m - 1):
            acc += U[i, j] * lam[j]
        acc += U[i, m - 1] * mu
        acc += r_ctrl[i] * phi[i] * invL[i] / E[i]
        if acc < 0.0:
            acc = 0.0
            sat[i] = 1
        elif acc > 1.0:
            acc = 1.0
            sat[i] = 1
        else:
            sat[i] = 0
        d[i] = acc
    return mu, xi_dot


def _plant(y, d, dy, xi_dot, invL, E, C, R_plant, r_plant):
    m = invL.shape[0]
    phi = y[:m]
    Q = y[m]
    total_current = 0.0
    for j in range(m):
        total_current += phi[j] * invL[j]
    for j in range(m):
        dy[j] = -Q / C + E[j] * d[j] - r_plant[j] * phi[j] * invL[j]
    dy[m] = total_current - Q / (R_plant * C)
    dy[m + 1] = xi_dot


def _segment(y0, n_steps, dt,
             invL, E, C, R_plant, r_plant, r_ctrl,
             GammaT, w, U, invEt, Eeq, Leqm,
             ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
             cost_kind, K1, K2, Cstar, Gplus,
             hold_steps,
             Y, D, LAM, MU, SAT):
    """Integrate one event-free stretch; returns -1 or the index of the
    first non-finite state row."""
    m = invL.shape[0]
    dim = m + 2
    y = y0.copy()
    ys = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    lam = np.empty(m - 1)
    grad = np.empty(m - 1)
    d = np.empty(m)
    sat = np.zeros(m, np.int8)
    ccas = np.empty(m - 1)
    phi_eval = np.empty(m)
    held_d = np.empty(m)
    held_lam = np.empty(m - 1)
    held_sat = np.zeros(m, np.int8)
    held_mu = 0.0
    held_xi_dot = 0.0

    sampled = hold_steps > 0
    if sampled:
        held_mu, held_xi_dot = _controller(
            y, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
            GammaT, w, U, invEt, Eeq, Leqm,
            ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
            cost_kind, K1, K2, Cstar, Gplus)
        for j in range(m):
            held_d[j] = d[j]
            held_sat[j] = sat[j]
        for j in range(m - 1):
            held_lam[j] = lam[j]

    Y[0] = y
    for step in range(n_steps):
        if sampled and step % hold_steps == 0 and step > 0:
            held_mu, held_xi_dot = _controller(
                y, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus)
            for j in range(m):
                held_d[j] = d[j]
                held_sat[j] = sat[j]
            for j in range(m - 1):
                held_lam[j] = lam[j]

        if sampled:
            # zero-order hold: one duty vector for all four stages
            for j in range(m):
                D[step, j] = held_d[j]
                SAT[step, j] = held_sat[j]
            for j in range(m - 1):
                LAM[step, j] = held_lam[j]
            MU[step] = held_mu
            _plant(y, held_d, k1, held_xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + 0.5 * dt * k1[j]
            _plant(ys, held_d, k2, held_xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + 0.5 * dt * k2[j]
            _plant(ys, held_d, k3, held_xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + dt * k3[j]
            _plant(ys, held_d, k4, held_xi_dot, invL, E, C, R_plant, r_plant)
        else:
            mu, xi_dot = _controller(
                y, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus)
            for j in range(m):
                D[step, j] = d[j]
                SAT[step, j] = sat[j]
            for j in range(m - 1):
                LAM[step, j] = lam[j]
            MU[step] = mu
            _plant(y, d, k1, xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + 0.5 * dt * k1[j]
            mu, xi_dot = _controller(
                ys, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus)
            _plant(ys, d, k2, xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + 0.5 * dt * k2[j]
            mu, xi_dot = _controller(
                ys, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus)
            _plant(ys, d, k3, xi_dot, invL, E, C, R_plant, r_plant)
            for j in range(dim):
                ys[j] = y[j] + dt * k3[j]
            mu, xi_dot = _controller(
                ys, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
                GammaT, w, U, invEt, Eeq, Leqm,
                ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
                cost_kind, K1, K2, Cstar, Gplus)
            _plant(ys, d, k4, xi_dot, invL, E, C, R_plant, r_plant)

        finite = True
        for j in range(dim):
            y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not np.isfinite(y[j]):
                finite = False
        Y[step + 1] = y
        if not finite:
            return step + 1

    # controller outputs attached to the final state
    if hold_steps > 0:
        for j in range(m):
            D[n_steps, j] = held_d[j]
            SAT[n_steps, j] = held_sat[j]
        for j in range(m - 1):
            LAM[n_steps, j] = held_lam[j]
        MU[n_steps] = held_mu
    else:
        mu, xi_dot = _controller(
            y, lam, grad, d, sat, ccas, phi_eval, invL, E, C, r_ctrl,
            GammaT, w, U, invEt, Eeq, Leqm,
            ctrl_kind, k_mu, k_d, k_i, Qr, R_assumed, Klam,
            cost_kind, K1, K2, Cstar, Gplus)
        for j in range(m):
            D[n_steps, j] = d[j]
            SAT[n_steps, j] = sat[j]
        for j in range(m - 1):
            LAM[n_steps, j] = lam[j]
        MU[n_steps] = mu
    return -1


if HAVE_NUMBA:
    _controller = njit(cache=True, nogil=True)(_controller)
    _plant = njit(cache=True, nogil=True)(_plant)
    integrate_segment = njit(cache=True, nogil=True)(_segment)
else:  # pragma: no cover
    integrate_segment = _segment
