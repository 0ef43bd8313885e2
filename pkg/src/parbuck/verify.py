"""Randomized structural self-checks of the algebraic machinery.

Draws banks with random sizes and component values, rebuilds every
matrix identity the control design rests on and reports the worst
residual per check.  Used by the `verify` CLI subcommand and the
service endpoint; the same functions back the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coordinates, costs, model

GRAD_FD_STEP = 1e-7


@dataclass(frozen=True)
class StructuralCheck:
    """Worst residual of one identity over all draws."""

    name: str
    max_residual: float
    tolerance: float
    passed: bool


def random_bank(rng: np.random.Generator, m: int = None) -> model.BankParams:
    """Sample a physically plausible bank (log-uniform components)."""
    if m is None:
        m = int(rng.integers(2, 9))
    return model.BankParams(
        L=10 ** rng.uniform(-4, -2, m),
        C=10 ** rng.uniform(-3, -1),
        R=10 ** rng.uniform(-0.3, 2),
        E=rng.uniform(5.0, 50.0, m),
        r=10 ** rng.uniform(-2, -0.5, m),
    )


def _fd_gradient(f, x: np.ndarray, h: float = GRAD_FD_STEP) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2 * step)
    return g


def run_structural_suite(draws: int = 100, seed: int = 0,
                         m_min: int = 2, m_max: int = 8,
                         gamma_corruption: float = 0.0) -> list[StructuralCheck]:
    """Run every structural check over `draws` random banks.

    gamma_corruption injects an error into the repartition matrix before
    the invariance check; nonzero values must turn that check red (used
    to prove the suite can fail).
    """
    rng = np.random.default_rng(seed)
    worst = {
        "skew_symmetry": 0.0,
        "dissipation_psd": 0.0,
        "gamma_row_sums": 0.0,
        "state_map_round_trip": 0.0,
        "input_map_round_trip": 0.0,
        "pseudo_inverse_diagonalization": 0.0,
        "transformed_sparsity": 0.0,
        "casimir_invariance_ideal": 0.0,
        "casimir_violation_with_esr": np.inf,  # must stay strictly positive
        "energy_round_trip": 0.0,
        "cost_gradient_fd": 0.0,
    }

    for _ in range(draws):
        m = int(rng.integers(m_min, m_max + 1))
        params = random_bank(rng, m)
        sys = model.build_pch(params)
        maps = coordinates.build_maps(params)

        worst["skew_symmetry"] = max(worst["skew_symmetry"],
                                     float(np.max(np.abs(sys.J + sys.J.T))))
        eig_min = float(np.linalg.eigvalsh(sys.Rdiss)[0])
        worst["dissipation_psd"] = max(worst["dissipation_psd"], max(0.0, -eig_min))
        worst["gamma_row_sums"] = max(worst["gamma_row_sums"],
                                      float(np.max(np.abs(maps.Gamma_T.sum(axis=1)))))
        worst["state_map_round_trip"] = max(
            worst["state_map_round_trip"],
            float(np.max(np.abs(maps.Phi @ maps.Phi_inv - np.eye(m + 1)))))
        worst["input_map_round_trip"] = max(
            worst["input_map_round_trip"],
            float(np.max(np.abs(maps.U @ maps.U_inv - np.eye(m)))))
        diag_target = np.diag(1.0 / maps.L_C)
        worst["pseudo_inverse_diagonalization"] = max(
            worst["pseudo_inverse_diagonalization"],
            float(np.max(np.abs(maps.Gamma_plus.T @ np.diag(1.0 / params.L)
                                @ maps.Gamma_plus - diag_target))))

        transformed = coordinates.transform_system(sys, maps)
        jr = maps.Phi_inv @ (sys.J - sys.Rdiss) @ maps.Phi_inv.T
        worst["transformed_sparsity"] = max(
            worst["transformed_sparsity"],
            float(np.max(np.abs(jr - transformed.J_minus_R))))

        report = coordinates.verify_casimir(sys, maps)
        worst["casimir_invariance_ideal"] = max(worst["casimir_invariance_ideal"],
                                                report.residual)
        if gamma_corruption != 0.0:
            bad = coordinates.CoordinateMaps(
                Gamma_T=maps.Gamma_T + gamma_corruption,
                Gamma_plus=maps.Gamma_plus, Phi_inv=maps.Phi_inv, Phi=maps.Phi,
                U=maps.U, U_inv=maps.U_inv, L=maps.L, C=maps.C,
                L_eq=maps.L_eq, L_C=maps.L_C,
                E_tilde=maps.E_tilde, E_eq=maps.E_eq)
            worst["casimir_invariance_ideal"] = max(
                worst["casimir_invariance_ideal"],
                coordinates.verify_casimir(sys, bad).residual)

        esr_report = coordinates.verify_casimir(model.apply_esr(sys, params), maps)
        worst["casimir_violation_with_esr"] = min(worst["casimir_violation_with_esr"],
                                                  esr_report.residual)

        x = model.PchState(phi=rng.normal(0, 1e-2, m), Q=rng.normal(0, 0.3))
        h_x = model.hamiltonian(sys, x)
        z = coordinates.to_z(maps, x)
        qform_z = transformed.Qform
        h_z = 0.5 * float(z.as_vector() @ qform_z @ z.as_vector())
        worst["energy_round_trip"] = max(
            worst["energy_round_trip"],
            abs(h_z - h_x) / max(abs(h_x), 1e-30))

        cost = costs.QuadraticCost(K1=10 ** rng.uniform(2, 5, m),
                                   K2=rng.uniform(-100, 100, m))
        ccas = rng.normal(0, 1e-2, m - 1)
        phi_t = 10 ** rng.uniform(-4, -2)
        g = costs.grad_z(cost, maps, ccas, phi_t)
        g_fd = _fd_gradient(lambda c: costs.cost_z(cost, maps, c, phi_t), ccas)
        scale = max(float(np.max(np.abs(g))), 1e-12)
        worst["cost_gradient_fd"] = max(worst["cost_gradient_fd"],
                                        float(np.max(np.abs(g - g_fd))) / scale)
        if m == 2:
            tcost = costs.TrackingCost(C_star=rng.normal(0, 1e-2))
            g = costs.grad_z(tcost, maps, ccas, phi_t)
            g_fd = _fd_gradient(lambda c: costs.cost_z(tcost, maps, c, phi_t), ccas)
            scale = max(float(np.max(np.abs(g))), 1e-12)
            worst["cost_gradient_fd"] = max(worst["cost_gradient_fd"],
                                            float(np.max(np.abs(g - g_fd))) / scale)

    tolerances = {
        "skew_symmetry": 1e-14,
        "dissipation_psd": 1e-14,
        "gamma_row_sums": 1e-12,
        "state_map_round_trip": 1e-12,
        "input_map_round_trip": 1e-12,
        "pseudo_inverse_diagonalization": 1e-10,
        "transformed_sparsity": 1e-10,
        "casimir_invariance_ideal": 1e-12,
        "energy_round_trip": 1e-12,
        "cost_gradient_fd": 1e-6,
    }
    results = [
        StructuralCheck(name=k, max_residual=worst[k], tolerance=tolerances[k],
                        passed=worst[k] <= tolerances[k])
        for k in tolerances
    ]
    esr = worst["casimir_violation_with_esr"]
    results.append(StructuralCheck(
        name="casimir_violation_with_esr", max_residual=esr, tolerance=0.0,
        passed=bool(np.isfinite(esr) and esr > 0.0)))
    return results


def residual_table(results: list[StructuralCheck]) -> str:
    """Aligned text table of the residuals."""
    name_w = max(len(r.name) for r in results)
    lines = [f"{'check':<{name_w}}  {'residual':>12}  {'tolerance':>12}  status"]
    for r in results:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.name:<{name_w}}  {r.max_residual:>12.3e}  "
                     f"{r.tolerance:>12.3e}  {status}")
    return "\n".join(lines)
