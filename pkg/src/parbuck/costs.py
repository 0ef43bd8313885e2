"""Strictly convex repartition costs and their restriction to z coordinates.

A cost J(phi) ranks how the total current is split among the branches.
Restricted to the equilibrium set (charge at its reference, total flux
pinned by the load), it becomes a function J_z of the repartition vector
alone, and its minimiser is the optimal steady-state repartition.  The
gradient in repartition coordinates follows from the chain rule through
the flux block of the state map, so any differentiable flux cost plugs
in without a hand-derived restriction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import optimize

from .coordinates import CoordinateMaps
from .errors import ParameterError, UnsupportedOracleError


@runtime_checkable
class CostFunction(Protocol):
    declared_convex: bool

    def evaluate(self, phi: np.ndarray) -> float: ...

    def gradient_phi(self, phi: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class QuadraticCost:
    """J(phi) = phi^T diag(K1) phi + K2^T phi.

    With K1 = r1/L^2 and K2 = r2/L this is the total conduction loss of
    the bank for per-converter loss polynomials r1_k i_k^2 + r2_k i_k.
    All K1 entries must be positive (strict convexity).
    """

    K1: np.ndarray
    K2: np.ndarray
    declared_convex: bool = True

    def __post_init__(self):
        object.__setattr__(self, "K1", np.atleast_1d(np.asarray(self.K1, dtype=float)))
        object.__setattr__(self, "K2", np.atleast_1d(np.asarray(self.K2, dtype=float)))
        if self.K1.shape != self.K2.shape:
            raise ParameterError("K2", f"shape {self.K2.shape} does not match K1 {self.K1.shape}")
        if np.any(self.K1 <= 0):
            raise ParameterError("K1", f"quadratic coefficients must be > 0, got {self.K1}")

    def evaluate(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=float)
        return float(phi @ (self.K1 * phi) + self.K2 @ phi)

    def gradient_phi(self, phi: np.ndarray) -> np.ndarray:
        return 2.0 * self.K1 * np.asarray(phi, dtype=float) + self.K2


@dataclass(frozen=True)
class TrackingCost:
    """J(phi) = 1/2 (phi_1 - phi_2 - C_star)^2, two-branch banks only.

    Drives the single repartition coordinate to the target C_star; in z
    coordinates it is exactly 1/2 (Ccas - C_star)^2.
    """

    C_star: float
    declared_convex: bool = True

    def __post_init__(self):
        object.__setattr__(self, "C_star", float(self.C_star))

    def _check(self, phi: np.ndarray):
        if phi.shape != (2,):
            raise ParameterError("phi", "tracking cost is defined for exactly 2 branches")

    def evaluate(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=float)
        self._check(phi)
        return 0.5 * (phi[0] - phi[1] - self.C_star) ** 2

    def gradient_phi(self, phi: np.ndarray) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        self._check(phi)
        e = phi[0] - phi[1] - self.C_star
        return np.array([e, -e])


def embed_flux(maps: CoordinateMaps, ccas, phi_t: float, q_r: float = 0.0) -> np.ndarray:
    """Flux vector of the state Phi @ [ccas; phi_t; q_r]."""
    ccas = np.atleast_1d(np.asarray(ccas, dtype=float))
    z = np.concatenate([ccas, [float(phi_t), float(q_r)]])
    return (maps.Phi @ z)[: maps.m]


def cost_z(cost: CostFunction, maps: CoordinateMaps, ccas, phi_t: float,
           q_r: float = 0.0) -> float:
    """Cost value in z coordinates, J_z(ccas, phi_t)."""
    return cost.evaluate(embed_flux(maps, ccas, phi_t, q_r))


def grad_z(cost: CostFunction, maps: CoordinateMaps, ccas, phi_t: float,
           q_r: float = 0.0) -> np.ndarray:
    """Gradient of J_z with respect to the repartition coordinates.

    Chain rule through the flux block of the state map:
    grad = Gamma_plus^T grad_phi J(phi) at phi = Gamma_plus ccas + 1 phi_t.
    q_r fills the charge slot of the embedding; flux-only costs ignore it.
    """
    phi = embed_flux(maps, ccas, phi_t, q_r)
    return maps.Gamma_plus.T @ cost.gradient_phi(phi)


@dataclass(frozen=True)
class OptimalRepartition:
    """Constrained minimiser: repartition coordinates and flux vector."""

    ccas: np.ndarray
    phi: np.ndarray


def argmin_oracle(cost: CostFunction, maps: CoordinateMaps, phi_t_star: float,
                  q_r: float = 0.0) -> OptimalRepartition:
    """Minimise the cost over the steady-state set at a given total flux.

    The constraint set is {sum_k phi_k/L_k = phi_t_star / L_eq,m}, the
    flux equilibria delivering the required load current.  Quadratic
    costs are solved exactly through the stationarity (KKT) system with
    one multiplier; for other costs a golden-section search over the
    single repartition coordinate is available when m = 2.
    """
    m = maps.m
    phi_t_star = float(phi_t_star)
    if isinstance(cost, TrackingCost):
        ccas = np.array([cost.C_star])
        return OptimalRepartition(ccas=ccas, phi=embed_flux(maps, ccas, phi_t_star, q_r))
    if isinstance(cost, QuadraticCost):
        a = 1.0 / maps.L
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = 2.0 * np.diag(cost.K1)
        kkt[:m, m] = a
        kkt[m, :m] = a
        rhs = np.concatenate([-cost.K2, [phi_t_star / maps.L_eq_m]])
        sol = np.linalg.solve(kkt, rhs)
        phi = sol[:m]
        return OptimalRepartition(ccas=maps.Gamma_T @ phi, phi=phi)
    if m == 2:
        def g(c):
            return cost.evaluate(embed_flux(maps, [c], phi_t_star, q_r))

        # expand a bracket around zero until the middle point is lowest
        span = max(abs(phi_t_star), 1e-3)
        for _ in range(80):
            if g(0.0) <= min(g(-span), g(span)) or span > 1e12:
                break
            span *= 2.0
        res = optimize.minimize_scalar(g, bracket=(-span, 0.0, span),
                                       method="golden", options={"xtol": 1e-12})
        ccas = np.array([res.x])
        return OptimalRepartition(ccas=ccas, phi=embed_flux(maps, ccas, phi_t_star, q_r))
    raise UnsupportedOracleError(
        f"no argmin route for {type(cost).__name__} with m={m}; "
        "closed form needs a quadratic cost, scalar search needs m=2"
    )
