"""Average model of a bank of m parallel buck converters on one DC bus.

The converters share the output capacitor C and a resistive load R.  With
duty cycles d_k treated as continuous inputs (PWM fast enough to average
over), the energy variables are the inductor fluxes phi_k and the
capacitor charge Q, and the dynamics are

    dphi_k/dt = -Q/C + E_k d_k            (k = 1..m)
    dQ/dt     = sum_k phi_k/L_k - Q/(R C)

which is the port-controlled Hamiltonian system

    dx/dt = (J - Rdiss) grad H(x) + B d,   H(x) = 1/2 x^T diag(L, C)^-1 x

with skew-symmetric interconnection J, dissipation Rdiss (single entry
1/R in the charge slot) and input matrix B = [diag(E); 0].  Non-ideal
inductors add a series resistance r_k, i.e. an extra -r_k phi_k/L_k on
the flux derivatives; that term is kept out of the nominal system and
folded in explicitly (see `apply_esr`) so the same parameter set can
drive both the ideal controller design and a perturbed plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructureError

SKEW_TOL = 1e-14


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ParameterError(name, f"expected a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass
class BankParams:
    """Physical parameters of the converter bank.

    L and E are per-converter vectors (henry, volt); C is the shared
    output capacitance (farad); R the load resistance (ohm), mutable by
    scenario events; r the per-coil equivalent series resistance (ohm),
    zero for ideal coils.
    """

    L: np.ndarray
    C: float
    R: float
    E: np.ndarray
    r: np.ndarray = None

    def __post_init__(self):
        self.L = _as_vector(self.L, "L")
        self.E = _as_vector(self.E, "E")
        if self.r is None:
            self.r = np.zeros(len(self.L))
        self.r = _as_vector(self.r, "r")
        self.C = float(self.C)
        self.R = float(self.R)
        self.validate()

    @property
    def m(self) -> int:
        return len(self.L)

    def validate(self):
        if self.m < 2:
            raise ParameterError("L", "need at least 2 converters, the distribution "
                                      "coordinates are empty for a single branch")
        if np.any(self.L <= 0):
            raise ParameterError("L", f"inductances must be > 0, got {self.L}")
        if not self.C > 0:
            raise ParameterError("C", f"capacitance must be > 0, got {self.C}")
        if not self.R > 0:
            raise ParameterError("R", f"load resistance must be > 0, got {self.R}")
        if len(self.E) != self.m:
            raise ParameterError("E", f"expected {self.m} source voltages, got {len(self.E)}")
        if np.any(self.E <= 0):
            raise ParameterError("E", f"source voltages must be > 0, got {self.E}")
        if len(self.r) != self.m:
            raise ParameterError("r", f"expected {self.m} series resistances, got {len(self.r)}")
        if np.any(self.r < 0):
            raise ParameterError("r", f"series resistances must be >= 0, got {self.r}")

    def copy(self) -> "BankParams":
        return BankParams(L=self.L.copy(), C=self.C, R=self.R,
                          E=self.E.copy(), r=self.r.copy())


@dataclass(frozen=True)
class PchState:
    """Energy variables: inductor fluxes (Wb) and capacitor charge (C)."""

    phi: np.ndarray
    Q: float

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "Q", float(self.Q))

    @classmethod
    def zero(cls, m: int) -> "PchState":
        return cls(phi=np.zeros(m), Q=0.0)

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "PchState":
        x = np.asarray(x, dtype=float)
        return cls(phi=x[:-1].copy(), Q=float(x[-1]))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.phi, [self.Q]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.phi)) and np.isfinite(self.Q))


@dataclass(frozen=True)
class PchSystem:
    """Constant matrices of the Hamiltonian form: J, Rdiss, B and the
    quadratic form of the stored energy (diag(L, C)^-1)."""

    J: np.ndarray
    Rdiss: np.ndarray
    B: np.ndarray
    Qform: np.ndarray

    @property
    def m(self) -> int:
        return self.B.shape[1]


def build_pch(params: BankParams) -> PchSystem:
    """Assemble the Hamiltonian system matrices for the ideal bank.

    Series resistance is deliberately not folded in here; use `apply_esr`
    to obtain the perturbed plant.
    """
    params.validate()
    m = params.m
    n = m + 1
    J = np.zeros((n, n))
    J[:m, m] = -1.0
    J[m, :m] = 1.0
    Rdiss = np.zeros((n, n))
    Rdiss[m, m] = 1.0 / params.R
    B = np.zeros((n, m))
    B[:m, :m] = np.diag(params.E)
    Qform = np.diag(np.concatenate([1.0 / params.L, [1.0 / params.C]]))
    skew = np.max(np.abs(J + J.T))
    if skew > SKEW_TOL:
        raise StructureError(f"interconnection matrix not skew-symmetric, |J+J^T| = {skew}")
    return PchSystem(J=J, Rdiss=Rdiss, B=B, Qform=Qform)


def apply_esr(sys: PchSystem, params: BankParams) -> PchSystem:
    """Fold the coil series resistances into the dissipation matrix.

    Adds diag(r) to the flux block of Rdiss, i.e. -r_k phi_k/L_k on each
    flux derivative.  r = 0 returns an identical system.
    """
    m = sys.m
    Rdiss = sys.Rdiss.copy()
    Rdiss[:m, :m] += np.diag(params.r)
    return PchSystem(J=sys.J, Rdiss=Rdiss, B=sys.B, Qform=sys.Qform)


def grad_hamiltonian(sys: PchSystem, x: PchState) -> np.ndarray:
    """Gradient of the stored energy: [phi_k/L_k ..., Q/C]."""
    return sys.Qform @ x.as_vector()


def hamiltonian(sys: PchSystem, x: PchState) -> float:
    """Total stored energy 1/2 x^T diag(L,C)^-1 x (joule)."""
    v = x.as_vector()
    return 0.5 * float(v @ sys.Qform @ v)


def open_loop_rhs(sys: PchSystem, x: PchState, d: np.ndarray) -> np.ndarray:
    """State derivative (J - Rdiss) grad H(x) + B d for duty vector d."""
    d = np.asarray(d, dtype=float)
    if d.shape != (sys.m,):
        raise ValueError(f"duty vector has shape {d.shape}, expected ({sys.m},)")
    return (sys.J - sys.Rdiss) @ grad_hamiltonian(sys, x) + sys.B @ d
