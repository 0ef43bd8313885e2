"""Change of coordinates that splits the bank into two independent parts.

The bus voltage only sees the total current, so the state is re-expressed
as z = [Ccas; phi_T; Q]:

* phi_T = L_eq,m * sum_k phi_k/L_k, the flux of the equivalent single
  coil (L_eq,k is the parallel combination of the first k inductors);
* Ccas, m-1 "flux repartition" coordinates Gamma_T @ phi.  Row k of
  Gamma_T compares the equivalent flux of the first k branches with the
  flux of branch k+1, and each row sums to zero.  Because of that kernel
  property these coordinates are conserved by the interconnection matrix
  alone - they are Casimir invariants of the ideal circuit, which is what
  makes the decoupling exact rather than a bandwidth separation.

The matching input coordinates [lambda; mu] = U^-1 d give lambda
authority over Ccas only and mu over (phi_T, Q) only.  In z coordinates
the system splits into a driftless repartition block dCcas/dt =
diag(E_tilde) lambda and an equivalent single buck converter in
(phi_T, Q).  E_tilde and E_eq are free positive scalings of the new
inputs (defaulting to mean(E)); they cancel out of the closed loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StructureError
from .model import BankParams, PchState, PchSystem

EXACT_TOL = 1e-12     # assertions on exactly-structured identities
COMPOSED_TOL = 1e-10  # assertions involving composed matrix algebra


def leq_ladder(L: np.ndarray) -> np.ndarray:
    """Cumulative parallel inductance: L_eq,k = (sum_{j<=k} 1/L_j)^-1."""
    L = np.asarray(L, dtype=float)
    return 1.0 / np.cumsum(1.0 / L)


def build_gamma(L) -> np.ndarray:
    """Repartition matrix Gamma_T, shape (m-1, m).

    Row k is G_k - e_{k+1}^T with
    G_k = L_eq,k * [1/L_1, ..., 1/L_k, 0, ..., 0]; every row sums to zero.
    """
    L = np.asarray(L, dtype=float)
    m = len(L)
    if m < 2:
        raise ParameterError("L", "repartition coordinates require at least 2 branches")
    if np.any(L <= 0):
        raise ParameterError("L", f"inductances must be > 0, got {L}")
    leq = leq_ladder(L)
    gamma_t = np.zeros((m - 1, m))
    for k in range(1, m):
        gamma_t[k - 1, :k] = leq[k - 1] / L[:k]
        gamma_t[k - 1, k] = -1.0
    return gamma_t


@dataclass(frozen=True)
class CoordinateMaps:
    """State map Phi_inv/Phi, input map U/U_inv and the derived constants.

    L_eq is the full ladder (L_eq[-1] is the bank equivalent inductance),
    L_C the m-1 virtual inductances L_eq,k + L_{k+1} that weight the
    repartition coordinates in the transformed energy.
    """

    Gamma_T: np.ndarray
    Gamma_plus: np.ndarray
    Phi_inv: np.ndarray
    Phi: np.ndarray
    U: np.ndarray
    U_inv: np.ndarray
    L: np.ndarray
    C: float
    L_eq: np.ndarray
    L_C: np.ndarray
    E_tilde: np.ndarray
    E_eq: float

    @property
    def m(self) -> int:
        return self.Gamma_T.shape[1]

    @property
    def L_eq_m(self) -> float:
        return float(self.L_eq[-1])

    @property
    def phi_T_row(self) -> np.ndarray:
        """Row vector w with phi_T = w @ phi."""
        return self.Phi_inv[self.m - 1, : self.m]


@dataclass(frozen=True)
class ZState:
    """State in decoupled coordinates: repartition vector, total flux, charge."""

    Ccas: np.ndarray
    phi_T: float
    Q: float

    def __post_init__(self):
        object.__setattr__(self, "Ccas", np.atleast_1d(np.asarray(self.Ccas, dtype=float)))
        object.__setattr__(self, "phi_T", float(self.phi_T))
        object.__setattr__(self, "Q", float(self.Q))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.Ccas, [self.phi_T, self.Q]])


def build_maps(params: BankParams, E_tilde=None, E_eq: float = None) -> CoordinateMaps:
    """Construct all coordinate maps for a parameter set.

    Phi is obtained by numerical inversion of Phi_inv and cross-checked
    against its closed form (pseudo-inverse block of Gamma plus the
    all-ones column); a discrepancy beyond 1e-10 means one of the two
    constructions was transcribed wrong and raises.
    """
    m = params.m
    L = params.L
    gamma_t = build_gamma(L)
    gamma = gamma_t.T
    leq = leq_ladder(L)
    leqm = leq[-1]
    l_c = leq[:-1] + L[1:]

    if E_tilde is None:
        E_tilde = np.full(m - 1, float(np.mean(params.E)))
    E_tilde = np.atleast_1d(np.asarray(E_tilde, dtype=float))
    if E_tilde.shape == (1,) and m > 2:
        E_tilde = np.full(m - 1, E_tilde[0])
    if E_tilde.shape != (m - 1,):
        raise ParameterError("E_tilde", f"expected {m - 1} entries, got shape {E_tilde.shape}")
    if np.any(E_tilde <= 0):
        raise ParameterError("E_tilde", f"entries must be > 0, got {E_tilde}")
    if E_eq is None:
        E_eq = float(np.mean(params.E))
    E_eq = float(E_eq)
    if E_eq <= 0:
        raise ParameterError("E_eq", f"must be > 0, got {E_eq}")

    w = leqm / L  # phi_T row

    phi_inv = np.zeros((m + 1, m + 1))
    phi_inv[: m - 1, :m] = gamma_t
    phi_inv[m - 1, :m] = w
    phi_inv[m, m] = 1.0

    phi = np.linalg.inv(phi_inv)

    # closed form: the flux block of Phi is [Gamma_plus, 1_m]
    scaled = np.diag(L) / leqm
    gamma_plus = scaled @ gamma @ np.linalg.inv(gamma_t @ scaled @ gamma)
    phi_closed = np.zeros((m + 1, m + 1))
    phi_closed[:m, : m - 1] = gamma_plus
    phi_closed[:m, m - 1] = 1.0
    phi_closed[m, m] = 1.0
    mismatch = np.max(np.abs(phi - phi_closed))
    if mismatch > COMPOSED_TOL:
        raise StructureError(
            f"numerical inverse and closed form of the state map disagree by {mismatch:.3e}"
        )

    inner = np.vstack([gamma_t, w])  # maps flux to [Ccas; phi_T]
    scale = np.zeros((m, m))
    scale[: m - 1, : m - 1] = np.diag(E_tilde)
    scale[m - 1, m - 1] = E_eq
    u = np.diag(1.0 / params.E) @ np.linalg.inv(inner) @ scale
    u_inv = np.linalg.inv(scale) @ inner @ np.diag(params.E)
    round_trip = np.max(np.abs(u @ u_inv - np.eye(m)))
    if round_trip > EXACT_TOL:
        raise StructureError(f"input map round trip off identity by {round_trip:.3e}")

    return CoordinateMaps(
        Gamma_T=gamma_t,
        Gamma_plus=gamma_plus,
        Phi_inv=phi_inv,
        Phi=phi,
        U=u,
        U_inv=u_inv,
        L=L.copy(),
        C=params.C,
        L_eq=leq,
        L_C=l_c,
        E_tilde=E_tilde,
        E_eq=E_eq,
    )


@dataclass(frozen=True)
class TransformedSystem:
    """The bank rewritten in z coordinates."""

    J_minus_R: np.ndarray
    input_matrix: np.ndarray
    Qform: np.ndarray


def transform_system(sys: PchSystem, maps: CoordinateMaps) -> TransformedSystem:
    """Push the Hamiltonian system through the coordinate change.

    Returns Phi_inv (J - Rdiss) Phi_inv^T, Phi_inv B U and the transformed
    energy quadratic form, asserting the expected sparsity: a zero
    repartition block (no drift, no coupling into the charge pair), the
    equivalent-buck 2x2 corner, a block-diagonal input matrix and a
    diagonal energy with weights [1/L_C, 1/L_eq,m, 1/C].
    """
    m = maps.m
    if sys.m != m:
        raise ParameterError("maps", f"system has {sys.m} branches, maps built for {m}")
    jr = maps.Phi_inv @ (sys.J - sys.Rdiss) @ maps.Phi_inv.T
    inp = maps.Phi_inv @ sys.B @ maps.U
    qform = maps.Phi.T @ sys.Qform @ maps.Phi

    r_load = -1.0 / jr[m, m]
    expected = np.zeros((m + 1, m + 1))
    expected[m - 1, m] = -1.0
    expected[m, m - 1] = 1.0
    expected[m, m] = -1.0 / r_load
    dev = np.max(np.abs(jr - expected))
    if dev > COMPOSED_TOL:
        raise StructureError(f"transformed dynamics violate the decoupled pattern by {dev:.3e}")

    expected_inp = np.zeros((m + 1, m))
    expected_inp[: m - 1, : m - 1] = np.diag(maps.E_tilde)
    expected_inp[m - 1, m - 1] = maps.E_eq
    dev = np.max(np.abs(inp - expected_inp))
    if dev > COMPOSED_TOL:
        raise StructureError(f"transformed input matrix off block-diagonal by {dev:.3e}")

    expected_q = np.diag(np.concatenate([1.0 / maps.L_C, [1.0 / maps.L_eq_m, 1.0 / maps.C]]))
    dev = np.max(np.abs(qform - expected_q))
    if dev > COMPOSED_TOL:
        raise StructureError(f"transformed energy form not the expected diagonal, off by {dev:.3e}")

    return TransformedSystem(J_minus_R=expected, input_matrix=expected_inp, Qform=expected_q)


def to_z(maps: CoordinateMaps, x: PchState) -> ZState:
    z = maps.Phi_inv @ x.as_vector()
    m = maps.m
    return ZState(Ccas=z[: m - 1], phi_T=z[m - 1], Q=z[m])


def to_x(maps: CoordinateMaps, z: ZState) -> PchState:
    x = maps.Phi @ z.as_vector()
    return PchState(phi=x[:-1], Q=x[-1])


def input_to_d(maps: CoordinateMaps, lam, mu: float) -> np.ndarray:
    """Physical duty vector d = U [lambda; mu] (unclamped)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return maps.U @ np.concatenate([lam, [float(mu)]])


def d_to_input(maps: CoordinateMaps, d) -> tuple[np.ndarray, float]:
    """Inverse map: recover (lambda, mu) from a physical duty vector."""
    v = maps.U_inv @ np.asarray(d, dtype=float)
    return v[:-1], float(v[-1])


@dataclass(frozen=True)
class CasimirReport:
    """Residual of the invariance condition [Gamma_T, 0] (J - Rdiss) = 0."""

    residual: float
    conserved: bool


def verify_casimir(sys: PchSystem, maps: CoordinateMaps, tol: float = EXACT_TOL) -> CasimirReport:
    """Check that the repartition coordinates are dynamical invariants.

    On the ideal system the residual is zero.  Series resistance couples
    the flux block into the dissipation matrix and breaks the invariance;
    the report then carries the violation magnitude instead of failing.
    """
    m = maps.m
    dC = np.zeros((m - 1, m + 1))
    dC[:, :m] = maps.Gamma_T
    residual = float(np.max(np.abs(dC @ (sys.J - sys.Rdiss))))
    return CasimirReport(residual=residual, conserved=residual <= tol)
