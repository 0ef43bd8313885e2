"""Simulation trace container, CSV round trip and steady-state summaries.

CSV schema (comma separated, '.' decimal, one header row, floats printed
with repr precision so files read back losslessly):

    t, phi_1..phi_m, Q, v, C_1..C_{m-1}, phi_T, d_1..d_m,
    lambda_1..lambda_{m-1}, mu, xi, H, H_d, J_cost, sat_1..sat_m

sat_* are 0/1 clamp flags; everything else is SI (s, Wb, C, V, J).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhaseInfo:
    """Constant-parameter stretch of a scenario (between events)."""

    t_start: float
    t_end: float
    R: float
    Q_r: float


@dataclass
class Trace:
    """Column-oriented log of one simulation run."""

    t: np.ndarray
    phi: np.ndarray
    Q: np.ndarray
    v: np.ndarray
    ccas: np.ndarray
    phi_T: np.ndarray
    d: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    xi: np.ndarray
    H: np.ndarray
    H_d: np.ndarray
    J_cost: np.ndarray
    sat: np.ndarray
    name: str = ""
    dt: float = 0.0
    decimate: int = 1
    phases: tuple = ()
    complete: bool = True

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def n_records(self) -> int:
        return len(self.t)

    def columns(self) -> list[str]:
        m = self.m
        return (["t"]
                + [f"phi_{k + 1}" for k in range(m)]
                + ["Q", "v"]
                + [f"C_{k + 1}" for k in range(m - 1)]
                + ["phi_T"]
                + [f"d_{k + 1}" for k in range(m)]
                + [f"lambda_{k + 1}" for k in range(m - 1)]
                + ["mu", "xi", "H", "H_d", "J_cost"]
                + [f"sat_{k + 1}" for k in range(m)])

    def matrix(self) -> np.ndarray:
        return np.column_stack([
            self.t, self.phi, self.Q, self.v, self.ccas, self.phi_T,
            self.d, self.lam, self.mu, self.xi, self.H, self.H_d,
            self.J_cost, self.sat.astype(float),
        ])

    def to_csv(self, path_or_buf) -> None:
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            buf = open(path_or_buf, "w")
            close = True
        else:
            buf = path_or_buf
        try:
            buf.write(",".join(self.columns()) + "\n")
            np.savetxt(buf, self.matrix(), fmt="%.17g", delimiter=",")
        finally:
            if close:
                buf.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of records with t0 <= t <= t1 (small slack for rounding)."""
        eps = 1e-9 * max(1.0, abs(t1))
        return (self.t >= t0 - eps) & (self.t <= t1 + eps)

    def at_time(self, t: float) -> int:
        """Index of the record closest to time t."""
        return int(np.argmin(np.abs(self.t - t)))


def read_csv(path_or_buf) -> tuple[list[str], np.ndarray]:
    """Read a trace CSV back into (column names, data matrix)."""
    close = False
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        buf = open(path_or_buf)
        close = True
    else:
        buf = path_or_buf
    try:
        header = buf.readline().strip()
        names = header.split(",")
        data = np.loadtxt(buf, delimiter=",", ndmin=2)
    finally:
        if close:
            buf.close()
    return names, data


@dataclass(frozen=True)
class SteadyStateMetrics:
    """Aggregates over a trace window."""

    t_start: float
    t_end: float
    mean_Q: float
    mean_v: float
    mean_phi: np.ndarray
    mean_ccas: np.ndarray
    final_Q: float
    final_phi: np.ndarray
    final_ccas: np.ndarray
    settling_time: float
    max_ccas_deviation: float
    saturation_steps: int


def steady_state_metrics(trace: Trace, window: tuple[float, float],
                         q_r: float = None, band: float = 0.01) -> SteadyStateMetrics:
    """Summarise a window: means, final values, settling into the +-band
    around q_r (relative), and the worst repartition drift from the
    window-entry value (the cross-coupling figure)."""
    t0, t1 = window
    mask = trace.window(t0, t1)
    if not np.any(mask):
        raise ValueError(f"window [{t0}, {t1}] contains no trace records")
    idx = np.where(mask)[0]
    t = trace.t[idx]
    Q = trace.Q[idx]
    phi = trace.phi[idx]
    ccas = trace.ccas[idx]

    settling = float("nan")
    if q_r is not None:
        tol = band * abs(q_r) if q_r != 0 else band
        outside = np.abs(Q - q_r) > tol
        if not np.any(outside):
            settling = 0.0
        elif not outside[-1]:
            last_out = np.where(outside)[0][-1]
            settling = float(t[last_out + 1] - t0)

    return SteadyStateMetrics(
        t_start=float(t[0]),
        t_end=float(t[-1]),
        mean_Q=float(np.mean(Q)),
        mean_v=float(np.mean(trace.v[idx])),
        mean_phi=np.mean(phi, axis=0),
        mean_ccas=np.mean(ccas, axis=0),
        final_Q=float(Q[-1]),
        final_phi=phi[-1].copy(),
        final_ccas=ccas[-1].copy(),
        settling_time=settling,
        max_ccas_deviation=float(np.max(np.abs(ccas - ccas[0]))) if len(idx) else 0.0,
        saturation_steps=int(np.sum(np.any(trace.sat[idx] != 0, axis=1))),
    )
