"""Finite-sample measurements on the interpolated processes X_n and Z_n.

X_1 is piecewise constant with value ``x_k`` on ``[t_{k-1}, t_k)``. Z_1
takes the value ``P_1 + ... + P_{k-1}`` on the same cell, which makes
``X_1 + Z_1 - integral of h`` telescope exactly; X_n and Z_n are shifts
by ``t_{n-1}``.

Suprema over piecewise-constant functions are attained on breakpoints,
so every statistic here is an exact enumeration. Vector statistics are
computed per coordinate and summed over coordinates, the aggregation used
to bound ``|sum P|`` coordinate by coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _backend
from .engine import Trajectory


class CoverageError(ValueError):
    """The requested window is not covered by contiguous records."""


# ---------------------------------------------------------------------------
# interpolants
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Interpolant:
    traj: Trajectory
    shift: int = 1
    kind: str = "X"

    def __post_init__(self):
        if self.kind not in ("X", "Z"):
            raise ValueError("interpolant kind is 'X' or 'Z'")
        if self.shift < 1:
            raise ValueError("shift index must be >= 1")


def _t_before(traj: Trajectory, N: int) -> float:
    if N == 1:
        return 0.0
    try:
        return float(traj.t[traj.row_of(N - 1)])
    except KeyError:
        raise CoverageError(f"step {N - 1} is not recorded") from None


def _run_end(traj: Trajectory, row: int) -> int:
    """Last row of the contiguous run of steps starting at ``row``."""
    if traj.is_contiguous:
        return len(traj) - 1
    gaps = np.flatnonzero(np.diff(traj.n[row:]) != 1)
    return row + (int(gaps[0]) if gaps.size else len(traj) - 1 - row)


def _cumsum0(a: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 1,) + a.shape[1:])
    np.cumsum(a, axis=0, out=out[1:])
    return out


def eval_interpolant(ip: Interpolant, t: float) -> np.ndarray:
    """Value of X_n(t) or Z_n(t); no extrapolation past the last recorded step."""
    traj, n = ip.traj, ip.shift
    if t < 0:
        raise CoverageError("interpolants are defined for t >= 0")
    s = float(t) + _t_before(traj, n)
    # X_1 cell k is [t_{k-1}, t_k); recorded cells are those with known t_k
    try:
        first = traj.row_of(n) if n > 1 else 0
    except KeyError:
        raise CoverageError(f"step {n} is not recorded") from None
    last = _run_end(traj, first)
    t_end = traj.t[first : last + 1]
    if s >= t_end[-1]:
        raise CoverageError(f"t={t} lies beyond the recorded range of the shifted process")
    j = int(np.searchsorted(t_end, s, side="right"))  # cell k = n + j
    k = n + j
    if ip.kind == "X":
        return np.array(traj.state(k), copy=True)
    # Z_n(t) - Z_n(0) accumulates P_n..P_{k-1}; Z_n(0) itself carries P_1..P_{n-1}
    if not (traj.is_contiguous or first == 0):
        raise CoverageError("absolute Z values need the run recorded from step 1")
    return traj.P[: traj.row_of(k - 1) + 1].sum(axis=0) if k > 1 else np.zeros(traj.dim)


@dataclass
class _Window:
    N: int
    J: int
    t0: float  # t_{N-1}
    rows: slice  # rows of steps N .. J (or N .. end when no horizon)
    gamma: np.ndarray
    t: np.ndarray  # t_N .. t_J
    x: np.ndarray  # x_N .. x_J  (cell values)
    h: np.ndarray
    e: np.ndarray
    r: np.ndarray
    P: np.ndarray


def _window(traj: Trajectory, N: int, T: float | None = None) -> _Window:
    if N < 1:
        raise ValueError("N must be >= 1")
    t0 = _t_before(traj, N)
    try:
        first = traj.row_of(N)
        x_N = traj.state(N)
    except KeyError as exc:
        raise CoverageError(f"step {exc.args[0]} is not recorded") from None
    last = _run_end(traj, first)
    if T is not None:
        if not T > 0:
            raise ValueError("T must be positive")
        if not traj.t[last] - t0 > T:
            raise CoverageError(
                f"records from step {N} reach time {traj.t[last] - t0:.6g} < T={T}; the window is not covered"
            )
        starts = np.concatenate([[t0], traj.t[first:last]])
        cells = int(np.count_nonzero(starts - t0 <= T))
        last = first + cells - 1
    rows = slice(first, last + 1)
    xs = np.vstack([x_N[None, :], traj.x[first:last]])
    return _Window(
        N=N,
        J=int(traj.n[last]),
        t0=t0,
        rows=rows,
        gamma=traj.gamma[rows],
        t=traj.t[rows],
        x=xs,
        h=traj.h[rows],
        e=traj.e[rows],
        r=traj.r[rows],
        P=traj.P[rows],
    )


def _last_below(A: np.ndarray, ref: np.ndarray, delta: float, lo: np.ndarray) -> np.ndarray:
    """For each i the largest ``j >= lo[i]`` with ``A[j] - ref[i] < delta`` (``lo[i]`` if none).

    Differences are evaluated as written so that rounding matches the
    definition; the searchsorted guess is corrected in both directions.
    """
    m = len(A)
    j = np.searchsorted(A, ref + delta, side="left") - 1
    j = np.clip(j, lo, m - 1)
    for _ in range(4):
        up = (j + 1 < m) & (A[np.minimum(j + 1, m - 1)] - ref < delta)
        down = (j > lo) & (A[j] - ref >= delta)
        if not (up.any() or down.any()):
            break
        j = j + up.astype(np.int64) - down.astype(np.int64)
    return np.maximum(j, lo)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def increments(traj: Trajectory) -> np.ndarray:
    """``y_k = gamma_k (h(x_k) + e_k + r_k) - P_k`` per recorded row."""
    return traj.gamma[:, None] * ((traj.h + traj.e) + traj.r) - traj.P


def partial_sum_stat(traj: Trajectory, N: int, delta: float, backend=None) -> float:
    """``sup |y_n + ... + y_m|`` over ``N <= n <= m`` with ``gamma_n + ... + gamma_m < delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    w = _window(traj, N)
    L = len(w.gamma)
    if L == 0:
        return 0.0
    y = w.gamma[:, None] * ((w.h + w.e) + w.r) - w.P
    S = _cumsum0(y)  # S[i] = y_N + ... + y_{N+i-1}
    A = np.concatenate([[w.t0], w.t])  # A[i] = t_{N+i-1}
    idx = np.arange(L + 1)
    # window [n, m] <-> S[m-N+1] - S[n-N]; admissible iff A[m-N+1] - A[n-N] < delta
    ends = _last_below(A, A, delta, idx)
    return float(np.sum(_backend.window_sup(S, ends, backend=backend)))


def equicontinuity_modulus(traj: Trajectory, kind: str, N: int, T: float, delta: float, backend=None) -> float:
    """``sup |F_N(t) - F_N(s)|`` over ``s, t in [0, T]`` with ``|t - s| < delta``, F = X or Z."""
    if kind not in ("X", "Z"):
        raise ValueError("kind is 'X' or 'Z'")
    if not delta > 0:
        raise ValueError("delta must be positive")
    w = _window(traj, N, T)
    L = len(w.gamma)  # cells N..J
    F = w.x if kind == "X" else _cumsum0(w.P[:-1])
    A = np.concatenate([[w.t0], w.t[:-1]])  # A[i] = start of cell N+i
    idx = np.arange(L)
    # pair (i, j > i) is reachable iff start_j - end_i < delta, end_i = A[i+1]
    ref = np.append(A[1:], np.inf)
    ends = _last_below(A, ref, delta, np.minimum(idx + 1, L - 1))
    ends = np.where(idx == L - 1, idx, ends)
    return float(np.sum(_backend.window_sup(F, ends, backend=backend)))


class LipschitzEstimate(NamedTuple):
    estimate: float
    ceiling: float
    floor: float
    per_coordinate: np.ndarray

    @property
    def ratio(self) -> float:
        return self.estimate / self.ceiling if self.ceiling > 0 else float("inf")


def lipschitz_estimate_Z(traj: Trajectory, N: int, T: float, floor_factor: float = 5.0,
                         backend=None) -> LipschitzEstimate:
    """Largest difference quotient of Z_N on ``[0, T]`` at separations ``>= floor_factor * max gamma``.

    Any breakpoint pair at separation above the floor splits into
    consecutive pieces with separations in ``[floor, 2 floor + 2 gamma_max]``,
    and a quotient over the union never exceeds the largest piece quotient,
    so only those pairs are enumerated. The ceiling is ``(H + R) d``.
    """
    w = _window(traj, N, T)
    gmax = float(w.gamma.max())
    floor = floor_factor * gmax
    ceil = 2.0 * floor + 2.0 * gmax
    Z = _cumsum0(w.P)  # Z at breakpoints t_{N-1} .. t_J
    tau = np.concatenate([[0.0], w.t - w.t0])
    keep = tau <= T
    per = _backend.lipschitz_max(Z[keep], tau[keep], floor, ceil, backend=backend)
    H = float(traj.metadata.get("H", np.nan))
    R = float(traj.metadata.get("R", 0.0))
    ceiling = (H + R) * traj.dim
    return LipschitzEstimate(float(np.sum(per)), ceiling, floor, per)


def integral_residual(traj: Trajectory, N: int, T: float) -> float:
    """``sup_t |X_N(t) - X_N(0) - int_0^t h(X_N) + Z_N(t) - Z_N(0)|`` over breakpoints in ``[0, T]``.

    The integral is exact cell by cell, so the residual isolates the
    accumulated noise ``sum gamma_k (e_k + r_k)``.
    """
    w = _window(traj, N, T)
    drift_int = _cumsum0(w.gamma[:-1, None] * w.h[:-1])
    Z = _cumsum0(w.P[:-1])
    res = (w.x - w.x[0]) - drift_int + Z
    return float(np.max(np.sum(np.abs(res), axis=1)))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticReport:
    T: float
    N_list: list
    delta_list: list
    rows: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def table(self, name: str) -> dict:
        return {(row["N"], row.get("delta")): row[name] for row in self.rows if name in row}

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "N_list": list(self.N_list),
            "delta_list": list(self.delta_list),
            "rows": self.rows,
            "flags": self.flags,
            "metadata": self.metadata,
        }


STATISTICS = ("partial_sum", "modulus_X", "modulus_Z", "lipschitz_Z", "lipschitz_ceiling", "integral_residual")


def diagnostic_sweep(traj: Trajectory, N_list: Sequence[int], T: float, delta_list: Sequence[float],
                     backend=None) -> DiagnosticReport:
    """Tabulate every statistic over the ``(N, delta)`` grid.

    A flag is raised for any statistic whose value at the largest N exceeds
    its value at the smallest N.
    """
    N_list = sorted(int(n) for n in N_list)
    delta_list = [float(d) for d in delta_list]
    rep = DiagnosticReport(T=float(T), N_list=N_list, delta_list=delta_list,
                           metadata={k: traj.metadata.get(k) for k in ("seed", "algorithm", "H", "R", "dim")})
    for N in N_list:
        lip = lipschitz_estimate_Z(traj, N, T, backend=backend)
        per_N = {
            "lipschitz_Z": lip.estimate,
            "lipschitz_ceiling": lip.ceiling,
            "lipschitz_floor": lip.floor,
            "integral_residual": integral_residual(traj, N, T),
        }
        for delta in delta_list:
            rep.rows.append({
                "N": N,
                "delta": delta,
                "partial_sum": partial_sum_stat(traj, N, delta, backend=backend),
                "modulus_X": equicontinuity_modulus(traj, "X", N, T, delta, backend=backend),
                "modulus_Z": equicontinuity_modulus(traj, "Z", N, T, delta, backend=backend),
                **per_N,
            })
    if len(N_list) > 1:
        lo, hi = N_list[0], N_list[-1]
        for name in ("partial_sum", "modulus_X", "modulus_Z", "integral_residual"):
            tab = rep.table(name)
            bad = [d for d in delta_list if tab[(hi, d)] > tab[(lo, d)]]
            rep.flags[name] = "violation" if bad else "ok"
    return rep
