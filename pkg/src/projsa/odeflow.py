"""Projected ODE integration and the stationarity measures used for convergence checks.

The inclusion ``x' = h(x) - z, z in N_K(x)`` is integrated by projected
explicit Euler. On a box the Euler correction is itself a normal-cone
element, so the integrator is the SA recursion with ``gamma = h_ode`` and
no noise; it is run through the same loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import _window
from .engine import ExplicitPoints, Problem, Trajectory, run
from .geometry import face_signature, project_tangent, dist_to_normal_cone_shifted
from .prox import clarke_interval
from .schedules import NoiseModel, Table


@dataclass(eq=False)
class OdeTrajectory:
    h_ode: float
    times: np.ndarray  # k * h_ode, k = 0..K
    states: np.ndarray  # (K+1, d)
    corrections: np.ndarray  # (K, d); z_k = (x_k + h_ode h(x_k) - x_{k+1}) / h_ode

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _n_grid(T: float, h_ode: float) -> int:
    return int(math.floor(T / h_ode + 1e-9))


def projected_euler(problem: Problem, x0, h_ode: float, T: float, backend=None) -> OdeTrajectory:
    if not (h_ode > 0 and T > 0):
        raise ValueError("h_ode and T must be positive")
    if h_ode > T:
        raise ValueError("h_ode must not exceed T")
    x0 = np.asarray(x0, dtype=float)
    if not problem.box.contains(x0):
        raise ValueError("initial point must lie in the box")
    K = _n_grid(T, h_ode)
    traj = run(problem, "rm", Table((float(h_ode),) * K), NoiseModel(), K, seed=0, x0=x0, backend=backend)
    states = np.vstack([traj.x_init[None, :], traj.x])
    return OdeTrajectory(
        h_ode=float(h_ode),
        times=np.arange(K + 1) * float(h_ode),
        states=states,
        corrections=traj.P / h_ode,
    )


def _problem_of(traj: Trajectory) -> Problem:
    from .problems import build_problem

    desc = traj.metadata.get("problem")
    if not desc:
        raise ValueError("trajectory carries no problem description; pass problem= explicitly")
    return build_problem({"id": desc["id"], "params": desc["params"]})


def compare_sa_ode(traj: Trajectory, N: int, T: float, h_ode: float, problem: Problem | None = None,
                   backend=None) -> float:
    """``sup_k |X_N(k h_ode) - x_ode(k h_ode)|`` over ``k h_ode <= T``, ODE started at ``x_N``.

    Grid points are snapped to SA breakpoints within ``1e-9 h_ode`` so that
    a matched constant-step run compares cell for cell.
    """
    problem = problem or _problem_of(traj)
    snap = 1e-9 * h_ode
    w = _window(traj, N, T + snap)
    ode = projected_euler(problem, w.x[0], h_ode, T, backend=backend)
    tau = w.t - w.t0  # tau[m] = end of cell N+m
    m = np.searchsorted(tau, ode.times + snap, side="right")
    m = np.minimum(m, len(w.x) - 1)
    return float(np.max(np.linalg.norm(w.x[m] - ode.states, axis=1)))


def lyapunov_rate(problem: Problem, x) -> float:
    """``<grad V(x), tangent projection of h(x)>``."""
    if problem.grad_V is None:
        raise ValueError(f"problem {problem.name!r} has no Lyapunov function")
    x = np.asarray(x, dtype=float)
    tangent = project_tangent(np.asarray(problem.drift(x), dtype=float), face_signature(x, problem.box))
    return float(np.dot(np.asarray(problem.grad_V(x), dtype=float), tangent))


def stationarity_residual(problem: Problem, x) -> float:
    """First-order residual at ``x``: zero exactly on the stationary set.

    Without a penalty this is the norm of the tangent projection of
    ``h(x)``. With one it is the largest per-coordinate distance of 0 from
    ``grad f + Clarke(p) + N_K``.
    """
    x = np.asarray(x, dtype=float)
    sig = face_signature(x, problem.box)
    if problem.penalty is None:
        return float(np.linalg.norm(project_tangent(np.asarray(problem.drift(x), dtype=float), sig)))
    grad = problem.gradient(x)
    ci = clarke_interval(problem.penalty, x)
    # dist(0, g + I + N) = dist(0, -g - I - N): pass the negated quantities
    return float(max(
        dist_to_normal_cone_shifted(-grad[i], -ci.hi[i], -ci.lo[i], sig[i]) for i in range(problem.dim)
    ))


def dist_to_stationary(problem: Problem, x) -> float:
    """Distance to the listed stationary points, or the residual surrogate when none are listed."""
    x = np.asarray(x, dtype=float)
    if isinstance(problem.stationary, ExplicitPoints):
        pts = np.asarray(problem.stationary.points, dtype=float)
        return float(np.min(np.linalg.norm(pts - x[None, :], axis=1)))
    return stationarity_residual(problem, x)
