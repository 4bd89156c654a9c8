"""Built-in problems with known drifts, bounds, Lyapunov functions and stationary sets.

The drifts are small callable classes whose ``kernel_spec`` lets the
engine hand them to the compiled loop; their ``__call__`` performs the
same floating-point operations as the kernel.
"""

from __future__ import annotations

import numpy as np

from ._pykernels import DRIFT_CONSTANT, DRIFT_DIAGONAL, DRIFT_ROTATION
from .engine import ExplicitPoints, Problem, ResidualBased
from .geometry import Box
from .prox import Penalty, clarke_interval


class DiagonalDrift:
    """``h(x) = gains * (target - x)``, the negative gradient of a separable quadratic."""

    def __init__(self, target, gains):
        self.target = np.asarray(target, dtype=float)
        self.gains = np.asarray(gains, dtype=float)

    @property
    def kernel_spec(self):
        return DRIFT_DIAGONAL, self.target, self.gains, 0.0

    def __call__(self, x):
        return self.gains * (self.target - np.asarray(x, dtype=float))

    batch = __call__


class RotationDrift:
    """``h(x) = M (target - x)`` with ``M = [[1, omega], [-omega, 1]]``."""

    def __init__(self, target, omega):
        self.target = np.asarray(target, dtype=float)
        if self.target.shape != (2,):
            raise ValueError("rotation drift is two-dimensional")
        self.omega = float(omega)

    @property
    def kernel_spec(self):
        return DRIFT_ROTATION, self.target, np.zeros(2), self.omega

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = self.target - x
        u0, u1 = u[..., 0], u[..., 1]
        return np.stack([u0 + self.omega * u1, -self.omega * u0 + u1], axis=-1)

    batch = __call__


class ConstantDrift:
    def __init__(self, direction):
        self.direction = np.asarray(direction, dtype=float)

    @property
    def kernel_spec(self):
        return DRIFT_CONSTANT, np.zeros_like(self.direction), self.direction, 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.direction, x.shape).copy()

    batch = __call__


def _box(dim, box) -> Box:
    if isinstance(box, Box):
        if box.dim != dim:
            raise ValueError(f"box has dimension {box.dim}, expected {dim}")
        return box
    lower, upper = box
    return Box(np.broadcast_to(np.asarray(lower, dtype=float), (dim,)),
               np.broadcast_to(np.asarray(upper, dtype=float), (dim,)))


def _vec(v, dim, name):
    arr = np.broadcast_to(np.asarray(v, dtype=float), (dim,)).copy()
    return arr


def _quadratic_parts(box: Box, target, gains):
    clamp = np.minimum(np.maximum(target, box.lower), box.upper)
    f_min = 0.5 * float(np.sum(gains * (clamp - target) ** 2))

    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.sum(gains * (x - target) ** 2))

    def grad_f(x):
        return gains * (np.asarray(x, dtype=float) - target)

    # |grad f| is separable: each coordinate peaks at one of its two endpoints
    worst = np.maximum(np.abs(gains * (box.lower - target)), np.abs(gains * (box.upper - target)))
    H = float(np.linalg.norm(worst))
    return f, grad_f, f_min, clamp, H


def make_quadratic(dim: int, box, target, gains=1.0) -> Problem:
    """``f(x) = 1/2 sum_i gains_i (x_i - target_i)**2`` with ``h = -grad f``.

    The stationary set is the clamp of ``target`` to the box.
    """
    box = _box(dim, box)
    target = _vec(target, dim, "target")
    gains = _vec(gains, dim, "gains")
    if not np.all(gains > 0):
        raise ValueError("quadratic gains must be positive")
    f, grad_f, f_min, clamp, H = _quadratic_parts(box, target, gains)
    return Problem(
        drift=DiagonalDrift(target, gains),
        box=box,
        H=max(H, 1e-300),
        stationary=ExplicitPoints(clamp[None, :]),
        f=f,
        grad_f=grad_f,
        V=lambda x: f(x) - f_min,
        grad_V=grad_f,
        name="quadratic",
        params={"dim": dim, "target": target.tolist(), "gains": gains.tolist(), **box.to_dict()},
    )


def make_rotation(box, target, omega: float) -> Problem:
    """Non-gradient drift ``M (target - x)``, a damped rotation about ``target``."""
    box = _box(2, box)
    target = _vec(target, 2, "target")
    drift = RotationDrift(target, omega)
    H = float(np.max(np.linalg.norm(drift(box.corners()), axis=1)))
    interior = bool(np.all(target > box.lower) and np.all(target < box.upper))
    stationary = ExplicitPoints(target[None, :]) if interior else ResidualBased(1e-6)
    return Problem(
        drift=drift,
        box=box,
        H=max(H, 1e-300),
        stationary=stationary,
        name="rotation",
        params={"target": target.tolist(), "omega": float(omega), **box.to_dict()},
    )


def composite_residual_1d(grad: np.ndarray, x: np.ndarray, pen: Penalty, lo: float, hi: float,
                          face_tol: float) -> np.ndarray:
    """Per-point distance of 0 from ``grad + clarke(p)(x) + N_[lo,hi](x)`` on a 1-D grid.

    Vectorised form of ``dist_to_normal_cone_shifted(-grad, -clarke_hi, -clarke_lo, tag)``.
    """
    x = np.asarray(x, dtype=float)
    ci = clarke_interval(pen, x)
    neg = -np.asarray(grad, dtype=float)
    left = neg + (-ci.hi)
    right = neg + (-ci.lo)
    left = np.where(hi - x <= face_tol, -np.inf, left)
    right = np.where(x - lo <= face_tol, np.inf, right)
    return np.where(left > 0.0, left, np.where(right < 0.0, -right, 0.0))


def grid_stationary_points_1d(gain: float, target: float, pen: Penalty, lo: float, hi: float,
                              step: float = 1e-4) -> np.ndarray:
    """Stationary points of ``gain/2 (x - target)**2 + p(x)`` on ``[lo, hi]`` by grid search.

    Grid points ``k * step`` (plus the endpoints) whose composite residual
    is within the grid's resolution are grouped into runs; each run
    contributes its best point.
    """
    k_lo = int(np.ceil(lo / step))
    k_hi = int(np.floor(hi / step))
    grid = np.unique(np.concatenate([[lo], np.arange(k_lo, k_hi + 1) * step, [hi]]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    grad = gain * (grid - target)
    res = composite_residual_1d(grad, grid, pen, lo, hi, face_tol=1e-9 * (hi - lo))
    tol = 2.0 * step * (gain + pen.curvature)
    hit = np.flatnonzero(res <= tol)
    if hit.size == 0:
        return np.array([grid[np.argmin(res)]])
    runs = np.split(hit, np.flatnonzero(np.diff(hit) > 1) + 1)
    return np.array([grid[r[np.argmin(res[r])]] for r in runs])


def make_composite(dim: int, box, target, gains, pen: Penalty, grid_step: float = 1e-4) -> Problem:
    """Separable quadratic ``f`` plus penalty ``pen``; ``h = -grad f``.

    For ``dim <= 2`` the stationary set is found per coordinate on a grid
    and stored as the product of the per-coordinate sets; above that the
    composite residual serves as the convergence measure.
    """
    box = _box(dim, box)
    target = _vec(target, dim, "target")
    gains = _vec(gains, dim, "gains")
    if not np.all(gains > 0):
        raise ValueError("quadratic gains must be positive")
    f, grad_f, _, _, H = _quadratic_parts(box, target, gains)
    if dim <= 2:
        per_coord = [
            grid_stationary_points_1d(gains[i], target[i], pen, box.lower[i], box.upper[i], grid_step)
            for i in range(dim)
        ]
        mesh = np.array(np.meshgrid(*per_coord, indexing="ij")).reshape(dim, -1).T
        stationary = ExplicitPoints(mesh)
    else:
        stationary = ResidualBased(1e-3)
    return Problem(
        drift=DiagonalDrift(target, gains),
        box=box,
        H=max(H, 1e-300),
        stationary=stationary,
        f=f,
        grad_f=grad_f,
        penalty=pen,
        name="composite",
        params={"dim": dim, "target": target.tolist(), "gains": gains.tolist(),
                "penalty": pen.to_dict(), **box.to_dict()},
    )


def make_pinned_drift(dim: int, box, direction) -> Problem:
    """Constant drift along ``direction`` (normalised), pushing iterates onto a face."""
    box = _box(dim, box)
    raw = _vec(direction, dim, "direction")
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    direction = raw / norm
    if np.all(direction != 0.0):
        face = np.where(direction > 0, box.upper, box.lower)
        stationary = ExplicitPoints(face[None, :])
    else:
        stationary = ResidualBased(1e-9)
    peak = float(np.max(box.corners() @ direction))

    def V(x):
        return peak - float(np.dot(direction, x))

    return Problem(
        drift=ConstantDrift(direction),
        box=box,
        H=1.0,
        stationary=stationary,
        V=V,
        grad_V=lambda x: -direction,
        name="pinned",
        params={"dim": dim, "direction": raw.tolist(), **box.to_dict()},
    )


_FACTORIES = {
    "quadratic": lambda p: make_quadratic(p["dim"], (p["lower"], p["upper"]), p["target"], p.get("gains", 1.0)),
    "rotation": lambda p: make_rotation((p["lower"], p["upper"]), p["target"], p["omega"]),
    "composite": lambda p: make_composite(
        p["dim"], (p["lower"], p["upper"]), p["target"], p.get("gains", 1.0), Penalty.from_dict(p.get("penalty"))
    ),
    "pinned": lambda p: make_pinned_drift(p["dim"], (p["lower"], p["upper"]), p["direction"]),
}


def problem_ids() -> list:
    return sorted(_FACTORIES)


def build_problem(spec: dict) -> Problem:
    """Instantiate ``{"id": name, "params": {...}}``."""
    pid = spec.get("id")
    if pid not in _FACTORIES:
        raise ValueError(f"unknown problem id {pid!r}; known: {problem_ids()}")
    params = dict(spec.get("params", {}))
    if "dim" not in params and pid != "rotation":
        params["dim"] = len(np.atleast_1d(params.get("lower", [0.0])))
    try:
        return _FACTORIES[pid](params)
    except KeyError as exc:
        raise ValueError(f"problem {pid!r} is missing parameter {exc.args[0]!r}") from None
