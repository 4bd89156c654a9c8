"""Projected Robbins-Monro and projected stochastic proximal-gradient iterations.

One step of the projected recursion is

    y       = x_n + gamma_n * (h(x_n) + e_n + r_n)
    x_{n+1} = clamp(y)                       (RM)
    P_n     = y - x_{n+1}

For the proximal variants the noisy gradient is ``H_k = -(h + e + r)``
with ``h = -grad f``, so all three rules see the same drift-level noise
and coincide exactly when the penalty is zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

import numpy as np

from . import _backend
from .geometry import Box, project_box
from .prox import ZERO, Penalty, prox_penalty, prox_penalty_box
from .schedules import (
    NoiseModel,
    StepSchedule,
    cumulative_time,
    cumulative_times,
    gamma,
    gammas,
    make_rng,
    sample_noise,
)

ALGORITHMS = ("rm", "prox1", "prox2")
_MODE = {"rm": 0, "prox1": 1, "prox2": 2}


class NonFiniteDriftError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"drift returned a non-finite value at step {step}")
        self.step = step


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplicitPoints:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)

    def to_dict(self) -> dict:
        return {"kind": "points", "points": self.points.tolist()}


@dataclass(frozen=True)
class ResidualBased:
    tol: float = 1e-6

    def to_dict(self) -> dict:
        return {"kind": "residual", "tol": self.tol}


StationaryDescriptor = Union[ExplicitPoints, ResidualBased]


def _eval_batch(fn: Callable, pts: np.ndarray) -> np.ndarray:
    batch = getattr(fn, "batch", None)
    if batch is not None:
        return np.asarray(batch(pts), dtype=float)
    return np.array([fn(p) for p in pts], dtype=float)


@dataclass(frozen=True, eq=False)
class Problem:
    """Drift ``h`` on a box together with the objects the convergence checks need.

    ``H`` bounds ``|h|`` on the box. When ``f`` is given, ``h`` must be
    ``-grad f``; ``grad_f`` defaults to ``-h``. ``V``/``grad_V`` is an
    optional Lyapunov pair.
    """

    drift: Callable[[np.ndarray], np.ndarray]
    box: Box
    H: float
    stationary: StationaryDescriptor = field(default_factory=ResidualBased)
    f: Optional[Callable[[np.ndarray], float]] = None
    grad_f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    penalty: Optional[Penalty] = None
    V: Optional[Callable[[np.ndarray], float]] = None
    grad_V: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    check: bool = True

    def __post_init__(self):
        if not self.H > 0:
            raise ValueError("drift bound H must be positive")
        if (self.V is None) != (self.grad_V is None):
            raise ValueError("V and grad_V must be given together")
        if self.check:
            self._check_bound()
            if self.f is not None:
                self._check_gradient()

    @property
    def dim(self) -> int:
        return self.box.dim

    def gradient(self, x) -> np.ndarray:
        if self.grad_f is not None:
            return np.asarray(self.grad_f(x), dtype=float)
        return -np.asarray(self.drift(x), dtype=float)

    def _check_bound(self, n: int = 10_000) -> None:
        rng = np.random.default_rng(0)
        pts = np.vstack([self.box.sample(rng, n), self.box.corners()[:64]])
        norms = np.linalg.norm(_eval_batch(self.drift, pts), axis=1)
        worst = float(norms.max())
        if worst > self.H * (1 + 1e-9):
            warnings.warn(f"{self.name}: sampled |h| reaches {worst:.6g} > H = {self.H:.6g}", stacklevel=3)

    def _check_gradient(self, n: int = 100, step: float = 1e-6) -> None:
        rng = np.random.default_rng(1)
        lo, hi = self.box.lower, self.box.upper
        margin = 0.01 * (hi - lo)
        pts = rng.uniform(lo + margin, hi - margin, size=(n, self.dim))
        eye = np.eye(self.dim) * step
        for x in pts:
            fd = np.array([(self.f(x + eye[i]) - self.f(x - eye[i])) / (2 * step) for i in range(self.dim)])
            h = np.asarray(self.drift(x), dtype=float)
            if np.max(np.abs(fd + h)) > 1e-4:
                raise ValueError(f"{self.name}: drift is not -grad f (finite-difference mismatch at {x})")

    def describe(self) -> dict:
        return {
            "id": self.name,
            "params": self.params,
            "box": self.box.to_dict(),
            "H": self.H,
            "penalty": None if self.penalty is None else self.penalty.to_dict(),
            "stationary": self.stationary.to_dict(),
        }


# ---------------------------------------------------------------------------
# records and trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterateRecord:
    """Step ``n``: pre-update ``x_prev = x_n``, post-update ``x = x_{n+1}``."""

    n: int
    x: np.ndarray
    x_prev: np.ndarray
    gamma: float
    e: np.ndarray
    r: np.ndarray
    hval: np.ndarray
    P: np.ndarray
    t: float


@dataclass(frozen=True)
class Full:
    def select(self, n_steps: int) -> np.ndarray:
        return np.arange(n_steps)

    def to_dict(self) -> dict:
        return {"kind": "full"}


@dataclass(frozen=True)
class Thin:
    """Every ``stride``-th step, with the first and last ``window`` steps kept whole."""

    stride: int
    window: int = 1000

    def __post_init__(self):
        if self.stride < 1 or self.window < 0:
            raise ValueError("stride must be >= 1 and window >= 0")

    def select(self, n_steps: int) -> np.ndarray:
        idx = np.arange(n_steps)
        keep = ((idx + 1) % self.stride == 0) | (idx < self.window) | (idx >= n_steps - self.window)
        return idx[keep]

    def to_dict(self) -> dict:
        return {"kind": "thin", "stride": self.stride, "window": self.window}


@dataclass(frozen=True)
class Window:
    """First and last ``size`` steps only; running aggregates cover the rest."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("window size must be >= 1")

    def select(self, n_steps: int) -> np.ndarray:
        idx = np.arange(n_steps)
        return idx[(idx < self.size) | (idx >= n_steps - self.size)]

    def to_dict(self) -> dict:
        return {"kind": "window", "size": self.size}


RecordPolicy = Union[Full, Thin, Window]


def policy_from_dict(d: Optional[dict]) -> RecordPolicy:
    if not d or d.get("kind", "full") == "full":
        return Full()
    if d["kind"] == "thin":
        return Thin(int(d["stride"]), int(d.get("window", 1000)))
    if d["kind"] == "window":
        return Window(int(d["size"]))
    raise ValueError(f"unknown record policy {d['kind']!r}")


@dataclass(eq=False)
class Trajectory:
    """Column-wise store of recorded steps.

    Row ``i`` holds step ``n[i]``: ``x[i] = x_{n+1}``, ``h[i] = h(x_n)``,
    ``t[i] = t_n``. ``x_init`` is ``x_1``.
    """

    n: np.ndarray
    t: np.ndarray
    gamma: np.ndarray
    x: np.ndarray
    e: np.ndarray
    r: np.ndarray
    h: np.ndarray
    P: np.ndarray
    x_init: np.ndarray
    metadata: dict = field(default_factory=dict)
    aggregates: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        if len(self.n) > 1 and (np.any(np.diff(self.n) <= 0) or np.any(np.diff(self.t) <= 0)):
            raise ValueError("trajectory steps and times must be strictly increasing")
        self._row_of_cache = None

    def __len__(self) -> int:
        return len(self.n)

    @property
    def dim(self) -> int:
        return self.x_init.size

    @property
    def n_steps(self) -> int:
        return int(self.metadata.get("n_steps", self.n[-1] if len(self.n) else 0))

    @property
    def algorithm(self) -> str:
        return self.metadata.get("algorithm", "rm")

    @property
    def is_contiguous(self) -> bool:
        return len(self.n) == 0 or (self.n[0] == 1 and self.n[-1] == len(self.n))

    def row_of(self, step: int) -> int:
        """Row index holding step ``step``; KeyError when not recorded."""
        if self.is_contiguous:
            if 1 <= step <= len(self.n):
                return step - 1
            raise KeyError(step)
        i = int(np.searchsorted(self.n, step))
        if i < len(self.n) and self.n[i] == step:
            return i
        raise KeyError(step)

    def contiguous_rows(self, first: int, last: int) -> slice:
        """Row slice covering steps ``first..last``; ValueError when any is missing."""
        try:
            a = self.row_of(first)
            b = self.row_of(last)
        except KeyError as exc:
            raise ValueError(f"step {exc.args[0]} is not recorded") from None
        if b - a != last - first:
            raise ValueError(f"steps {first}..{last} are not recorded contiguously")
        return slice(a, b + 1)

    def state(self, k: int) -> np.ndarray:
        """The iterate ``x_k`` (``k >= 1``)."""
        if k == 1:
            return self.x_init
        return self.x[self.row_of(k - 1)]

    def x_prev(self, i: int) -> np.ndarray:
        return self.state(int(self.n[i]))

    def record(self, i: int) -> IterateRecord:
        return IterateRecord(
            n=int(self.n[i]),
            x=self.x[i],
            x_prev=self.x_prev(i),
            gamma=float(self.gamma[i]),
            e=self.e[i],
            r=self.r[i],
            hval=self.h[i],
            P=self.P[i],
            t=float(self.t[i]),
        )

    def records(self) -> Iterator[IterateRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @property
    def final_state(self) -> np.ndarray:
        if "x_final" in self.aggregates:
            return np.asarray(self.aggregates["x_final"], dtype=float)
        return self.x[-1] if len(self) else self.x_init

    def equals(self, other: "Trajectory") -> bool:
        """Bitwise equality of all recorded real fields."""
        fields_ = ("n", "t", "gamma", "x", "e", "r", "h", "P", "x_init")
        return all(
            np.asarray(getattr(self, f)).tobytes() == np.asarray(getattr(other, f)).tobytes()
            and np.asarray(getattr(self, f)).shape == np.asarray(getattr(other, f)).shape
            for f in fields_
        )


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def _clamp(y: np.ndarray, box: Box) -> np.ndarray:
    return np.minimum(np.maximum(y, box.lower), box.upper)


def _projection_term(x, z, y, g, box: Box, rm: bool) -> np.ndarray:
    # (x - z) + g rather than y - z: keeps |P| <= |g| exact in floating point
    P = np.where(z == y, 0.0, (x - z) + g)
    if rm:
        P = np.where((z == box.upper) & (P < 0.0), 0.0, P)
        P = np.where((z == box.lower) & (P > 0.0), 0.0, P)
    return P


def _step(mode: str, problem: Problem, x, n: int, schedule: StepSchedule,
          noise: NoiseModel, rng: np.random.Generator, t: Optional[float] = None):
    box = problem.box
    x = np.asarray(x, dtype=float)
    if x.shape != (box.dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({box.dim},)")
    h = np.asarray(problem.drift(x), dtype=float)
    if not np.all(np.isfinite(h)):
        raise NonFiniteDriftError(n)
    e, r, rng = sample_noise(noise, n, x, rng)
    gam = gamma(schedule, n)
    g = gam * ((h + e) + r)
    y = x + g
    if mode == "rm":
        z = _clamp(y, box)
    else:
        pen = problem.penalty or Penalty.zero()
        if mode == "prox1":
            z = prox_penalty_box(pen, y, gam, box)
        else:
            z = _clamp(prox_penalty(pen, y, gam), box)
    P = _projection_term(x, z, y, g, box, mode == "rm")
    if t is None:
        t = cumulative_time(schedule, n)
    rec = IterateRecord(n=n, x=z, x_prev=x, gamma=gam, e=e, r=r, hval=h, P=P, t=float(t))
    return rec, rng


def step_rm(problem, x_n, n, schedule, noise_model, rng_state, t=None):
    """One projected Robbins-Monro step; returns ``(record, rng_state)``."""
    return _step("rm", problem, x_n, n, schedule, noise_model, rng_state, t)


def step_prox_v1(problem, x_prev, k, schedule, noise_model, rng_state, t=None):
    """``x_k = prox_{gamma_k (g + I_K)}(x_{k-1} - gamma_k H_k)``."""
    return _step("prox1", problem, x_prev, k, schedule, noise_model, rng_state, t)


def step_prox_v2(problem, x_prev, k, schedule, noise_model, rng_state, t=None):
    """``x_k = Pi_K(prox_{gamma_k g}(x_{k-1} - gamma_k H_k))``."""
    return _step("prox2", problem, x_prev, k, schedule, noise_model, rng_state, t)


_STEP = {"rm": step_rm, "prox1": step_prox_v1, "prox2": step_prox_v2}


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


def _kernel_args(problem: Problem):
    spec = getattr(problem.drift, "kernel_spec", None)
    if spec is None:
        return None
    kind, target, gains, omega = spec
    return kind, np.asarray(target, dtype=float), np.asarray(gains, dtype=float), float(omega)


def _aggregates(x_init, xs, Ps, t) -> dict:
    projected = np.any(Ps != 0.0, axis=1)
    return {
        "x_final": (xs[-1] if len(xs) else x_init).tolist(),
        "t_final": float(t[-1]) if len(t) else 0.0,
        "projected_steps": int(projected.sum()),
        "sum_P": Ps.sum(axis=0).tolist(),
        "max_abs_P": float(np.abs(Ps).max()) if Ps.size else 0.0,
    }


def run(problem: Problem, algorithm: str, schedule: StepSchedule, noise_model: NoiseModel,
        n_steps: int, seed: int, record_policy: RecordPolicy = Full(), x0=None,
        replica: int = 0, backend: Optional[str] = None, generic: bool = False) -> Trajectory:
    """Run ``n_steps`` iterations from ``project_box(x0)`` (default: box centre).

    Built-in drifts with state-independent noise go through the compiled
    loop; anything else is stepped in Python. ``generic=True`` forces the
    step-by-step path. Results are identical either way.
    """
    if algorithm not in _MODE:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    box = problem.box
    d = box.dim
    if x0 is None:
        x0 = 0.5 * (box.lower + box.upper)
    x1 = project_box(x0, box)
    rng = make_rng(seed, replica)
    gam = np.asarray(gammas(schedule, n_steps))
    t = np.asarray(cumulative_times(schedule, n_steps))
    kargs = _kernel_args(problem)
    pen = problem.penalty or Penalty.zero()
    used = "generic"

    if kargs is not None and not noise_model.state_dependent and not generic:
        e, r = noise_model.draw_block(rng, 1, n_steps, d)
        kind, target, gains, omega = kargs
        xs, hs, Ps, failed = _backend.sa_loop(
            _MODE[algorithm], x1, kind, target, gains, omega, pen.kind, pen.lam, pen.shape,
            box.lower, box.upper, gam, e, r, backend=backend,
        )
        if failed >= 0:
            raise NonFiniteDriftError(failed + 1)
        used = backend or _backend.BACKEND
    else:
        xs = np.empty((n_steps, d))
        hs = np.empty((n_steps, d))
        Ps = np.empty((n_steps, d))
        e = np.empty((n_steps, d))
        r = np.empty((n_steps, d))
        step = _STEP[algorithm]
        x = x1
        for i in range(n_steps):
            rec, rng = step(problem, x, i + 1, schedule, noise_model, rng, t=t[i])
            xs[i], hs[i], Ps[i], e[i], r[i] = rec.x, rec.hval, rec.P, rec.e, rec.r
            x = rec.x

    keep = record_policy.select(n_steps)
    full = len(keep) == n_steps
    sl = slice(None) if full else keep
    meta = {
        "algorithm": algorithm,
        "seed": int(seed),
        "replica": int(replica),
        "n_steps": int(n_steps),
        "schedule": schedule.to_dict(),
        "noise": noise_model.to_dict(),
        "problem": problem.describe(),
        "record_policy": record_policy.to_dict(),
        "H": float(problem.H),
        "R": float(noise_model.R),
        "dim": d,
        "backend": used,
    }
    return Trajectory(
        n=np.arange(1, n_steps + 1)[sl],
        t=t[sl].copy(),
        gamma=gam[sl].copy(),
        x=xs[sl],
        e=e[sl],
        r=r[sl],
        h=hs[sl],
        P=Ps[sl],
        x_init=x1,
        metadata=meta,
        aggregates=_aggregates(x1, xs, Ps, t),
    )


def ulp_distance(a, b, scale) -> np.ndarray:
    """``|a - b|`` in units of the spacing of the largest operand magnitude."""
    return np.abs(np.asarray(a) - np.asarray(b)) / np.spacing(np.abs(np.asarray(scale, dtype=float)))


def check_step_invariants(traj: Trajectory) -> dict:
    """Recursion identity, cone membership and projection-size bound on every RM step.

    Returns the worst ulp error and counts of violations.
    """
    from .geometry import face_signature, in_normal_cone

    box = Box(np.asarray(traj.metadata["problem"]["box"]["lower"]),
              np.asarray(traj.metadata["problem"]["box"]["upper"]))
    prev = np.vstack([traj.x_init[None, :], traj.x[:-1]]) if traj.is_contiguous else np.array(
        [traj.x_prev(i) for i in range(len(traj))])
    g = traj.gamma[:, None] * ((traj.h + traj.e) + traj.r)
    recon = (prev + g) - traj.P
    scale = np.maximum(np.maximum(np.abs(prev), np.abs(g)), np.maximum(np.abs(traj.x), np.finfo(float).tiny))
    ulps = ulp_distance(recon, traj.x, scale)
    tags_ok = 0
    cone_bad = 0
    lo, hi = box.lower, box.upper
    # vectorised in_normal_cone at x_{n+1}; exact equality with the faces
    at_lo = traj.x == lo
    at_hi = traj.x == hi
    interior = ~(at_lo | at_hi)
    ok = np.where(interior, traj.P == 0.0, np.where(at_lo, traj.P <= 0.0, traj.P >= 0.0))
    cone_bad = int(np.sum(~np.all(ok, axis=1)))
    # spot-check the vectorised rule against the geometry primitives
    for i in np.linspace(0, len(traj) - 1, num=min(len(traj), 200)).astype(int):
        tags_ok += in_normal_cone(traj.P[i], face_signature(traj.x[i], box)) == bool(np.all(ok[i]))
    size_bad = int(np.sum(np.linalg.norm(traj.P, axis=1) > np.linalg.norm(g, axis=1)))
    return {
        "max_ulps": float(ulps.max()) if ulps.size else 0.0,
        "cone_violations": cone_bad,
        "size_violations": size_bad,
        "primitive_agreement": tags_ok == min(len(traj), 200),
    }
