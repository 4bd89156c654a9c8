"""Step-size schedules, noise models and the seeded random streams that drive them."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np


# ---------------------------------------------------------------------------
# step sizes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polynomial:
    """``gamma_n = gamma0 / n**alpha`` with ``alpha`` in (1/2, 1]."""

    gamma0: float
    alpha: float

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError(
                f"alpha={self.alpha} is outside (1/2, 1]; use a Table schedule for other sequences"
            )

    def gamma(self, n: int) -> float:
        return self.gamma0 / math.pow(n, self.alpha)

    def _block(self, n_steps: int) -> np.ndarray:
        ns = np.arange(1, n_steps + 1, dtype=float)
        if self.alpha == 1.0:
            return self.gamma0 / ns
        return self.gamma0 / np.fromiter((math.pow(n, self.alpha) for n in range(1, n_steps + 1)), float, n_steps)

    def to_dict(self) -> dict:
        return {"kind": "polynomial", "gamma0": self.gamma0, "alpha": self.alpha}


@dataclass(frozen=True)
class Table:
    """An explicit finite sequence of positive step sizes."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("table schedule needs at least one value")
        if not all(v > 0 and math.isfinite(v) for v in vals):
            raise ValueError("table step sizes must be positive and finite")
        object.__setattr__(self, "values", vals)

    def gamma(self, n: int) -> float:
        if n > len(self.values):
            raise ValueError(f"table schedule has {len(self.values)} entries, asked for n={n}")
        return self.values[n - 1]

    def _block(self, n_steps: int) -> np.ndarray:
        if n_steps > len(self.values):
            raise ValueError(f"table schedule has {len(self.values)} entries, asked for {n_steps}")
        return np.array(self.values[:n_steps], dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "table", "values": list(self.values)}


@dataclass(frozen=True)
class ConstantThenPolynomial:
    """``gamma0`` for ``n <= n0``, then ``gamma0 / (n / n0)**alpha``."""

    gamma0: float
    n0: int
    alpha: float

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ValueError("n0 must be a positive integer")
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} is outside (1/2, 1]")

    def gamma(self, n: int) -> float:
        if n <= self.n0:
            return self.gamma0
        return self.gamma0 / math.pow(n / self.n0, self.alpha)

    def _block(self, n_steps: int) -> np.ndarray:
        return np.fromiter((self.gamma(n) for n in range(1, n_steps + 1)), float, n_steps)

    def to_dict(self) -> dict:
        return {"kind": "constant_then_polynomial", "gamma0": self.gamma0, "n0": self.n0, "alpha": self.alpha}


StepSchedule = Union[Polynomial, Table, ConstantThenPolynomial]


def schedule_from_dict(d: dict) -> StepSchedule:
    kind = d.get("kind")
    if kind == "polynomial":
        return Polynomial(float(d["gamma0"]), float(d["alpha"]))
    if kind == "table":
        return Table(tuple(d["values"]))
    if kind == "constant_then_polynomial":
        return ConstantThenPolynomial(float(d["gamma0"]), int(d["n0"]), float(d["alpha"]))
    raise ValueError(f"unknown schedule kind {kind!r}")


def gamma(schedule: StepSchedule, n: int) -> float:
    """Step size ``gamma_n`` for ``n >= 1``."""
    if n < 1:
        raise ValueError("step index n must be >= 1")
    return schedule.gamma(int(n))


@functools.lru_cache(maxsize=16)
def _cached_block(schedule: StepSchedule, n_steps: int) -> np.ndarray:
    arr = schedule._block(n_steps)
    arr.flags.writeable = False
    return arr


def gammas(schedule: StepSchedule, n_steps: int) -> np.ndarray:
    """``gamma_1 .. gamma_{n_steps}`` as a read-only array."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if n_steps == 0:
        return np.empty(0)
    return _cached_block(schedule, int(n_steps))


@functools.lru_cache(maxsize=16)
def _cached_times(schedule: StepSchedule, n_steps: int) -> np.ndarray:
    arr = np.cumsum(gammas(schedule, n_steps))
    arr.flags.writeable = False
    return arr


def cumulative_times(schedule: StepSchedule, n_steps: int) -> np.ndarray:
    """``t_1 .. t_{n_steps}`` with ``t_n = gamma_1 + ... + gamma_n``."""
    if n_steps == 0:
        return np.empty(0)
    return _cached_times(schedule, int(n_steps))


def cumulative_time(schedule: StepSchedule, n: int) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    return float(cumulative_times(schedule, n)[n - 1])


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------


def make_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, replica)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))


@dataclass(frozen=True)
class GaussianIID:
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class UniformIID:
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth >= 0:
            raise ValueError("halfwidth must be nonnegative")


@dataclass(frozen=True)
class ScaledGaussian:
    """Gaussian noise with state-dependent scale ``sigma_fn(x) <= sigma_max``."""

    sigma_fn: Callable[[np.ndarray], Union[float, np.ndarray]]
    sigma_max: float


@dataclass(frozen=True)
class PowerBias:
    """Deterministic bias ``r_n = c * n**(-beta)``."""

    c: tuple
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in np.atleast_1d(self.c)))
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class VanishingStateBias:
    """``r_n = envelope(n) * fn(x)`` with ``|fn(x)| <= bound``; ``envelope`` is nonincreasing to 0."""

    fn: Callable[[np.ndarray], np.ndarray]
    envelope: Callable[[int], float]
    bound: float


EPart = Union[None, GaussianIID, UniformIID, ScaledGaussian]
RPart = Union[None, PowerBias, VanishingStateBias]


def _powers(start: int, count: int, beta: float) -> np.ndarray:
    if beta == 1.0:
        return 1.0 / np.arange(start, start + count, dtype=float)
    return 1.0 / np.fromiter((math.pow(n, beta) for n in range(start, start + count)), float, count)


@dataclass(frozen=True)
class NoiseModel:
    """Martingale-type part ``e`` plus vanishing bias ``r``.

    Draws happen in the order e then r, one vector per step, so a block
    draw consumes the stream exactly like consecutive single draws.
    """

    e_part: EPart = None
    r_part: RPart = None

    @property
    def state_dependent(self) -> bool:
        return isinstance(self.e_part, ScaledGaussian) or isinstance(self.r_part, VanishingStateBias)

    @property
    def R(self) -> float:
        """A bound on ``|r_n|`` valid for every ``n``."""
        r = self.r_part
        if r is None:
            return 0.0
        if isinstance(r, PowerBias):
            return float(np.linalg.norm(r.c))
        return float(r.bound) * abs(float(r.envelope(1)))

    def r_envelope(self, n: int) -> float:
        """Deterministic bound on ``|r_n|``."""
        r = self.r_part
        if r is None:
            return 0.0
        if isinstance(r, PowerBias):
            return float(np.linalg.norm(r.c)) / math.pow(n, r.beta)
        return float(r.bound) * abs(float(r.envelope(n)))

    def _e_block(self, rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
        e = self.e_part
        if e is None:
            return np.zeros((count, dim))
        if isinstance(e, GaussianIID):
            return e.sigma * rng.standard_normal((count, dim))
        if isinstance(e, UniformIID):
            return rng.uniform(-e.halfwidth, e.halfwidth, size=(count, dim))
        raise TypeError("state-dependent e_part has no block form")

    def _r_block(self, start: int, count: int, dim: int) -> np.ndarray:
        r = self.r_part
        if r is None:
            return np.zeros((count, dim))
        if isinstance(r, PowerBias):
            c = np.asarray(r.c, dtype=float)
            if c.size != dim:
                raise ValueError(f"bias vector has length {c.size}, expected {dim}")
            return _powers(start, count, r.beta)[:, None] * c[None, :]
        raise TypeError("state-dependent r_part has no block form")

    def draw_block(self, rng: np.random.Generator, start: int, count: int, dim: int):
        """``(e, r)`` arrays of shape ``(count, dim)`` for steps ``start .. start+count-1``."""
        if self.state_dependent:
            raise TypeError("state-dependent noise must be drawn step by step")
        e = self._e_block(rng, count, dim)
        return e, self._r_block(start, count, dim)

    def to_dict(self) -> dict:
        def part(p):
            if p is None:
                return None
            if isinstance(p, GaussianIID):
                return {"kind": "gaussian", "sigma": p.sigma}
            if isinstance(p, UniformIID):
                return {"kind": "uniform", "halfwidth": p.halfwidth}
            if isinstance(p, PowerBias):
                return {"kind": "power", "c": list(p.c), "beta": p.beta}
            return {"kind": type(p).__name__}

        return {"e": part(self.e_part), "r": part(self.r_part)}


def noise_from_dict(d: Optional[dict]) -> NoiseModel:
    if not d:
        return NoiseModel()
    e = d.get("e")
    r = d.get("r")
    e_part: EPart = None
    r_part: RPart = None
    if e:
        if e["kind"] == "gaussian":
            e_part = GaussianIID(float(e["sigma"]))
        elif e["kind"] == "uniform":
            e_part = UniformIID(float(e["halfwidth"]))
        else:
            raise ValueError(f"unknown e noise kind {e['kind']!r}")
    if r:
        if r["kind"] == "power":
            r_part = PowerBias(tuple(np.atleast_1d(r["c"])), float(r["beta"]))
        else:
            raise ValueError(f"unknown r noise kind {r['kind']!r}")
    return NoiseModel(e_part, r_part)


def sample_noise(model: NoiseModel, n: int, x, rng: np.random.Generator):
    """Draw ``(e_n, r_n)`` at state ``x``; returns ``(e, r, rng)``.

    The generator is advanced in place and returned for chaining.
    """
    if n < 1:
        raise ValueError("step index n must be >= 1")
    x = np.asarray(x, dtype=float)
    dim = x.size
    ep = model.e_part
    if isinstance(ep, ScaledGaussian):
        scale = np.asarray(ep.sigma_fn(x), dtype=float)
        if np.any(scale < 0) or np.any(scale > ep.sigma_max):
            raise ValueError("sigma_fn left [0, sigma_max]")
        e = scale * rng.standard_normal((1, dim))[0]
    else:
        e = model._e_block(rng, 1, dim)[0]
    rp = model.r_part
    if isinstance(rp, VanishingStateBias):
        val = np.asarray(rp.fn(x), dtype=float)
        if np.linalg.norm(val) > rp.bound * (1 + 1e-12):
            raise ValueError("bias map exceeded its declared bound")
        r = float(rp.envelope(n)) * val
    else:
        r = model._r_block(n, 1, dim)[0]
    return e, r, rng


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionReport:
    horizon: int
    t_horizon: float
    t_half: float
    gamma_horizon: float
    sum_gamma_sq: float
    tail_exponent: float
    max_tail_bias: float
    R: float
    flags: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(v == "pass" for v in self.flags.values())

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "t_horizon": self.t_horizon,
            "t_half": self.t_half,
            "gamma_horizon": self.gamma_horizon,
            "sum_gamma_sq": self.sum_gamma_sq,
            "tail_exponent": self.tail_exponent,
            "max_tail_bias": self.max_tail_bias,
            "R": self.R,
            "flags": dict(self.flags),
            "warnings": list(self.warnings),
        }


def validate_assumptions(schedule: StepSchedule, model: NoiseModel, horizon: int) -> AssumptionReport:
    """Finite-horizon checks of the step-size and noise conditions.

    None of these can certify an asymptotic statement; they flag schedules
    whose behaviour on ``[horizon/2, horizon]`` contradicts it.
    """
    if horizon < 10:
        raise ValueError("horizon must be at least 10")
    g = np.asarray(gammas(schedule, horizon))
    t = np.cumsum(g)
    half = horizon // 2
    t_h, t_half = float(t[-1]), float(t[half - 1])
    flags: dict = {}
    warnings: list = []

    # a summable sequence adds almost nothing over the second half
    flags["divergent_sum"] = "pass" if (t_h - t_half) >= 0.01 * max(t_half, 1.0) else "warn"
    flags["gamma_to_zero"] = "pass" if g[half - 1 :].max() <= 0.9 * g[: half].max() else "warn"

    ns = np.arange(half, horizon + 1, dtype=float)
    slope = np.polyfit(np.log(ns), np.log(g[half - 1 :] ** 2), 1)[0]
    tail_exponent = float(-slope)
    flags["square_summable"] = "pass" if tail_exponent > 1.0 + 1e-6 else "warn"

    R = model.R
    tail_bias = max(model.r_envelope(n) for n in (half, horizon)) if model.r_part is not None else 0.0
    if isinstance(model.r_part, VanishingStateBias):
        tail_bias = max(model.r_envelope(n) for n in range(half, horizon + 1))
    flags["bias_decay"] = "pass" if (R == 0.0 or tail_bias <= 0.5 * R) else "warn"

    if isinstance(schedule, Table):
        warnings.append("table schedules cannot be certified; checks are empirical only")
    for name, flag in flags.items():
        if flag == "warn":
            warnings.append(f"{name} check failed on the horizon [{half}, {horizon}]")
    return AssumptionReport(
        horizon=horizon,
        t_horizon=t_h,
        t_half=t_half,
        gamma_horizon=float(g[-1]),
        sum_gamma_sq=float(np.sum(g**2)),
        tail_exponent=tail_exponent,
        max_tail_bias=float(tail_bias),
        R=R,
        flags=flags,
        warnings=warnings,
    )
