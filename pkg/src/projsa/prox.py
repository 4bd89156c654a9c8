"""Separable sparsity penalties: values, Clarke intervals and proximal maps.

The proximal maps enumerate the stationary point of every smooth piece
(clipped to the piece) together with the piece boundaries and keep the
candidate with the smallest objective, ties going to the smallest ``|y|``.
That selection is deterministic even where the nonconvex objective has
several global minimizers.

The arithmetic here is mirrored operation-for-operation by the compiled
kernel, so both backends return identical floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Box

ZERO, L1, MCP, SCAD = 0, 1, 2, 3
_NAMES = {ZERO: "zero", L1: "l1", MCP: "mcp", SCAD: "scad"}
_CODES = {v: k for k, v in _NAMES.items()}


@dataclass(frozen=True)
class Penalty:
    """Coordinate-wise penalty ``g(x) = sum_i p(x_i)``.

    ``shape`` is the MCP concavity ``beta > 1`` or the SCAD knot ratio
    ``a > 2``; it is unused for ``zero`` and ``l1``.
    """

    kind: int
    lam: float = 0.0
    shape: float = 0.0

    def __post_init__(self):
        if self.kind not in _NAMES:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == ZERO:
            object.__setattr__(self, "lam", 0.0)
            object.__setattr__(self, "shape", 0.0)
            return
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if self.kind == MCP and not self.shape > 1:
            raise ValueError("MCP needs beta > 1")
        if self.kind == SCAD and not self.shape > 2:
            raise ValueError("SCAD needs a > 2")

    @classmethod
    def zero(cls) -> "Penalty":
        return cls(ZERO)

    @classmethod
    def l1(cls, lam: float) -> "Penalty":
        return cls(L1, float(lam))

    @classmethod
    def mcp(cls, lam: float, beta: float) -> "Penalty":
        return cls(MCP, float(lam), float(beta))

    @classmethod
    def scad(cls, lam: float, a: float = 3.7) -> "Penalty":
        return cls(SCAD, float(lam), float(a))

    @property
    def name(self) -> str:
        return _NAMES[self.kind]

    @property
    def curvature(self) -> float:
        """Largest negative curvature of the 1-D penalty (0 for convex ones)."""
        if self.kind == MCP:
            return 1.0 / self.shape
        if self.kind == SCAD:
            return 1.0 / (self.shape - 1.0)
        return 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.name, "lam": self.lam}
        if self.kind == MCP:
            d["beta"] = self.shape
        elif self.kind == SCAD:
            d["a"] = self.shape
        return d

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "Penalty":
        if not d:
            return cls.zero()
        kind = d.get("kind", "zero")
        if kind not in _CODES:
            raise ValueError(f"unknown penalty kind {kind!r}")
        if kind == "zero":
            return cls.zero()
        if kind == "l1":
            return cls.l1(d["lam"])
        if kind == "mcp":
            return cls.mcp(d["lam"], d["beta"])
        return cls.scad(d["lam"], d.get("a", 3.7))


@dataclass(frozen=True)
class SubgradientInterval:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if np.any(self.lo > self.hi):
            raise ValueError("interval with lo > hi")

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, i):
        return float(self.lo[i]), float(self.hi[i])


def _p_abs(pen: Penalty, at: np.ndarray) -> np.ndarray:
    lam, s = pen.lam, pen.shape
    if pen.kind == ZERO:
        return np.zeros_like(at)
    if pen.kind == L1:
        return lam * at
    if pen.kind == MCP:
        k = s * lam
        return np.where(at <= k, lam * at - (at * at) / (2.0 * s), 0.5 * s * lam * lam)
    k1 = lam
    k2 = s * lam
    mid = (2.0 * s * lam * at - at * at - lam * lam) / (2.0 * (s - 1.0))
    return np.where(at <= k1, lam * at, np.where(at <= k2, mid, lam * lam * (s + 1.0) / 2.0))


def penalty_value(pen: Penalty, x) -> float:
    """``sum_i p(x_i)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.sum(_p_abs(pen, np.abs(x))))


def penalty_terms(pen: Penalty, x) -> np.ndarray:
    """Per-coordinate values ``p(x_i)``."""
    return _p_abs(pen, np.abs(np.atleast_1d(np.asarray(x, dtype=float))))


def _dp_abs(pen: Penalty, at: np.ndarray) -> np.ndarray:
    """Derivative of ``p`` on ``(0, inf)``."""
    lam, s = pen.lam, pen.shape
    if pen.kind == ZERO:
        return np.zeros_like(at)
    if pen.kind == L1:
        return np.full_like(at, lam)
    if pen.kind == MCP:
        return np.where(at <= s * lam, lam - at / s, 0.0)
    return np.where(at <= lam, lam, np.where(at <= s * lam, (s * lam - at) / (s - 1.0), 0.0))


def clarke_interval(pen: Penalty, x) -> SubgradientInterval:
    """Clarke subdifferential of ``g`` at ``x``, one closed interval per coordinate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.sign(x) * _dp_abs(pen, np.abs(x))
    at_zero = x == 0.0
    lo = np.where(at_zero, -pen.lam, d)
    hi = np.where(at_zero, pen.lam, d)
    return SubgradientInterval(lo + 0.0, hi + 0.0)


# ---------------------------------------------------------------------------
# proximal maps
# ---------------------------------------------------------------------------


def _clip(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def _candidates(pen: Penalty, v: np.ndarray, g: float) -> list:
    """Candidate minimizers of ``p(y) + (v - y)**2 / (2 g)`` in a fixed order."""
    lam, s = pen.lam, pen.shape
    if pen.kind == ZERO:
        return [v]
    zero = np.zeros_like(v)
    if pen.kind == L1:
        t = g * lam
        return [np.maximum(v - t, 0.0), np.minimum(v + t, 0.0), zero]
    if pen.kind == MCP:
        t = g * lam
        k = s * lam
        den = 1.0 - g / s
        if den > 0.0:
            c1 = _clip((v - t) / den, 0.0, k)
            c3 = _clip((v + t) / den, -k, 0.0)
        else:
            c1 = zero
            c3 = zero
        return [c1, np.maximum(v, k), c3, np.minimum(v, -k), zero, zero + k, zero - k]
    t = g * lam
    k1 = lam
    k2 = s * lam
    den = (s - 1.0) - g
    ga = g * s * lam
    if den > 0.0:
        c2 = _clip((v * (s - 1.0) - ga) / den, k1, k2)
        c5 = _clip((v * (s - 1.0) + ga) / den, -k2, -k1)
    else:
        c2 = zero + k1
        c5 = zero - k1
    return [
        _clip(v - t, 0.0, k1),
        c2,
        np.maximum(v, k2),
        _clip(v + t, -k1, 0.0),
        c5,
        np.minimum(v, -k2),
        zero,
        zero + k1,
        zero - k1,
        zero + k2,
        zero - k2,
    ]


def prox_objective(pen: Penalty, y, v, g: float) -> np.ndarray:
    """Per-coordinate ``p(y) + (v - y)**2 / (2 g)``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    return _p_abs(pen, np.abs(y)) + (v - y) * (v - y) / (2.0 * g)


def _select(pen: Penalty, cands: list, v: np.ndarray, g: float) -> np.ndarray:
    best = cands[0].copy()
    bobj = prox_objective(pen, best, v, g)
    for c in cands[1:]:
        o = prox_objective(pen, c, v, g)
        take = (o < bobj) | ((o == bobj) & (np.abs(c) < np.abs(best)))
        best = np.where(take, c, best)
        bobj = np.where(take, o, bobj)
    return best + 0.0  # no negative zeros


def _check_gamma(g: float) -> float:
    g = float(g)
    if not g > 0:
        raise ValueError("prox step gamma must be positive")
    return g


def prox_penalty(pen: Penalty, v, gamma: float) -> np.ndarray:
    """``argmin_y p(y) + (v - y)**2 / (2 gamma)`` coordinate-wise."""
    g = _check_gamma(gamma)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if pen.kind == ZERO:
        return v + 0.0
    return _select(pen, _candidates(pen, v, g), v, g)


def prox_penalty_box(pen: Penalty, v, gamma: float, box: Box) -> np.ndarray:
    """Proximal map of ``g + indicator(box)``, by constrained candidate enumeration."""
    g = _check_gamma(gamma)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (box.dim,):
        raise ValueError(f"v has shape {v.shape}, expected ({box.dim},)")
    lo, hi = box.lower, box.upper
    if pen.kind in (ZERO, L1):
        # convex objective: the clamp of the free prox is the exact minimizer, even
        # where rounding makes the enumerated objectives tie
        return _clip(prox_penalty(pen, v, g), lo, hi) + 0.0
    cands = [_clip(c, lo, hi) for c in _candidates(pen, v, g)]
    cands += [lo.copy(), hi.copy()]
    return _select(pen, cands, v, g)


def prox_candidates(pen: Penalty, v, gamma: float, box: Optional[Box] = None) -> np.ndarray:
    """The enumerated candidates as an array of shape ``(n_candidates, dim)``."""
    g = _check_gamma(gamma)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    cands = _candidates(pen, v, g)
    if box is not None:
        cands = [_clip(c, box.lower, box.upper) for c in cands] + [box.lower.copy(), box.upper.copy()]
    return np.array(cands)
