"""Hyperrectangles, Euclidean projection, and box normal/tangent cones.

Cones of a box factor over coordinates, so they are represented by a
per-coordinate face tag rather than by generators or half-spaces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class FaceTag(enum.IntEnum):
    INTERIOR = 0
    AT_LOWER = 1
    AT_UPPER = 2


# plain ints: enum member lookup is slow in per-point hot paths
_INTERIOR, _AT_LOWER, _AT_UPPER = 0, 1, 2


def _as_vector(x, dim: int, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (dim,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({dim},)")
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    """Closed hyperrectangle ``prod_i [lower_i, upper_i]`` with ``lower_i < upper_i``."""

    lower: np.ndarray
    upper: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be 1-D vectors of equal length >= 1")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box bounds must be finite")
        if not (lo < hi).all():
            raise ValueError("box requires lower < upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "dim", lo.size)

    @classmethod
    def cube(cls, dim: int, lower: float = 0.0, upper: float = 1.0) -> "Box":
        return cls(np.full(dim, lower), np.full(dim, upper))

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def default_face_tol(self) -> float:
        return 1e-9 * float(np.max(self.widths))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def corners(self) -> np.ndarray:
        """All ``2**dim`` vertices, one per row."""
        grid = np.array(np.meshgrid(*[(a, b) for a, b in zip(self.lower, self.upper)], indexing="ij"))
        return grid.reshape(self.dim, -1).T

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class FaceSignature:
    """Per-coordinate face tags of a point of a box (values of :class:`FaceTag`)."""

    tags: np.ndarray

    def __post_init__(self):
        tags = np.asarray(self.tags, dtype=np.int8).copy()
        if tags.ndim != 1 or ((tags < 0) | (tags > 2)).any():
            raise ValueError("face tags must be a 1-D array of values in {0, 1, 2}")
        tags.flags.writeable = False
        object.__setattr__(self, "tags", tags)

    @classmethod
    def of(cls, *tags: FaceTag) -> "FaceSignature":
        return cls(np.array([int(t) for t in tags], dtype=np.int8))

    @property
    def dim(self) -> int:
        return self.tags.size

    def __iter__(self):
        return (FaceTag(int(t)) for t in self.tags)

    def __getitem__(self, i) -> FaceTag:
        return FaceTag(int(self.tags[i]))

    def __eq__(self, other):
        if not isinstance(other, FaceSignature):
            return NotImplemented
        return bool(np.array_equal(self.tags, other.tags))

    def __hash__(self):
        return hash(self.tags.tobytes())

    def __repr__(self):
        return "FaceSignature(" + ", ".join(t.name for t in self) + ")"


def project_box(x, box: Box) -> np.ndarray:
    """Euclidean projection onto ``box``: a per-coordinate clamp."""
    x = _as_vector(x, box.dim)
    return np.minimum(np.maximum(x, box.lower), box.upper)


def face_signature(x, box: Box, tol: float | None = None) -> FaceSignature:
    """Tag each coordinate of ``x`` as lying on the lower face, upper face, or neither.

    ``tol`` defaults to ``1e-9 * max(widths)`` and must be below half the
    smallest width so that no coordinate can be on both faces.
    """
    x = _as_vector(x, box.dim)
    if tol is None:
        tol = box.default_face_tol
    if not tol > 0:
        raise ValueError("face tolerance must be positive")
    if tol >= 0.5 * float(np.min(box.widths)):
        raise ValueError("face tolerance must be smaller than half the narrowest box width")
    if (x < box.lower - tol).any() or (x > box.upper + tol).any():
        raise ValueError("point lies outside the box beyond the face tolerance")
    tags = np.zeros(box.dim, dtype=np.int8)
    tags[np.abs(x - box.lower) <= tol] = _AT_LOWER
    tags[np.abs(x - box.upper) <= tol] = _AT_UPPER
    return FaceSignature(tags)


def _check_sig(v, sig: FaceSignature) -> np.ndarray:
    return _as_vector(v, sig.dim, "v")


def in_normal_cone(v, sig: FaceSignature) -> bool:
    """Membership of ``v`` in the normal cone at a point with signature ``sig``."""
    v = _check_sig(v, sig)
    t = sig.tags
    ok = np.where(t == _INTERIOR, v == 0.0, np.where(t == _AT_LOWER, v <= 0.0, v >= 0.0))
    return bool(ok.all())


def project_tangent(v, sig: FaceSignature) -> np.ndarray:
    """Euclidean projection of ``v`` onto the tangent cone described by ``sig``."""
    v = _check_sig(v, sig)
    t = sig.tags
    out = v.copy()
    lo = t == _AT_LOWER
    hi = t == _AT_UPPER
    out[lo] = np.maximum(v[lo], 0.0)
    out[hi] = np.minimum(v[hi], 0.0)
    return out


def dist_to_normal_cone_shifted(c: float, interval_lo: float, interval_hi: float, tag: FaceTag) -> float:
    """Distance from 0 to ``{c} + [interval_lo, interval_hi] + (-N_i)``.

    ``-N_i`` is ``{0}`` for an interior coordinate, ``[0, inf)`` on the lower
    face and ``(-inf, 0]`` on the upper face. The sum is an interval with
    possibly infinite arms; the distance is always finite.
    """
    if interval_lo > interval_hi:
        raise ValueError("interval_lo must not exceed interval_hi")
    lo = c + interval_lo
    hi = c + interval_hi
    tag = FaceTag(int(tag))
    if tag == FaceTag.AT_LOWER:
        hi = math.inf
    elif tag == FaceTag.AT_UPPER:
        lo = -math.inf
    if lo > 0.0:
        return float(lo)
    if hi < 0.0:
        return float(-hi)
    return 0.0
