"""Randomized comparison of the proximal maps against a grid-search oracle.

The oracle evaluates the 1-D prox objective from the penalty formulas
directly (no code shared with the enumerating implementation) on a
coarse grid, then refines every discrete local minimum twice, each time
on a grid 100 times finer spanning one step of the previous level. The
kink at 0 and the bracket endpoints are always candidates, so the final
resolution is 1e-6.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box
from .prox import L1, MCP, SCAD, ZERO, Penalty, prox_penalty, prox_penalty_box

VARIANTS = ("zero", "l1", "mcp", "scad")
LEVELS = (1e-2, 1e-4, 1e-6)


def penalty_formula(kind: int, y: np.ndarray, lam, shape) -> np.ndarray:
    a = np.abs(y)
    if kind == ZERO:
        return np.zeros_like(a)
    if kind == L1:
        return lam * a
    if kind == MCP:
        return np.where(a <= shape * lam, lam * a - a * a / (2 * shape), shape * lam * lam / 2)
    if kind == SCAD:
        mid = (2 * shape * lam * a - a * a - lam * lam) / (2 * (shape - 1))
        return np.where(a <= lam, lam * a, np.where(a <= shape * lam, mid, lam * lam * (shape + 1) / 2))
    raise ValueError(kind)


def _objective(kind, y, v, g, lam, shape):
    return penalty_formula(kind, y, lam, shape) + (v - y) ** 2 / (2 * g)


def grid_oracle(kind: int, v, g, lam, shape, lo, hi) -> np.ndarray:
    """Grid minimizer of ``p(y) + (v - y)**2 / (2 g)`` over ``[lo, hi]``, one instance per row."""
    v, g, lam, shape, lo, hi = (np.asarray(a, dtype=float)[:, None] for a in (v, g, lam, shape, lo, hi))
    step = LEVELS[0]
    width = float(np.max(hi - lo))
    k = np.arange(int(np.ceil(width / step)) + 1)[None, :]
    y = np.minimum(lo + k * step, hi)
    obj = _objective(kind, y, v, g, lam, shape)
    # discrete local minima (plateaus from the clipping count once)
    left = np.concatenate([np.full_like(obj[:, :1], np.inf), obj[:, :-1]], axis=1)
    right = np.concatenate([obj[:, 1:], np.full_like(obj[:, :1], np.inf)], axis=1)
    is_min = (obj <= left) & (obj < right)
    n, m = obj.shape
    best_y = np.concatenate([lo, hi, np.clip(0.0, lo, hi)], axis=1)
    best_o = _objective(kind, best_y, v, g, lam, shape)
    rows, cols = np.nonzero(is_min)
    centers = y[rows, cols]
    for fine_prev, fine in zip(LEVELS[:-1], LEVELS[1:]):
        ratio = int(round(fine_prev / fine))
        offs = np.arange(-ratio, ratio + 1)[None, :] * fine
        yy = np.clip(centers[:, None] + offs, lo[rows], hi[rows])
        oo = _objective(kind, yy, v[rows], g[rows], lam[rows], shape[rows])
        j = np.argmin(oo, axis=1)
        centers = yy[np.arange(len(rows)), j]
    final_o = _objective(kind, centers[:, None], v[rows], g[rows], lam[rows], shape[rows])[:, 0]
    all_y = np.concatenate([best_y.ravel(), centers])
    all_o = np.concatenate([best_o.ravel(), final_o])
    all_r = np.concatenate([np.repeat(np.arange(n), 3), rows])
    order = np.lexsort((np.abs(all_y), all_o, all_r))
    first = np.ones(len(order), dtype=bool)
    first[1:] = all_r[order][1:] != all_r[order][:-1]
    return all_y[order][first]


def draw_instances(kind: int, n: int, rng: np.random.Generator, boxed: bool) -> dict:
    lam = rng.uniform(0.0, 2.0, n)
    if kind == MCP:
        shape = rng.uniform(1.0, 5.0, n)
        shape = np.where(shape <= 1.0, 1.5, shape)
    elif kind == SCAD:
        shape = rng.uniform(2.0, 6.0, n)
        shape = np.where(shape <= 2.0, 3.7, shape)
    else:
        shape = np.zeros(n)
    if kind == ZERO:
        lam = np.zeros(n)
    g = rng.uniform(0.01, 2.0, n)
    v = rng.uniform(-5.0, 5.0, n)
    if boxed:
        lo = rng.uniform(-3.0, 1.0, n)
        hi = lo + rng.uniform(0.1, 4.0, n)
    else:
        lo = np.minimum(0.0, v) - 0.5
        hi = np.maximum(0.0, v) + 0.5
    return {"lam": lam, "shape": shape, "g": g, "v": v, "lo": lo, "hi": hi}


@dataclass
class VariantResult:
    variant: str
    boxed: bool
    n: int
    max_error: float
    worst: dict = field(default_factory=dict)


@dataclass
class SelftestResult:
    results: list
    tolerance: float
    seconds: float

    @property
    def max_error(self) -> float:
        return max(r.max_error for r in self.results)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def worst_case(self) -> VariantResult:
        return max(self.results, key=lambda r: r.max_error)


def run_selftest(n_instances: int = 10_000, seed: int = 0, tolerance: float = 1e-5,
                 corrupt_lambda: bool = False, variants=VARIANTS) -> SelftestResult:
    """Compare ``prox_penalty`` and ``prox_penalty_box`` with the oracle on random instances.

    ``corrupt_lambda`` flips the sign of lambda inside the penalty handed to
    the implementation (bypassing validation) to check that the comparison
    detects a broken map.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    out = []
    codes = {"zero": ZERO, "l1": L1, "mcp": MCP, "scad": SCAD}
    for name in variants:
        kind = codes[name]
        for boxed in (False, True):
            inst = draw_instances(kind, n_instances, rng, boxed)
            got = np.empty(n_instances)
            for i in range(n_instances):
                pen = Penalty(kind, inst["lam"][i], inst["shape"][i])
                if corrupt_lambda and kind != ZERO:
                    object.__setattr__(pen, "lam", -pen.lam)
                v = inst["v"][i : i + 1]
                if boxed:
                    box = Box(inst["lo"][i : i + 1], inst["hi"][i : i + 1])
                    got[i] = prox_penalty_box(pen, v, inst["g"][i], box)[0]
                else:
                    got[i] = prox_penalty(pen, v, inst["g"][i])[0]
            if kind == ZERO:
                # exact reference: identity, or the clamp with a box
                ref = np.clip(inst["v"], inst["lo"], inst["hi"]) if boxed else inst["v"]
            else:
                ref = grid_oracle(kind, inst["v"], inst["g"], inst["lam"], inst["shape"], inst["lo"], inst["hi"])
            err = np.abs(got - ref)
            w = int(np.argmax(err))
            out.append(VariantResult(
                variant=name, boxed=boxed, n=n_instances, max_error=float(err[w]),
                worst={k: float(a[w]) for k, a in inst.items()} | {"prox": float(got[w]), "oracle": float(ref[w])},
            ))
    return SelftestResult(out, tolerance, time.perf_counter() - start)
