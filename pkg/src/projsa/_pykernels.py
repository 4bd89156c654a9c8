"""Pure-Python implementations of the hot loops.

Every routine performs the same IEEE operations in the same order as its
counterpart in ``_core.pyx``; results are bitwise identical (up to the
sign of zero, which both normalize).
"""

from __future__ import annotations

import math

import numpy as np

DRIFT_DIAGONAL, DRIFT_ROTATION, DRIFT_CONSTANT = 0, 1, 2
MODE_RM, MODE_PROX1, MODE_PROX2 = 0, 1, 2


def _p_abs(kind, lam, s, at):
    if kind == 0:
        return 0.0
    if kind == 1:
        return lam * at
    if kind == 2:
        if at <= s * lam:
            return lam * at - (at * at) / (2.0 * s)
        return 0.5 * s * lam * lam
    if at <= lam:
        return lam * at
    if at <= s * lam:
        return (2.0 * s * lam * at - at * at - lam * lam) / (2.0 * (s - 1.0))
    return lam * lam * (s + 1.0) / 2.0


def _clip(x, lo, hi):
    x = x if x > lo else lo
    return x if x < hi else hi


def _candidates(kind, lam, s, v, g):
    if kind == 0:
        return (v,)
    if kind == 1:
        t = g * lam
        a = v - t
        b = v + t
        return (a if a > 0.0 else 0.0, b if b < 0.0 else 0.0, 0.0)
    if kind == 2:
        t = g * lam
        k = s * lam
        den = 1.0 - g / s
        if den > 0.0:
            c1 = _clip((v - t) / den, 0.0, k)
            c3 = _clip((v + t) / den, -k, 0.0)
        else:
            c1 = 0.0
            c3 = 0.0
        return (c1, v if v > k else k, c3, v if v < -k else -k, 0.0, k, -k)
    t = g * lam
    k1 = lam
    k2 = s * lam
    den = (s - 1.0) - g
    ga = g * s * lam
    if den > 0.0:
        c2 = _clip((v * (s - 1.0) - ga) / den, k1, k2)
        c5 = _clip((v * (s - 1.0) + ga) / den, -k2, -k1)
    else:
        c2 = k1
        c5 = -k1
    return (
        _clip(v - t, 0.0, k1),
        c2,
        v if v > k2 else k2,
        _clip(v + t, -k1, 0.0),
        c5,
        v if v < -k2 else -k2,
        0.0,
        k1,
        -k1,
        k2,
        -k2,
    )


def prox_scalar(kind, lam, s, v, g, lo, hi, boxed):
    """One coordinate of the (optionally box-constrained) proximal map."""
    if boxed and kind <= 1:
        # convex penalty: the clamp of the free prox is the exact minimizer
        return _clip(prox_scalar(kind, lam, s, v, g, lo, hi, False), lo, hi) + 0.0
    cands = _candidates(kind, lam, s, v, g)
    if boxed:
        cands = tuple(_clip(c, lo, hi) for c in cands) + (lo, hi)
    best = cands[0]
    d = v - best
    bobj = _p_abs(kind, lam, s, abs(best)) + d * d / (2.0 * g)
    for c in cands[1:]:
        d = v - c
        o = _p_abs(kind, lam, s, abs(c)) + d * d / (2.0 * g)
        if o < bobj or (o == bobj and abs(c) < abs(best)):
            best = c
            bobj = o
    return best + 0.0


def sa_loop(mode, x1, drift_kind, target, gains, omega, pen_kind, lam, shape,
            lower, upper, gammas, e, r, xs, hs, Ps):
    """Run the recursion in place; return -1 on success or the failing step index."""
    d = len(x1)
    x = [float(v) for v in x1]
    lo = [float(v) for v in lower]
    hi = [float(v) for v in upper]
    tg = [float(v) for v in target]
    gn = [float(v) for v in gains]
    h = [0.0] * d
    e_l = e.tolist()
    r_l = r.tolist()
    g_l = gammas.tolist()
    n_steps = len(g_l)
    xs_rows = [None] * n_steps
    hs_rows = [None] * n_steps
    Ps_rows = [None] * n_steps
    failed = -1
    for i in range(n_steps):
        if drift_kind == DRIFT_DIAGONAL:
            for j in range(d):
                h[j] = gn[j] * (tg[j] - x[j])
        elif drift_kind == DRIFT_ROTATION:
            u0 = tg[0] - x[0]
            u1 = tg[1] - x[1]
            h[0] = u0 + omega * u1
            h[1] = -omega * u0 + u1
        else:
            for j in range(d):
                h[j] = gn[j]
        ok = True
        for j in range(d):
            if not math.isfinite(h[j]):
                ok = False
        if not ok:
            failed = i
            break
        gam = g_l[i]
        ei = e_l[i]
        ri = r_l[i]
        xn = [0.0] * d
        P = [0.0] * d
        for j in range(d):
            g = gam * ((h[j] + ei[j]) + ri[j])
            y = x[j] + g
            if mode == MODE_RM:
                z = _clip(y, lo[j], hi[j])
            elif mode == MODE_PROX1:
                z = prox_scalar(pen_kind, lam, shape, y, gam, lo[j], hi[j], True)
            else:
                z = _clip(prox_scalar(pen_kind, lam, shape, y, gam, lo[j], hi[j], False), lo[j], hi[j])
            if z == y:
                p = 0.0
            else:
                p = (x[j] - z) + g
                if mode == MODE_RM:
                    if z == hi[j] and p < 0.0:
                        p = 0.0
                    elif z == lo[j] and p > 0.0:
                        p = 0.0
            xn[j] = z
            P[j] = p
        xs_rows[i] = xn
        hs_rows[i] = list(h)
        Ps_rows[i] = P
        x = xn
    done = n_steps if failed < 0 else failed
    if done:
        xs[:done] = xs_rows[:done]
        hs[:done] = hs_rows[:done]
        Ps[:done] = Ps_rows[:done]
    return failed


def window_sup(F, ends):
    """Per-coordinate ``max_i max_{i <= j <= ends[i]} |F[j] - F[i]|``.

    ``ends`` must be nondecreasing with ``ends[i] >= i``. Range extrema come
    from a sparse table built block by block, so memory stays bounded.
    """
    F = np.asarray(F, dtype=float)
    ends = np.asarray(ends, dtype=np.int64)
    L, d = F.shape
    out = np.zeros(d)
    if L == 0:
        return out
    block = 1 << 16
    for i0 in range(0, L, block):
        i1 = min(i0 + block, L)
        seg_end = int(ends[i1 - 1]) + 1
        seg = F[i0:seg_end]
        idx = np.arange(i0, i1)
        length = ends[i0:i1] - idx + 1
        levels = int(length.max()).bit_length()
        mx = [seg]
        mn = [seg]
        for k in range(1, levels):
            w = 1 << (k - 1)
            prev_mx, prev_mn = mx[-1], mn[-1]
            mx.append(np.maximum(prev_mx[:-w], prev_mx[w:]))
            mn.append(np.minimum(prev_mn[:-w], prev_mn[w:]))
        k = np.floor(np.log2(length)).astype(np.int64)
        # guard against log2 rounding at exact powers of two
        k = np.where((1 << (k + 1)) <= length, k + 1, k)
        k = np.where((1 << k) > length, k - 1, k)
        a = idx - i0
        b = ends[i0:i1] - i0 - (1 << k) + 1
        hi = np.empty((i1 - i0, d))
        lo = np.empty((i1 - i0, d))
        for lvl in np.unique(k):
            sel = k == lvl
            hi[sel] = np.maximum(mx[lvl][a[sel]], mx[lvl][b[sel]])
            lo[sel] = np.minimum(mn[lvl][a[sel]], mn[lvl][b[sel]])
        base = F[i0:i1]
        out = np.maximum(out, np.max(np.maximum(hi - base, base - lo), axis=0))
    return out


def lipschitz_max(Z, tau, floor, ceil):
    """Per-coordinate max of ``|Z[q] - Z[p]| / (tau[q] - tau[p])`` over
    pairs with ``floor <= tau[q] - tau[p] <= ceil``."""
    Z = np.asarray(Z, dtype=float)
    tau = np.asarray(tau, dtype=float)
    K, d = Z.shape
    out = np.zeros(d)
    if K < 2:
        return out
    q_lo = np.searchsorted(tau, tau + floor, side="left")
    q_hi = np.searchsorted(tau, tau + ceil, side="right") - 1
    # tau + floor can round below tau[q] - tau[p] >= floor; filter explicitly below
    q_lo = np.maximum(q_lo - 1, np.arange(K) + 1)
    span = int(np.max(q_hi - q_lo, initial=-1)) + 1
    p_all = np.arange(K)
    for off in range(span):
        q = q_lo + off
        sel = (q <= q_hi) & (q < K)
        if not np.any(sel):
            continue
        p = p_all[sel]
        qq = q[sel]
        dt = tau[qq] - tau[p]
        ok = (dt >= floor) & (dt <= ceil)
        if not np.any(ok):
            continue
        p, qq, dt = p[ok], qq[ok], dt[ok]
        slopes = np.abs(Z[qq] - Z[p]) / dt[:, None]
        out = np.maximum(out, slopes.max(axis=0))
    return out
