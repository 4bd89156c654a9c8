# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. See ``_pykernels`` for the reference semantics."""

import numpy as np
from libc.math cimport isfinite, fabs

cdef enum:
    DRIFT_DIAGONAL = 0
    DRIFT_ROTATION = 1
    DRIFT_CONSTANT = 2
    MODE_RM = 0
    MODE_PROX1 = 1
    MODE_PROX2 = 2


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    x = x if x > lo else lo
    return x if x < hi else hi


cdef inline double _p_abs(int kind, double lam, double s, double at) noexcept nogil:
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


cdef inline int _candidates(int kind, double lam, double s, double v, double g, double* c) noexcept nogil:
    cdef double t, k, den, k1, k2, ga, a, b
    if kind == 0:
        c[0] = v
        return 1
    if kind == 1:
        t = g * lam
        a = v - t
        b = v + t
        c[0] = a if a > 0.0 else 0.0
        c[1] = b if b < 0.0 else 0.0
        c[2] = 0.0
        return 3
    if kind == 2:
        t = g * lam
        k = s * lam
        den = 1.0 - g / s
        if den > 0.0:
            c[0] = _clip((v - t) / den, 0.0, k)
            c[2] = _clip((v + t) / den, -k, 0.0)
        else:
            c[0] = 0.0
            c[2] = 0.0
        c[1] = v if v > k else k
        c[3] = v if v < -k else -k
        c[4] = 0.0
        c[5] = k
        c[6] = -k
        return 7
    t = g * lam
    k1 = lam
    k2 = s * lam
    den = (s - 1.0) - g
    ga = g * s * lam
    c[0] = _clip(v - t, 0.0, k1)
    if den > 0.0:
        c[1] = _clip((v * (s - 1.0) - ga) / den, k1, k2)
        c[4] = _clip((v * (s - 1.0) + ga) / den, -k2, -k1)
    else:
        c[1] = k1
        c[4] = -k1
    c[2] = v if v > k2 else k2
    c[3] = _clip(v + t, -k1, 0.0)
    c[5] = v if v < -k2 else -k2
    c[6] = 0.0
    c[7] = k1
    c[8] = -k1
    c[9] = k2
    c[10] = -k2
    return 11


cdef double _prox(int kind, double lam, double s, double v, double g,
                  double lo, double hi, bint boxed) noexcept nogil:
    cdef double c[13]
    cdef int m = _candidates(kind, lam, s, v, g, c)
    cdef int i
    cdef double best, bobj, o, d
    if boxed and kind <= 1:
        # convex penalty: the clamp of the free prox is the exact minimizer
        return _clip(_prox(kind, lam, s, v, g, lo, hi, 0), lo, hi) + 0.0
    if boxed:
        for i in range(m):
            c[i] = _clip(c[i], lo, hi)
        c[m] = lo
        c[m + 1] = hi
        m += 2
    best = c[0]
    d = v - best
    bobj = _p_abs(kind, lam, s, fabs(best)) + d * d / (2.0 * g)
    for i in range(1, m):
        d = v - c[i]
        o = _p_abs(kind, lam, s, fabs(c[i])) + d * d / (2.0 * g)
        if o < bobj or (o == bobj and fabs(c[i]) < fabs(best)):
            best = c[i]
            bobj = o
    return best + 0.0


def prox_scalar(int kind, double lam, double s, double v, double g, double lo, double hi, bint boxed):
    return _prox(kind, lam, s, v, g, lo, hi, boxed)


def sa_loop(int mode, const double[::1] x1, int drift_kind, const double[::1] target,
            const double[::1] gains, double omega, int pen_kind, double lam, double shape,
            const double[::1] lower, const double[::1] upper, const double[::1] gammas,
            const double[:, ::1] e, const double[:, ::1] r,
            double[:, ::1] xs, double[:, ::1] hs, double[:, ::1] Ps):
    cdef Py_ssize_t d = x1.shape[0]
    cdef Py_ssize_t n_steps = gammas.shape[0]
    cdef Py_ssize_t i, j
    cdef double gam, g, y, z, p, u0, u1
    cdef double[::1] x = np.array(x1, dtype=np.float64)
    cdef double[::1] h = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t failed = -1
    with nogil:
        for i in range(n_steps):
            if drift_kind == DRIFT_DIAGONAL:
                for j in range(d):
                    h[j] = gains[j] * (target[j] - x[j])
            elif drift_kind == DRIFT_ROTATION:
                u0 = target[0] - x[0]
                u1 = target[1] - x[1]
                h[0] = u0 + omega * u1
                h[1] = -omega * u0 + u1
            else:
                for j in range(d):
                    h[j] = gains[j]
            for j in range(d):
                if not isfinite(h[j]):
                    failed = i
            if failed >= 0:
                break
            gam = gammas[i]
            for j in range(d):
                g = gam * ((h[j] + e[i, j]) + r[i, j])
                y = x[j] + g
                if mode == MODE_RM:
                    z = _clip(y, lower[j], upper[j])
                elif mode == MODE_PROX1:
                    z = _prox(pen_kind, lam, shape, y, gam, lower[j], upper[j], True)
                else:
                    z = _clip(_prox(pen_kind, lam, shape, y, gam, lower[j], upper[j], False),
                              lower[j], upper[j])
                if z == y:
                    p = 0.0
                else:
                    p = (x[j] - z) + g
                    if mode == MODE_RM:
                        if z == upper[j] and p < 0.0:
                            p = 0.0
                        elif z == lower[j] and p > 0.0:
                            p = 0.0
                xs[i, j] = z
                hs[i, j] = h[j]
                Ps[i, j] = p
            for j in range(d):
                x[j] = xs[i, j]
    return failed


def window_sup(const double[:, ::1] F, const long long[::1] ends):
    cdef Py_ssize_t L = F.shape[0]
    cdef Py_ssize_t d = F.shape[1]
    cdef Py_ssize_t i, j, right
    cdef Py_ssize_t qmx_h, qmx_t, qmn_h, qmn_t
    cdef double best, v
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t[::1] qmx = np.empty(max(L, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] qmn = np.empty(max(L, 1), dtype=np.intp)
    with nogil:
        for j in range(d):
            best = 0.0
            qmx_h = 0
            qmx_t = 0
            qmn_h = 0
            qmn_t = 0
            right = 0
            for i in range(L):
                while right <= ends[i]:
                    v = F[right, j]
                    while qmx_t > qmx_h and F[qmx[qmx_t - 1], j] <= v:
                        qmx_t -= 1
                    qmx[qmx_t] = right
                    qmx_t += 1
                    while qmn_t > qmn_h and F[qmn[qmn_t - 1], j] >= v:
                        qmn_t -= 1
                    qmn[qmn_t] = right
                    qmn_t += 1
                    right += 1
                while qmx[qmx_h] < i:
                    qmx_h += 1
                while qmn[qmn_h] < i:
                    qmn_h += 1
                v = F[qmx[qmx_h], j] - F[i, j]
                if v > best:
                    best = v
                v = F[i, j] - F[qmn[qmn_h], j]
                if v > best:
                    best = v
            res[j] = best
    return out


def lipschitz_max(const double[:, ::1] Z, const double[::1] tau, double floor, double ceil):
    cdef Py_ssize_t K = Z.shape[0]
    cdef Py_ssize_t d = Z.shape[1]
    cdef Py_ssize_t p, q, j, q0
    cdef double dt, s
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] res = out
    q0 = 1
    with nogil:
        for p in range(K):
            if q0 < p + 1:
                q0 = p + 1
            while q0 < K and tau[q0] - tau[p] < floor:
                q0 += 1
            q = q0
            while q < K:
                dt = tau[q] - tau[p]
                if dt > ceil:
                    break
                if dt >= floor:
                    for j in range(d):
                        s = fabs(Z[q, j] - Z[p, j]) / dt
                        if s > res[j]:
                            res[j] = s
                q += 1
    return out
