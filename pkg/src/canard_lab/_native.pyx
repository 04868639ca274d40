# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled adaptive RK45 kernel for sparse polynomial vector fields.

Same tableau, error control, dense output and event semantics as the pure
numpy kernel in ``_fallback.py``; this version runs the stage loops and
monomial evaluations as C loops over typed memoryviews.
"""

import numpy as np

from libc.stdint cimport int64_t
from libc.math cimport fabs, sqrt, pow as cpow

BACKEND_NAME = "native"

# Note: plain int/int literals would truncate under cdivision=True, so every
# tableau fraction below is written with float operands.
_A_NP = np.zeros((5, 5))
_A_NP[0, :1] = [1.0 / 5.0]
_A_NP[1, :2] = [3.0 / 40.0, 9.0 / 40.0]
_A_NP[2, :3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0]
_A_NP[3, :4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
                -212.0 / 729.0]
_A_NP[4, :5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                49.0 / 176.0, -5103.0 / 18656.0]
_B_NP = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                  -2187.0 / 6784.0, 11.0 / 84.0])
_E_NP = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
                  -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])
_P_NP = np.array(
    [
        [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
         -12715105075.0 / 11282082432.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
         87487479700.0 / 32700410799.0],
        [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
         -10690763975.0 / 1880347072.0],
        [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
         701980252875.0 / 199316789632.0],
        [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
         -1453857185.0 / 822651844.0],
        [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
         69997945.0 / 29380423.0],
    ]
)

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0


cdef inline void _rhs(double[::1] y, double[:, ::1] ptab, int64_t[::1] maxe,
                      double[::1] coeffs, int64_t[:, ::1] expts,
                      int64_t[::1] eq_idx, Py_ssize_t nt, Py_ssize_t n,
                      double[::1] out) noexcept:
    cdef Py_ssize_t i, j
    cdef int64_t e
    cdef double v
    for j in range(n):
        ptab[j, 0] = 1.0
        for e in range(1, maxe[j] + 1):
            ptab[j, e] = ptab[j, e - 1] * y[j]
    for j in range(n):
        out[j] = 0.0
    for i in range(nt):
        v = coeffs[i]
        for j in range(n):
            e = expts[i, j]
            if e:
                v *= ptab[j, e]
        out[eq_idx[i]] += v


cdef inline double _dense_one(double[:, ::1] ys, Py_ssize_t row, double h,
                              double[:, :, ::1] qs, double x,
                              Py_ssize_t idx) noexcept:
    cdef double p = x
    cdef double acc = 0.0
    cdef Py_ssize_t c
    for c in range(4):
        acc += qs[row, idx, c] * p
        p *= x
    return ys[row, idx] + h * acc


def solve_poly_rk45(coeffs, expts, eq_idx, nstate, y0, t0, t1, rtol, atol,
                    h0, hmax, max_steps, ev_index, ev_value, ev_direction,
                    guard_index, guard_sign, guard_value, event_tol, arm_eps):
    """See ``_fallback.solve_poly_rk45`` for the contract."""
    cdef double[::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef int64_t[:, ::1] ex = np.ascontiguousarray(expts, dtype=np.int64).reshape(
        len(coeffs), nstate)
    cdef int64_t[::1] eq = np.ascontiguousarray(eq_idx, dtype=np.int64)
    cdef Py_ssize_t n = nstate
    cdef Py_ssize_t nt = cf.shape[0]

    maxe_np = (np.max(np.asarray(ex), axis=0).astype(np.int64)
               if nt else np.zeros(n, dtype=np.int64))
    cdef int64_t[::1] maxe = maxe_np
    cdef double[:, ::1] ptab = np.empty((n, int(np.max(maxe_np)) + 1 if n else 1))

    cdef double[:, ::1] A = _A_NP
    cdef double[::1] B = _B_NP
    cdef double[::1] E = _E_NP
    cdef double[:, ::1] P = _P_NP

    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef double[::1] ytmp = np.empty(n)
    cdef double[::1] ynew = np.empty(n)
    cdef double[:, ::1] k = np.empty((7, n))
    cdef double[::1] dy = np.empty(n)

    cdef double t = t0, t_end = t1
    cdef double rt = rtol, at = atol, h_max = hmax
    cdef double ev_val = ev_value, g_sign = guard_sign, g_val = guard_value
    cdef double arm = arm_eps
    cdef int ev_dir = ev_direction
    cdef Py_ssize_t gidx = guard_index
    cdef long n_max_steps = max_steps
    cdef double direction = 1.0 if t_end >= t else -1.0
    cdef double h_abs = min(abs(h0), h_max, fabs(t_end - t))
    if h_abs == 0.0:
        h_abs = fabs(t_end - t)

    cdef Py_ssize_t cap = 1024
    ts_np = np.empty(cap + 1)
    ys_np = np.empty((cap + 1, n))
    hs_np = np.empty(cap)
    qs_np = np.empty((cap, n, 4))
    cdef double[::1] ts = ts_np
    cdef double[:, ::1] ys = ys_np
    cdef double[::1] hs = hs_np
    cdef double[:, :, ::1] qs = qs_np
    cdef Py_ssize_t m = 0
    ts[0] = t
    cdef Py_ssize_t j, s, c, stage
    for j in range(n):
        ys[0, j] = y[j]

    cdef bint have_event = ev_index >= 0
    cdef Py_ssize_t evi = ev_index if have_event else 0
    cdef bint armed = False
    cdef double g_old = 0.0, g_new, gm
    if have_event:
        g_old = y[evi] - ev_val
        if fabs(g_old) > arm:
            armed = True

    _rhs(y, ptab, maxe, cf, ex, eq, nt, n, k[0])
    cdef int status = -2
    cdef long nrej = 0
    cdef bint step_rejected = False
    cdef long it
    cdef double h, err_norm, scale, acc, factor, a, b, mid, x_ev, tnew
    cdef bint crossed, up, down, ok

    for it in range(n_max_steps):
        if fabs(t_end - t) <= 1e-15 * max(1.0, fabs(t)):
            status = 0
            break
        h_abs = min(h_abs, h_max, fabs(t_end - t))
        if h_abs < 1e-15 * max(1.0, fabs(t)):
            status = -1
            break
        h = direction * h_abs

        for s in range(1, 6):
            for j in range(n):
                dy[j] = 0.0
            for stage in range(s):
                a = A[s - 1, stage]
                if a != 0.0:
                    for j in range(n):
                        dy[j] += a * k[stage, j]
            for j in range(n):
                ytmp[j] = y[j] + h * dy[j]
            _rhs(ytmp, ptab, maxe, cf, ex, eq, nt, n, k[s])
        for j in range(n):
            acc = 0.0
            for stage in range(6):
                acc += B[stage] * k[stage, j]
            ynew[j] = y[j] + h * acc
        _rhs(ynew, ptab, maxe, cf, ex, eq, nt, n, k[6])

        err_norm = 0.0
        for j in range(n):
            acc = 0.0
            for stage in range(7):
                acc += E[stage] * k[stage, j]
            acc *= h
            scale = at + rt * max(fabs(y[j]), fabs(ynew[j]))
            err_norm += (acc / scale) * (acc / scale)
        err_norm = sqrt(err_norm / n)

        if err_norm > 1.0:
            nrej += 1
            step_rejected = True
            h_abs *= max(MIN_FACTOR, SAFETY * cpow(err_norm, -0.2))
            continue

        if err_norm == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, SAFETY * cpow(err_norm, -0.2))
        if step_rejected:
            factor = min(1.0, factor)
        step_rejected = False

        if m == cap:
            cap *= 2
            ts_np2 = np.empty(cap + 1); ts_np2[: m + 1] = ts_np[: m + 1]
            ys_np2 = np.empty((cap + 1, n)); ys_np2[: m + 1] = ys_np[: m + 1]
            hs_np2 = np.empty(cap); hs_np2[:m] = hs_np[:m]
            qs_np2 = np.empty((cap, n, 4)); qs_np2[:m] = qs_np[:m]
            ts_np, ys_np, hs_np, qs_np = ts_np2, ys_np2, hs_np2, qs_np2
            ts = ts_np; ys = ys_np; hs = hs_np; qs = qs_np

        for j in range(n):
            for c in range(4):
                acc = 0.0
                for stage in range(7):
                    acc += k[stage, j] * P[stage, c]
                qs[m, j, c] = acc
        hs[m] = h
        tnew = t + h

        if have_event:
            g_new = ynew[evi] - ev_val
            crossed = False
            if armed:
                up = g_old < 0.0 and g_new >= 0.0
                down = g_old > 0.0 and g_new <= 0.0
                if ev_dir > 0:
                    crossed = up
                elif ev_dir < 0:
                    crossed = down
                else:
                    crossed = up or down
            if crossed:
                a = 0.0
                b = 1.0
                for c in range(90):
                    if b - a < 1e-17:
                        break
                    mid = 0.5 * (a + b)
                    gm = _dense_one(ys, m, h, qs, mid, evi) - ev_val
                    if (gm > 0.0) == (g_new > 0.0) or gm == 0.0:
                        b = mid
                    else:
                        a = mid
                x_ev = b
                ok = True
                if gidx >= 0:
                    ok = g_sign * (_dense_one(ys, m, h, qs, x_ev, gidx)
                                   - g_val) > 0.0
                if ok:
                    ts[m + 1] = t + x_ev * h
                    for j in range(n):
                        ys[m + 1, j] = _dense_one(ys, m, h, qs, x_ev, j)
                    m += 1
                    status = 1
                    break
            g_old = g_new
            if not armed and fabs(g_new) > arm:
                armed = True

        ts[m + 1] = tnew
        for j in range(n):
            ys[m + 1, j] = ynew[j]
        m += 1
        t = tnew
        for j in range(n):
            y[j] = ynew[j]
            k[0, j] = k[6, j]
        h_abs *= factor

    return (
        status,
        ts_np[: m + 1].copy(),
        ys_np[: m + 1].copy(),
        hs_np[:m].copy(),
        qs_np[:m].copy(),
        nrej,
    )

