"""Pure numpy adaptive RK45 kernel for sparse polynomial vector fields.

Mirror of the compiled kernel in ``_native.pyx``: same Dormand-Prince
tableau, same error control, same dense-output interpolant, and the same
section-event semantics, so either backend can serve every integration in
the package. Selected by ``canard_lab.backend`` when the extension is
unavailable or when CANARD_LAB_PURE_PYTHON is set.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Shampine's dense-output matrix (7 stages x 4 powers of x).
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


def _dense_eval(y_old, h, q, x):
    p = np.array([x, x * x, x * x * x, x * x * x * x])
    return y_old + h * (q @ p)


def solve_poly_rk45(
    coeffs,
    expts,
    eq_idx,
    nstate,
    y0,
    t0,
    t1,
    rtol,
    atol,
    h0,
    hmax,
    max_steps,
    ev_index,
    ev_value,
    ev_direction,
    guard_index,
    guard_sign,
    guard_value,
    event_tol,
    arm_eps,
):
    """Integrate dy/dt = f(y) with f a sparse polynomial field.

    Returns (status, ts, ys, hs, qs, nrej) where status is 0 when t1 was
    reached, 1 when the section event fired, -1 on step underflow and -2
    when max_steps was exhausted. ts has one more entry than hs/qs; qs[i]
    are the dense-output coefficients valid on [ts[i], ts[i] + hs[i]].
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    expts = np.ascontiguousarray(expts, dtype=np.int64)
    eq_idx = np.ascontiguousarray(eq_idx, dtype=np.int64)
    y = np.array(y0, dtype=float)
    n = int(nstate)

    def rhs(state):
        if coeffs.size == 0:
            return np.zeros(n)
        vals = coeffs * np.prod(np.power(state[None, :], expts), axis=1)
        return np.bincount(eq_idx, weights=vals, minlength=n)

    direction = 1.0 if t1 >= t0 else -1.0
    t = float(t0)
    h_abs = min(abs(h0), hmax, abs(t1 - t0)) or abs(t1 - t0)

    ts = [t]
    ys = [y.copy()]
    hs = []
    qs = []

    have_event = ev_index >= 0
    armed = False
    g_old = 0.0
    if have_event:
        g_old = y[ev_index] - ev_value
        if abs(g_old) > arm_eps:
            armed = True

    f = rhs(y)
    k = np.empty((7, n))
    status = -2
    nrej = 0
    step_rejected = False

    for _ in range(max_steps):
        if abs(t1 - t) <= 1e-15 * max(1.0, abs(t)):
            status = 0
            break
        h_abs = min(h_abs, hmax, abs(t1 - t))
        if h_abs < 1e-15 * max(1.0, abs(t)):
            status = -1
            break
        h = direction * h_abs

        k[0] = f
        for s in range(1, 6):
            dy = h * (_A[s - 1] @ k[:s])
            k[s] = rhs(y + dy)
        y_new = y + h * (_B @ k[:6])
        k[6] = rhs(y_new)
        err = h * (_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))

        if err_norm > 1.0:
            nrej += 1
            step_rejected = True
            h_abs *= max(_MIN_FACTOR, _SAFETY * err_norm ** (-0.2))
            continue

        factor = _MAX_FACTOR if err_norm == 0.0 else min(
            _MAX_FACTOR, _SAFETY * err_norm ** (-0.2)
        )
        if step_rejected:
            factor = min(1.0, factor)
        step_rejected = False

        q = k.T @ _P
        t_new = t + h

        if have_event:
            g_new = y_new[ev_index] - ev_value
            crossed = False
            if armed:
                up = g_old < 0.0 <= g_new
                down = g_old > 0.0 >= g_new
                if ev_direction > 0:
                    crossed = up
                elif ev_direction < 0:
                    crossed = down
                else:
                    crossed = up or down
            if crossed:
                a, b = 0.0, 1.0
                for _bis in range(90):
                    if b - a < 1e-17:
                        break
                    mid = 0.5 * (a + b)
                    gm = _dense_eval(y, h, q, mid)[ev_index] - ev_value
                    if (gm > 0.0) == (g_new > 0.0) or gm == 0.0:
                        b = mid
                    else:
                        a = mid
                x_ev = b
                y_ev = _dense_eval(y, h, q, x_ev)
                ok = True
                if guard_index >= 0:
                    ok = guard_sign * (y_ev[guard_index] - guard_value) > 0.0
                if ok:
                    ts.append(t + x_ev * h)
                    ys.append(y_ev)
                    hs.append(h)
                    qs.append(q)
                    status = 1
                    break
            g_old = g_new
            if not armed and abs(g_new) > arm_eps:
                armed = True

        ts.append(t_new)
        ys.append(y_new.copy())
        hs.append(h)
        qs.append(q)
        t = t_new
        y = y_new
        f = k[6].copy()
        h_abs *= factor

    return (
        status,
        np.array(ts),
        np.array(ys),
        np.array(hs) if hs else np.zeros(0),
        np.array(qs) if qs else np.zeros((0, n, 4)),
        nrej,
    )
