"""Compiled inner loops: Hamiltonians, vector fields, Dormand-Prince stepping.

State layout (length 8): q_a, p_a, q_b, p_b, Q_a, P_a, Q_b, P_b.

Coupling layout (length 10), built by :func:`semiquantal.dynamics.pack_coupling`:
    0 eps, 1 chi, 2 k1 (weight of first-order correction), 3 k2 (weight of
    second-order correction), 4 cov_sign (sign of Im<aa> in units of QP),
    5 w_a = (1+2 nu_a)^2, 6 w_b, 7 width_bracket (Poisson weight of the width
    pairs), 8 semiclassical flag (0 freezes the width block), 9 time
    direction (+1 forward, -1 backward).
"""
import math

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_UNDERFLOW = 2
STATUS_BARRIER = 3
STATUS_NONFINITE = 4


@njit(cache=True)
def hamiltonian(y, c):
    eps, chi, k1, k2, s, wa, wb = c[0], c[1], c[2], c[3], c[4], c[5], c[6]
    qa, pa, qb, pb = y[0], y[1], y[2], y[3]
    na = 0.5 * (qa * qa + pa * pa)
    nb = 0.5 * (qb * qb + pb * pb)
    ua = 0.5 * (qa * qa - pa * pa)
    ub = 0.5 * (qb * qb - pb * pb)
    va = qa * pa
    vb = qb * pb
    h = 0.5 * eps * (nb - na) + chi * (ua * ub + va * vb)
    if c[8] == 0.0:
        return h
    Qa, Pa, Qb, Pb = y[4], y[5], y[6], y[7]
    nfa = 0.5 * (Qa * Qa + Pa * Pa + wa / (4.0 * Qa * Qa) - 1.0)
    nfb = 0.5 * (Qb * Qb + Pb * Pb + wb / (4.0 * Qb * Qb) - 1.0)
    Ra = 0.5 * (Qa * Qa - Pa * Pa) - wa / (8.0 * Qa * Qa)
    Rb = 0.5 * (Qb * Qb - Pb * Pb) - wb / (8.0 * Qb * Qb)
    Ia = s * Qa * Pa
    Ib = s * Qb * Pb
    h1 = 0.5 * eps * (nfb - nfa) + chi * (ub * Ra + vb * Ia + ua * Rb + va * Ib)
    h2 = chi * (Ra * Rb + Ia * Ib)
    return h + k1 * h1 + k2 * h2


@njit(cache=True)
def gradient(y, c, g):
    eps, chi, k1, k2, s, wa, wb = c[0], c[1], c[2], c[3], c[4], c[5], c[6]
    qa, pa, qb, pb = y[0], y[1], y[2], y[3]
    ua = 0.5 * (qa * qa - pa * pa)
    ub = 0.5 * (qb * qb - pb * pb)
    va = qa * pa
    vb = qb * pb
    g[0] = -0.5 * eps * qa + chi * (qa * ub + pa * vb)
    g[1] = -0.5 * eps * pa + chi * (-pa * ub + qa * vb)
    g[2] = 0.5 * eps * qb + chi * (qb * ua + pb * va)
    g[3] = 0.5 * eps * pb + chi * (-pb * ua + qb * va)
    if c[8] == 0.0:
        for i in range(4, 8):
            g[i] = 0.0
        return
    Qa, Pa, Qb, Pb = y[4], y[5], y[6], y[7]
    Ra = 0.5 * (Qa * Qa - Pa * Pa) - wa / (8.0 * Qa * Qa)
    Rb = 0.5 * (Qb * Qb - Pb * Pb) - wb / (8.0 * Qb * Qb)
    Ia = s * Qa * Pa
    Ib = s * Qb * Pb
    # mean block: first-order correction
    g[0] += k1 * chi * (qa * Rb + pa * Ib)
    g[1] += k1 * chi * (-pa * Rb + qa * Ib)
    g[2] += k1 * chi * (qb * Ra + pb * Ia)
    g[3] += k1 * chi * (-pb * Ra + qb * Ia)
    # width block
    ca = wa / (4.0 * Qa * Qa * Qa)
    cb = wb / (4.0 * Qb * Qb * Qb)
    dRa_dQ = Qa + ca
    dRb_dQ = Qb + cb
    g[4] = k1 * (-0.5 * eps * (Qa - ca) + chi * (ub * dRa_dQ + vb * s * Pa)) \
        + k2 * chi * (Rb * dRa_dQ + Ib * s * Pa)
    g[5] = k1 * (-0.5 * eps * Pa + chi * (-ub * Pa + vb * s * Qa)) \
        + k2 * chi * (-Rb * Pa + Ib * s * Qa)
    g[6] = k1 * (0.5 * eps * (Qb - cb) + chi * (ua * dRb_dQ + va * s * Pb)) \
        + k2 * chi * (Ra * dRb_dQ + Ia * s * Pb)
    g[7] = k1 * (0.5 * eps * Pb + chi * (-ua * Pb + va * s * Qb)) \
        + k2 * chi * (-Ra * Pb + Ia * s * Qb)


@njit(cache=True)
def rhs(y, c, out):
    gradient(y, c, out)
    wq = c[7]
    # symplectic rotation: qdot = dH/dp, pdot = -dH/dq
    for i in range(0, 8, 2):
        w = c[9] if i < 4 else c[9] * wq
        dq = out[i]
        out[i] = w * out[i + 1]
        out[i + 1] = -w * dq


@njit(cache=True)
def _hermite(t0, h, y0, f0, y1, f1, t, out):
    th = (t - t0) / h
    th2 = th * th
    th3 = th2 * th
    h10 = th3 - 2.0 * th2 + th
    h01 = -2.0 * th3 + 3.0 * th2
    h11 = th3 - th2
    # y0 + h01 (y1 - y0) keeps frozen coordinates bit-exact
    for i in range(y0.shape[0]):
        out[i] = y0[i] + h01 * (y1[i] - y0[i]) + h * (h10 * f0[i] + h11 * f1[i])


@njit(cache=True)
def _step(y, f0, h, c, ynew, fnew, k2, k3, k4, k5, k6, tmp):
    n = y.shape[0]
    for i in range(n):
        tmp[i] = y[i] + h * A21 * f0[i]
    rhs(tmp, c, k2)
    for i in range(n):
        tmp[i] = y[i] + h * (A31 * f0[i] + A32 * k2[i])
    rhs(tmp, c, k3)
    for i in range(n):
        tmp[i] = y[i] + h * (A41 * f0[i] + A42 * k2[i] + A43 * k3[i])
    rhs(tmp, c, k4)
    for i in range(n):
        tmp[i] = y[i] + h * (A51 * f0[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(tmp, c, k5)
    for i in range(n):
        tmp[i] = y[i] + h * (A61 * f0[i] + A62 * k2[i] + A63 * k3[i]
                             + A64 * k4[i] + A65 * k5[i])
    rhs(tmp, c, k6)
    for i in range(n):
        ynew[i] = y[i] + h * (B1 * f0[i] + B3 * k3[i] + B4 * k4[i]
                              + B5 * k5[i] + B6 * k6[i])
    rhs(ynew, c, fnew)
    for i in range(n):
        tmp[i] = h * (E1 * f0[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                      + E6 * k6[i] + E7 * fnew[i])


@njit(cache=True)
def _err_norm(y, ynew, e, rtol, atol):
    acc = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = e[i] / sc
        acc += r * r
    return math.sqrt(acc / n)


@njit(cache=True)
def _state_ok(y, semi):
    for i in range(y.shape[0]):
        if not math.isfinite(y[i]):
            return STATUS_NONFINITE
    if semi and (y[4] <= 0.0 or y[6] <= 0.0):
        return STATUS_BARRIER
    return STATUS_OK


@njit(cache=True)
def _initial_step(y, f0, c, rtol, atol, max_step):
    d0 = 0.0
    d1 = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return min(h, max_step)


@njit(cache=True)
def integrate_sampled(y0, c, t_max, dt, rtol, atol, max_step, h_min):
    """Integrate to ``t_max`` and sample on the grid ``k*dt``.

    Returns (samples, n_filled, status, last_t, last_y).
    """
    n = y0.shape[0]
    n_out = int(math.floor(t_max / dt + 1e-9)) + 1
    out = np.empty((n_out, n))
    semi = c[8] != 0.0
    y = y0.copy()
    f0 = np.empty(n)
    ynew = np.empty(n)
    fnew = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    tmp = np.empty(n)
    buf = np.empty(n)
    rhs(y, c, f0)
    for i in range(n):
        out[0, i] = y[i]
    filled = 1
    t = 0.0
    h = _initial_step(y, f0, c, rtol, atol, max_step)
    status = STATUS_OK
    while filled < n_out:
        if h < h_min:
            status = STATUS_UNDERFLOW
            break
        _step(y, f0, h, c, ynew, fnew, k2, k3, k4, k5, k6, tmp)
        err = _err_norm(y, ynew, tmp, rtol, atol)
        ok = _state_ok(ynew, semi) == STATUS_OK
        if err <= 1.0 and ok:
            t_new = t + h
            while filled < n_out and filled * dt <= t_new + 1e-12 * dt:
                ts = filled * dt
                _hermite(t, h, y, f0, ynew, fnew, ts, buf)
                for i in range(n):
                    out[filled, i] = buf[i]
                filled += 1
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                f0[i] = fnew[i]
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * fac, max_step)
        else:
            if not ok:
                h *= 0.25
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
    return out, filled, status, t, y


@njit(cache=True)
def integrate_sections(y0, c, n_cross, t_budget, rtol, atol, max_step, h_min,
                       z_tol):
    """Collect crossings of q_b = 0 with p_b > 0.

    Returns (times, states, n_found, status, last_t, last_y). A crossing is a
    sign change of q_b between accepted steps; its time is bisected on the
    cubic Hermite interpolant until |q_b| < ``z_tol``.
    """
    n = y0.shape[0]
    times = np.empty(n_cross)
    states = np.empty((n_cross, n))
    semi = c[8] != 0.0
    y = y0.copy()
    f0 = np.empty(n)
    ynew = np.empty(n)
    fnew = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    tmp = np.empty(n)
    buf = np.empty(n)
    rhs(y, c, f0)
    found = 0
    t = 0.0
    h = _initial_step(y, f0, c, rtol, atol, max_step)
    status = STATUS_OK
    while found < n_cross:
        if t >= t_budget:
            status = STATUS_BUDGET
            break
        if h < h_min:
            status = STATUS_UNDERFLOW
            break
        _step(y, f0, h, c, ynew, fnew, k2, k3, k4, k5, k6, tmp)
        err = _err_norm(y, ynew, tmp, rtol, atol)
        ok = _state_ok(ynew, semi) == STATUS_OK
        if err <= 1.0 and ok:
            za = y[2]
            zb = ynew[2]
            # start point on the plane is not a crossing
            if za != 0.0 and (za < 0.0) != (zb < 0.0):
                lo = t
                hi = t + h
                flo = za
                tc = hi
                for _ in range(200):
                    tc = 0.5 * (lo + hi)
                    _hermite(t, h, y, f0, ynew, fnew, tc, buf)
                    fm = buf[2]
                    if abs(fm) < z_tol:
                        break
                    if (fm < 0.0) == (flo < 0.0):
                        lo = tc
                        flo = fm
                    else:
                        hi = tc
                _hermite(t, h, y, f0, ynew, fnew, tc, buf)
                if buf[3] > 0.0:
                    times[found] = tc
                    for i in range(n):
                        states[found, i] = buf[i]
                    found += 1
            t = t + h
            for i in range(n):
                y[i] = ynew[i]
                f0[i] = fnew[i]
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * fac, max_step)
        else:
            if not ok:
                h *= 0.25
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
    return times, states, found, status, t, y
