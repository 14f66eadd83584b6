# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Dormand-Prince 5(4) kernel for the patch SIS vector field.

Mirrors `patchepi._ode_py.integrate_dopri5` step for step; see that module
for the stepping semantics (error control, clamping, dense output, strain
flushing, mass guard). Keep the two implementations in lockstep.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin, pow, sqrt

cnp.import_array()

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MASS_DRIFT = 2

cdef double MASS_TOL_REL = 1e-8
cdef double FLUSH_FLOOR = 1e-30
cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double EPS = 2.220446049250313e-16

cdef double[6][5] A_TAB = [
    [0, 0, 0, 0, 0],
    [1.0 / 5, 0, 0, 0, 0],
    [3.0 / 40, 9.0 / 40, 0, 0, 0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656],
]
cdef double[6] B_TAB = [
    35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84,
]
cdef double[7] E_TAB = [
    -71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200,
    -22.0 / 525, 1.0 / 40,
]
cdef double[7][4] P_TAB = [
    [1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608,
     -12715105075.0 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933,
     87487479700.0 / 32700410799],
    [0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304,
     -10690763975.0 / 1880347072],
    [0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408,
     701980252875.0 / 199316789632],
    [0, -282668133.0 / 205662961, 2019193451.0 / 616988883,
     -1453857185.0 / 822651844],
    [0, 40617522.0 / 29380423, -110615467.0 / 29380423,
     69997945.0 / 29380423],
]


cdef void _rhs(const double[:, ::1] lap, double d_s, double d1, double d2,
               const double[::1] b1, const double[::1] g1,
               const double[::1] b2, const double[::1] g2,
               const double[::1] y, double[::1] out, Py_ssize_t k) nogil:
    cdef Py_ssize_t i, j
    cdef double accS, acc1, acc2, lij, si
    for i in range(k):
        accS = 0.0
        acc1 = 0.0
        acc2 = 0.0
        for j in range(k):
            lij = lap[i, j]
            accS += lij * y[j]
            acc1 += lij * y[k + j]
            acc2 += lij * y[2 * k + j]
        si = y[i]
        out[i] = (d_s * accS + (g1[i] - b1[i] * si) * y[k + i]
                  + (g2[i] - b2[i] * si) * y[2 * k + i])
        out[k + i] = d1 * acc1 + (b1[i] * si - g1[i]) * y[k + i]
        out[2 * k + i] = d2 * acc2 + (b2[i] * si - g2[i]) * y[2 * k + i]


def integrate_dopri5(
    object lap_in,
    double d_s,
    double d1,
    double d2,
    object beta1,
    object gamma1,
    object beta2,
    object gamma2,
    object y0,
    object sample_times,
    double rtol,
    double atol,
    double max_step,
    double clamp,
):
    """Same contract as `patchepi._ode_py.integrate_dopri5`."""
    cdef const double[:, ::1] lap = np.ascontiguousarray(lap_in, dtype=np.float64)
    cdef const double[::1] b1 = np.ascontiguousarray(beta1, dtype=np.float64)
    cdef const double[::1] g1 = np.ascontiguousarray(gamma1, dtype=np.float64)
    cdef const double[::1] b2 = np.ascontiguousarray(beta2, dtype=np.float64)
    cdef const double[::1] g2 = np.ascontiguousarray(gamma2, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] y_arr = np.array(y0, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef const double[::1] times = np.ascontiguousarray(sample_times, dtype=np.float64)

    cdef Py_ssize_t k = lap.shape[0]
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t m = times.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] states_arr = np.zeros((m, n))
    cdef double[:, ::1] states = states_arr

    cdef double[:, ::1] K = np.empty((7, n))
    cdef double[::1] y_new = np.empty(n)
    cdef double[::1] ytmp = np.empty(n)
    cdef double[::1] ys = np.empty(n)
    cdef double[::1] f = np.empty(n)

    cdef Py_ssize_t i, j, st, isamp
    cdef double t, t_end, t_new, h, mass0, err, sc, ev, acc, theta
    cdef double th1, th2, th3, th4, mass, mx, d0, d1n, d2n, h0, h1v, factor
    cdef bint zero1, zero2, rejected, modified, negative_sample, clipped

    for i in range(n):
        states[0, i] = y[i]
    t = times[0]
    t_end = times[m - 1]
    mass0 = 0.0
    for i in range(n):
        mass0 += y[i]

    zero1 = True
    zero2 = True
    for i in range(k):
        if y[k + i] != 0.0:
            zero1 = False
        if y[2 * k + i] != 0.0:
            zero2 = False

    cdef double flush = fmax(FLUSH_FLOOR, 0.1 * atol)
    cdef long n_steps = 0
    cdef long n_rejected = 0
    if m == 1:
        return states_arr, 0, 0, STATUS_OK

    _rhs(lap, d_s, d1, d2, b1, g1, b2, g2, y, f, k)

    # Starting step, same heuristic as the NumPy backend.
    d0 = 0.0
    d1n = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1n += (f[i] / sc) * (f[i] / sc)
    d0 = sqrt(d0 / n)
    d1n = sqrt(d1n / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1n < 1e-5) else 0.01 * d0 / d1n
    for i in range(n):
        ytmp[i] = y[i] + h0 * f[i]
    _rhs(lap, d_s, d1, d2, b1, g1, b2, g2, ytmp, ys, k)
    d2n = 0.0
    for i in range(n):
        sc = atol + rtol * fabs(y[i])
        ev = (ys[i] - f[i]) / sc
        d2n += ev * ev
    d2n = sqrt(d2n / n) / h0
    if d1n <= 1e-15 and d2n <= 1e-15:
        h1v = fmax(1e-6, h0 * 1e-3)
    else:
        h1v = pow(0.01 / fmax(d1n, d2n), 0.2)
    h = fmin(fmin(100.0 * h0, h1v), fmin(t_end - t, max_step))

    rejected = False
    isamp = 1

    while t < t_end:
        h = fmin(h, max_step)
        if h < 10.0 * EPS * fmax(fabs(t), 1.0):
            return states_arr, n_steps, n_rejected, STATUS_STEP_UNDERFLOW
        clipped = t + h >= t_end
        if clipped:
            h = t_end - t
        t_new = t_end if clipped else t + h

        for i in range(n):
            K[0, i] = f[i]
        for st in range(1, 6):
            for i in range(n):
                acc = 0.0
                for j in range(st):
                    acc += A_TAB[st][j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            _rhs(lap, d_s, d1, d2, b1, g1, b2, g2, ytmp, ys, k)
            for i in range(n):
                K[st, i] = ys[i]
        for i in range(n):
            acc = 0.0
            for j in range(6):
                acc += B_TAB[j] * K[j, i]
            y_new[i] = y[i] + h * acc
        _rhs(lap, d_s, d1, d2, b1, g1, b2, g2, y_new, ys, k)
        for i in range(n):
            K[6, i] = ys[i]

        err = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(7):
                acc += E_TAB[j] * K[j, i]
            sc = atol + rtol * fmax(fabs(y[i]), fabs(y_new[i]))
            ev = h * acc / sc
            err += ev * ev
        err = sqrt(err / n)

        if err > 1.0:
            h *= fmax(MIN_FACTOR, SAFETY * pow(err, -0.2))
            rejected = True
            n_rejected += 1
            continue
        mx = 0.0
        for i in range(n):
            if y_new[i] < mx:
                mx = y_new[i]
        if mx <= -clamp:
            h *= 0.5
            rejected = True
            n_rejected += 1
            continue

        j = isamp
        negative_sample = False
        while j < m and times[j] < t_new:
            theta = (times[j] - t) / h
            th1 = theta
            th2 = theta * th1
            th3 = theta * th2
            th4 = theta * th3
            for i in range(n):
                acc = 0.0
                for st in range(7):
                    acc += K[st, i] * (P_TAB[st][0] * th1 + P_TAB[st][1] * th2
                                       + P_TAB[st][2] * th3 + P_TAB[st][3] * th4)
                ys[i] = y[i] + h * acc
            mx = 0.0
            for i in range(n):
                if ys[i] < mx:
                    mx = ys[i]
            if mx <= -clamp:
                negative_sample = True
                break
            for i in range(n):
                if ys[i] < 0.0:
                    ys[i] = 0.0
            if zero1:
                for i in range(k):
                    ys[k + i] = 0.0
            if zero2:
                for i in range(k):
                    ys[2 * k + i] = 0.0
            for i in range(n):
                states[j, i] = ys[i]
            j += 1
        if negative_sample:
            h *= 0.5
            rejected = True
            n_rejected += 1
            continue
        isamp = j

        modified = False
        for i in range(n):
            if y_new[i] < 0.0 and y_new[i] > -clamp:
                y_new[i] = 0.0
                modified = True
        if zero1:
            for i in range(k):
                y_new[k + i] = 0.0
        else:
            mx = 0.0
            for i in range(k):
                if fabs(y_new[k + i]) > mx:
                    mx = fabs(y_new[k + i])
            if mx < flush:
                for i in range(k):
                    y_new[k + i] = 0.0
                zero1 = True
                modified = True
        if zero2:
            for i in range(k):
                y_new[2 * k + i] = 0.0
        else:
            mx = 0.0
            for i in range(k):
                if fabs(y_new[2 * k + i]) > mx:
                    mx = fabs(y_new[2 * k + i])
            if mx < flush:
                for i in range(k):
                    y_new[2 * k + i] = 0.0
                zero2 = True
                modified = True

        mass = 0.0
        for i in range(n):
            mass += y_new[i]
        if fabs(mass - mass0) > MASS_TOL_REL * fabs(mass0):
            return states_arr, n_steps, n_rejected, STATUS_MASS_DRIFT

        if isamp < m and times[isamp] == t_new:
            for i in range(n):
                states[isamp, i] = y_new[i]
            isamp += 1

        t = t_new
        for i in range(n):
            y[i] = y_new[i]
        if modified:
            _rhs(lap, d_s, d1, d2, b1, g1, b2, g2, y, f, k)
        else:
            for i in range(n):
                f[i] = K[6, i]
        n_steps += 1
        factor = MAX_FACTOR if err == 0.0 else fmin(MAX_FACTOR, SAFETY * pow(err, -0.2))
        if rejected:
            factor = fmin(1.0, factor)
        h *= factor
        rejected = False

    return states_arr, n_steps, n_rejected, STATUS_OK
