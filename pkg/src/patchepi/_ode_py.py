"""Pure-NumPy Dormand-Prince 5(4) kernel for the patch SIS vector field.

This is the fallback backend; `patchepi._ode_cy` implements the same stepping
semantics in Cython. Both expose `integrate_dopri5` with an identical
signature and are kept in lockstep:

  * embedded 5(4) error control with RMS norm scaled by atol + rtol*|y|,
  * quartic dense output evaluated at the requested sample times,
  * nonnegativity enforcement: entries of an accepted step (or of a sampled
    interpolant) inside (-clamp, 0) are set to 0; anything at or below
    -clamp rejects the step and retries at half the size,
  * strains that start identically zero are pinned to exact zero,
  * a strain whose sup-norm falls below a tenth of the absolute tolerance
    is set to exact zero: below that level its values are smaller than the
    per-step error allowance, so they are numerical noise, and holding them
    would let steps beyond the linear stability limit rattle the tail
    (clamping noise against zero then accrues mass error). Runs that need
    to resolve tinier populations must lower abs_tol accordingly,
  * the total mass is checked against the initial mass after every accepted
    step; relative drift beyond MASS_TOL_REL aborts.

Status codes: 0 ok, 1 step-size underflow, 2 mass drift breach.
"""

import numpy as np

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MASS_DRIFT = 2

MASS_TOL_REL = 1e-8
FLUSH_FLOOR = 1e-30

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -0.2  # -1/(order of the error estimator + 1)

# Dormand-Prince 5(4) tableau and the Shampine quartic interpolant.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array(
    [-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(rhs, t0, y0, f0, t_end, max_step, rtol, atol):
    """Hairer-style starting step: probe the local derivative curvature."""
    sc = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = rhs(y1)
    d2 = _rms((f1 - f0) / sc) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_end - t0, max_step)


def integrate_dopri5(
    lap,
    d_s,
    d1,
    d2,
    beta1,
    gamma1,
    beta2,
    gamma2,
    y0,
    sample_times,
    rtol,
    atol,
    max_step,
    clamp,
):
    """Integrate from sample_times[0] to sample_times[-1].

    Returns (states, n_steps, n_rejected, status) where states[m] is the
    solution at sample_times[m]; on a nonzero status the tail of `states`
    is unfilled.
    """
    lap = np.ascontiguousarray(lap, dtype=float)
    k = lap.shape[0]
    y = np.array(y0, dtype=float)
    n = y.shape[0]
    times = np.asarray(sample_times, dtype=float)
    m = times.shape[0]
    states = np.zeros((m, n))
    states[0] = y
    t = times[0]
    t_end = times[-1]
    mass0 = float(y.sum())

    def rhs(yv):
        S, I1, I2 = yv[:k], yv[k : 2 * k], yv[2 * k :]
        dS = d_s * (lap @ S) + (gamma1 - beta1 * S) * I1 + (gamma2 - beta2 * S) * I2
        dI1 = d1 * (lap @ I1) + (beta1 * S - gamma1) * I1
        dI2 = d2 * (lap @ I2) + (beta2 * S - gamma2) * I2
        return np.concatenate([dS, dI1, dI2])

    zero1 = not np.any(y[k : 2 * k])
    zero2 = not np.any(y[2 * k :])
    flush = max(FLUSH_FLOOR, 0.1 * atol)
    if m == 1:
        return states, 0, 0, STATUS_OK

    f = rhs(y)
    h = _initial_step(rhs, t, y, f, t_end, max_step, rtol, atol)
    K = np.empty((7, n))
    n_steps = 0
    n_rejected = 0
    rejected = False
    isamp = 1

    while t < t_end:
        h = min(h, max_step)
        if h < 10.0 * np.finfo(float).eps * max(abs(t), 1.0):
            return states, n_steps, n_rejected, STATUS_STEP_UNDERFLOW
        clipped = t + h >= t_end
        if clipped:
            h = t_end - t
        t_new = t_end if clipped else t + h

        K[0] = f
        for i in range(1, 6):
            K[i] = rhs(y + h * (A[i, :i] @ K[:i]))
        y_new = y + h * (B @ K[:6])
        K[6] = rhs(y_new)

        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(h * (E @ K) / sc)
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err**ERROR_EXPONENT)
            rejected = True
            n_rejected += 1
            continue
        if np.min(y_new) <= -clamp:
            h *= 0.5
            rejected = True
            n_rejected += 1
            continue

        # Dense output at sample times inside (t, t_new).
        j = isamp
        Q = None
        negative_sample = False
        while j < m and times[j] < t_new:
            if Q is None:
                Q = K.T @ P
            theta = (times[j] - t) / h
            ys = y + h * (Q @ (theta ** np.arange(1, 5)))
            if np.min(ys) <= -clamp:
                negative_sample = True
                break
            ys[ys < 0] = 0.0
            if zero1:
                ys[k : 2 * k] = 0.0
            if zero2:
                ys[2 * k :] = 0.0
            states[j] = ys
            j += 1
        if negative_sample:
            h *= 0.5
            rejected = True
            n_rejected += 1
            continue
        isamp = j

        modified = False
        band = (y_new < 0) & (y_new > -clamp)
        if np.any(band):
            y_new[band] = 0.0
            modified = True
        if zero1:
            y_new[k : 2 * k] = 0.0
        elif np.max(np.abs(y_new[k : 2 * k])) < flush:
            y_new[k : 2 * k] = 0.0
            zero1 = True
            modified = True
        if zero2:
            y_new[2 * k :] = 0.0
        elif np.max(np.abs(y_new[2 * k :])) < flush:
            y_new[2 * k :] = 0.0
            zero2 = True
            modified = True

        if abs(float(y_new.sum()) - mass0) > MASS_TOL_REL * abs(mass0):
            return states, n_steps, n_rejected, STATUS_MASS_DRIFT

        if isamp < m and times[isamp] == t_new:
            states[isamp] = y_new
            isamp += 1

        t = t_new
        y = y_new.copy()
        f = rhs(y) if modified else K[6].copy()
        n_steps += 1
        factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT)
        if rejected:
            factor = min(1.0, factor)
        h *= factor
        rejected = False

    return states, n_steps, n_rejected, STATUS_OK
