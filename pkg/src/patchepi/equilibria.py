"""Equilibria of the patch model: construction, classification, stability.

Steady states solve an algebraic system whose equations sum to zero, so the
system is rank-deficient by one; every Newton solve here replaces the last
susceptible equation with the total-mass constraint to restore full rank.
Stability is assessed on the mass-conserving hyperplane: the conservation
law contributes a structural zero eigenvalue that says nothing about the
dynamics on the invariant set, so the Jacobian is projected onto an
orthonormal basis of {sum = 0} before its spectrum is read.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import spectral
from .model import (
    InvalidModelError,
    ModelSpec,
    State,
    build_laplacian,
    require_valid,
    rhs_vector,
    total_mass,
)

RESIDUAL_TOL = 1e-10
UNIFORM_RESIDUAL_TOL = 1e-12
MARGINAL_BAND = 1e-8
DEDUP_RADIUS = 1e-6
POSITIVITY_FLOOR = 1e-14
MAX_RESTARTS = 8


class NoPositiveSolutionError(ValueError):
    """The requested endemic equilibrium does not exist in this regime."""


class NewtonConvergenceError(RuntimeError):
    """Newton iteration failed after damping and restarts."""


class EquilibriumKind(enum.Enum):
    DFE = "DFE"
    STRAIN1_EE = "Strain1EE"
    STRAIN2_EE = "Strain2EE"
    COEXISTENCE_EE = "CoexistenceEE"


class StabilityVerdict(enum.Enum):
    LINEARLY_STABLE = "LinearlyStable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"
    NOT_ASSESSED = "NotAssessed"


@dataclass(frozen=True)
class Equilibrium:
    state: State
    kind: EquilibriumKind
    residual: float
    stability: StabilityVerdict = StabilityVerdict.NOT_ASSESSED
    leading_eigenvalue: float = math.nan


def _spec_arrays(spec: ModelSpec):
    lap = build_laplacian(spec.graph).matrix
    s1, s2 = spec.strains
    return lap, s1, s2


def residual_sup(spec: ModelSpec, y: np.ndarray) -> float:
    """Sup-norm of the steady-state equations at a stacked state vector."""
    lap, s1, s2 = _spec_arrays(spec)
    out = rhs_vector(
        lap, spec.d_s, s1.d, s2.d, s1.beta, s1.gamma, s2.beta, s2.gamma, y
    )
    return float(np.max(np.abs(out)))


def _classify_support(y: np.ndarray, k: int) -> EquilibriumKind:
    I1, I2 = y[k : 2 * k], y[2 * k :]
    pos1 = I1.min() > 0
    pos2 = I2.min() > 0
    if pos1 and pos2:
        return EquilibriumKind.COEXISTENCE_EE
    if pos1 and not I2.any():
        return EquilibriumKind.STRAIN1_EE
    if pos2 and not I1.any():
        return EquilibriumKind.STRAIN2_EE
    if not I1.any() and not I2.any():
        return EquilibriumKind.DFE
    raise NewtonConvergenceError("converged state has mixed-sign strain support")


def dfe(spec: ModelSpec, N: float) -> Equilibrium:
    """Disease-free equilibrium: susceptibles spread evenly, no infection."""
    require_valid(spec)
    if N <= 0:
        raise ValueError("total mass must be positive")
    k = spec.k
    state = State(S=np.full(k, N / k), I1=np.zeros(k), I2=np.zeros(k))
    return Equilibrium(
        state=state,
        kind=EquilibriumKind.DFE,
        residual=residual_sup(spec, state.as_vector()),
    )


def _march_logistic(lap, d, beta, gamma, cap, I, t_total=1000.0, h=0.01):
    """Fixed-step RK4 on the single-strain logistic subsystem.

    The subsystem is cooperative with a unique positive attractor, so
    time-marching converges monotonically; used as a fallback seed when
    Newton stalls.
    """

    def g(x):
        return d * (lap @ x) + (beta * (cap - x) - gamma) * x

    steps = int(t_total / h)
    for _ in range(steps):
        k1 = g(I)
        k2 = g(I + 0.5 * h * k1)
        k3 = g(I + 0.5 * h * k2)
        k4 = g(I + h * k3)
        I = np.maximum(I + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), POSITIVITY_FLOOR)
    return I


def single_strain_ee_uniform(spec: ModelSpec, N: float, strain: int) -> Equilibrium:
    """Single-strain equilibrium under uniform dispersal (logistic solve).

    With all dispersal rates equal, susceptibles plus the endemic strain sum
    to N/k on every patch, and the infected profile is the unique positive
    root of a multi-patch logistic equation. Requires the strain's R0 > 1.
    """
    require_valid(spec)
    if not (spec.d_s == spec.strain(1).d == spec.strain(2).d):
        raise InvalidModelError("uniform dispersal required: d_s = d1 = d2")
    if spectral.r0_strain(spec, N, strain) <= 1.0:
        raise NoPositiveSolutionError(
            f"strain {strain} has R0 <= 1; no positive logistic solution"
        )
    lap, *_ = _spec_arrays(spec)
    sp = spec.strain(strain)
    k = spec.k
    cap = np.full(k, N / k)
    r = sp.gamma / sp.beta

    def fun(I):
        return sp.d * (lap @ I) + (sp.beta * (cap - I) - sp.gamma) * I

    def jac(I):
        return sp.d * lap + np.diag(sp.beta * (cap - I) - sp.gamma - sp.beta * I)

    I = np.maximum(N / k - r.max(), 0.0) * np.ones(k) + 1e-3
    I = _newton_damped(fun, jac, I, tol=UNIFORM_RESIDUAL_TOL)
    if I is None or I.min() <= POSITIVITY_FLOOR:
        I = _march_logistic(lap, sp.d, sp.beta, sp.gamma, cap, np.full(k, 1e-3))
        I = _newton_damped(fun, jac, I, tol=UNIFORM_RESIDUAL_TOL)
    if I is None or I.min() <= POSITIVITY_FLOOR:
        raise NewtonConvergenceError("logistic solve failed to converge")
    S = cap - I
    zeros = np.zeros(k)
    if strain == 1:
        state = State(S=S, I1=I, I2=zeros)
    else:
        state = State(S=S, I1=zeros, I2=I)
    return Equilibrium(
        state=state,
        kind=EquilibriumKind.STRAIN1_EE if strain == 1 else EquilibriumKind.STRAIN2_EE,
        residual=residual_sup(spec, state.as_vector()),
    )


def _newton_damped(fun, jac, x0, tol, max_iter=100, max_halvings=30):
    """Damped Newton with positivity projection; returns None on failure."""
    x = np.maximum(np.asarray(x0, dtype=float), POSITIVITY_FLOOR)
    F = fun(x)
    norm = float(np.max(np.abs(F)))
    for _ in range(max_iter):
        if norm < tol:
            return x
        try:
            step = np.linalg.solve(jac(x), -F)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(max_halvings):
            x_try = np.maximum(x + lam * step, POSITIVITY_FLOOR)
            F_try = fun(x_try)
            norm_try = float(np.max(np.abs(F_try)))
            if norm_try < (1.0 - 1e-4 * lam) * norm or norm_try < tol:
                break
            lam *= 0.5
        else:
            return None
        x, F, norm = x_try, F_try, norm_try
    return x if norm < tol else None


def _constrained_system(spec: ModelSpec, N: float, infected: tuple[int, ...]):
    """Steady-state equations with the last S-equation swapped for the mass law.

    `infected` lists the strains carried as unknowns; absent strains are
    structurally zero. Returns (fun, jac, pack, unpack) on the reduced
    unknown vector [S, I_l for l in infected].
    """
    lap, s1, s2 = _spec_arrays(spec)
    k = spec.k
    params = {1: s1, 2: s2}

    def unpack(z):
        S = z[:k]
        I = {l: np.zeros(k) for l in (1, 2)}
        for pos, l in enumerate(infected):
            I[l] = z[(pos + 1) * k : (pos + 2) * k]
        return S, I

    def to_full(z):
        S, I = unpack(z)
        return np.concatenate([S, I[1], I[2]])

    def fun(z):
        y = to_full(z)
        out = rhs_vector(
            lap, spec.d_s, s1.d, s2.d, s1.beta, s1.gamma, s2.beta, s2.gamma, y
        )
        rows = [out[:k].copy()]
        rows[0][k - 1] = y.sum() - N
        for l in infected:
            rows.append(out[l * k : (l + 1) * k])
        return np.concatenate(rows)

    def jac(z):
        S, I = unpack(z)
        n = (1 + len(infected)) * k
        J = np.zeros((n, n))
        infect_load = sum(params[l].beta * I[l] for l in (1, 2))
        J[:k, :k] = spec.d_s * lap - np.diag(infect_load)
        for pos, l in enumerate(infected):
            sp = params[l]
            c = (pos + 1) * k
            J[:k, c : c + k] = np.diag(sp.gamma - sp.beta * S)
            J[c : c + k, :k] = np.diag(sp.beta * I[l])
            J[c : c + k, c : c + k] = sp.d * lap + np.diag(sp.beta * S - sp.gamma)
        J[k - 1, :] = 1.0
        return J

    return fun, jac, to_full


def single_strain_ee(
    spec: ModelSpec, N: float, strain: int, seed: State | None = None
) -> Equilibrium:
    """Single-strain equilibrium by Newton on the reduced 2k system.

    Works for arbitrary dispersal rates. Restarts from perturbed seeds when
    the iteration stalls or converges to a non-positive profile.
    """
    require_valid(spec)
    if spectral.r0_strain(spec, N, strain) <= 1.0:
        raise NoPositiveSolutionError(f"strain {strain} has R0 <= 1")
    k = spec.k
    sp = spec.strain(strain)
    fun, jac, to_full = _constrained_system(spec, N, infected=(strain,))

    if seed is not None:
        I_seed = seed.I1 if strain == 1 else seed.I2
        z0 = np.concatenate([seed.S, I_seed])
    else:
        r = sp.gamma / sp.beta
        I0 = np.maximum(N / k - r.max(), 0.0) * np.ones(k) + 1e-3
        z0 = np.concatenate([np.full(k, N / k) - I0 * 0.5, I0])

    rng = np.random.default_rng(20240611)
    z_base = z0
    for attempt in range(1 + MAX_RESTARTS):
        z = _newton_damped(fun, jac, z_base, tol=RESIDUAL_TOL)
        if z is not None:
            y = to_full(z)
            I = y[strain * k : (strain + 1) * k]
            if I.min() > 1e-12 and residual_sup(spec, y) < RESIDUAL_TOL:
                state = State(S=y[:k], I1=y[k : 2 * k], I2=y[2 * k :])
                return Equilibrium(
                    state=state,
                    kind=(
                        EquilibriumKind.STRAIN1_EE
                        if strain == 1
                        else EquilibriumKind.STRAIN2_EE
                    ),
                    residual=residual_sup(spec, y),
                )
        jitter = np.exp(rng.uniform(-0.5, 0.5, size=z0.shape))
        z_base = z0 * jitter
        z_base *= N / z_base.sum()
    raise NewtonConvergenceError(
        f"single-strain solve for strain {strain} failed after {MAX_RESTARTS} restarts"
    )


def coexistence_search(
    spec: ModelSpec, N: float, seeds: list[State]
) -> list[Equilibrium]:
    """Newton-polish each seed on the full system; keep strictly positive roots.

    Returns deduplicated coexistence equilibria (possibly empty; an empty
    list means no root was found, not that none exists).
    """
    require_valid(spec)
    k = spec.k
    fun, jac, to_full = _constrained_system(spec, N, infected=(1, 2))
    found: list[Equilibrium] = []
    for seed in seeds:
        z0 = seed.as_vector()
        z = _newton_damped(fun, jac, z0, tol=RESIDUAL_TOL)
        if z is None:
            continue
        y = to_full(z)
        if min(y[k : 2 * k].min(), y[2 * k :].min()) <= 1e-12:
            continue
        res = residual_sup(spec, y)
        if res >= RESIDUAL_TOL:
            continue
        if any(
            float(np.max(np.abs(y - e.state.as_vector()))) < DEDUP_RADIUS
            for e in found
        ):
            continue
        state = State(S=y[:k], I1=y[k : 2 * k], I2=y[2 * k :])
        found.append(
            Equilibrium(
                state=state, kind=EquilibriumKind.COEXISTENCE_EE, residual=res
            )
        )
    return found


def jacobian(spec: ModelSpec, state: State) -> np.ndarray:
    """Analytic block Jacobian of the vector field at a state.

    The all-ones left vector annihilates it (conservation), so every column
    sums to zero.
    """
    require_valid(spec)
    lap, s1, s2 = _spec_arrays(spec)
    k = spec.k
    S, I1, I2 = state.S, state.I1, state.I2
    J = np.zeros((3 * k, 3 * k))
    J[:k, :k] = spec.d_s * lap - np.diag(s1.beta * I1 + s2.beta * I2)
    J[:k, k : 2 * k] = np.diag(s1.gamma - s1.beta * S)
    J[:k, 2 * k :] = np.diag(s2.gamma - s2.beta * S)
    J[k : 2 * k, :k] = np.diag(s1.beta * I1)
    J[k : 2 * k, k : 2 * k] = s1.d * lap + np.diag(s1.beta * S - s1.gamma)
    J[2 * k :, :k] = np.diag(s2.beta * I2)
    J[2 * k :, 2 * k :] = s2.d * lap + np.diag(s2.beta * S - s2.gamma)
    return J


def _mass_hyperplane_basis(n: int) -> np.ndarray:
    return scipy.linalg.null_space(np.ones((1, n)))


def stability(spec: ModelSpec, eq: Equilibrium) -> Equilibrium:
    """Classify linear stability on the mass-conserving hyperplane.

    The Jacobian's structural zero (conservation) is removed by a similarity
    transform onto an orthonormal basis of {sum = 0}; the verdict comes from
    the leading real part of the reduced spectrum, with a +-1e-8 band
    reported as marginal.
    """
    if eq.residual >= RESIDUAL_TOL:
        raise ValueError(f"equilibrium residual {eq.residual:.2e} exceeds {RESIDUAL_TOL}")
    J = jacobian(spec, eq.state)
    U = _mass_hyperplane_basis(J.shape[0])
    reduced = U.T @ J @ U
    leading = float(np.linalg.eigvals(reduced).real.max())
    if leading < -MARGINAL_BAND:
        verdict = StabilityVerdict.LINEARLY_STABLE
    elif leading > MARGINAL_BAND:
        verdict = StabilityVerdict.UNSTABLE
    else:
        verdict = StabilityVerdict.MARGINAL
    return dataclasses.replace(eq, stability=verdict, leading_eigenvalue=leading)
