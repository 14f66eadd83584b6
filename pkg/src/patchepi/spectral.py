"""Spectral quantities of the two-strain patch model.

Everything threshold-like in the model reduces to an eigenvalue: the
Laplacian spectrum controls mixing, the Perron root of the next-generation
matrix gives each strain's basic reproduction number, spectral bounds of
quasi-positive matrices decide linear stability, and Perron roots at a
resident strain's equilibrium give invasion numbers.

Dense symmetric problems go through `numpy.linalg.eigh`; Perron roots of
nonnegative (generally nonsymmetric) matrices are computed by power
iteration with Rayleigh-quotient stopping, started from the all-ones vector
(the Perron vector is positive, so the start never loses the dominant
direction). Dimensions are tiny throughout, so robustness beats speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import Laplacian, ModelSpec, build_laplacian, require_valid

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
SIGMA_TIE_TOL = 1e-12


class EigenConvergenceError(RuntimeError):
    """Power iteration did not reach the stopping tolerance within the cap."""


class ThresholdUndefinedError(ValueError):
    """Raised when a threshold quantity is requested outside its regime."""


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Eigenvalues of the migration Laplacian, sorted descending.

    `gap` is the negated second-largest eigenvalue (the mixing rate);
    `most_negative` is the bottom of the spectrum, whose magnitude is the
    constant that the explicit dispersal-threshold formula divides by.
    """

    eigenvalues: np.ndarray
    gap: float

    @property
    def most_negative(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class RiskSets:
    """Patch classifications; patch indices are 1-based.

    sigma1/sigma2 hold the patches where one strain's per-patch
    infectiousness ratio strictly exceeds the other's; sigma0 the ties.
    h_plus/h_minus hold, per strain, the patches whose mass-scaled local
    reproduction number is above/below one.
    """

    sigma1: tuple[int, ...]
    sigma2: tuple[int, ...]
    sigma0: tuple[int, ...]
    h_plus: tuple[tuple[int, ...], tuple[int, ...]]
    h_minus: tuple[tuple[int, ...], tuple[int, ...]]


@dataclass(frozen=True)
class SpectralReport:
    """One-stop spectral summary of a model at a given total mass."""

    total_mass: float
    r0_per_strain: tuple[float, float]
    r0: float
    lambda_star_per_strain: tuple[float, float]
    local_matrix: np.ndarray  # 2 x k, mass-scaled local reproduction numbers
    risk: RiskSets
    laplacian: LaplacianSpectrum
    invasion: tuple[float, float] | None


def laplacian_spectrum(lap: Laplacian) -> LaplacianSpectrum:
    """Full spectrum of the (symmetric) migration Laplacian."""
    w = np.linalg.eigvalsh(lap.matrix)[::-1].copy()
    if abs(w[0]) > 1e-10:
        raise EigenConvergenceError(
            f"top Laplacian eigenvalue should be 0, got {w[0]:.3e}"
        )
    return LaplacianSpectrum(eigenvalues=w, gap=float(-w[1]))


def spectral_radius_nonneg(A: np.ndarray) -> float:
    """Perron root of an entrywise-nonnegative matrix.

    Power iteration on the shifted matrix A + s*I (s = max row sum), which
    is primitive whenever A is irreducible, so the iteration cannot cycle.
    The shift moves the spectral radius by exactly s.
    """
    A = np.asarray(A, dtype=float)
    scale = float(np.abs(A).max()) if A.size else 0.0
    if scale == 0.0:
        return 0.0
    if A.min() < -1e-10 * scale:
        raise ValueError("matrix has negative entries beyond tolerance")
    shift = float(np.abs(A).sum(axis=1).max())
    B = A + shift * np.eye(A.shape[0])
    x = np.ones(A.shape[0])
    lam = math.inf
    for _ in range(POWER_MAX_ITER):
        y = B @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        y /= norm
        lam_new = float(y @ (B @ y))
        if abs(lam_new - lam) <= POWER_TOL * max(1.0, abs(lam_new)):
            return lam_new - shift
        lam = lam_new
        x = y
    raise EigenConvergenceError(
        f"power iteration did not converge in {POWER_MAX_ITER} iterations"
    )


def spectral_bound(A: np.ndarray) -> float:
    """Largest real part of the spectrum of a quasi-positive matrix.

    Symmetric inputs (the common case here: Laplacian plus a diagonal) use a
    dense symmetric eigensolve; general quasi-positive inputs are shifted to
    a nonnegative matrix whose Perron root, minus the shift, is the bound.
    """
    A = np.asarray(A, dtype=float)
    scale = float(np.abs(A).max()) if A.size else 0.0
    off = A - np.diag(np.diag(A))
    if off.size and off.min() < -1e-12 * max(scale, 1.0):
        raise ValueError("off-diagonal entries must be nonnegative")
    if np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        return float(np.linalg.eigvalsh(A)[-1])
    c = max(0.0, -float(A.diagonal().min()))
    return spectral_radius_nonneg(A + c * np.eye(A.shape[0])) - c


def next_gen_matrices(spec: ModelSpec, strain: int) -> tuple[np.ndarray, np.ndarray]:
    """New-infection matrix diag(beta) and transition matrix diag(gamma) - d*Lap.

    The transition matrix is a nonsingular M-matrix, so its inverse is
    entrywise nonnegative.
    """
    require_valid(spec)
    sp = spec.strain(strain)
    lap = build_laplacian(spec.graph).matrix
    F = np.diag(sp.beta)
    V = np.diag(sp.gamma) - sp.d * lap
    return F, V


def r0_strain(spec: ModelSpec, N: float, strain: int) -> float:
    """Basic reproduction number of one strain at total mass N.

    Perron root of F V^-1 scaled by the per-patch susceptible mass N/k;
    exactly linear in N.
    """
    if N <= 0:
        raise ValueError("total mass must be positive")
    F, V = next_gen_matrices(spec, strain)
    FVinv = F @ np.linalg.inv(V)
    return (N / spec.k) * spectral_radius_nonneg(FVinv)


def r0(spec: ModelSpec, N: float) -> float:
    """Two-strain basic reproduction number: max over the strains."""
    return max(r0_strain(spec, N, 1), r0_strain(spec, N, 2))


def local_reproduction(spec: ModelSpec, N: float) -> np.ndarray:
    """Mass-scaled per-patch infectiousness ratios, one row per strain."""
    require_valid(spec)
    out = np.empty((2, spec.k))
    for l in (1, 2):
        sp = spec.strain(l)
        out[l - 1] = (N / spec.k) * sp.beta / sp.gamma
    return out


def risk_sets(spec: ModelSpec, N: float) -> RiskSets:
    """Classify patches by which strain spreads faster and by local risk.

    The strain-vs-strain comparison uses the mass-free infectiousness ratio;
    high/low-risk membership uses the mass-scaled one. Ratios equal to
    within 1e-12 count as ties.
    """
    require_valid(spec)
    frak = np.array([spec.strain(l).beta / spec.strain(l).gamma for l in (1, 2)])
    diff = frak[0] - frak[1]
    sigma1, sigma2, sigma0 = [], [], []
    for j in range(spec.k):
        if abs(diff[j]) <= SIGMA_TIE_TOL:
            sigma0.append(j + 1)
        elif diff[j] > 0:
            sigma1.append(j + 1)
        else:
            sigma2.append(j + 1)
    scaled = (N / spec.k) * frak
    h_plus = tuple(
        tuple(j + 1 for j in range(spec.k) if scaled[l, j] > 1.0) for l in (0, 1)
    )
    h_minus = tuple(
        tuple(j + 1 for j in range(spec.k) if scaled[l, j] < 1.0) for l in (0, 1)
    )
    return RiskSets(
        sigma1=tuple(sigma1),
        sigma2=tuple(sigma2),
        sigma0=tuple(sigma0),
        h_plus=h_plus,
        h_minus=h_minus,
    )


def invasion_number_at(spec: ModelSpec, N: float, ee, strain: int) -> float:
    """Growth factor of a rare strain at the other strain's equilibrium.

    `ee` must be a single-strain equilibrium of the opposite strain with
    residual below 1e-10; the result is the Perron root of the rare strain's
    next-generation matrix evaluated on the resident susceptible profile.
    """
    from .equilibria import EquilibriumKind  # local import to avoid a cycle

    resident = 2 if strain == 1 else 1
    want = EquilibriumKind.STRAIN1_EE if resident == 1 else EquilibriumKind.STRAIN2_EE
    if ee.kind is not want:
        raise ValueError(
            f"need a strain-{resident} equilibrium to invade, got {ee.kind.value}"
        )
    if ee.residual >= 1e-10:
        raise ValueError(f"equilibrium residual {ee.residual:.2e} too large")
    sp = spec.strain(strain)
    _, V = next_gen_matrices(spec, strain)
    M = np.diag(sp.beta * ee.state.S) @ np.linalg.inv(V)
    return spectral_radius_nonneg(M)


def invasion_number_uniform(spec: ModelSpec, N: float, strain: int) -> float:
    """Invasion number under uniform dispersal, via the logistic equilibrium.

    Requires every dispersal rate equal and the resident strain's
    reproduction number above one, which makes the resident equilibrium
    unique and explicitly computable.
    """
    from .equilibria import single_strain_ee_uniform

    _require_uniform_dispersal(spec)
    resident = 2 if strain == 1 else 1
    ee = single_strain_ee_uniform(spec, N, resident)
    I_res = ee.state.I1 if resident == 1 else ee.state.I2
    sp = spec.strain(strain)
    _, V = next_gen_matrices(spec, strain)
    M = ((N / spec.k) * np.diag(sp.beta) - np.diag(sp.beta * I_res)) @ np.linalg.inv(V)
    return spectral_radius_nonneg(M)


def limit_invasion(spec: ModelSpec, N: float, strain: int) -> float:
    """Zero-dispersal limit of the invasion number.

    Per patch, the rare strain grows by its infectiousness ratio times the
    resident's leftover susceptible level, capped at the per-patch mass;
    the limit takes the best patch.
    """
    require_valid(spec)
    p = 2 if strain == 1 else 1
    sp = spec.strain(strain)
    rp = spec.strain(p).gamma / spec.strain(p).beta
    frak = sp.beta / sp.gamma
    return float(np.max(frak * np.minimum(N / spec.k, rp)))


def critical_ds(spec: ModelSpec, N: float, strain: int) -> float:
    """Susceptible dispersal threshold above which a subcritical strain dies out.

    Defined only when the strain's reproduction number is below one. The
    headroom epsilon is the largest mass increase that keeps the strain's
    linearization stable, located by bisection; the threshold combines it
    with the slowest Laplacian mode and global rate bounds.
    """
    require_valid(spec)
    if r0_strain(spec, N, strain) >= 1.0:
        raise ThresholdUndefinedError(
            "dispersal threshold is undefined when the strain's R0 is >= 1"
        )
    sp = spec.strain(strain)
    lap = build_laplacian(spec.graph).matrix
    k = spec.k

    def bound_at(eps: float) -> float:
        return spectral_bound(
            sp.d * lap + np.diag((N + eps) / k * sp.beta - sp.gamma)
        )

    r0l = r0_strain(spec, N, strain)
    hi = N * (1.0 / r0l - 1.0) * k
    lo = 0.0
    for _ in range(200):
        if bound_at(hi) >= 0.0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ThresholdUndefinedError("could not bracket the stability margin")
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if bound_at(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    eps_l = lo
    if eps_l <= 0.0:
        raise ThresholdUndefinedError("stability margin is numerically zero")
    beta_max = max(float(spec.strain(l).beta.max()) for l in (1, 2))
    gamma_max = max(float(spec.strain(l).gamma.max()) for l in (1, 2))
    d_star = abs(laplacian_spectrum(build_laplacian(spec.graph)).most_negative)
    value = 3.0 * N * k * math.sqrt(k) * (gamma_max + N * beta_max) / (d_star * eps_l)
    if not math.isfinite(value):
        raise ThresholdUndefinedError("dispersal threshold overflowed")
    return value


def harnack_constant(d: float, m_inf: float, lap: Laplacian) -> float:
    """Uniform sup-to-min bound for positive solutions of dispersal-driven growth.

    Built from the matrix exponential of the scaled Laplacian: the minimum
    entry of exp(d*Lap) measures how much one time unit of mixing spreads a
    point mass, and exp(2*m_inf) absorbs the growth-rate envelope.
    """
    if d <= 0:
        raise ValueError("dispersal rate must be positive")
    if m_inf < 0:
        raise ValueError("rate envelope must be nonnegative")
    M = lap.matrix
    w, Q = np.linalg.eigh(M)
    v = Q[:, -1].copy()
    if v.sum() < 0:
        v = -v
    if v.min() <= 0:
        raise ValueError("Laplacian top eigenvector is not strictly positive")
    v /= v.min()
    expm = scipy.linalg.expm(d * M)
    min_entry = float(expm.min())
    if not np.isfinite(expm).all() or min_entry <= 0:
        raise ArithmeticError("matrix exponential failed or graph not mixing")
    return math.exp(2.0 * m_inf) * float(v.max()) / min_entry


def theoretical_s_bounds(spec: ModelSpec) -> tuple[float, float]:
    """Long-run envelope for susceptibles when both strains persist.

    (min, max) over strains and patches of the recovery/transmission ratio.
    """
    require_valid(spec)
    ratios = np.concatenate(
        [spec.strain(l).gamma / spec.strain(l).beta for l in (1, 2)]
    )
    return float(ratios.min()), float(ratios.max())


def _require_uniform_dispersal(spec: ModelSpec) -> None:
    if not (spec.d_s == spec.strain(1).d == spec.strain(2).d):
        raise ValueError(
            "uniform dispersal required: d_s, d1, d2 must all be equal"
        )


def spectral_report(
    spec: ModelSpec, N: float, with_invasion: bool = True
) -> SpectralReport:
    """Assemble the full spectral summary at total mass N.

    Invasion numbers are included only where they are defined: uniform
    dispersal and both reproduction numbers above one.
    """
    require_valid(spec)
    lap = build_laplacian(spec.graph)
    r0s = (r0_strain(spec, N, 1), r0_strain(spec, N, 2))
    lam = tuple(
        spectral_bound(
            spec.strain(l).d * lap.matrix
            + np.diag((N / spec.k) * spec.strain(l).beta - spec.strain(l).gamma)
        )
        for l in (1, 2)
    )
    invasion = None
    if with_invasion and min(r0s) > 1.0:
        uniform = spec.d_s == spec.strain(1).d == spec.strain(2).d
        if uniform:
            invasion = (
                invasion_number_uniform(spec, N, 1),
                invasion_number_uniform(spec, N, 2),
            )
    return SpectralReport(
        total_mass=float(N),
        r0_per_strain=r0s,
        r0=max(r0s),
        lambda_star_per_strain=lam,
        local_matrix=local_reproduction(spec, N),
        risk=risk_sets(spec, N),
        laplacian=laplacian_spectrum(lap),
        invasion=invasion,
    )
