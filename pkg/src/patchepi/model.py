"""Domain types for a two-strain SIS epidemic on a network of patches.

A model instance couples k >= 2 patches through a symmetric matrix of
migration rates. Each strain has per-patch transmission and recovery rates
and its own dispersal rate; susceptibles disperse at a separate rate. The
vector field conserves the total population mass, so trajectories live on a
simplex-like invariant set.

All types are immutable after construction (arrays are marked read-only),
and every operation here is a pure function, so instances can be shared
freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidModelError(ValueError):
    """Raised when an operation receives a spec that fails validation."""


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PatchGraph:
    """Patch count and symmetric matrix of pairwise migration rates.

    ``rates[i, j]`` is the migration rate from patch j to patch i (per unit
    time). The diagonal must be zero and the support graph connected.
    """

    k: int
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", _readonly(self.rates))
        if self.rates.shape != (self.k, self.k):
            raise InvalidModelError(
                f"migration matrix must be {self.k}x{self.k}, got {self.rates.shape}"
            )


@dataclass(frozen=True)
class Laplacian:
    """Migration Laplacian: off-diagonals are the rates, columns sum to zero."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def k(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class StrainParams:
    """Per-patch transmission/recovery rates and dispersal rate of one strain."""

    beta: np.ndarray
    gamma: np.ndarray
    d: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "gamma", _readonly(self.gamma))
        object.__setattr__(self, "d", float(self.d))


@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization: patch graph, susceptible dispersal, two strains."""

    graph: PatchGraph
    d_s: float
    strains: tuple[StrainParams, StrainParams]

    def __post_init__(self):
        object.__setattr__(self, "d_s", float(self.d_s))
        object.__setattr__(self, "strains", tuple(self.strains))
        if len(self.strains) != 2:
            raise InvalidModelError("exactly two strains are required")
        k = self.graph.k
        for idx, sp in enumerate(self.strains, start=1):
            for name, vec in (("beta", sp.beta), ("gamma", sp.gamma)):
                if vec.shape != (k,):
                    raise InvalidModelError(
                        f"strain {idx} {name} must have length {k}, got {vec.shape}"
                    )

    @property
    def k(self) -> int:
        return self.graph.k

    def strain(self, l: int) -> StrainParams:
        """Strain parameters by 1-based strain index."""
        if l not in (1, 2):
            raise ValueError(f"strain index must be 1 or 2, got {l}")
        return self.strains[l - 1]


@dataclass(frozen=True)
class State:
    """Nonnegative per-patch populations: susceptibles and both infected groups."""

    S: np.ndarray
    I1: np.ndarray
    I2: np.ndarray

    def __post_init__(self):
        for name in ("S", "I1", "I2"):
            vec = _readonly(getattr(self, name))
            object.__setattr__(self, name, vec)
            if np.any(vec < 0):
                raise InvalidModelError(f"{name} has negative entries")
        if not (self.S.shape == self.I1.shape == self.I2.shape):
            raise InvalidModelError("S, I1, I2 must have equal lengths")

    @property
    def k(self) -> int:
        return self.S.shape[0]

    def as_vector(self) -> np.ndarray:
        """Stacked [S, I1, I2] vector of length 3k."""
        return np.concatenate([self.S, self.I1, self.I2])

    @staticmethod
    def from_vector(y: np.ndarray) -> "State":
        k = y.shape[0] // 3
        return State(S=y[:k], I1=y[k : 2 * k], I2=y[2 * k :])


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of a state; entries may have either sign."""

    dS: np.ndarray
    dI1: np.ndarray
    dI2: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dS, self.dI1, self.dI2])


@dataclass(frozen=True)
class ValidationReport:
    """List of violated invariants; empty means the spec is usable."""

    violations: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def _support_connected(rates: np.ndarray) -> bool:
    """BFS on the support graph of the migration matrix."""
    k = rates.shape[0]
    seen = np.zeros(k, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in range(k):
            if not seen[j] and (rates[i, j] > 0 or rates[j, i] > 0):
                seen[j] = True
                stack.append(j)
    return bool(seen.all())


def validate(spec: ModelSpec) -> ValidationReport:
    """Check every structural invariant of a model spec.

    Returns a report listing each violation; an empty report certifies the
    standing assumptions (nonnegative symmetric irreducible migration,
    strictly positive rates). Callers must refuse specs with violations.
    """
    errs: list[str] = []
    g = spec.graph
    if g.k < 2:
        errs.append(f"patch count must be >= 2, got {g.k}")
    L = g.rates
    if np.any(L < 0):
        errs.append("migration rates must be nonnegative")
    if np.any(np.diag(L) != 0):
        errs.append("migration matrix diagonal must be zero")
    if not np.array_equal(L, L.T):
        errs.append("migration matrix must be symmetric")
    elif g.k >= 2 and not _support_connected(L):
        errs.append("migration support graph must be connected (irreducible)")
    for idx, sp in enumerate(spec.strains, start=1):
        if np.any(sp.beta <= 0):
            errs.append(f"strain {idx} transmission rates must be strictly positive")
        if np.any(sp.gamma <= 0):
            errs.append(f"strain {idx} recovery rates must be strictly positive")
        if sp.d <= 0:
            errs.append(f"strain {idx} dispersal rate must be strictly positive")
    if spec.d_s <= 0:
        errs.append("susceptible dispersal rate must be strictly positive")
    return ValidationReport(violations=tuple(errs))


def require_valid(spec: ModelSpec) -> None:
    """Raise InvalidModelError if the spec does not pass validation."""
    report = validate(spec)
    if not report.ok:
        raise InvalidModelError("; ".join(report.violations))


def build_laplacian(graph: PatchGraph) -> Laplacian:
    """Assemble the migration Laplacian from the pairwise rate matrix.

    The result has the rates off-diagonal and minus the column sums on the
    diagonal, so every column (and, by symmetry, every row) sums to zero.
    """
    L = graph.rates
    M = L.copy()
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -M.sum(axis=0))
    return Laplacian(matrix=M)


def rhs_vector(
    lap: np.ndarray,
    d_s: float,
    d1: float,
    d2: float,
    beta1: np.ndarray,
    gamma1: np.ndarray,
    beta2: np.ndarray,
    gamma2: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """Vector field on the stacked [S, I1, I2] vector. Sums to zero."""
    k = lap.shape[0]
    S, I1, I2 = y[:k], y[k : 2 * k], y[2 * k :]
    dS = d_s * (lap @ S) + (gamma1 - beta1 * S) * I1 + (gamma2 - beta2 * S) * I2
    dI1 = d1 * (lap @ I1) + (beta1 * S - gamma1) * I1
    dI2 = d2 * (lap @ I2) + (beta2 * S - gamma2) * I2
    return np.concatenate([dS, dI1, dI2])


def rhs(spec: ModelSpec, state: State) -> StateDerivative:
    """Evaluate the model vector field at a state.

    Infection moves mass between compartments and dispersal moves it between
    patches, so the grand sum of all derivative entries is zero up to
    rounding.
    """
    if state.k != spec.k:
        raise InvalidModelError(
            f"state has {state.k} patches but spec has {spec.k}"
        )
    lap = build_laplacian(spec.graph).matrix
    s1, s2 = spec.strains
    out = rhs_vector(
        lap, spec.d_s, s1.d, s2.d, s1.beta, s1.gamma, s2.beta, s2.gamma,
        state.as_vector(),
    )
    k = spec.k
    return StateDerivative(dS=out[:k], dI1=out[k : 2 * k], dI2=out[2 * k :])


def total_mass(state: State) -> float:
    """Total population over all patches and compartments."""
    return float(state.S.sum() + state.I1.sum() + state.I2.sum())


def mean_center(v: Sequence[float] | np.ndarray) -> np.ndarray:
    """Subtract the mean from every entry; the result sums to zero.

    Idempotent up to rounding, and bounded by twice the input sup-norm.
    """
    arr = np.asarray(v, dtype=float)
    return arr - arr.sum() / arr.shape[0]
