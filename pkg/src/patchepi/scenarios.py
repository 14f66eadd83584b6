"""Scenario configs: JSON loading, validation, and the built-in catalog.

The built-in catalog ships fifteen two-patch runs organized in five families
that exercise the main dynamical regimes: subcritical extinction, exclusion
of the strain with the smaller reproduction number when the other strain's
infectiousness ratio is patch-independent (in both directions), the
dispersal-dependent switch between coexistence and exclusion, and robust
coexistence under uniform dispersal.

A config may declare a total mass; when the declared value disagrees with
the mass of the initial data, the loader records a provenance warning and
trusts the initial data, since the dynamics conserve whatever mass they are
given.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import IntegrationOptions
from .model import ModelSpec, PatchGraph, State, StrainParams, total_mass, validate

ANALYSES = frozenset(
    {"spectral", "equilibria", "stability", "lyapunov", "harnack", "persistence", "sweep"}
)
DEFAULT_ANALYSES = ("spectral", "equilibria", "stability", "harnack", "persistence")


class ConfigError(ValueError):
    """Malformed or invalid scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    spec: ModelSpec
    initial: State
    declared_N: float | None
    integration: IntegrationOptions
    analyses: tuple[str, ...]
    sweep_grid: tuple | None
    warnings: tuple[str, ...] = field(default=())

    @property
    def mass(self) -> float:
        return total_mass(self.initial)


def _need(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise ConfigError(f"{ctx}: missing field '{key}'")
    return obj[key]


def _vector(raw, length: int, ctx: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (length,):
        raise ConfigError(f"{ctx}: expected a length-{length} vector, got shape {arr.shape}")
    return arr


def config_from_dict(doc: dict, name_hint: str = "<config>") -> ScenarioConfig:
    """Build and validate a scenario from a parsed JSON document."""
    name = str(doc.get("name", name_hint))
    model = _need(doc, "model", name)
    k = int(_need(model, "k", f"{name}.model"))
    L = np.asarray(_need(model, "L", f"{name}.model"), dtype=float)
    if L.shape != (k, k):
        raise ConfigError(f"{name}.model.L: expected {k}x{k} matrix, got {L.shape}")
    strains_raw = _need(model, "strains", f"{name}.model")
    if len(strains_raw) != 2:
        raise ConfigError(f"{name}.model.strains: exactly two strains required")
    strains = tuple(
        StrainParams(
            beta=_vector(_need(s, "beta", f"{name}.strains[{i}]"), k, f"{name}.strains[{i}].beta"),
            gamma=_vector(_need(s, "gamma", f"{name}.strains[{i}]"), k, f"{name}.strains[{i}].gamma"),
            d=float(_need(s, "d", f"{name}.strains[{i}]")),
        )
        for i, s in enumerate(strains_raw, start=1)
    )
    spec = ModelSpec(
        graph=PatchGraph(k=k, rates=L),
        d_s=float(_need(model, "d_S", f"{name}.model")),
        strains=strains,
    )
    report = validate(spec)
    if not report.ok:
        raise ConfigError(f"{name}: invalid model: " + "; ".join(report.violations))

    init_raw = _need(doc, "initial", name)
    initial = State(
        S=_vector(_need(init_raw, "S", f"{name}.initial"), k, f"{name}.initial.S"),
        I1=_vector(_need(init_raw, "I1", f"{name}.initial"), k, f"{name}.initial.I1"),
        I2=_vector(_need(init_raw, "I2", f"{name}.initial"), k, f"{name}.initial.I2"),
    )

    warnings: list[str] = []
    declared = doc.get("declared_N")
    if declared is not None:
        declared = float(declared)
        mass = total_mass(initial)
        if abs(declared - mass) > 1e-9 * max(1.0, abs(declared)):
            warnings.append(
                f"declared total mass {declared:g} disagrees with the initial "
                f"data mass {mass:g}; using {mass:g} (the dynamics conserve it)"
            )

    integ_raw = dict(doc.get("integration", {}))
    unknown = set(integ_raw) - {
        "t_end", "rel_tol", "abs_tol", "max_step", "sample_every", "clamp_threshold"
    }
    if unknown:
        raise ConfigError(f"{name}.integration: unknown fields {sorted(unknown)}")
    try:
        integration = IntegrationOptions(**integ_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}.integration: {exc}") from exc

    analyses = tuple(doc.get("analyses", DEFAULT_ANALYSES))
    bad = set(analyses) - ANALYSES
    if bad:
        raise ConfigError(f"{name}.analyses: unknown toggles {sorted(bad)}")

    sweep_grid = doc.get("sweep_grid")
    if sweep_grid is not None:
        parsed = []
        for entry in sweep_grid:
            if isinstance(entry, (int, float)):
                parsed.append(float(entry))
            elif isinstance(entry, (list, tuple)) and len(entry) == 3:
                parsed.append(tuple(float(v) for v in entry))
            else:
                raise ConfigError(
                    f"{name}.sweep_grid: entries must be a rate or a [d_S, d1, d2] triple"
                )
        sweep_grid = tuple(parsed)

    return ScenarioConfig(
        name=name,
        spec=spec,
        initial=initial,
        declared_N=declared,
        integration=integration,
        analyses=analyses,
        sweep_grid=sweep_grid,
        warnings=tuple(warnings),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a scenario config from a JSON file.

    Parse errors carry line/column diagnostics; validation failures name the
    offending field. Provenance warnings (e.g. a declared mass that differs
    from the initial data) are attached to the returned config.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return config_from_dict(doc, name_hint=path.stem)


_UNIT_2PATCH = [[0.0, 1.0], [1.0, 0.0]]


def _builtin(name, d_S, d1, d2, beta1, gamma1, beta2, gamma2, S, I1, I2,
             declared_N=None, sweep_grid=None):
    return {
        "name": name,
        "model": {
            "k": 2,
            "L": _UNIT_2PATCH,
            "d_S": d_S,
            "strains": [
                {"beta": beta1, "gamma": gamma1, "d": d1},
                {"beta": beta2, "gamma": gamma2, "d": d2},
            ],
        },
        "initial": {"S": S, "I1": I1, "I2": I2},
        **({"declared_N": declared_N} if declared_N is not None else {}),
        "integration": {"t_end": 2000.0},
        **({"sweep_grid": sweep_grid} if sweep_grid is not None else {}),
    }


_SIM1 = dict(beta1=[2, 3], gamma1=[1, 2], beta2=[1, 4], gamma2=[2, 3])
_SIM2 = dict(beta1=[4, 6], gamma1=[2, 3], beta2=[1, 4], gamma2=[2, 3])
_SIM3 = dict(beta1=[2 / 3, 1], gamma1=[2, 3], beta2=[1, 4], gamma2=[2, 3])
_SIM45 = dict(beta1=[2, 3], gamma1=[2, 3], beta2=[1, 4], gamma2=[2, 3])

_BUILTIN_DOCS = [
    _builtin("sim1a", 3, 1, 2, **_SIM1, S=[0.05, 0.05], I1=[0.05, 0.05],
             I2=[0.05, 0.05], declared_N=0.3),
    _builtin("sim1b", 3, 1, 2, **_SIM1, S=[0.25, 0.25], I1=[0.25, 0.25],
             I2=[0.25, 0.25], declared_N=1.5),
    # The source describes this run as having total mass 4, but its initial
    # data sum to 5; the loader warns and keeps 5.
    _builtin("sim1c", 3, 1, 2, **_SIM1, S=[1, 2], I1=[0.5, 0.5], I2=[0.5, 0.5],
             declared_N=4.0),
    _builtin("sim2a", 3, 1, 2, **_SIM2, S=[1, 2], I1=[0.5, 0.5], I2=[0.5, 0.5]),
    _builtin("sim2b", 4, 6, 2, **_SIM2, S=[1, 2], I1=[0.5, 0.5], I2=[0.5, 0.5]),
    _builtin("sim2c", 10, 0.5, 20, **_SIM2, S=[1, 2], I1=[0.5, 0.5], I2=[0.5, 0.5]),
    _builtin("sim3a", 5, 1, 2, **_SIM3, S=[1, 2], I1=[1, 1], I2=[1, 1]),
    _builtin("sim3b", 0.005, 0.5, 2, **_SIM3, S=[1, 2], I1=[1, 1], I2=[1, 1]),
    _builtin("sim3c", 10, 0.005, 2, **_SIM3, S=[1, 2], I1=[1, 1], I2=[1, 1]),
    _builtin("sim4a", 5, 1, 2, **_SIM45, S=[1, 2], I1=[2, 1], I2=[4, 1],
             sweep_grid=[[5, 1, 2], [35, 35, 2], [40, 40, 2]]),
    _builtin("sim4b", 35, 35, 2, **_SIM45, S=[1, 2], I1=[2, 1], I2=[4, 1]),
    _builtin("sim4c", 40, 40, 2, **_SIM45, S=[1, 2], I1=[2, 1], I2=[4, 1]),
    _builtin("sim5a", 0.005, 0.005, 0.005, **_SIM45, S=[1, 2], I1=[2, 1],
             I2=[4, 1], sweep_grid=[0.005, 35, 40]),
    _builtin("sim5b", 35, 35, 35, **_SIM45, S=[1, 2], I1=[2, 1], I2=[4, 1]),
    _builtin("sim5c", 40, 40, 40, **_SIM45, S=[1, 2], I1=[2, 1], I2=[4, 1]),
]

BUILTIN_NAMES = tuple(doc["name"] for doc in _BUILTIN_DOCS)


def builtin_scenario(name: str) -> ScenarioConfig:
    for doc in _BUILTIN_DOCS:
        if doc["name"] == name:
            return config_from_dict(doc)
    raise ConfigError(
        f"unknown scenario {name!r}; built-ins: {', '.join(BUILTIN_NAMES)}"
    )


def all_builtin_scenarios() -> list[ScenarioConfig]:
    return [config_from_dict(doc) for doc in _BUILTIN_DOCS]
