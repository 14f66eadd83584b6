"""Selects the ODE kernel at import: compiled extension if built, NumPy otherwise.

Both kernels implement identical stepping semantics; `use_backend` lets tests
and benchmarks force one explicitly.
"""

from __future__ import annotations

from . import _ode_py

try:
    from . import _ode_cy

    _DEFAULT = "compiled"
except ImportError:  # extension not built on this install
    _ode_cy = None
    _DEFAULT = "python"

_active = _DEFAULT

STATUS_OK = _ode_py.STATUS_OK
STATUS_STEP_UNDERFLOW = _ode_py.STATUS_STEP_UNDERFLOW
STATUS_MASS_DRIFT = _ode_py.STATUS_MASS_DRIFT
MASS_TOL_REL = _ode_py.MASS_TOL_REL


def available_backends() -> tuple[str, ...]:
    return ("python",) if _ode_cy is None else ("compiled", "python")


def active_backend() -> str:
    return _active


def use_backend(name: str) -> None:
    """Force 'compiled' or 'python'; raises if the extension is unavailable."""
    global _active
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _ode_cy is None:
        raise RuntimeError("compiled backend requested but the extension is not built")
    _active = name


def kernel(name: str | None = None):
    """Return the module implementing `integrate_dopri5` for a backend."""
    use = _active if name is None else name
    if use == "compiled":
        if _ode_cy is None:
            raise RuntimeError("compiled backend is not built")
        return _ode_cy
    return _ode_py
