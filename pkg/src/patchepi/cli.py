"""Command-line front end.

    patchepi <command> [--config PATH | --scenario NAME] [--out DIR]
                       [--t-end X] [--grid d1,d2,...]

Commands: analyze, simulate, equilibria, classify, sweep, reproduce-all.
Outputs are deterministic files (CSV trajectories, JSON summaries, SVG line
plots) plus a short human-readable synopsis on stdout. Failures print a
machine-readable JSON object on stderr and exit with 2 (validation),
3 (solver), or 4 (I/O).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import backend, dynamics, equilibria, reports, spectral
from .dynamics import IntegrationOptions, Trajectory, Verdict
from .equilibria import (
    NewtonConvergenceError,
    NoPositiveSolutionError,
)
from .model import InvalidModelError, State
from .scenarios import (
    BUILTIN_NAMES,
    ConfigError,
    ScenarioConfig,
    all_builtin_scenarios,
    builtin_scenario,
    load_config,
)
from .spectral import EigenConvergenceError, ThresholdUndefinedError

COMMANDS = ("analyze", "simulate", "equilibria", "classify", "sweep", "reproduce-all")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


@dataclass(frozen=True)
class RunSummary:
    name: str
    command: str
    warnings: tuple[str, ...]
    spectral: dict | None = None
    equilibria: tuple[dict, ...] = ()
    verdict: str | None = None
    window: dict | None = None
    monitors: dict | None = None
    sweep: tuple[dict, ...] = ()
    files: tuple[str, ...] = ()


def _spectral_dict(config: ScenarioConfig) -> dict:
    rep = spectral.spectral_report(config.spec, config.mass)
    s_lo, s_hi = spectral.theoretical_s_bounds(config.spec)
    out = {
        "total_mass": rep.total_mass,
        "r0_per_strain": list(rep.r0_per_strain),
        "r0": rep.r0,
        "lambda_star_per_strain": list(rep.lambda_star_per_strain),
        "local_matrix": rep.local_matrix,
        "risk": rep.risk,
        "laplacian_eigenvalues": rep.laplacian.eigenvalues,
        "laplacian_gap": rep.laplacian.gap,
        "invasion": list(rep.invasion) if rep.invasion is not None else None,
        "s_bounds": [s_lo, s_hi],
    }
    thresholds = {}
    for l in (1, 2):
        if rep.r0_per_strain[l - 1] < 1.0:
            try:
                thresholds[f"strain{l}"] = spectral.critical_ds(
                    config.spec, config.mass, l
                )
            except ThresholdUndefinedError:
                pass
    out["susceptible_dispersal_thresholds"] = thresholds
    return out


def _equilibrium_dict(eq: equilibria.Equilibrium) -> dict:
    return {
        "kind": eq.kind.value,
        "residual": eq.residual,
        "stability": eq.stability.value,
        "leading_eigenvalue": eq.leading_eigenvalue,
        "S": eq.state.S,
        "I1": eq.state.I1,
        "I2": eq.state.I2,
    }


def _monitor_dict(config: ScenarioConfig, traj: Trajectory) -> dict:
    spec = config.spec
    N = config.mass
    c_tilde = dynamics.harnack_envelope_constant(spec, N)
    harnack = dynamics.harnack_monitor(traj, c_tilde)
    r0s = (
        spectral.r0_strain(spec, N, 1),
        spectral.r0_strain(spec, N, 2),
    )
    s_lo, s_hi = spectral.theoretical_s_bounds(spec)
    persistence = dynamics.persistence_check(traj, s_lo, s_hi, min(r0s) > 1.0)
    monitors = {
        "mass_max_rel_error": float(traj.mass_error.max()),
        "harnack": dataclasses.asdict(harnack),
        "persistence": dataclasses.asdict(persistence),
        "n_steps": traj.n_steps,
        "n_rejected": traj.n_rejected,
    }
    if traj.lyapunov is not None:
        diffs = np.diff(traj.lyapunov)
        monitors["lyapunov_max_increase"] = float(diffs.max()) if diffs.size else 0.0
    return monitors


def _integrate(config: ScenarioConfig) -> Trajectory:
    return dynamics.integrate(config.spec, config.initial, config.integration)


def _equilibria_list(config: ScenarioConfig, traj: Trajectory | None):
    spec = config.spec
    N = config.mass
    found = [equilibria.stability(spec, equilibria.dfe(spec, N))]
    for l in (1, 2):
        if spectral.r0_strain(spec, N, l) > 1.0:
            try:
                ee = equilibria.single_strain_ee(spec, N, l)
                found.append(equilibria.stability(spec, ee))
            except (NoPositiveSolutionError, NewtonConvergenceError):
                pass
    seeds = []
    if traj is not None:
        seeds.append(traj.terminal_state())
    roots = equilibria.coexistence_search(spec, N, seeds)
    found.extend(equilibria.stability(spec, root) for root in roots)
    return found


def run(config: ScenarioConfig, command: str, out_dir: Path,
        grid=None) -> RunSummary:
    """Execute one pipeline and write its outputs under out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    base = out_dir / config.name

    if command == "analyze":
        summary = RunSummary(
            name=config.name,
            command=command,
            warnings=config.warnings,
            spectral=_spectral_dict(config),
        )
    elif command == "simulate":
        traj = _integrate(config)
        files.append(str(reports.emit_trajectory_csv(traj, f"{base}.trajectory.csv")))
        files.append(str(reports.emit_plot_svg(traj, f"{base}.svg")))
        summary = RunSummary(
            name=config.name,
            command=command,
            warnings=config.warnings,
            spectral=_spectral_dict(config),
            monitors=_monitor_dict(config, traj),
        )
    elif command == "classify":
        traj = _integrate(config)
        outcome = dynamics.classify_outcome(traj)
        files.append(str(reports.emit_trajectory_csv(traj, f"{base}.trajectory.csv")))
        files.append(str(reports.emit_plot_svg(traj, f"{base}.svg")))
        summary = RunSummary(
            name=config.name,
            command=command,
            warnings=config.warnings,
            spectral=_spectral_dict(config),
            verdict=outcome.verdict.value,
            window=dataclasses.asdict(outcome.window),
            monitors=_monitor_dict(config, traj),
        )
    elif command == "equilibria":
        traj = _integrate(config)
        found = _equilibria_list(config, traj)
        summary = RunSummary(
            name=config.name,
            command=command,
            warnings=config.warnings,
            spectral=_spectral_dict(config),
            equilibria=tuple(_equilibrium_dict(eq) for eq in found),
        )
    elif command == "sweep":
        use_grid = grid if grid is not None else config.sweep_grid
        if not use_grid:
            raise ConfigError(
                f"{config.name}: sweep requested but no grid given "
                "(use --grid or a sweep_grid config field)"
            )
        rows = dynamics.sweep_dispersal(
            config.spec, config.initial, use_grid, config.integration
        )
        row_dicts = tuple(
            {
                "d_S": r.d_s,
                "d1": r.d1,
                "d2": r.d2,
                "r0_per_strain": list(r.r0_per_strain),
                "invasion": list(r.invasion) if r.invasion else None,
                "verdict": r.verdict.value if r.verdict else None,
                "error": r.error,
            }
            for r in rows
        )
        sweep_csv = out_dir / f"{config.name}.sweep.csv"
        lines = ["d_S,d1,d2,r0_1,r0_2,invasion_1,invasion_2,verdict,error"]
        for r in row_dicts:
            inv = r["invasion"] or ["", ""]
            lines.append(
                ",".join(
                    [
                        f"{r['d_S']:.12g}", f"{r['d1']:.12g}", f"{r['d2']:.12g}",
                        f"{r['r0_per_strain'][0]:.12g}",
                        f"{r['r0_per_strain'][1]:.12g}",
                        f"{inv[0]:.12g}" if inv[0] != "" else "",
                        f"{inv[1]:.12g}" if inv[1] != "" else "",
                        r["verdict"] or "",
                        (r["error"] or "").replace(",", ";"),
                    ]
                )
            )
        sweep_csv.write_text("\n".join(lines) + "\n")
        files.append(str(sweep_csv))
        summary = RunSummary(
            name=config.name,
            command=command,
            warnings=config.warnings,
            sweep=row_dicts,
        )
    else:
        raise ConfigError(f"unknown command {command!r}")

    summary = replace(summary, files=tuple(files + [f"{base}.summary.json"]))
    reports.emit_summary_json(dataclasses.asdict(summary), f"{base}.summary.json")
    return summary


def reproduce_all(out_dir: Path, t_end: float | None = None) -> list[RunSummary]:
    """Run every built-in scenario through the classify pipeline."""
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for config in all_builtin_scenarios():
        if t_end is not None:
            config = replace(config, integration=replace(config.integration, t_end=t_end))
        summaries.append(run(config, "classify", out_dir))
    table_csv = out_dir / "verdicts.csv"
    lines = ["scenario,verdict,r0_1,r0_2"]
    for s in summaries:
        lines.append(
            f"{s.name},{s.verdict},{s.spectral['r0_per_strain'][0]:.6g},"
            f"{s.spectral['r0_per_strain'][1]:.6g}"
        )
    table_csv.write_text("\n".join(lines) + "\n")
    reports.emit_summary_json(
        {"verdicts": {s.name: s.verdict for s in summaries}},
        out_dir / "verdicts.json",
    )
    return summaries


def _parse_grid(text: str):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"--grid: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchepi",
        description="Two-strain SIS patch-network epidemics: analysis and simulation.",
    )
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="path to a scenario JSON file")
    src.add_argument(
        "--scenario",
        choices=BUILTIN_NAMES,
        help="name of a built-in scenario",
    )
    parser.add_argument("--out", type=Path, default=Path("patchepi-out"))
    parser.add_argument("--t-end", type=float, default=None)
    parser.add_argument("--grid", type=str, default=None,
                        help="comma-separated dispersal rates for sweep")
    return parser


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "reproduce-all":
            summaries = reproduce_all(args.out, t_end=args.t_end)
            print(f"backend: {backend.active_backend()}")
            for s in summaries:
                print(f"{s.name:8s} {s.verdict}")
            print(f"wrote {args.out}/verdicts.csv")
            return EXIT_OK

        if args.config is not None:
            config = load_config(args.config)
        else:
            config = builtin_scenario(args.scenario or "sim1a")
        if args.t_end is not None:
            config = replace(
                config, integration=replace(config.integration, t_end=args.t_end)
            )
        grid = _parse_grid(args.grid) if args.grid else None
        summary = run(config, args.command, args.out, grid=grid)
        for w in summary.warnings:
            print(f"warning: {w}")
        if summary.verdict:
            print(f"{summary.name}: {summary.verdict}")
        if summary.spectral:
            r1, r2 = summary.spectral["r0_per_strain"]
            print(f"R0 per strain: {r1:.6g}, {r2:.6g}")
        for row in summary.sweep:
            print(
                f"d_S={row['d_S']:g} d1={row['d1']:g} d2={row['d2']:g} "
                f"-> {row['verdict'] or row['error']}"
            )
        for f in summary.files:
            print(f"wrote {f}")
        return EXIT_OK
    except (reports.ReportError, OSError) as exc:
        _emit_error("io", str(exc))
        return EXIT_IO
    except (
        dynamics.IntegrationError,
        NewtonConvergenceError,
        EigenConvergenceError,
    ) as exc:
        _emit_error("solver", str(exc))
        return EXIT_SOLVER
    except (ConfigError, InvalidModelError, ValueError) as exc:
        _emit_error("validation", str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
