"""File emitters: trajectory CSV, standalone SVG line plots, summary JSON.

All writers are deterministic: fixed field order, fixed float formatting,
no timestamps, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import Trajectory

_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]


class ReportError(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def emit_trajectory_csv(traj: Trajectory, path: str | Path) -> Path:
    """Write the sampled trajectory with 12 significant digits per value.

    Header: t,S_1..S_k,I1_1..I1_k,I2_1..I2_k,mass_error.
    """
    if traj.times.shape[0] == 0:
        raise ReportError("refusing to write an empty trajectory")
    path = Path(path)
    k = traj.k
    header = (
        ["t"]
        + [f"S_{j}" for j in range(1, k + 1)]
        + [f"I1_{j}" for j in range(1, k + 1)]
        + [f"I2_{j}" for j in range(1, k + 1)]
        + ["mass_error"]
    )
    lines = [",".join(header)]
    for i in range(traj.times.shape[0]):
        row = [_fmt(traj.times[i])]
        row += [_fmt(v) for v in traj.states[i]]
        row.append(_fmt(traj.mass_error[i]))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _axis_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def emit_plot_svg(
    traj: Trajectory,
    path: str | Path,
    series: tuple[str, ...] = ("S", "I1", "I2"),
) -> Path:
    """Render selected compartment-patch series as a standalone SVG.

    One polyline per compartment and patch, time on the horizontal axis,
    with axis labels and a legend.
    """
    if traj.times.shape[0] == 0:
        raise ReportError("refusing to plot an empty trajectory")
    comp_offset = {"S": 0, "I1": 1, "I2": 2}
    for s in series:
        if s not in comp_offset:
            raise ReportError(f"unknown series {s!r}; choose from S, I1, I2")
    path = Path(path)
    k = traj.k
    width, height = 840, 520
    ml, mr, mt, mb = 64, 170, 24, 48
    pw, ph = width - ml - mr, height - mt - mb

    t = traj.times
    cols = []
    for s in series:
        base = comp_offset[s] * k
        for j in range(k):
            cols.append((f"{s}[{j + 1}]", traj.states[:, base + j]))
    ymax = max(float(c.max()) for _, c in cols)
    ymin = min(0.0, min(float(c.min()) for _, c in cols))
    if ymax <= ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymax += pad
    t0, t1 = float(t[0]), float(t[-1])
    if t1 <= t0:
        t1 = t0 + 1.0

    def X(tv: float) -> float:
        return ml + pw * (tv - t0) / (t1 - t0)

    def Y(v: float) -> float:
        return mt + ph * (1.0 - (v - ymin) / (ymax - ymin))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#333333" stroke-width="1"/>',
    ]
    for tv in _axis_ticks(t0, t1):
        x = X(tv)
        out.append(
            f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 5}" '
            'stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{mt + ph + 20}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{_fmt(tv)}</text>'
        )
    for vv in _axis_ticks(ymin, ymax):
        y = Y(vv)
        out.append(
            f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" '
            'stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{ml - 8}" y="{y + 4:.2f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{_fmt(round(vv, 10))}</text>'
        )
    out.append(
        f'<text x="{ml + pw / 2:.2f}" y="{height - 10}" font-size="13" '
        'text-anchor="middle" font-family="sans-serif">time</text>'
    )
    out.append(
        f'<text x="16" y="{mt + ph / 2:.2f}" font-size="13" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 16 {mt + ph / 2:.2f})">'
        "population</text>"
    )
    for idx, (label, col) in enumerate(cols):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{X(tv):.2f},{Y(v):.2f}" for tv, v in zip(t, col))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{pts}"/>'
        )
        ly = mt + 16 + 18 * idx
        lx = ml + pw + 14
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 26}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{lx + 32}" y="{ly + 4}" font-size="12" '
            f'font-family="sans-serif">{label}</text>'
        )
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path


def to_jsonable(obj):
    """Recursively convert dataclasses, enums, and arrays to JSON-safe values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(kk): to_jsonable(vv) for kk, vv in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def emit_summary_json(summary: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(to_jsonable(summary), indent=2, sort_keys=True) + "\n"
    )
    return path
