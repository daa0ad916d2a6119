"""Render experiment CSVs into the four standard figures.

Input files are the audit harness's interchange CSVs (training logs and
metrics tables); nothing else is consumed.  Every figure kind validates the
columns it needs up front and raises :class:`PlotError` on anything
malformed -- no output file is created in that case.  Rendering is
deterministic: fixed styles, no timestamps or version stamps in the file.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("reward_curve", "overhead_bars", "threshold_sweep", "mechanism_compare")

DEFAULT_SMOOTH_WINDOW = 50

# one fixed color per series slot, so reruns look identical
SERIES_COLORS = ("#1f6fb4", "#d1622b", "#3a923a", "#c03d3e", "#8c6bb1", "#8c8c8c")
COMPONENT_COLORS = {"c_model": "#1f6fb4", "c_para": "#d1622b", "c_mal": "#3a923a"}


class PlotError(ValueError):
    """Malformed input or an unrenderable spec."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    out_path: str
    smooth_window: int = DEFAULT_SMOOTH_WINDOW

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        if not self.inputs:
            raise PlotError("at least one input CSV is required")
        if self.smooth_window < 1:
            raise PlotError("smoothing window must be at least 1")


def read_rows(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    """Load a CSV and insist on the columns the figure needs."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            if header is None:
                raise PlotError(f"{path}: empty file, no header")
            missing = [col for col in required if col not in header]
            if missing:
                raise PlotError(f"{path}: missing column(s) {', '.join(missing)}")
            rows = list(reader)
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


def _floats(rows: list[dict], column: str, path: str) -> np.ndarray:
    values = []
    for i, row in enumerate(rows):
        raw = row.get(column, "")
        if raw is None or raw == "":
            continue
        try:
            values.append(float(raw))
        except ValueError as exc:
            raise PlotError(f"{path}: row {i + 2}: bad {column} value {raw!r}") from exc
    if not values:
        raise PlotError(f"{path}: column {column} holds no numeric values")
    return np.asarray(values)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; window 1 returns the data untouched."""
    if window <= 1:
        return values
    out = np.empty_like(values, dtype=float)
    csum = np.cumsum(values, dtype=float)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def _fresh_figure(width=7.0, height=4.2):
    return plt.subplots(figsize=(width, height), dpi=120)


def _render_reward_curve(spec: FigureSpec):
    fig, ax = _fresh_figure()
    for slot, path in enumerate(spec.inputs):
        rows = read_rows(path, ("step", "episode_reward"))
        steps = _floats(rows, "step", path)
        rewards = _floats(rows, "episode_reward", path)
        if steps.shape != rewards.shape:
            raise PlotError(f"{path}: step/episode_reward lengths differ")
        color = SERIES_COLORS[slot % len(SERIES_COLORS)]
        label = Path(path).stem
        ax.plot(steps, rewards, color=color, alpha=0.25, linewidth=0.8)
        ax.plot(
            steps,
            moving_average(rewards, spec.smooth_window),
            color=color,
            linewidth=1.8,
            label=f"{label} (window {spec.smooth_window})",
        )
    ax.set_xlabel("training episode")
    ax.set_ylabel("episode reward")
    ax.set_title("Training reward")
    ax.legend(loc="lower right", fontsize=8)
    return fig


METRIC_COLUMNS = (
    "policy",
    "mechanism",
    "eta_th",
    "malicious_fraction",
    "misjudgment_rate",
    "c_model",
    "c_para",
    "c_mal",
    "c_total",
)


def _load_metric_rows(inputs: tuple[str, ...]) -> list[dict]:
    rows: list[dict] = []
    for path in inputs:
        for row in read_rows(path, METRIC_COLUMNS):
            parsed = dict(row)
            for col in ("eta_th", "malicious_fraction", "misjudgment_rate",
                        "c_model", "c_para", "c_mal", "c_total"):
                try:
                    parsed[col] = float(row[col])
                except (TypeError, ValueError) as exc:
                    raise PlotError(f"{path}: bad {col} value {row[col]!r}") from exc
            rows.append(parsed)
    return rows


def _stacked_bars(ax, rows, group_key):
    groups = sorted({r[group_key] for r in rows})
    fractions = sorted({r["malicious_fraction"] for r in rows})
    width = 0.8 / len(groups)
    for gi, group in enumerate(groups):
        xs, bottoms = [], []
        stacks = {"c_model": [], "c_para": [], "c_mal": []}
        for fi, frac in enumerate(fractions):
            cell = [r for r in rows if r[group_key] == group and r["malicious_fraction"] == frac]
            if not cell:
                raise PlotError(f"no row for {group_key}={group} at malicious_fraction={frac}")
            row = cell[0]
            xs.append(fi + gi * width)
            for comp in stacks:
                stacks[comp].append(row[comp])
        bottom = np.zeros(len(xs))
        for comp, values in stacks.items():
            values = np.asarray(values)
            ax.bar(
                xs,
                values,
                width=width * 0.92,
                bottom=bottom,
                color=COMPONENT_COLORS[comp],
                alpha=0.45 + 0.55 * (gi % 2),
                edgecolor="black",
                linewidth=0.4,
                label=comp if gi == 0 else None,
            )
            bottom += values
        mid = xs[len(xs) // 2]
        ax.text(mid, bottom.max() * 1.02, str(group), fontsize=7, ha="center")
    ax.set_xticks(
        [fi + width * (len(groups) - 1) / 2 for fi in range(len(fractions))],
        [f"{f:g}" for f in fractions],
    )
    ax.set_xlabel("malicious fraction")
    ax.set_ylabel("overhead")


def _render_overhead_bars(spec: FigureSpec):
    rows = _load_metric_rows(spec.inputs)
    fig, ax = _fresh_figure()
    _stacked_bars(ax, rows, "policy")
    ax.set_title("Overhead by policy")
    ax.legend(fontsize=8)
    return fig


def _render_threshold_sweep(spec: FigureSpec):
    rows = _load_metric_rows(spec.inputs)
    fig, (ax_mis, ax_cost) = plt.subplots(1, 2, figsize=(9.5, 4.0), dpi=120)
    fractions = sorted({r["malicious_fraction"] for r in rows})
    for slot, frac in enumerate(fractions):
        series = sorted(
            (r for r in rows if r["malicious_fraction"] == frac),
            key=lambda r: r["eta_th"],
        )
        etas = [r["eta_th"] for r in series]
        color = SERIES_COLORS[slot % len(SERIES_COLORS)]
        ax_mis.plot(etas, [r["misjudgment_rate"] for r in series],
                    marker="o", color=color, label=f"malicious {frac:g}")
        ax_cost.plot(etas, [r["c_total"] for r in series], marker="s", color=color)
    ax_mis.set_xlabel("blocking threshold")
    ax_mis.set_ylabel("misjudgment rate")
    ax_mis.set_title("Misjudgment vs threshold")
    ax_mis.legend(fontsize=8)
    ax_cost.set_xlabel("blocking threshold")
    ax_cost.set_ylabel("total overhead")
    ax_cost.set_title("Overhead vs threshold")
    return fig


def _render_mechanism_compare(spec: FigureSpec):
    rows = _load_metric_rows(spec.inputs)
    fig, (ax_mis, ax_cost) = plt.subplots(1, 2, figsize=(9.5, 4.0), dpi=120)
    mechanisms = sorted({r["mechanism"] for r in rows})
    fractions = sorted({r["malicious_fraction"] for r in rows})
    width = 0.8 / len(mechanisms)
    for mi, mech in enumerate(mechanisms):
        series = sorted(
            (r for r in rows if r["mechanism"] == mech),
            key=lambda r: r["malicious_fraction"],
        )
        if len(series) != len(fractions):
            raise PlotError(f"mechanism {mech!r} does not cover every malicious fraction")
        color = SERIES_COLORS[mi % len(SERIES_COLORS)]
        ax_mis.plot(
            [r["malicious_fraction"] for r in series],
            [r["misjudgment_rate"] for r in series],
            marker="o", color=color, label=mech,
        )
        xs = [fi + mi * width for fi in range(len(fractions))]
        ax_cost.bar(xs, [r["c_total"] for r in series], width=width * 0.92,
                    color=color, edgecolor="black", linewidth=0.4, label=mech)
    ax_mis.set_xlabel("malicious fraction")
    ax_mis.set_ylabel("misjudgment rate")
    ax_mis.set_title("Misjudgment by mechanism")
    ax_mis.legend(fontsize=8)
    ax_cost.set_xticks(
        [fi + width * (len(mechanisms) - 1) / 2 for fi in range(len(fractions))],
        [f"{f:g}" for f in fractions],
    )
    ax_cost.set_xlabel("malicious fraction")
    ax_cost.set_ylabel("total overhead")
    ax_cost.set_title("Overhead by mechanism")
    return fig


_RENDERERS = {
    "reward_curve": _render_reward_curve,
    "overhead_bars": _render_overhead_bars,
    "threshold_sweep": _render_threshold_sweep,
    "mechanism_compare": _render_mechanism_compare,
}

# scrub per-format metadata that would break byte-identical reruns
_METADATA = {
    ".png": {"Software": None},
    ".svg": {"Date": None, "Creator": None},
    ".pdf": {"Producer": None, "Creator": None, "CreationDate": None},
}


def render(spec: FigureSpec) -> Path:
    """Build the figure and write it atomically; returns the output path."""
    fig = _RENDERERS[spec.kind](spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    suffix = out.suffix.lower() or ".png"
    tmp = out.with_name(out.name + ".tmp")
    try:
        fig.savefig(tmp, format=suffix.lstrip("."), metadata=_METADATA.get(suffix, {}))
        os.replace(tmp, out)
    finally:
        plt.close(fig)
        if tmp.exists():
            tmp.unlink()
    return out
