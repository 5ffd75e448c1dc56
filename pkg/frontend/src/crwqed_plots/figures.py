"""Figure rendering from crwqed CSV files.

Pure projection: every curve and cell comes straight out of the CSV
columns; nothing is recomputed. Numeric (integrator/lattice) series draw
dashed, analytic series solid, with a fixed style table so identical
inputs give identical images. Population columns that are identically
one are dropped; they represent absent channels and would only clutter
the panel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib
import numpy as np
from matplotlib.figure import Figure

__all__ = [
    "FigureSpec",
    "PanelReport",
    "RenderReport",
    "RenderError",
    "load_table",
    "render",
]

KINDS = ("decay_curves", "fidelity_map", "fidelity_lines", "nonreciprocal_panel")


class RenderError(ValueError):
    """Input CSV cannot back the requested figure; names the offender."""


# ---------------------------------------------------------------------------
# fixed style table: dashed = numeric series, solid = analytic series
# ---------------------------------------------------------------------------

_STYLE: dict[str, tuple[str, str]] = {
    "p_markov":      ("#1f77b4", "solid"),
    "p_intrinsic":   ("#7f7f7f", "solid"),
    "p_lattice":     ("#d62728", "dashed"),
    "p1_closed":     ("#1f77b4", "solid"),
    "p2_closed":     ("#d62728", "solid"),
    "T_closed":      ("#2ca02c", "solid"),
    "p1_me":         ("#1f77b4", "dashed"),
    "p2_me":         ("#d62728", "dashed"),
    "T_me_forward":  ("#2ca02c", "dashed"),
    "T_me_backward": ("#9467bd", "dashed"),
    "F_me":          ("#1f77b4", "dashed"),
    "F_linear":      ("#d62728", "solid"),
}

_LINE_CYCLE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")

_RC = {
    "svg.hashsalt": "crwqed-plots",
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "legend.fontsize": 8,
}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSVs, figure kind, output image, axis options."""

    csv_paths: tuple[str, ...]
    kind: str
    output_path: str
    x_label: str | None = None
    y_label: str | None = None
    log_x: bool = False
    log_y: bool = False
    value_column: str = "F_me"     # heatmap payload for fidelity_map
    gamma2: float | None = None    # optional row filter for fidelity_lines

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.csv_paths:
            raise RenderError("at least one input CSV is required")


@dataclass(frozen=True)
class PanelReport:
    """Series actually drawn in one panel."""

    name: str
    series: tuple[str, ...]

    @property
    def n_series(self) -> int:
        return len(self.series)


@dataclass(frozen=True)
class RenderReport:
    """What `render` produced, for downstream verification."""

    output_path: str
    kind: str
    panels: tuple[PanelReport, ...] = field(default_factory=tuple)

    @property
    def total_series(self) -> int:
        return sum(p.n_series for p in self.panels)


# ---------------------------------------------------------------------------
# CSV access
# ---------------------------------------------------------------------------

def load_table(path: str) -> dict[str, np.ndarray]:
    """Columns of a metadata-prefixed CSV, keyed by header name."""
    header: list[str] | None = None
    rows: list[list[float]] = []
    try:
        fh = open(path)
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from None
    with fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise RenderError(
                    f"ragged row in {path}: {len(parts)} fields, header has {len(header)}"
                )
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                # non-numeric columns (e.g. topology labels) are not plottable
                rows.append([float(x) if _is_float(x) else np.nan for x in parts])
    if header is None:
        raise RenderError(f"{path} has no header row")
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _require(table: dict[str, np.ndarray], column: str, path: str) -> np.ndarray:
    if column not in table:
        raise RenderError(f"column {column!r} missing from {path}")
    series = table[column]
    if series.size == 0:
        raise RenderError(f"series {column!r} in {path} is empty")
    return series


def _style(column: str, fallback_index: int = 0) -> dict:
    color, dash = _STYLE.get(
        column, (_LINE_CYCLE[fallback_index % len(_LINE_CYCLE)], "solid")
    )
    return {"color": color, "linestyle": dash}


# ---------------------------------------------------------------------------
# panel builders
# ---------------------------------------------------------------------------

_DECAY_COLUMNS = ("p_markov", "p_lattice", "p_intrinsic")


def _draw_decay(ax, path: str) -> PanelReport:
    table = load_table(path)
    t = _require(table, "t", path)
    drawn = []
    for column in _DECAY_COLUMNS:
        series = _require(table, column, path)
        if np.all(series == 1.0):
            continue   # absent channel: identically one carries no information
        ax.plot(t, series, label=column, **_style(column))
        drawn.append(column)
    if not drawn:
        raise RenderError(f"all population series in {path} are identically one")
    ax.set_xlabel("t")
    ax.set_ylabel("population")
    ax.legend(loc="best")
    return PanelReport(name=os.path.splitext(os.path.basename(path))[0],
                       series=tuple(drawn))


def _grid_from_rows(g1: np.ndarray, g2: np.ndarray, values: np.ndarray, path: str):
    x = np.unique(g1)
    y = np.unique(g2)
    if x.size * y.size != values.size:
        raise RenderError(
            f"{path} is not a full gamma1 x gamma2 grid "
            f"({x.size} x {y.size} levels, {values.size} rows)"
        )
    grid = np.full((y.size, x.size), np.nan)
    xi = np.searchsorted(x, g1)
    yi = np.searchsorted(y, g2)
    grid[yi, xi] = values
    if np.isnan(grid).any():
        raise RenderError(f"{path} grid has missing gamma1 x gamma2 combinations")
    return x, y, grid


def _draw_fidelity_map(ax, fig, path: str, value_column: str) -> PanelReport:
    table = load_table(path)
    g1 = _require(table, "gamma1", path)
    g2 = _require(table, "gamma2", path)
    values = _require(table, value_column, path)
    x, y, grid = _grid_from_rows(g1, g2, values, path)
    mesh = ax.pcolormesh(x, y, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=value_column)
    ax.set_xlabel("gamma1 / j_eff")
    ax.set_ylabel("gamma2 / j_eff")
    return PanelReport(name="fidelity-map", series=(value_column,))


def _draw_fidelity_lines(ax, path: str, gamma2: float | None) -> PanelReport:
    table = load_table(path)
    g1 = _require(table, "gamma1", path)
    g2 = _require(table, "gamma2", path)
    levels = [lv for lv in np.unique(g2) if gamma2 is None or lv == gamma2]
    if not levels:
        raise RenderError(f"no rows in {path} with gamma2 = {gamma2!r}")
    drawn = []
    for idx, level in enumerate(levels):
        mask = g2 == level
        order = np.argsort(g1[mask])
        for column in ("F_me", "F_linear"):
            series = _require(table, column, path)
            dash = "dashed" if column == "F_me" else "solid"
            ax.plot(g1[mask][order], series[mask][order],
                    color=_LINE_CYCLE[idx % len(_LINE_CYCLE)], linestyle=dash,
                    label=f"{column}, gamma2={level:g}")
            drawn.append(f"{column}@{level:g}")
    ax.set_xlabel("gamma1 / j_eff")
    ax.set_ylabel("fidelity")
    ax.legend(loc="best")
    return PanelReport(name="fidelity-lines", series=tuple(drawn))


_PANEL_CLOSED = ("p1_closed", "p2_closed", "T_closed")
_PANEL_ME = ("p1_me", "p2_me", "T_me_forward")


def _draw_nonreciprocal(axes, path: str) -> list[PanelReport]:
    table = load_table(path)
    t = _require(table, "t", path)
    reports = []
    for ax, columns, name in zip(axes, (_PANEL_CLOSED, _PANEL_ME),
                                 ("closed-form", "integrator")):
        for column in columns:
            ax.plot(t, _require(table, column, path), label=column, **_style(column))
        ax.set_xlabel("t")
        ax.set_ylabel("population / transmission")
        ax.set_title(name)
        ax.legend(loc="best")
        reports.append(PanelReport(name=name, series=columns))
    return reports


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def render(spec: FigureSpec) -> RenderReport:
    """Draw the figure described by `spec` and return what was drawn."""
    with matplotlib.rc_context(_RC):
        panels: list[PanelReport] = []
        if spec.kind == "decay_curves":
            fig = Figure(figsize=(4.2 * len(spec.csv_paths), 3.4))
            data_axes = list(fig.subplots(1, len(spec.csv_paths), squeeze=False)[0])
            for ax, path in zip(data_axes, spec.csv_paths):
                panels.append(_draw_decay(ax, path))
        elif spec.kind == "fidelity_map":
            fig = Figure(figsize=(4.6, 3.6))
            ax = fig.subplots()
            data_axes = [ax]
            panels.append(_draw_fidelity_map(ax, fig, spec.csv_paths[0],
                                             spec.value_column))
        elif spec.kind == "fidelity_lines":
            fig = Figure(figsize=(4.6, 3.4))
            ax = fig.subplots()
            data_axes = [ax]
            panels.append(_draw_fidelity_lines(ax, spec.csv_paths[0], spec.gamma2))
        else:   # nonreciprocal_panel
            fig = Figure(figsize=(8.4, 3.4))
            data_axes = list(fig.subplots(1, 2))
            panels.extend(_draw_nonreciprocal(data_axes, spec.csv_paths[0]))

        # colorbar axes are excluded: axis options apply to data panels only
        for ax in data_axes:
            if spec.x_label is not None:
                ax.set_xlabel(spec.x_label)
            if spec.y_label is not None:
                ax.set_ylabel(spec.y_label)
            if spec.log_x:
                ax.set_xscale("log")
            if spec.log_y:
                ax.set_yscale("log")

        fig.tight_layout()
        metadata = {"Date": None} if spec.output_path.endswith(".svg") else None
        fig.savefig(spec.output_path, metadata=metadata)
    return RenderReport(output_path=spec.output_path, kind=spec.kind,
                        panels=tuple(panels))
