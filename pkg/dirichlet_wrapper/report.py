# report.py

"""
Reporting

Emits rejection-curve artifacts: a combined curves CSV, one standalone SVG line
chart per quality measure (non-rejected accuracy, classification quality,
rejection quality), a fixed-width summary table, and terminal charts.

All emitters are deterministic: the same bundle always yields the same bytes.

Functions:
    - write_curves_csv / load_curves_csv: Combined curves CSV.
    - render_curves_svg: One SVG panel for one measure.
    - summary_table: Text table of the measures at fixed reject fractions.
    - ascii_panel: Terminal chart of one measure.
"""

import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import asciichartpy
import pandas as pd
from loguru import logger
from rich.console import Console
from rich.table import Table

from dirichlet_wrapper.errors import ConfigError
from dirichlet_wrapper.rejection import (
    CURVE_COLUMNS,
    METRICS,
    RejectionCurvePoint,
    best_rejection_point,
    curve_to_frame,
    frame_to_curve,
)

CANVAS_WIDTH = 640
CANVAS_HEIGHT = 400
PLOT_LEFT, PLOT_RIGHT, PLOT_TOP, PLOT_BOTTOM = 60, 620, 40, 350
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
PANEL_TITLES = {
    "nra": "Non-rejected accuracy",
    "cq": "Classification quality",
    "rq": "Rejection quality",
}
TABLE_WIDTH = 160
_FRACTION_TOL = 1e-9


@dataclass(frozen=True)
class CurveBundle:
    """
    Rejection curves of several uncertainty methods on one dataset.

    Attributes:
        curves (Dict[str, List[RejectionCurvePoint]]): Curve per method, in legend order.
        dataset_label (str): Name of the evaluated dataset.

    Raises:
        ConfigError: If the bundle is empty or the methods use different fraction grids.
    """

    curves: Dict[str, List[RejectionCurvePoint]]
    dataset_label: str = "dataset"

    def __post_init__(self):
        if not self.curves or any(len(c) == 0 for c in self.curves.values()):
            raise ConfigError("a curve bundle needs at least one non-empty curve")
        grids = {tuple(p.rejected_fraction for p in c) for c in self.curves.values()}
        if len(grids) != 1:
            raise ConfigError("all methods in a curve bundle must share the same fraction grid")

    @property
    def methods(self) -> List[str]:
        return list(self.curves)

    @property
    def fractions(self) -> List[float]:
        return [p.rejected_fraction for p in next(iter(self.curves.values()))]


def write_curves_csv(bundle: CurveBundle, path: Union[str, Path]) -> Path:
    """
    Writes ``method,fraction,threshold,nra,cq,rq`` rows ordered by (method, fraction).

    Raises:
        ConfigError: If the file cannot be written.
    """
    frames = []
    for method in sorted(bundle.curves):
        frame = curve_to_frame(bundle.curves[method])
        frame.insert(0, "method", method)
        frames.append(frame.sort_values("fraction", kind="stable"))
    combined = pd.concat(frames, ignore_index=True)
    target = Path(path)
    try:
        combined.to_csv(target, index=False, na_rep="nan")
    except OSError as e:
        logger.error(f"Failed to write curves file '{target}': {e}")
        raise ConfigError(f"Failed to write curves file '{target}': {e}") from e
    logger.info(f"Curves for {len(frames)} methods written to '{target}'.")
    return target


def load_curves_csv(path: Union[str, Path], dataset_label: str = "dataset") -> CurveBundle:
    """Reads a curves CSV back into a bundle (methods in file order)."""
    source = Path(path)
    try:
        frame = pd.read_csv(source, dtype={"method": str}, float_precision="round_trip")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Failed to read curves file '{source}': {e}") from e
    if list(frame.columns) != ["method"] + CURVE_COLUMNS:
        raise ConfigError(f"curves file '{source}' has unexpected columns {list(frame.columns)}")
    curves = {
        method: frame_to_curve(group[CURVE_COLUMNS])
        for method, group in frame.groupby("method", sort=False)
    }
    return CurveBundle(curves=curves, dataset_label=dataset_label)


def _check_panel(panel: str) -> None:
    if panel not in METRICS:
        raise ConfigError(f"unknown panel '{panel}' (choose from {', '.join(METRICS)})")


def _value_range(bundle: CurveBundle, panel: str) -> Tuple[float, float]:
    finite = [
        getattr(p, panel)
        for curve in bundle.curves.values()
        for p in curve
        if math.isfinite(getattr(p, panel))
    ]
    if panel == "rq":
        top = max(finite + [1.0])
        return 0.0, math.ceil(top * 1.1)
    if not finite:
        return 0.0, 1.0
    low = math.floor(min(finite) * 20) / 20
    high = math.ceil(max(finite) * 20) / 20
    if high - low < 0.05:
        low = max(0.0, high - 0.05)
    return low, high if high > low else low + 0.05


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _svg_text(parent: ET.Element, x: float, y: float, text: str, **attrs) -> ET.Element:
    element = ET.SubElement(parent, "text", {"x": _fmt(x), "y": _fmt(y), **attrs})
    element.text = text
    return element


def render_curves_svg(bundle: CurveBundle, panel: str, path: Union[str, Path]) -> Path:
    """
    Draws one measure against the rejected fraction as a standalone SVG.

    Each method is one ``<polyline>``; rejection-quality points at +inf are
    drawn on the top edge with a circle marker. Undefined (NaN) points are left out.

    Args:
        bundle (CurveBundle): Curves to draw.
        panel (str): nra, cq or rq.
        path (Union[str, Path]): Output file.

    Returns:
        Path: The written file.
    """
    _check_panel(panel)
    x_max = max(bundle.fractions) or 1.0
    y_min, y_max = _value_range(bundle, panel)

    def sx(fraction: float) -> float:
        return PLOT_LEFT + (fraction / x_max) * (PLOT_RIGHT - PLOT_LEFT)

    def sy(value: float) -> float:
        clipped = min(max(value, y_min), y_max)
        return PLOT_BOTTOM - (clipped - y_min) / (y_max - y_min) * (PLOT_BOTTOM - PLOT_TOP)

    root = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "version": "1.1",
            "width": str(CANVAS_WIDTH),
            "height": str(CANVAS_HEIGHT),
            "viewBox": f"0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}",
            "font-family": "sans-serif",
        },
    )
    ET.SubElement(root, "rect", {"x": "0", "y": "0", "width": str(CANVAS_WIDTH), "height": str(CANVAS_HEIGHT), "fill": "white"})
    _svg_text(
        root, CANVAS_WIDTH / 2, 22, f"{bundle.dataset_label}: {PANEL_TITLES[panel]}",
        **{"text-anchor": "middle", "font-size": "14"},
    )

    grid = ET.SubElement(
        root, "g", {"stroke": "lightgray", "stroke-width": "0.5", "stroke-dasharray": "4 2"}
    )
    axes = ET.SubElement(root, "g", {"stroke": "black", "stroke-width": "1"})
    ET.SubElement(axes, "line", {"x1": str(PLOT_LEFT), "y1": str(PLOT_BOTTOM), "x2": str(PLOT_RIGHT), "y2": str(PLOT_BOTTOM)})
    ET.SubElement(axes, "line", {"x1": str(PLOT_LEFT), "y1": str(PLOT_TOP), "x2": str(PLOT_LEFT), "y2": str(PLOT_BOTTOM)})

    ticks = ET.SubElement(root, "g", {"font-size": "10", "fill": "black"})
    for step in range(int(math.floor(x_max * 10 + 1e-9)) + 1):
        fraction = step / 10
        x = sx(fraction)
        ET.SubElement(axes, "line", {"x1": _fmt(x), "y1": str(PLOT_BOTTOM), "x2": _fmt(x), "y2": str(PLOT_BOTTOM + 4)})
        _svg_text(ticks, x, PLOT_BOTTOM + 16, f"{step * 10}%", **{"text-anchor": "middle"})
    for step in range(6):
        value = y_min + (y_max - y_min) * step / 5
        y = sy(value)
        ET.SubElement(axes, "line", {"x1": str(PLOT_LEFT - 4), "y1": _fmt(y), "x2": str(PLOT_LEFT), "y2": _fmt(y)})
        ET.SubElement(grid, "line", {"x1": str(PLOT_LEFT), "y1": _fmt(y), "x2": str(PLOT_RIGHT), "y2": _fmt(y)})
        label = f"{value:.2f}" if panel == "rq" else f"{value * 100:.0f}%"
        _svg_text(ticks, PLOT_LEFT - 6, y + 3, label, **{"text-anchor": "end"})
    _svg_text(ticks, (PLOT_LEFT + PLOT_RIGHT) / 2, CANVAS_HEIGHT - 12, "Rejected fraction", **{"text-anchor": "middle"})
    y_mid = (PLOT_TOP + PLOT_BOTTOM) / 2
    _svg_text(
        ticks, 14, y_mid, PANEL_TITLES[panel], **{"text-anchor": "middle", "transform": f"rotate(-90 14 {_fmt(y_mid)})"}
    )

    for index, (method, curve) in enumerate(bundle.curves.items()):
        color = PALETTE[index % len(PALETTE)]
        points = [(p.rejected_fraction, getattr(p, panel)) for p in curve if not math.isnan(getattr(p, panel))]
        ET.SubElement(
            root,
            "polyline",
            {
                "points": " ".join(f"{_fmt(sx(f))},{_fmt(sy(v))}" for f, v in points),
                "fill": "none",
                "stroke": color,
                "stroke-width": "2",
            },
        )
        for f, v in points:
            if math.isinf(v):
                ET.SubElement(root, "circle", {"cx": _fmt(sx(f)), "cy": _fmt(sy(v)), "r": "3", "fill": color})
        legend_y = PLOT_TOP + 14 * index + 6
        ET.SubElement(
            root,
            "line",
            {"x1": str(PLOT_RIGHT - 150), "y1": str(legend_y), "x2": str(PLOT_RIGHT - 130), "y2": str(legend_y), "stroke": color, "stroke-width": "2"},
        )
        _svg_text(root, PLOT_RIGHT - 125, legend_y + 4, method, **{"font-size": "10"})

    ET.indent(root)
    target = Path(path)
    try:
        target.write_text(ET.tostring(root, encoding="unicode") + "\n", encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to write SVG '{target}': {e}")
        raise ConfigError(f"Failed to write SVG '{target}': {e}") from e
    logger.info(f"{PANEL_TITLES[panel]} panel written to '{target}'.")
    return target


def _point_at(curve: Sequence[RejectionCurvePoint], fraction: float) -> RejectionCurvePoint:
    for point in curve:
        if abs(point.rejected_fraction - fraction) <= _FRACTION_TOL:
            return point
    raise ConfigError(f"reject fraction {fraction} is not on the curve grid")


def _percent(value: float) -> str:
    return "n/a" if math.isnan(value) else f"{value * 100:.2f}%"


def _raw(value: float) -> str:
    if math.isnan(value):
        return "n/a"
    return "inf" if math.isinf(value) else f"{value:.2f}"


def summary_table(bundle: CurveBundle, fractions: Sequence[float] = (0.10, 0.20, 0.30)) -> str:
    """
    Formats accuracy at 0% and NRA/CQ/RQ at the requested fractions, per method.

    NRA and CQ are shown in percent, RQ raw, all with two decimals. The last
    column is the reject fraction with the highest classification quality.

    Raises:
        ConfigError: If a requested fraction (or 0) is not on the grid.
    """
    table = Table(title=f"Rejection summary: {bundle.dataset_label}")
    table.add_column("Method", style="cyan", no_wrap=True)
    table.add_column("Acc 0%", style="magenta")
    labels = [f"{round(f * 100):d}%" for f in fractions]
    for metric, style in (("NRA", "green"), ("CQ", "yellow"), ("RQ", "blue")):
        for label in labels:
            table.add_column(f"{metric} {label}", style=style)
    table.add_column("Best CQ at", style="red")

    for method, curve in bundle.curves.items():
        base = _point_at(curve, 0.0)
        points = [_point_at(curve, f) for f in fractions]
        best = best_rejection_point(curve, "cq")
        table.add_row(
            method,
            _percent(base.nra),
            *[_percent(p.nra) for p in points],
            *[_percent(p.cq) for p in points],
            *[_raw(p.rq) for p in points],
            f"{best.rejected_fraction * 100:.0f}% ({_percent(best.cq)})",
        )

    console = Console(record=True, width=TABLE_WIDTH, file=io.StringIO(), color_system=None)
    console.print(table)
    return console.export_text()


def ascii_panel(bundle: CurveBundle, panel: str, height: int = 10) -> str:
    """
    Terminal chart of one measure, one series per method (in legend order).

    Infinite values are drawn at the chart's top; undefined values are gaps.
    """
    _check_panel(panel)
    y_min, y_max = _value_range(bundle, panel)
    series = []
    for curve in bundle.curves.values():
        values = []
        for point in curve:
            value = getattr(point, panel)
            values.append(float("nan") if math.isnan(value) else min(value, y_max))
        series.append(values)
    chart = asciichartpy.plot(
        series,
        {"height": height, "min": y_min, "max": y_max, "format": "{:>7.2f}", "padding": 1},
    )
    legend = "  ".join(f"[{i + 1}] {m}" for i, m in enumerate(bundle.methods))
    return f"{PANEL_TITLES[panel]} vs rejected fraction\n{chart}\n{legend}"
