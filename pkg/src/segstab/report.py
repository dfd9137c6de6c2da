"""Hand-emitted SVG figures for stability reports.

No plotting dependency: each figure is a flat draw list of primitive
elements (line, rect, circle, polygon, polyline, text) serialized to
SVG with fixed two-decimal coordinate formatting, so a figure is a pure
function of its inputs and renders byte-identically on every run.

Figures:

* critical-difference diagram: rank axis, CD ruler, clique bars joining
  models whose mean ranks are statistically indistinguishable,
* forest plot of bootstrap confidence intervals,
* per-fold rank trajectories,
* pairwise effect-size grid.

Elements carry ``class`` attributes (``model-label``, ``clique-bar``,
``tick-x`` and so on) purely so the structure is testable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from .datamodel import atomic_write_text
from .stability import FriedmanResult, NemenyiResult, StabilityReport

MODEL_PALETTE = (
    "#1b6ca8",
    "#d1495b",
    "#2e8b57",
    "#e67e22",
    "#6a51a3",
    "#00838f",
    "#aa3377",
    "#556b2f",
)

MAGNITUDE_COLORS = {
    "negligible": "#eef0f2",
    "small": "#c6dbef",
    "medium": "#fdae6b",
    "large": "#e34a33",
}

CD_DIAGRAM_FILE = "cd_diagram.svg"
FOREST_FILE = "forest.svg"
TRAJECTORIES_FILE = "rank_trajectories.svg"
EFFECT_GRID_FILE = "effect_grid.svg"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


@dataclass(frozen=True)
class SvgElement:
    tag: str
    attrs: tuple
    content: str | None = None

    def render(self) -> str:
        parts = "".join(f' {k}="{v}"' for k, v in self.attrs)
        if self.content is None:
            return f"<{self.tag}{parts}/>"
        return f"<{self.tag}{parts}>{escape(self.content)}</{self.tag}>"


def line(x1, y1, x2, y2, stroke="#333333", width=1.0, klass=None) -> SvgElement:
    attrs = [
        ("x1", _fmt(x1)),
        ("y1", _fmt(y1)),
        ("x2", _fmt(x2)),
        ("y2", _fmt(y2)),
        ("stroke", stroke),
        ("stroke-width", _fmt(width)),
    ]
    if klass:
        attrs.append(("class", klass))
    return SvgElement("line", tuple(attrs))


def rect(x, y, w, h, fill, stroke="none", klass=None) -> SvgElement:
    attrs = [
        ("x", _fmt(x)),
        ("y", _fmt(y)),
        ("width", _fmt(w)),
        ("height", _fmt(h)),
        ("fill", fill),
        ("stroke", stroke),
    ]
    if klass:
        attrs.append(("class", klass))
    return SvgElement("rect", tuple(attrs))


def circle(cx, cy, r, fill, klass=None) -> SvgElement:
    attrs = [("cx", _fmt(cx)), ("cy", _fmt(cy)), ("r", _fmt(r)), ("fill", fill)]
    if klass:
        attrs.append(("class", klass))
    return SvgElement("circle", tuple(attrs))


def polygon(points, fill, klass=None) -> SvgElement:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    attrs = [("points", pts), ("fill", fill)]
    if klass:
        attrs.append(("class", klass))
    return SvgElement("polygon", tuple(attrs))


def polyline(points, stroke, width=1.5, klass=None) -> SvgElement:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    attrs = [
        ("points", pts),
        ("fill", "none"),
        ("stroke", stroke),
        ("stroke-width", _fmt(width)),
    ]
    if klass:
        attrs.append(("class", klass))
    return SvgElement("polyline", tuple(attrs))


def text(
    x, y, content, anchor="start", size=12, fill="#222222", klass=None, transform=None
) -> SvgElement:
    attrs = [
        ("x", _fmt(x)),
        ("y", _fmt(y)),
        ("text-anchor", anchor),
        ("font-family", "Helvetica, Arial, sans-serif"),
        ("font-size", str(size)),
        ("fill", fill),
    ]
    if transform:
        attrs.append(("transform", transform))
    if klass:
        attrs.append(("class", klass))
    return SvgElement("text", tuple(attrs), content=content)


@dataclass
class SvgFigure:
    width: float
    height: float
    title: str
    elements: list = field(default_factory=list)

    def add(self, element: SvgElement) -> None:
        self.elements.append(element)

    def count(self, tag: str, klass: str | None = None) -> int:
        n = 0
        for el in self.elements:
            if el.tag != tag:
                continue
            if klass is not None and ("class", klass) not in el.attrs:
                continue
            n += 1
        return n

    def to_svg(self) -> str:
        head = (
            '<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{_fmt(self.width)}" height="{_fmt(self.height)}" '
            f'viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">'
        )
        lines = [head, f"<title>{escape(self.title)}</title>"]
        lines.append(
            f'<rect x="0.00" y="0.00" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" fill="#ffffff" stroke="none"/>'
        )
        lines.extend(el.render() for el in self.elements)
        lines.append("</svg>")
        return "\n".join(lines) + "\n"


def write_figure(figure: SvgFigure, path: str) -> None:
    atomic_write_text(path, figure.to_svg())


def _model_color(index: int) -> str:
    return MODEL_PALETTE[index % len(MODEL_PALETTE)]


# ---------------------------------------------------------------------------
# Critical difference diagram
# ---------------------------------------------------------------------------


def render_cd_diagram(
    friedman: FriedmanResult,
    nemenyi: NemenyiResult,
    title: str = "Critical difference diagram",
) -> SvgFigure:
    """Rank axis with clique bars under statistically-tied model groups."""
    ranks = friedman.mean_ranks
    k = len(ranks)
    if k < 2:
        raise ValueError("CD diagram needs at least 2 models")
    order = sorted(ranks, key=lambda m: (ranks[m], m))

    width = 640.0
    x0, x1 = 70.0, 570.0

    def x_at(rank: float) -> float:
        return x0 + (rank - 1.0) / (k - 1.0) * (x1 - x0)

    bars = [c for c in nemenyi.cliques if len(c) > 1]
    axis_y = 70.0
    bar_y0 = axis_y + 8.0
    labels_top = bar_y0 + 10.0 * len(bars) + 14.0
    n_left = math.ceil(k / 2)
    n_right = k - n_left
    rows = max(n_left, n_right)
    height = labels_top + 22.0 * rows + 10.0

    fig = SvgFigure(width, height, title)
    fig.add(text(width / 2.0, 20.0, title, anchor="middle", size=14, klass="title"))

    # CD ruler (drawn span clamped to the axis, label shows the true value)
    ruler_y = 40.0
    ruler_end = x_at(1.0 + min(nemenyi.cd, float(k - 1)))
    fig.add(line(x_at(1.0), ruler_y, ruler_end, ruler_y, width=1.5, klass="cd-ruler"))
    fig.add(line(x_at(1.0), ruler_y - 4.0, x_at(1.0), ruler_y + 4.0, klass="cd-ruler-cap"))
    fig.add(line(ruler_end, ruler_y - 4.0, ruler_end, ruler_y + 4.0, klass="cd-ruler-cap"))
    fig.add(
        text(
            (x_at(1.0) + ruler_end) / 2.0,
            ruler_y - 8.0,
            f"CD = {nemenyi.cd:.3f}",
            anchor="middle",
            size=11,
            klass="cd-label",
        )
    )

    # rank axis with integer ticks
    fig.add(line(x0, axis_y, x1, axis_y, width=1.5, klass="axis"))
    for r in range(1, k + 1):
        fig.add(line(x_at(r), axis_y - 5.0, x_at(r), axis_y, klass="tick-x"))
        fig.add(
            text(x_at(r), axis_y - 9.0, str(r), anchor="middle", size=10, klass="tick-label")
        )

    # clique bars
    for i, clique in enumerate(bars):
        lo = ranks[clique[0]]
        hi = ranks[clique[-1]]
        y = bar_y0 + 10.0 * i
        fig.add(
            line(x_at(lo) - 5.0, y, x_at(hi) + 5.0, y, stroke="#111111", width=4.0,
                 klass="clique-bar")
        )

    # model stems and labels: best half on the left, rest on the right
    for i, model in enumerate(order):
        xr = x_at(ranks[model])
        if i < n_left:
            row = i
            label_x = x0 - 12.0
            anchor = "end"
            elbow_x = x0 - 8.0
        else:
            row = k - 1 - i
            label_x = x1 + 12.0
            anchor = "start"
            elbow_x = x1 + 8.0
        label_y = labels_top + 22.0 * row
        fig.add(line(xr, axis_y, xr, label_y - 4.0, klass="stem"))
        fig.add(line(xr, label_y - 4.0, elbow_x, label_y - 4.0, klass="stem"))
        fig.add(text(label_x, label_y, model, anchor=anchor, size=12, klass="model-label"))
    return fig


# ---------------------------------------------------------------------------
# Forest plot
# ---------------------------------------------------------------------------


def render_forest_plot(
    cis: dict, title: str = "Bootstrap confidence intervals", axis_label: str = "score"
) -> SvgFigure:
    """One whisker row per model, sorted by mean, best on top."""
    if not cis:
        raise ValueError("no intervals to plot")
    order = sorted(cis, key=lambda m: (-cis[m].mean, m))
    lo = min(ci.lower for ci in cis.values())
    hi = max(ci.upper for ci in cis.values())
    span = hi - lo
    if span <= 0.0:
        span = max(abs(hi), 1.0) * 0.01
    lo -= span * 0.05
    hi += span * 0.05

    width = 640.0
    x0, x1 = 170.0, 600.0
    row_h = 26.0
    top = 50.0
    axis_y = top + row_h * len(order) + 12.0
    height = axis_y + 40.0

    def x_at(v: float) -> float:
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    fig = SvgFigure(width, height, title)
    fig.add(text(width / 2.0, 20.0, title, anchor="middle", size=14, klass="title"))

    for i, model in enumerate(order):
        ci = cis[model]
        y = top + row_h * i
        fig.add(text(x0 - 14.0, y + 4.0, model, anchor="end", size=12, klass="model-label"))
        fig.add(line(x_at(ci.lower), y, x_at(ci.upper), y, width=1.5, klass="whisker"))
        fig.add(line(x_at(ci.lower), y - 4.0, x_at(ci.lower), y + 4.0, klass="whisker-cap"))
        fig.add(line(x_at(ci.upper), y - 4.0, x_at(ci.upper), y + 4.0, klass="whisker-cap"))
        cx = x_at(ci.mean)
        fig.add(
            polygon(
                [(cx - 5.0, y), (cx, y - 5.0), (cx + 5.0, y), (cx, y + 5.0)],
                fill=_model_color(i),
                klass="mean-marker",
            )
        )

    fig.add(line(x0, axis_y, x1, axis_y, width=1.5, klass="axis"))
    for j in range(5):
        v = lo + (hi - lo) * j / 4.0
        xt = x_at(v)
        fig.add(line(xt, axis_y, xt, axis_y + 5.0, klass="tick-x"))
        fig.add(
            text(xt, axis_y + 18.0, f"{v:.3f}", anchor="middle", size=10, klass="tick-label")
        )
    fig.add(
        text(
            (x0 + x1) / 2.0,
            axis_y + 34.0,
            axis_label,
            anchor="middle",
            size=11,
            klass="axis-label",
        )
    )
    return fig


# ---------------------------------------------------------------------------
# Rank trajectories
# ---------------------------------------------------------------------------


def render_rank_trajectories(
    trajectories: dict, title: str = "Per-fold rank trajectories"
) -> SvgFigure:
    """Rank-vs-fold polyline per model, rank 1 at the top."""
    if not trajectories:
        raise ValueError("no trajectories to plot")
    models = sorted(trajectories)
    n_folds = len(next(iter(trajectories.values())))
    for m in models:
        if len(trajectories[m]) != n_folds:
            raise ValueError("all trajectories must cover the same folds")
    if n_folds < 1:
        raise ValueError("trajectories are empty")
    k = len(models)
    max_rank = max(k, 2)

    width = 700.0
    x0, x1 = 70.0, 550.0
    y0 = 40.0
    plot_h = max(120.0, 26.0 * k)
    y1 = y0 + plot_h
    height = y1 + 50.0

    def x_at(fold: int) -> float:
        if n_folds == 1:
            return (x0 + x1) / 2.0
        return x0 + fold / (n_folds - 1.0) * (x1 - x0)

    def y_at(rank: float) -> float:
        return y0 + (rank - 1.0) / (max_rank - 1.0) * plot_h

    fig = SvgFigure(width, height, title)
    fig.add(text(width / 2.0, 20.0, title, anchor="middle", size=14, klass="title"))
    fig.add(line(x0, y0, x0, y1, width=1.5, klass="axis"))
    fig.add(line(x0, y1, x1, y1, width=1.5, klass="axis"))

    for f in range(n_folds):
        xt = x_at(f)
        fig.add(line(xt, y1, xt, y1 + 5.0, klass="tick-x"))
        fig.add(
            text(xt, y1 + 18.0, str(f + 1), anchor="middle", size=10, klass="tick-label")
        )
    fig.add(
        text((x0 + x1) / 2.0, y1 + 34.0, "fold", anchor="middle", size=11, klass="axis-label")
    )
    for r in range(1, max_rank + 1):
        yt = y_at(float(r))
        fig.add(line(x0 - 5.0, yt, x0, yt, klass="tick-y"))
        fig.add(text(x0 - 9.0, yt + 3.5, str(r), anchor="end", size=10, klass="tick-label"))
    fig.add(
        text(
            16.0,
            (y0 + y1) / 2.0,
            "rank",
            anchor="middle",
            size=11,
            klass="axis-label",
            transform=f"rotate(-90 16.00 {_fmt((y0 + y1) / 2.0)})",
        )
    )

    for i, model in enumerate(models):
        color = _model_color(i)
        pts = [(x_at(f), y_at(r)) for f, r in enumerate(trajectories[model])]
        if len(pts) == 1:
            fig.add(circle(pts[0][0], pts[0][1], 3.0, color, klass="trajectory-point"))
        else:
            fig.add(polyline(pts, stroke=color, width=1.8, klass="trajectory"))
        for px, py in pts:
            fig.add(circle(px, py, 2.5, color, klass="trajectory-point"))
        fig.add(
            text(
                x1 + 14.0,
                y0 + 16.0 * i + 4.0,
                model,
                anchor="start",
                size=11,
                fill=color,
                klass="legend-label",
            )
        )
    return fig


# ---------------------------------------------------------------------------
# Effect size grid
# ---------------------------------------------------------------------------


def render_effect_grid(
    models, effects: dict, title: str = "Pairwise effect sizes (Cohen's d)"
) -> SvgFigure:
    """Upper-triangular grid of pairwise d values, colored by magnitude."""
    models = list(models)
    n = len(models)
    if n < 2:
        raise ValueError("effect grid needs at least 2 models")
    cell = 56.0
    x0, y0 = 170.0, 70.0
    width = max(640.0, x0 + n * cell + 60.0)
    legend_y = y0 + n * cell + 30.0
    height = legend_y + 30.0

    fig = SvgFigure(width, height, title)
    fig.add(text(width / 2.0, 20.0, title, anchor="middle", size=14, klass="title"))

    for j, model in enumerate(models):
        cx = x0 + (j + 0.5) * cell
        fig.add(
            text(
                cx,
                y0 - 10.0,
                model,
                anchor="start",
                size=11,
                klass="col-label",
                transform=f"rotate(-35 {_fmt(cx)} {_fmt(y0 - 10.0)})",
            )
        )
    for i, model in enumerate(models):
        fig.add(
            text(
                x0 - 10.0,
                y0 + (i + 0.5) * cell + 4.0,
                model,
                anchor="end",
                size=11,
                klass="model-label",
            )
        )

    for i in range(n):
        for j in range(i + 1, n):
            pair = (models[i], models[j])
            if pair not in effects:
                raise ValueError(f"missing effect size for pair {pair}")
            eff = effects[pair]
            x = x0 + j * cell
            y = y0 + i * cell
            fig.add(
                rect(
                    x + 1.0,
                    y + 1.0,
                    cell - 2.0,
                    cell - 2.0,
                    fill=MAGNITUDE_COLORS[eff.magnitude],
                    stroke="#999999",
                    klass="cell",
                )
            )
            fig.add(
                text(
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0,
                    f"{eff.cohens_d:.2f}",
                    anchor="middle",
                    size=11,
                    klass="cell-value",
                )
            )

    swatch_x = x0
    for name in ("negligible", "small", "medium", "large"):
        fig.add(rect(swatch_x, legend_y, 14.0, 14.0, fill=MAGNITUDE_COLORS[name],
                     stroke="#999999", klass="legend-swatch"))
        fig.add(
            text(swatch_x + 20.0, legend_y + 11.0, name, anchor="start", size=11,
                 klass="legend-label")
        )
        swatch_x += 110.0
    return fig


# ---------------------------------------------------------------------------
# Report-level convenience
# ---------------------------------------------------------------------------


def render_report_figures(
    report: StabilityReport, out_dir: str, protocol: str | None = None
) -> dict:
    """Write the four standard figures for one protocol of a report.

    Returns {figure name: path}.  The protocol defaults to the first one
    analyzed; it must have rank results (>= 2 models and folds).
    """
    if protocol is None:
        protocol = report.protocols[0].protocol
    analysis = report.protocol(protocol)
    if analysis.friedman is None or analysis.nemenyi is None:
        raise ValueError(
            f"protocol {protocol!r} has no rank analysis to plot"
            + (f" ({analysis.note})" if analysis.note else "")
        )
    metric = report.config.get("metric", "score")
    class_id = report.config.get("class", "")
    subtitle = f"{metric}/{class_id}, protocol {protocol}"

    os.makedirs(out_dir, exist_ok=True)
    figures = {
        CD_DIAGRAM_FILE: render_cd_diagram(
            analysis.friedman, analysis.nemenyi, title=f"Critical differences ({subtitle})"
        ),
        FOREST_FILE: render_forest_plot(
            analysis.cis,
            title=f"Bootstrap {100 * report.config.get('level', 0.95):g}% CIs ({subtitle})",
            axis_label=metric,
        ),
        TRAJECTORIES_FILE: render_rank_trajectories(
            {m: list(rs.trajectory) for m, rs in analysis.rank_stats.items()},
            title=f"Rank trajectories ({subtitle})",
        ),
        EFFECT_GRID_FILE: render_effect_grid(
            sorted(analysis.cis),
            analysis.effect_sizes,
            title=f"Effect sizes ({subtitle})",
        ),
    }
    paths = {}
    for name, fig in figures.items():
        path = os.path.join(out_dir, name)
        write_figure(fig, path)
        paths[name] = path
    return paths
