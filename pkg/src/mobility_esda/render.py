"""Static SVG figures and CSV/GeoJSON exports.

All renderers are pure functions of their inputs: the same inputs always
produce byte-identical SVG, which keeps golden-file and hash-based
regression tests simple.
"""

from __future__ import annotations

import io
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .geometry import RegionGeometry
from .indicator import RadarConfig
from .moran import LisaResult, MoranScatter

# conventional LISA palettes
CLUSTER_COLORS = {
    "HH": "#d7191c",
    "LL": "#2c7bb6",
    "LH": "#abd9e9",
    "HL": "#fdae61",
    "ns": "#d9d9d9",
}
SIGNIFICANCE_COLORS = {0.05: "#a1d99b", 0.01: "#41ab5d", 0.001: "#00441b", None: "#d9d9d9"}


@dataclass
class ColorScale:
    kind: str  # sequential | diverging | categorical
    stops: list[tuple[float, str]]
    missing_color: str = "#cccccc"

    def __post_init__(self):
        if self.kind not in ("sequential", "diverging", "categorical"):
            raise ParameterError(f"unknown scale kind {self.kind!r}")
        values = [v for v, _ in self.stops]
        if values != sorted(values) or len(set(values)) != len(values):
            raise ParameterError("stops must be strictly increasing in value")
        for _, c in self.stops:
            _parse_hex(c)
        _parse_hex(self.missing_color)

    def color(self, value: float | None) -> str:
        if value is None:
            return self.missing_color
        stops = self.stops
        if value <= stops[0][0]:
            return stops[0][1]
        if value >= stops[-1][0]:
            return stops[-1][1]
        for (v0, c0), (v1, c1) in zip(stops, stops[1:]):
            if v0 <= value <= v1:
                t = (value - v0) / (v1 - v0)
                return _lerp_hex(c0, c1, t)
        raise AssertionError("unreachable")


def _parse_hex(c: str) -> tuple[int, int, int]:
    if not (len(c) == 7 and c[0] == "#"):
        raise ParameterError(f"invalid color {c!r}")
    try:
        return int(c[1:3], 16), int(c[3:5], 16), int(c[5:7], 16)
    except ValueError:
        raise ParameterError(f"invalid color {c!r}") from None


def _lerp_hex(c0: str, c1: str, t: float) -> str:
    a = _parse_hex(c0)
    b = _parse_hex(c1)
    rgb = tuple(round(x + (y - x) * t) for x, y in zip(a, b))
    return "#%02x%02x%02x" % rgb


@dataclass
class FigureSpec:
    width: int = 640
    height: int = 480
    title: str = ""
    margin: int = 40
    legend: list[tuple[str, str]] = field(default_factory=list)  # (label, color)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ParameterError("figure dimensions must be positive")


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def _svg_open(spec: FigureSpec) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect width="{spec.width}" height="{spec.height}" fill="#ffffff"/>',
    ]
    if spec.title:
        parts.append(
            f'<text x="{spec.width // 2}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{_escape(spec.title)}</text>'
        )
    return parts


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _legend(spec: FigureSpec, entries: list[tuple[str, str]]) -> list[str]:
    parts = []
    x = spec.width - spec.margin - 110
    y = spec.margin
    for k, (label, color) in enumerate(entries):
        yy = y + 18 * k
        parts.append(f'<rect x="{x}" y="{yy}" width="12" height="12" fill="{color}" stroke="#000000"/>')
        parts.append(
            f'<text x="{x + 18}" y="{yy + 10}" font-family="sans-serif" '
            f'font-size="11">{_escape(label)}</text>'
        )
    return parts


def _projector(geoms: list[RegionGeometry], spec: FigureSpec):
    xs0 = min(g.bbox()[0] for g in geoms)
    ys0 = min(g.bbox()[1] for g in geoms)
    xs1 = max(g.bbox()[2] for g in geoms)
    ys1 = max(g.bbox()[3] for g in geoms)
    dw = max(xs1 - xs0, 1e-12)
    dh = max(ys1 - ys0, 1e-12)
    m = spec.margin
    scale = min((spec.width - 2 * m) / dw, (spec.height - 2 * m) / dh)

    def project(p):
        x = m + (p[0] - xs0) * scale
        y = spec.height - m - (p[1] - ys0) * scale
        return x, y

    return project


def _polygon_paths(g: RegionGeometry, project, fill: str) -> str:
    cmds = []
    for ring in g.rings:
        pts = [project(p) for p in ring]
        d = "M" + " L".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts[:-1]) + " Z"
        cmds.append(d)
    return f'<path d="{" ".join(cmds)}" fill="{fill}" stroke="#333333" stroke-width="0.5"/>'


def render_choropleth(
    geoms: list[RegionGeometry],
    values: dict[str, float | None],
    scale: ColorScale,
    spec: FigureSpec = FigureSpec(),
) -> str:
    """One filled path per region, colored via the scale; missing regions
    get the scale's missing color and are listed in a warnings comment."""
    project = _projector(geoms, spec)
    parts = _svg_open(spec)
    warnings = [rid for rid in values if rid not in {g.region_id for g in geoms}]
    if warnings:
        parts.append(f"<!-- warning: no geometry for {', '.join(sorted(warnings))} -->")
    for g in sorted(geoms, key=lambda g: g.region_id):
        parts.append(_polygon_paths(g, project, scale.color(values.get(g.region_id))))
    present = [v for v in values.values() if v is not None]
    legend = list(spec.legend)
    if not legend and present:
        lo, hi = min(present), max(present)
        legend = [(f"min {_fmt(lo)}", scale.color(lo)), (f"max {_fmt(hi)}", scale.color(hi))]
    parts.extend(_legend(spec, legend))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_lisa_maps(
    geoms: list[RegionGeometry],
    lisa: LisaResult,
    spec: FigureSpec = FigureSpec(),
) -> tuple[str, str]:
    """Cluster map (HH/LL/LH/HL/ns) and significance-tier map."""
    by_id = dict(zip(lisa.ids, lisa.labels))
    tiers = dict(zip(lisa.ids, lisa.tiers))
    missing = [g.region_id for g in geoms if g.region_id not in by_id]
    if missing:
        raise DataError(f"no classification for regions: {missing}")
    project = _projector(geoms, spec)

    cluster = _svg_open(spec)
    for g in sorted(geoms, key=lambda g: g.region_id):
        cluster.append(_polygon_paths(g, project, CLUSTER_COLORS[by_id[g.region_id]]))
    cluster.extend(
        _legend(spec, [(lbl, CLUSTER_COLORS[lbl]) for lbl in ("HH", "LL", "LH", "HL", "ns")])
    )
    cluster.append("</svg>")

    signif = _svg_open(spec)
    for g in sorted(geoms, key=lambda g: g.region_id):
        signif.append(_polygon_paths(g, project, SIGNIFICANCE_COLORS[tiers[g.region_id]]))
    signif.extend(
        _legend(
            spec,
            [
                ("p <= 0.05", SIGNIFICANCE_COLORS[0.05]),
                ("p <= 0.01", SIGNIFICANCE_COLORS[0.01]),
                ("p <= 0.001", SIGNIFICANCE_COLORS[0.001]),
                ("ns", SIGNIFICANCE_COLORS[None]),
            ],
        )
    )
    signif.append("</svg>")
    return "\n".join(cluster) + "\n", "\n".join(signif) + "\n"


def render_moran_scatter(scatter: MoranScatter, spec: FigureSpec = FigureSpec()) -> str:
    """Scatter of (z, lag) with axes through the origin and the
    origin-regression line whose slope is the global index."""
    if len(scatter.z) < 2:
        raise ParameterError("need at least 2 points")
    m = spec.margin
    extent = max(
        1e-9,
        float(np.max(np.abs(scatter.z))),
        float(np.max(np.abs(scatter.lag))),
    ) * 1.1
    half_w = (spec.width - 2 * m) / 2
    half_h = (spec.height - 2 * m) / 2
    cx, cy = m + half_w, m + half_h

    def project(zx, zy):
        return cx + zx / extent * half_w, cy - zy / extent * half_h

    parts = _svg_open(spec)
    parts.append(
        f'<line x1="{_fmt(m)}" y1="{_fmt(cy)}" x2="{_fmt(spec.width - m)}" y2="{_fmt(cy)}" stroke="#000000"/>'
    )
    parts.append(
        f'<line x1="{_fmt(cx)}" y1="{_fmt(m)}" x2="{_fmt(cx)}" y2="{_fmt(spec.height - m)}" stroke="#000000"/>'
    )
    x0, y0 = project(-extent, -extent * scatter.slope)
    x1, y1 = project(extent, extent * scatter.slope)
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
        f'stroke="#d7191c" stroke-width="1.5"/>'
    )
    for zi, li in zip(scatter.z, scatter.lag):
        x, y = project(zi, li)
        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="#2c7bb6"/>')
    for label, (qx, qy) in (("Q1", (1, 1)), ("Q2", (-1, -1)), ("Q3", (-1, 1)), ("Q4", (1, -1))):
        x, y = project(qx * extent * 0.85, qy * extent * 0.85)
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_radar(
    values: dict[str, float],
    config: RadarConfig = RadarConfig(),
    spec: FigureSpec = FigureSpec(width=480, height=480),
) -> str:
    """Hexagonal radar chart: axis spokes, the value polygon, and a
    reference hexagon at the baseline (0 percent) radius."""
    from .indicator import radar_radii

    radii = radar_radii(values, config)
    baseline_r = -config.center
    max_r = max(baseline_r, float(max(radii)))
    m = spec.margin
    cx, cy = spec.width / 2, spec.height / 2
    plot_r = min(spec.width, spec.height) / 2 - m

    def vertex(k: int, r: float):
        theta = math.radians(90 - 60 * k)
        return cx + r / max_r * plot_r * math.cos(theta), cy - r / max_r * plot_r * math.sin(theta)

    parts = _svg_open(spec)
    for k, cat in enumerate(config.axis_order):
        x, y = vertex(k, max_r)
        parts.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(cy)}" x2="{_fmt(x)}" y2="{_fmt(y)}" stroke="#999999"/>'
        )
        lx, ly = vertex(k, max_r * 1.06)
        parts.append(
            f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_escape(cat)}</text>'
        )
    base_pts = " ".join(
        f"{_fmt(x)},{_fmt(y)}" for x, y in (vertex(k, baseline_r) for k in range(6))
    )
    parts.append(f'<polygon points="{base_pts}" fill="none" stroke="#777777" stroke-dasharray="4 3"/>')
    val_pts = " ".join(
        f"{_fmt(x)},{_fmt(y)}" for x, y in (vertex(k, radii[k]) for k in range(6))
    )
    parts.append(
        f'<polygon points="{val_pts}" fill="#2c7bb6" fill-opacity="0.35" stroke="#2c7bb6"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_series(
    series: dict[str, tuple[list, np.ndarray]],
    spec: FigureSpec = FigureSpec(),
) -> str:
    """Line plot of one or more (dates, values) series, e.g. the daily
    circulation indicator for several regions."""
    if not series:
        raise ParameterError("no series to plot")
    palette = ["#2c7bb6", "#d7191c", "#1a9641", "#fdae61", "#7b3294", "#d01c8b", "#636363"]
    all_vals = np.concatenate([np.asarray(v, dtype=float) for _, v in series.values()])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi == lo:
        hi = lo + 1.0
    maxlen = max(len(v) for _, v in series.values())
    m = spec.margin
    iw, ih = spec.width - 2 * m, spec.height - 2 * m

    def project(i, v):
        x = m + (i / max(maxlen - 1, 1)) * iw
        y = spec.height - m - (v - lo) / (hi - lo) * ih
        return x, y

    parts = _svg_open(spec)
    legend = []
    for k, name in enumerate(sorted(series)):
        _, vals = series[name]
        color = palette[k % len(palette)]
        pts = " ".join(
            f"{_fmt(x)},{_fmt(y)}" for x, y in (project(i, v) for i, v in enumerate(vals))
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        legend.append((name, color))
    parts.extend(_legend(spec, legend))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def lisa_to_csv(lisa: LisaResult) -> str:
    """Stable-column CSV: region_id, local_i, lag, pseudo_p, quadrant, tier."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["region_id", "local_i", "lag", "pseudo_p", "quadrant", "tier"])
    for i, rid in enumerate(lisa.ids):
        tier = "" if lisa.tiers[i] is None else f"{lisa.tiers[i]:g}"
        writer.writerow(
            [
                rid,
                f"{lisa.local_i[i]:.15g}",
                f"{lisa.lag[i]:.15g}",
                f"{lisa.pseudo_p[i]:.15g}",
                lisa.labels[i],
                tier,
            ]
        )
    return buf.getvalue()


def join_geojson(doc: dict, properties: dict[str, dict], id_property: str = "region_id") -> str:
    """Merge per-region result properties into a GeoJSON document.

    Every key in ``properties`` must match a feature id; unjoinable ids
    are an error so silent mismatches cannot slip through.
    """
    feature_ids = {
        str((f.get("properties") or {}).get(id_property)) for f in doc.get("features", [])
    }
    unjoinable = sorted(set(properties) - feature_ids)
    if unjoinable:
        raise DataError(f"unjoinable region ids: {unjoinable}")
    out = json.loads(json.dumps(doc))  # deep copy
    for f in out.get("features", []):
        rid = str((f.get("properties") or {}).get(id_property))
        if rid in properties:
            f["properties"].update(properties[rid])
    return json.dumps(out, indent=2, sort_keys=True) + "\n"
