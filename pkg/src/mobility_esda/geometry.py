"""Region polygon geometry and GeoJSON loading."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DataError, GeometryError

Point = tuple[float, float]
Ring = list[Point]


@dataclass
class RegionGeometry:
    region_id: str
    rings: list[Ring]  # all rings of all polygons, each closed

    def __post_init__(self):
        for ring in self.rings:
            if len(ring) < 4:
                raise GeometryError(
                    f"{self.region_id}: ring with {len(ring)} points (need >= 4)"
                )
            if ring[0] != ring[-1]:
                raise GeometryError(f"{self.region_id}: ring not closed")

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p[0] for ring in self.rings for p in ring]
        ys = [p[1] for ring in self.rings for p in ring]
        return min(xs), min(ys), max(xs), max(ys)

    def centroid(self) -> Point:
        """Area-weighted centroid over all rings (shoelace formula);
        falls back to the vertex mean for zero-area rings."""
        a_total = cx = cy = 0.0
        for ring in self.rings:
            a = x = y = 0.0
            for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
                cross = x0 * y1 - x1 * y0
                a += cross
                x += (x0 + x1) * cross
                y += (y0 + y1) * cross
            a_total += a / 2
            cx += x / 6
            cy += y / 6
        if a_total == 0:
            pts = [p for ring in self.rings for p in ring[:-1]]
            return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))
        return (cx / a_total, cy / a_total)


def _rings_from_geometry(geom: dict) -> list[Ring]:
    gtype = geom.get("type")
    if gtype == "Polygon":
        polys = [geom["coordinates"]]
    elif gtype == "MultiPolygon":
        polys = geom["coordinates"]
    else:
        raise GeometryError(f"unsupported geometry type {gtype!r}")
    rings = []
    for poly in polys:
        for ring in poly:
            rings.append([(float(x), float(y)) for x, y in ring])
    return rings


def load_geojson(source, id_property: str = "region_id") -> list[RegionGeometry]:
    """Load polygon features from a GeoJSON FeatureCollection.

    ``id_property`` names the feature property carrying the region id.
    """
    if isinstance(source, dict):
        doc = source
    elif isinstance(source, (str, bytes)):
        doc = json.loads(source)
    else:
        doc = json.load(source)
    if doc.get("type") != "FeatureCollection":
        raise DataError(f"expected FeatureCollection, got {doc.get('type')!r}")
    geoms = []
    seen = set()
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        rid = props.get(id_property)
        if rid is None:
            raise DataError(f"feature missing id property {id_property!r}")
        rid = str(rid)
        if rid in seen:
            raise DataError(f"duplicate region id {rid!r}")
        seen.add(rid)
        geoms.append(RegionGeometry(rid, _rings_from_geometry(feature["geometry"])))
    return geoms


def square(x: float, y: float, size: float = 1.0) -> list[Ring]:
    """Unit-square helper for fixtures: lower-left corner at (x, y)."""
    return [[(x, y), (x + size, y), (x + size, y + size), (x, y + size), (x, y)]]


def grid_geometries(
    nrows: int, ncols: int, prefix: str = "cell", size: float = 1.0
) -> list[RegionGeometry]:
    """A nrows x ncols lattice of adjacent squares, row-major ids."""
    geoms = []
    for r in range(nrows):
        for c in range(ncols):
            geoms.append(
                RegionGeometry(f"{prefix}{r}_{c}", square(c * size, -r * size, size))
            )
    return geoms
