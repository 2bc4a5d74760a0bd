"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's own code paths: the
Moran oracle is a plain double loop over the weights, the LOESS oracle
solves each local weighted least-squares problem directly, and the
permutation oracles enumerate relabelings by brute force.
"""

from __future__ import annotations

import datetime as dt
import itertools
import json
import math

import numpy as np
import pytest

from mobility_esda.geometry import grid_geometries
from mobility_esda.ingest import CATEGORIES, MobilityRecord, MobilityTable, region_key
from mobility_esda.weights import SpatialWeights, queen_adjacency, rook_adjacency, row_standardize


# ---------------------------------------------------------------- oracles

def moran_oracle(x, W: SpatialWeights) -> float:
    """Direct double-sum evaluation of the global index."""
    x = list(map(float, x))
    n = len(x)
    mu = sum(x) / n
    num = 0.0
    s0 = 0.0
    for i in range(n):
        for j, w in zip(W.neighbors[i], W.weights[i]):
            num += w * (x[i] - mu) * (x[j] - mu)
            s0 += w
    den = sum((xi - mu) ** 2 for xi in x)
    return (n / s0) * num / den


def loess_oracle_point(xs, ys, window, degree, x0) -> float:
    """Weighted least-squares fit at a single point, solved via the
    normal equations on an explicit polynomial basis."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    d = np.abs(xs - x0)
    idx = np.argsort(d, kind="stable")[:window]
    h = d[idx].max()
    u = d[idx] / h
    w = np.where(u < 1, (1 - u**3) ** 3, 0.0)
    X = np.column_stack([(xs[idx] - x0) ** p for p in range(degree + 1)])
    WX = X * w[:, None]
    beta = np.linalg.solve(WX.T @ X, WX.T @ ys[idx])
    return float(beta[0])


def exhaustive_pseudo_p(x, W: SpatialWeights, sided="one_sided_folded") -> float:
    """Brute-force enumeration of all n! relabelings for the global test."""
    x = np.asarray(x, float)
    n = len(x)
    observed = moran_oracle(x, W)
    sims = [moran_oracle(x[list(p)], W) for p in itertools.permutations(range(n))]
    ref = -1.0 / (n - 1)
    dev = observed - ref
    eps = 1e-12
    if dev > 0:
        M = sum(1 for s in sims if s >= observed - eps)
    elif dev < 0:
        M = sum(1 for s in sims if s <= observed + eps)
    else:
        M = len(sims)
    return (M + 1) / (len(sims) + 1)


def exhaustive_conditional_p(z, W: SpatialWeights, i: int) -> float:
    """Brute-force conditional enumeration of the local test at region i."""
    z = np.asarray(z, float)
    n = len(z)
    nbrs = W.neighbors[i]
    wts = W.weights[i]
    others = np.delete(z, i)
    observed = z[i] * sum(w * z[j] for j, w in zip(nbrs, wts))
    sims = [
        z[i] * sum(w * others[a] for a, w in zip(arr, wts))
        for arr in itertools.permutations(range(n - 1), len(nbrs))
    ]
    ref = -(z[i] ** 2) * sum(wts) / (n - 1)
    dev = observed - ref
    eps = 1e-12
    if dev > 0:
        M = sum(1 for s in sims if s >= observed - eps)
    elif dev < 0:
        M = sum(1 for s in sims if s <= observed + eps)
    else:
        M = len(sims)
    return (M + 1) / (len(sims) + 1)


# ---------------------------------------------------------------- fixtures

@pytest.fixture
def pair_weights():
    """Two mutually adjacent regions, row-standardized."""
    W = SpatialWeights.from_neighbors(["a", "b"], {"a": ["b"], "b": ["a"]})
    return row_standardize(W)


@pytest.fixture
def rook_2x2():
    return rook_adjacency(grid_geometries(2, 2))


@pytest.fixture
def rook_2x2_rs(rook_2x2):
    return row_standardize(rook_2x2)


@pytest.fixture
def queen_6x6_rs():
    return row_standardize(queen_adjacency(grid_geometries(6, 6)))


@pytest.fixture
def star_5():
    """Five regions, hub-and-spoke: s0 touches every leaf."""
    W = SpatialWeights.from_neighbors(
        ["s0", "s1", "s2", "s3", "s4"],
        {"s0": ["s1", "s2", "s3", "s4"], "s1": ["s0"], "s2": ["s0"], "s3": ["s0"], "s4": ["s0"]},
    )
    return row_standardize(W)


def make_table(rows, baseline_window=None) -> MobilityTable:
    """rows: (country, sub_region, iso_date, {category: value_or_None})."""
    records = []
    for country, sub, date, values in rows:
        full = {cat: values.get(cat) for cat in CATEGORIES}
        records.append(
            MobilityRecord(
                region_id=region_key(country, sub),
                country_code=country,
                sub_region=sub,
                date=dt.date.fromisoformat(date),
                values=full,
            )
        )
    kwargs = {}
    if baseline_window is not None:
        kwargs["baseline_window"] = baseline_window
    return MobilityTable(records, **kwargs)


def flat_values(v: float) -> dict[str, float]:
    return {cat: v for cat in CATEGORIES}


def grid_geojson(nrows: int, ncols: int) -> dict:
    """FeatureCollection mirroring grid_geometries ids and coordinates."""
    features = []
    for g in grid_geometries(nrows, ncols):
        features.append(
            {
                "type": "Feature",
                "properties": {"region_id": g.region_id},
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[list(p) for p in ring] for ring in g.rings],
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def synthetic_country_csv(nrows: int, ncols: int, days: int, seed: int = 7) -> str:
    """Mobility CSV for a synthetic country 'SY' over a square grid.

    Values carry a smooth west-east spatial gradient plus weekday noise;
    a handful of cells are blanked to exercise imputation.
    """
    rng = np.random.default_rng(seed)
    header = (
        "country_region_code,sub_region_1,date,"
        "retail_and_recreation_percent_change_from_baseline,"
        "grocery_and_pharmacy_percent_change_from_baseline,"
        "parks_percent_change_from_baseline,"
        "transit_stations_percent_change_from_baseline,"
        "workplaces_percent_change_from_baseline,"
        "residential_percent_change_from_baseline"
    )
    lines = [header]
    start = dt.date(2020, 3, 1)
    for r in range(nrows):
        for c in range(ncols):
            base = -60 + 8 * c + 3 * r  # spatial gradient
            for d in range(days):
                date = start + dt.timedelta(days=d)
                cells = []
                for k in range(6):
                    v = base + 4 * k + 2 * math.sin(2 * math.pi * d / 7) + rng.normal(0, 1.5)
                    v = max(v, -100.0)
                    if rng.random() < 0.01:
                        cells.append("")
                    else:
                        cells.append(f"{v:.2f}")
                lines.append(f"SY,cell{r}_{c},{date.isoformat()}," + ",".join(cells))
    return "\n".join(lines) + "\n"


@pytest.fixture
def synthetic_country(tmp_path):
    """(csv_path, geojson_path) for a 4x4 synthetic country."""
    csv_path = tmp_path / "sy.csv"
    csv_path.write_text(synthetic_country_csv(4, 4, 21))
    geo_path = tmp_path / "sy.geojson"
    geo_path.write_text(json.dumps(grid_geojson(4, 4), indent=1))
    return csv_path, geo_path
