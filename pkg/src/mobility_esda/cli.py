"""Command-line pipeline: ingest, indicator, moran, weights, render.

Runs are config-driven and reproducible: every subcommand writes a
run-manifest.json echoing the resolved parameters, all randomness flows
from a single seed, and outputs are written atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import ingest as ing
from . import moran as mr
from . import render as rd
from . import weights as wt
from .errors import (
    DataError,
    GeometryError,
    MobilityError,
    NotFoundError,
    ParameterError,
    SchemaError,
    ZeroVarianceError,
)
from .geometry import load_geojson
from .indicator import RadarConfig, circulation_indicator
from .ingest import CATEGORIES
from .timeseries import DailySeries, deseasonalize, stl_decompose

DEFAULT_ANALYSIS_WINDOW = (dt.date(2020, 2, 15), dt.date(2020, 5, 16))
SEED_ENV_VAR = "ESDA_MOBILITY_SEED"

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_DATA = 3
EXIT_ID_MISMATCH = 4


class IdMismatchError(MobilityError):
    """Geometry and mobility region ids do not reconcile."""


def atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir: Path, command: str, config: dict) -> None:
    # out_dir intentionally excluded so identical runs into different
    # directories produce byte-identical trees
    manifest = {"command": command, "version": __version__, "config": config}
    atomic_write(out_dir / "run-manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_date(s: str) -> dt.date:
    try:
        return dt.date.fromisoformat(s)
    except ValueError:
        raise ParameterError(f"invalid date {s!r} (want YYYY-MM-DD)") from None


def _parse_column_map(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        k, _, v = pair.partition("=")
        if not v:
            raise ParameterError(f"bad --column-map entry {pair!r} (want key=value)")
        out[k] = v
    return out


def _load_config_file(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        import tomllib

        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobility-esda",
        description="Mobility-report ingestion, circulation indicator, and spatial autocorrelation analysis.",
    )
    parser.add_argument("--config", help="TOML/JSON config file; CLI flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV_VAR}, then 0)")

    p = sub.add_parser("ingest", help="parse, validate and impute a mobility CSV")
    common(p)
    p.add_argument("--input", required=True, help="mobility CSV path")
    p.add_argument("--country", help="restrict to one country code")
    p.add_argument("--column-map", nargs="*", default=[], metavar="KEY=HEADER")
    p.add_argument("--lenient", action="store_true", help="skip bad rows instead of aborting")

    p = sub.add_parser("indicator", help="daily circulation indicator per region")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--country", help="country code; with --subnational expands to all sub-regions")
    p.add_argument("--region", action="append", default=[], help="explicit region id (repeatable)")
    p.add_argument("--subnational", action="store_true")
    p.add_argument("--from", dest="date_from", default=DEFAULT_ANALYSIS_WINDOW[0].isoformat())
    p.add_argument("--to", dest="date_to", default=DEFAULT_ANALYSIS_WINDOW[1].isoformat())
    p.add_argument("--center", type=float, default=-100.0, help="radar chart center value C")
    p.add_argument("--axis-order", nargs=6, default=list(CATEGORIES), metavar="CAT")
    p.add_argument("--deseasonalize", action="store_true")
    p.add_argument("--period", type=int, default=7)
    p.add_argument("--seasonal-window", type=int, default=7)
    p.add_argument("--robust", action="store_true", help="robustness iterations in the decomposition")
    p.add_argument("--trend-only", action="store_true", help="plot the smooth trend instead of trend+residual")

    p = sub.add_parser("moran", help="global and local Moran analysis per category")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--geometry", required=True, help="GeoJSON FeatureCollection")
    p.add_argument("--country", required=True)
    p.add_argument("--id-property", default="region_id", help="feature property holding the sub-region name")
    p.add_argument("--from", dest="date_from", default=DEFAULT_ANALYSIS_WINDOW[0].isoformat())
    p.add_argument("--to", dest="date_to", default=DEFAULT_ANALYSIS_WINDOW[1].isoformat())
    p.add_argument("--contiguity", choices=["queen", "rook"], default="queen")
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--snap-tol", type=float, default=1e-7)
    p.add_argument("--island-knn", type=int, default=0,
                   help="attach islands to their k nearest centroids (0 = leave islands)")
    p.add_argument("--categories", nargs="*", default=list(CATEGORIES))

    p = sub.add_parser("weights", help="build and export contiguity weights")
    common(p)
    p.add_argument("--geometry", required=True)
    p.add_argument("--id-property", default="region_id")
    p.add_argument("--contiguity", choices=["queen", "rook"], default="queen")
    p.add_argument("--snap-tol", type=float, default=1e-7)
    p.add_argument("--island-knn", type=int, default=0,
                   help="attach islands to their k nearest centroids (0 = leave islands)")
    p.add_argument("--row-standardize", action="store_true")

    p = sub.add_parser("render", help="choropleth of a per-region values CSV")
    common(p)
    p.add_argument("--geometry", required=True)
    p.add_argument("--id-property", default="region_id")
    p.add_argument("--values", required=True, help="CSV with region_id,value columns")
    p.add_argument("--title", default="")
    return parser


def cmd_ingest(args) -> int:
    out_dir = Path(args.out_dir)
    with open(args.input, "rb") as fh:
        table = ing.parse_cmr_csv(
            fh, column_map=_parse_column_map(args.column_map) or None, strict=not args.lenient
        )
    if args.country:
        kept = [r for r in table.records if r.country_code == args.country]
        if not kept:
            raise NotFoundError(
                f"no rows for country {args.country!r}; available: {sorted(table.country_codes())}"
            )
        table = ing.MobilityTable(kept, baseline_window=table.baseline_window)
    table, report = ing.impute_missing(table)
    atomic_write(out_dir / "mobility-normalized.csv", ing.write_csv(table))
    atomic_write(out_dir / "imputation-report.json", report.to_json())
    write_manifest(
        out_dir,
        "ingest",
        {
            "input": args.input,
            "country": args.country,
            "column_map": _parse_column_map(args.column_map),
            "lenient": args.lenient,
        },
    )
    return EXIT_OK


def _select_regions(table, args) -> list[str]:
    regions = list(args.region)
    if args.country:
        if args.subnational:
            regions += ing.subnational(table, args.country).region_ids()
        else:
            regions.append(ing.region_key(args.country))
    if not regions:
        raise ParameterError("select regions with --region or --country")
    return regions


def cmd_indicator(args) -> int:
    out_dir = Path(args.out_dir)
    window = (_parse_date(args.date_from), _parse_date(args.date_to))
    with open(args.input, "rb") as fh:
        table = ing.parse_cmr_csv(fh)
    table, _ = ing.impute_missing(table)
    config = RadarConfig(center=args.center, axis_order=tuple(args.axis_order))
    regions = _select_regions(table, args)

    rows = ["region_id,date,area,indicator" + (",indicator_deseasonalized" if args.deseasonalize else "")]
    overlay: dict[str, tuple[list, np.ndarray]] = {}
    for rid in regions:
        series = circulation_indicator(table, rid, config, window)
        deseason = None
        if args.deseasonalize:
            daily = DailySeries(series.dates, series.indicators)
            if args.trend_only:
                dec = stl_decompose(
                    daily,
                    period=args.period,
                    seasonal_window=args.seasonal_window,
                    outer_iters=1 if args.robust else 0,
                )
                deseason = dec.trend
            else:
                deseason = deseasonalize(
                    daily,
                    period=args.period,
                    seasonal_window=args.seasonal_window,
                    outer_iters=1 if args.robust else 0,
                ).values
        for k, date in enumerate(series.dates):
            row = f"{rid},{date.isoformat()},{series.areas[k]:.15g},{series.indicators[k]:.15g}"
            if deseason is not None:
                row += f",{deseason[k]:.15g}"
            rows.append(row)
        overlay[rid] = (series.dates, deseason if deseason is not None else series.indicators)
        # radar of the window-mean category values
        mean_values = {
            cat: float(np.mean([r.values[cat] for r in table.records if r.region_id == rid and window[0] <= r.date <= window[1]]))
            for cat in CATEGORIES
        }
        safe = rid.replace("/", "_").strip("_") or "national"
        atomic_write(out_dir / f"radar-{safe}.svg", rd.render_radar(mean_values, config))
    atomic_write(out_dir / "circulation.csv", "\n".join(rows) + "\n")
    atomic_write(
        out_dir / "indicator-overlay.svg",
        rd.render_series(overlay, rd.FigureSpec(title="Circulation indicator")),
    )
    write_manifest(
        out_dir,
        "indicator",
        {
            "input": args.input,
            "regions": sorted(regions),
            "window": [window[0].isoformat(), window[1].isoformat()],
            "center": args.center,
            "axis_order": list(args.axis_order),
            "deseasonalize": args.deseasonalize,
            "period": args.period,
            "seasonal_window": args.seasonal_window,
            "robust": args.robust,
            "trend_only": args.trend_only,
        },
    )
    return EXIT_OK


def _reconcile_ids(geom_ids: list[str], data_ids: list[str]) -> None:
    missing_geo = sorted(set(data_ids) - set(geom_ids))
    missing_dat = sorted(set(geom_ids) - set(data_ids))
    if missing_geo or missing_dat:
        lines = ["geometry/mobility region ids do not match:"]
        for rid in missing_geo:
            lines.append(f"  in mobility only: {rid}")
        for rid in missing_dat:
            lines.append(f"  in geometry only: {rid}")
        raise IdMismatchError("\n".join(lines))


def cmd_moran(args) -> int:
    out_dir = Path(args.out_dir)
    seed = _resolve_seed(args)
    window = (_parse_date(args.date_from), _parse_date(args.date_to))
    with open(args.input, "rb") as fh:
        table = ing.parse_cmr_csv(fh)
    table, _ = ing.impute_missing(table)
    table = ing.subnational(table, args.country)
    with open(args.geometry) as fh:
        geojson_doc = json.load(fh)
    geoms = load_geojson(geojson_doc, id_property=args.id_property)

    # geometry ids carry the sub-region name; align against mobility keys
    geom_region_ids = [ing.region_key(args.country, g.region_id) for g in geoms]
    _reconcile_ids(geom_region_ids, table.region_ids())
    order = {rid: k for k, rid in enumerate(geom_region_ids)}

    build = wt.queen_adjacency if args.contiguity == "queen" else wt.rook_adjacency
    W_binary = build(geoms, snap_tol=args.snap_tol)
    if args.island_knn > 0:
        W_binary = wt.connect_islands_knn(W_binary, geoms, args.island_knn)
    W = wt.row_standardize(W_binary)
    atomic_write(out_dir / "weights.txt", wt.to_text(W_binary))
    atomic_write(out_dir / "weights.json", wt.to_json(W))

    for category in args.categories:
        # regional variable: mean daily percent change over the window
        sums = {rid: [] for rid in geom_region_ids}
        for rec in table.records:
            if window[0] <= rec.date <= window[1]:
                sums[rec.region_id].append(rec.values[category])
        empty = [rid for rid, vals in sums.items() if not vals]
        if empty:
            raise DataError(f"no {category} data in window for: {sorted(empty)}")
        x = np.array([float(np.mean(sums[rid])) for rid in geom_region_ids])

        field = mr.standardize_values(x)
        if field.zero_variance:
            raise ZeroVarianceError(
                f"{category}: identical mean variation in every region; Moran undefined"
            )
        result = mr.moran_permutation(field, W, permutations=args.permutations, seed=seed)
        scatter = mr.moran_scatter(field, W)
        p_local = mr.lisa_permutation(field, W, permutations=args.permutations, seed=seed)
        lisa = mr.lisa_classify(field, W, p_local, alpha=args.alpha)

        cat_dir = out_dir / category
        atomic_write(
            cat_dir / "global.json",
            json.dumps(
                {
                    "category": category,
                    "I": result.I,
                    "expected_I": result.expected,
                    "permutations": result.permutations,
                    "seed": seed,
                    "sided": result.sided,
                    "sim_mean": result.sim_mean,
                    "sim_sd": result.sim_sd,
                    "pseudo_p": result.pseudo_p,
                    "significant": result.pseudo_p <= args.alpha,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )
        atomic_write(
            cat_dir / "scatter.svg",
            rd.render_moran_scatter(scatter, rd.FigureSpec(title=f"Moran scatter: {category}")),
        )
        local_ids = [g.region_id for g in geoms]
        lisa_named = mr.LisaResult(
            local_ids, lisa.local_i, lisa.lag, lisa.pseudo_p, lisa.labels, lisa.tiers, lisa.alpha
        )
        atomic_write(cat_dir / "lisa.csv", rd.lisa_to_csv(lisa_named))
        cluster_svg, signif_svg = rd.render_lisa_maps(
            geoms, lisa_named, rd.FigureSpec(title=f"LISA clusters: {category}")
        )
        atomic_write(cat_dir / "lisa-clusters.svg", cluster_svg)
        atomic_write(cat_dir / "lisa-significance.svg", signif_svg)
        scale = rd.ColorScale(
            "sequential", [(float(x.min()), "#08306b"), (float(x.max()), "#deebf7")]
        ) if x.min() < x.max() else rd.ColorScale("sequential", [(0.0, "#deebf7")])
        atomic_write(
            cat_dir / "mean-variation.svg",
            rd.render_choropleth(
                geoms,
                {g.region_id: float(v) for g, v in zip(geoms, x)},
                scale,
                rd.FigureSpec(title=f"Mean variation: {category}"),
            ),
        )
        atomic_write(
            cat_dir / "mean-variation.geojson",
            rd.join_geojson(
                geojson_doc,
                {
                    local_ids[i]: {
                        "mean_variation": float(x[i]),
                        "local_i": float(lisa.local_i[i]),
                        "pseudo_p": float(lisa.pseudo_p[i]),
                        "quadrant": lisa.labels[i],
                    }
                    for i in range(len(local_ids))
                },
                id_property=args.id_property,
            ),
        )
    write_manifest(
        out_dir,
        "moran",
        {
            "input": args.input,
            "geometry": args.geometry,
            "country": args.country,
            "id_property": args.id_property,
            "window": [window[0].isoformat(), window[1].isoformat()],
            "contiguity": args.contiguity,
            "permutations": args.permutations,
            "alpha": args.alpha,
            "seed": seed,
            "snap_tol": args.snap_tol,
            "island_knn": args.island_knn,
            "categories": list(args.categories),
        },
    )
    return EXIT_OK


def cmd_weights(args) -> int:
    out_dir = Path(args.out_dir)
    with open(args.geometry) as fh:
        geoms = load_geojson(fh, id_property=args.id_property)
    build = wt.queen_adjacency if args.contiguity == "queen" else wt.rook_adjacency
    W = build(geoms, snap_tol=args.snap_tol)
    if args.island_knn > 0:
        W = wt.connect_islands_knn(W, geoms, args.island_knn)
    if args.row_standardize:
        W = wt.row_standardize(W)
    atomic_write(out_dir / "weights.txt", wt.to_text(W))
    atomic_write(out_dir / "weights.json", wt.to_json(W))
    write_manifest(
        out_dir,
        "weights",
        {
            "geometry": args.geometry,
            "id_property": args.id_property,
            "contiguity": args.contiguity,
            "snap_tol": args.snap_tol,
            "island_knn": args.island_knn,
            "row_standardize": args.row_standardize,
        },
    )
    return EXIT_OK


def cmd_render(args) -> int:
    import csv as _csv

    out_dir = Path(args.out_dir)
    with open(args.geometry) as fh:
        geoms = load_geojson(fh, id_property=args.id_property)
    values: dict[str, float | None] = {}
    with open(args.values, newline="") as fh:
        for row in _csv.DictReader(fh):
            if "region_id" not in row or "value" not in row:
                raise SchemaError("values CSV needs region_id and value columns")
            values[row["region_id"]] = float(row["value"]) if row["value"] else None
    present = [v for v in values.values() if v is not None]
    if not present:
        raise DataError("values CSV contains no numeric values")
    lo, hi = min(present), max(present)
    scale = (
        rd.ColorScale("sequential", [(lo, "#08306b"), (hi, "#deebf7")])
        if lo < hi
        else rd.ColorScale("sequential", [(lo, "#deebf7")])
    )
    atomic_write(
        out_dir / "choropleth.svg",
        rd.render_choropleth(geoms, values, scale, rd.FigureSpec(title=args.title)),
    )
    write_manifest(
        out_dir,
        "render",
        {
            "geometry": args.geometry,
            "id_property": args.id_property,
            "values": args.values,
            "title": args.title,
        },
    )
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "indicator": cmd_indicator,
    "moran": cmd_moran,
    "weights": cmd_weights,
    "render": cmd_render,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    # peel off --config first so its values become parser defaults,
    # which explicit CLI flags then override
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre_ns, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if pre_ns.config:
        defaults = {
            k.replace("-", "_"): v for k, v in _load_config_file(pre_ns.config).items()
        }
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    known = {a.dest for a in sub._actions}
                    sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})
                    for a in sub._actions:
                        if a.required and a.dest in defaults:
                            a.required = False
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except IdMismatchError as exc:
        print(f"id mismatch: {exc}", file=sys.stderr)
        return EXIT_ID_MISMATCH
    except (DataError, ZeroVarianceError, NotFoundError, GeometryError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
