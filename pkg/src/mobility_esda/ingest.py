"""Parsing, filtering, and mean imputation of mobility-report CSV data.

The input format is the Google community mobility report layout: one row
per (region, date) with six percent-change-from-baseline columns. Empty
cells are genuinely missing values (suppressed below significance
thresholds), never zeros.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field

from .errors import DataError, NotFoundError, SchemaError

CATEGORIES = (
    "retail_recreation",
    "grocery_pharmacy",
    "parks",
    "transit_stations",
    "workplaces",
    "residential",
)

DEFAULT_COLUMNS = {
    "country_code": "country_region_code",
    "sub_region": "sub_region_1",
    "date": "date",
    "retail_recreation": "retail_and_recreation_percent_change_from_baseline",
    "grocery_pharmacy": "grocery_and_pharmacy_percent_change_from_baseline",
    "parks": "parks_percent_change_from_baseline",
    "transit_stations": "transit_stations_percent_change_from_baseline",
    "workplaces": "workplaces_percent_change_from_baseline",
    "residential": "residential_percent_change_from_baseline",
}

DEFAULT_BASELINE_WINDOW = (dt.date(2020, 1, 3), dt.date(2020, 2, 6))


def region_key(country_code: str, sub_region: str = "") -> str:
    """Stable region identifier: ``country_code + "/" + sub_region``.

    National rows carry an empty sub-region, e.g. ``"BR/"``.
    """
    return f"{country_code}/{sub_region}"


@dataclass
class MobilityRecord:
    region_id: str
    country_code: str
    sub_region: str
    date: dt.date
    values: dict[str, float | None]

    def missing_categories(self) -> list[str]:
        return [c for c in CATEGORIES if self.values.get(c) is None]


@dataclass
class MobilityTable:
    records: list[MobilityRecord]
    coverage: tuple[dt.date, dt.date] | None = None
    baseline_window: tuple[dt.date, dt.date] = DEFAULT_BASELINE_WINDOW
    issues: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.records.sort(key=lambda r: (r.region_id, r.date))
        if self.coverage is None and self.records:
            dates = [r.date for r in self.records]
            self.coverage = (min(dates), max(dates))
        self._validate()

    def _validate(self) -> None:
        seen: set[tuple[str, dt.date]] = set()
        for rec in self.records:
            key = (rec.region_id, rec.date)
            if key in seen:
                raise DataError(f"duplicate (region, date) pair: {key}")
            seen.add(key)
            for cat, v in rec.values.items():
                if v is not None and v < -100:
                    raise DataError(
                        f"{rec.region_id} {rec.date} {cat}: value {v} below -100"
                    )
        # gaps are reported, not fatal: a region's dates must be contiguous
        for rid, dates in self._dates_by_region().items():
            for a, b in zip(dates, dates[1:]):
                if (b - a).days != 1:
                    self.issues.append(f"gap in {rid}: {a} .. {b}")

    def _dates_by_region(self) -> dict[str, list[dt.date]]:
        out: dict[str, list[dt.date]] = {}
        for rec in self.records:
            out.setdefault(rec.region_id, []).append(rec.date)
        return out

    def region_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.region_id)
        return list(seen)

    def country_codes(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.country_code)
        return list(seen)

    def series(self, region_id: str, category: str) -> tuple[list[dt.date], list[float | None]]:
        """Daily (dates, values) for one region and category."""
        recs = [r for r in self.records if r.region_id == region_id]
        if not recs:
            raise NotFoundError(
                f"unknown region {region_id!r}; available: {sorted(self.region_ids())}"
            )
        return [r.date for r in recs], [r.values.get(category) for r in recs]


@dataclass
class ImputationEntry:
    country_code: str
    category: str
    missing_count: int
    total_count: int
    fill_value: float | None

    @property
    def missing_rate(self) -> float:
        return self.missing_count / self.total_count if self.total_count else 0.0


@dataclass
class ImputationReport:
    entries: list[ImputationEntry]

    def entry(self, country_code: str, category: str) -> ImputationEntry:
        for e in self.entries:
            if e.country_code == country_code and e.category == category:
                return e
        raise NotFoundError(f"no imputation entry for ({country_code}, {category})")

    def to_json(self) -> str:
        payload = [
            {
                "country_code": e.country_code,
                "category": e.category,
                "missing_count": e.missing_count,
                "total_count": e.total_count,
                "missing_rate": e.missing_rate,
                "fill_value": e.fill_value,
            }
            for e in self.entries
        ]
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def _as_text(source) -> io.TextIOBase:
    if isinstance(source, (str, bytes)):
        if isinstance(source, bytes):
            return io.StringIO(source.decode("utf-8"))
        return io.StringIO(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise TypeError(f"unsupported source type: {type(source)!r}")


def parse_cmr_csv(
    source,
    column_map: dict[str, str] | None = None,
    strict: bool = True,
    baseline_window: tuple[dt.date, dt.date] = DEFAULT_BASELINE_WINDOW,
) -> MobilityTable:
    """Parse a community-mobility CSV into a :class:`MobilityTable`.

    ``column_map`` maps logical names (keys of ``DEFAULT_COLUMNS``) to
    actual header names. Empty cells become ``None``. In strict mode any
    bad row aborts the parse; in lenient mode bad rows are skipped and
    reported in ``table.issues``.
    """
    columns = dict(DEFAULT_COLUMNS)
    if column_map:
        unknown = set(column_map) - set(columns)
        if unknown:
            raise SchemaError(f"unknown column-map keys: {sorted(unknown)}")
        columns.update(column_map)

    reader = csv.DictReader(_as_text(source))
    if reader.fieldnames is None:
        raise SchemaError("empty input: no header row")
    missing_cols = [v for v in columns.values() if v not in reader.fieldnames]
    if missing_cols:
        raise SchemaError(f"missing columns: {missing_cols}")

    records: list[MobilityRecord] = []
    issues: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        try:
            records.append(_parse_row(row, columns, lineno))
        except DataError as exc:
            if strict:
                raise
            issues.append(str(exc))
    table = MobilityTable(records, baseline_window=baseline_window)
    table.issues = issues + table.issues
    return table


def _parse_row(row: dict, columns: dict[str, str], lineno: int) -> MobilityRecord:
    raw_date = (row.get(columns["date"]) or "").strip()
    try:
        date = dt.date.fromisoformat(raw_date)
    except ValueError:
        raise DataError(f"line {lineno}: unparseable date {raw_date!r}") from None
    country = (row.get(columns["country_code"]) or "").strip()
    if not country:
        raise DataError(f"line {lineno}: empty country code")
    sub_region = (row.get(columns["sub_region"]) or "").strip()
    values: dict[str, float | None] = {}
    for cat in CATEGORIES:
        cell = (row.get(columns[cat]) or "").strip()
        if cell == "":
            values[cat] = None
            continue
        try:
            values[cat] = float(cell)
        except ValueError:
            raise DataError(
                f"line {lineno}: non-numeric {cat} cell {cell!r}"
            ) from None
    return MobilityRecord(
        region_id=region_key(country, sub_region),
        country_code=country,
        sub_region=sub_region,
        date=date,
        values=values,
    )


def filter_region(
    table: MobilityTable, country_code: str, sub_region: str | None = None
) -> MobilityTable:
    """Subset to one country; ``sub_region=None`` keeps national rows only."""
    if country_code not in table.country_codes():
        raise NotFoundError(
            f"unknown country {country_code!r}; available: {sorted(table.country_codes())}"
        )
    if sub_region is None:
        recs = [r for r in table.records if r.country_code == country_code and r.sub_region == ""]
    else:
        recs = [
            r
            for r in table.records
            if r.country_code == country_code and r.sub_region == sub_region
        ]
        if not recs:
            avail = sorted(
                {r.sub_region for r in table.records if r.country_code == country_code and r.sub_region}
            )
            raise NotFoundError(
                f"unknown sub-region {sub_region!r} in {country_code}; available: {avail}"
            )
    return MobilityTable(
        [MobilityRecord(r.region_id, r.country_code, r.sub_region, r.date, dict(r.values)) for r in recs],
        baseline_window=table.baseline_window,
    )


def subnational(table: MobilityTable, country_code: str) -> MobilityTable:
    """Subset to a country's sub-region rows (national-level rows dropped)."""
    if country_code not in table.country_codes():
        raise NotFoundError(
            f"unknown country {country_code!r}; available: {sorted(table.country_codes())}"
        )
    recs = [r for r in table.records if r.country_code == country_code and r.sub_region != ""]
    return MobilityTable(
        [MobilityRecord(r.region_id, r.country_code, r.sub_region, r.date, dict(r.values)) for r in recs],
        baseline_window=table.baseline_window,
    )


def impute_missing(table: MobilityTable) -> tuple[MobilityTable, ImputationReport]:
    """Single mean imputation per (country, category) over the full table.

    Every absent cell is replaced by the arithmetic mean of all present
    values for the same country and category. A pair with missing cells
    but no present values at all is unimputable.
    """
    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    missing: dict[tuple[str, str], int] = {}
    totals: dict[tuple[str, str], int] = {}
    for rec in table.records:
        for cat in CATEGORIES:
            key = (rec.country_code, cat)
            totals[key] = totals.get(key, 0) + 1
            v = rec.values.get(cat)
            if v is None:
                missing[key] = missing.get(key, 0) + 1
            else:
                sums[key] = sums.get(key, 0.0) + v
                counts[key] = counts.get(key, 0) + 1

    fills: dict[tuple[str, str], float | None] = {}
    for key in totals:
        if counts.get(key, 0) > 0:
            fills[key] = sums[key] / counts[key]
        else:
            fills[key] = None
        if missing.get(key, 0) > 0 and fills[key] is None:
            raise DataError(
                f"cannot impute ({key[0]}, {key[1]}): every value is missing"
            )

    new_records = []
    for rec in table.records:
        values = dict(rec.values)
        for cat in CATEGORIES:
            if values.get(cat) is None:
                values[cat] = fills[(rec.country_code, cat)]
        new_records.append(
            MobilityRecord(rec.region_id, rec.country_code, rec.sub_region, rec.date, values)
        )

    entries = [
        ImputationEntry(
            country_code=country,
            category=cat,
            missing_count=missing.get((country, cat), 0),
            total_count=totals[(country, cat)],
            fill_value=fills[(country, cat)],
        )
        for country, cat in sorted(totals)
    ]
    out = MobilityTable(new_records, baseline_window=table.baseline_window)
    return out, ImputationReport(entries)


def write_csv(table: MobilityTable) -> str:
    """Serialize to normalized CSV (default headers, canonical row order)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [DEFAULT_COLUMNS[k] for k in ("country_code", "sub_region", "date", *CATEGORIES)]
    writer.writerow(header)
    for rec in table.records:
        row = [rec.country_code, rec.sub_region, rec.date.isoformat()]
        for cat in CATEGORIES:
            v = rec.values.get(cat)
            row.append("" if v is None else f"{v:.15g}")
        writer.writerow(row)
    return buf.getvalue()
