"""Radar-area circulation indicator over the six mobility categories.

Each day's six percent changes are drawn as radii of a hexagonal radar
chart anchored at a common minimum value C; the hexagon area (sum of six
triangles, each half the product of adjacent radii times sin 60 degrees)
is compared against the baseline-level area to yield a dimensionless
circulation indicator: 1 means baseline-level circulation, 0 means none.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .ingest import CATEGORIES, MobilityTable

SIN_60 = math.sqrt(3) / 2


@dataclass(frozen=True)
class RadarConfig:
    center: float = -100.0
    axis_order: tuple[str, ...] = CATEGORIES

    def __post_init__(self):
        if sorted(self.axis_order) != sorted(CATEGORIES):
            raise ParameterError(
                f"axis_order must be a permutation of {CATEGORIES}, got {self.axis_order}"
            )
        if self.center > -100.0:
            raise ParameterError(f"center must be <= -100, got {self.center}")


@dataclass
class CirculationSeries:
    dates: list[dt.date]
    areas: np.ndarray
    baseline_area: float
    indicators: np.ndarray = field(init=False)

    def __post_init__(self):
        self.areas = np.asarray(self.areas, dtype=float)
        self.indicators = self.areas / self.baseline_area

    @property
    def period_indicator(self) -> float:
        """Windowed ratio: sum of daily areas over T x baseline area."""
        return float(self.areas.sum() / (len(self.areas) * self.baseline_area))


def radar_radii(values: dict[str, float], config: RadarConfig = RadarConfig()) -> np.ndarray:
    """Radii in axis order: value minus the chart center C."""
    radii = np.empty(6)
    for k, cat in enumerate(config.axis_order):
        v = values[cat]
        if v < config.center:
            raise ParameterError(f"{cat} value {v} below center {config.center}")
        radii[k] = v - config.center
    return radii


def radar_area(radii) -> float:
    """Hexagon area: sum over adjacent radius pairs of (1/2) r_k r_{k+1} sin 60."""
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (6,):
        raise ParameterError(f"expected six radii, got shape {radii.shape}")
    if np.any(radii < 0):
        raise ParameterError("radii must be non-negative")
    return float(0.5 * SIN_60 * np.sum(radii * np.roll(radii, -1)))


def baseline_area(config: RadarConfig = RadarConfig()) -> float:
    """Area when all six categories sit at the baseline level (0 percent)."""
    return radar_area(np.full(6, -config.center))


def circulation_indicator(
    table: MobilityTable,
    region_id: str,
    config: RadarConfig = RadarConfig(),
    window: tuple[dt.date, dt.date] | None = None,
) -> CirculationSeries:
    """Daily radar areas and indicator values for one region.

    The region's series must be complete (imputed) over the window;
    missing cells are a hard error here, not silently skipped.
    """
    recs = [r for r in table.records if r.region_id == region_id]
    if window is not None:
        recs = [r for r in recs if window[0] <= r.date <= window[1]]
    if not recs:
        raise DataError(f"no data for region {region_id!r} in requested window")
    if window is not None:
        expected = (window[1] - window[0]).days + 1
        if len(recs) != expected:
            raise DataError(
                f"region {region_id!r} covers {len(recs)} of {expected} days "
                f"in {window[0]}..{window[1]}"
            )
    dates = []
    areas = []
    for rec in recs:
        missing = rec.missing_categories()
        if missing:
            raise DataError(
                f"{region_id} {rec.date}: missing {missing}; impute first"
            )
        dates.append(rec.date)
        areas.append(radar_area(radar_radii(rec.values, config)))
    return CirculationSeries(dates, np.array(areas), baseline_area(config))
