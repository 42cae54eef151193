"""Hourly weather archive and climate-scenario projection by mean temperature deltas."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DeltaError, WeatherError, WeatherLookupError
from .thermal import WeatherSample
from .trajectory import day_start

SCENARIOS = ("SSP245", "SSP370", "SSP585")
MAX_FILL_HOURS = 3


def _abs_seconds(ts: dt.datetime) -> int:
    return day_start(ts.date()) + ts.hour * 3600 + ts.minute * 60 + ts.second


def _from_abs(seconds: int) -> dt.datetime:
    return dt.datetime(1970, 1, 1) + dt.timedelta(seconds=int(seconds))


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Rectangular cells carrying an additive temperature offset (F).

    Points outside every cell get no offset; the first matching cell wins.
    """
    cell_ids: tuple
    bounds: np.ndarray   # (n, 4): min_lat, min_lon, max_lat, max_lon
    offsets: np.ndarray

    @classmethod
    def load(cls, path) -> "SpatialGrid":
        ids, bounds, offs = [], [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ids.append(row["cell_id"])
                bounds.append([float(row[k]) for k in ("min_lat", "min_lon", "max_lat", "max_lon")])
                offs.append(float(row["offset_f"]))
        return cls(tuple(ids), np.asarray(bounds, dtype=float).reshape(-1, 4), np.asarray(offs, dtype=float))

    def offset(self, lat, lon) -> np.ndarray:
        lat = np.atleast_1d(np.asarray(lat, dtype=float))
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        out = np.zeros(lat.shape)
        done = np.zeros(lat.shape, dtype=bool)
        for (a, b, c, d), off in zip(self.bounds, self.offsets):
            inside = ~done & (lat >= a) & (lat <= c) & (lon >= b) & (lon <= d)
            out[inside] = off
            done |= inside
        return out


@dataclass(frozen=True, eq=False)
class WeatherArchive:
    """Contiguous hourly records starting at ``start`` (naive local time)."""
    start: dt.datetime
    temp_f: np.ndarray
    rh_pct: np.ndarray
    wind_mph: np.ndarray
    grid: Optional[SpatialGrid] = None
    filled: tuple = field(default=())    # timestamps that were interpolated

    def __len__(self):
        return len(self.temp_f)

    @property
    def start_abs(self) -> int:
        return _abs_seconds(self.start)

    @property
    def timestamps(self) -> list:
        return [self.start + dt.timedelta(hours=i) for i in range(len(self))]

    def hour_positions(self, t) -> np.ndarray:
        """Index of the hourly record containing each absolute second."""
        t = np.asarray(t, dtype=np.int64)
        pos = (t - self.start_abs) // 3600
        bad = (pos < 0) | (pos >= len(self))
        if np.any(bad):
            first = int(np.asarray(t)[bad].flat[0])
            hour = _from_abs(first - first % 3600)
            raise WeatherLookupError(f"no weather for hour {hour.isoformat()} "
                                     f"(archive covers {self.start.isoformat()} + {len(self)} h)")
        return pos

    def sample_arrays(self, t, lat=None, lon=None):
        pos = self.hour_positions(t)
        temp = self.temp_f[pos]
        if self.grid is not None and lat is not None:
            temp = temp + self.grid.offset(lat, lon)
        return temp, self.rh_pct[pos], self.wind_mph[pos]

    def records_equal(self, other: "WeatherArchive") -> bool:
        return (len(self) == len(other)
                and np.array_equal(self.temp_f, other.temp_f)
                and np.array_equal(self.rh_pct, other.rh_pct)
                and np.array_equal(self.wind_mph, other.wind_mph))


def weather_at(archive: WeatherArchive, t: int, location=None) -> WeatherSample:
    """Sample of the hour bin containing absolute second ``t``.

    With a spatial grid configured, the location's cell offset is added to
    the temperature.
    """
    lat, lon = (None, None) if location is None else location
    temp, rh, wind = archive.sample_arrays([t], None if lat is None else [lat], None if lon is None else [lon])
    return WeatherSample(float(temp[0]), float(rh[0]), float(wind[0]))


def load_baseline(path, grid: Optional[SpatialGrid] = None, max_fill_hours: int = MAX_FILL_HOURS,
                  window: Optional[tuple] = None) -> WeatherArchive:
    """Read an hourly CSV (timestamp,temp_f,rh_pct,wind_mph).

    Gaps of up to ``max_fill_hours`` missing records are filled by linear
    interpolation; longer gaps and non-increasing timestamps are errors.
    ``window`` = (first date, last date) additionally requires full coverage
    of those days.
    """
    times, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            line = reader.line_num
            try:
                ts = dt.datetime.fromisoformat(row["timestamp"].strip())
                vals = (float(row["temp_f"]), float(row["rh_pct"]), float(row["wind_mph"]))
            except (KeyError, ValueError, AttributeError) as exc:
                raise WeatherError(f"{path}: line {line}: {exc}") from None
            if ts.tzinfo is not None:
                ts = ts.replace(tzinfo=None)
            if ts.minute or ts.second or ts.microsecond:
                raise WeatherError(f"{path}: line {line}: timestamp {ts} is not on the hour")
            if not 0.0 <= vals[1] <= 100.0 or vals[2] < 0:
                raise WeatherError(f"{path}: line {line}: humidity or wind out of range")
            if times and ts <= times[-1]:
                raise WeatherError(f"{path}: line {line}: timestamps not strictly increasing ({ts})")
            times.append(ts)
            rows.append(vals)
    if not times:
        raise WeatherError(f"{path}: no records")

    hours = np.array([(t - times[0]) // dt.timedelta(hours=1) for t in times], dtype=np.int64)
    gaps = np.diff(hours) - 1
    if np.any(gaps > max_fill_hours):
        i = int(np.argmax(gaps > max_fill_hours))
        raise WeatherError(f"{path}: {int(gaps[i])} missing hours after {times[i].isoformat()} "
                           f"(at most {max_fill_hours} can be filled)")
    vals = np.asarray(rows, dtype=float)
    full = np.arange(hours[-1] + 1)
    cols = [np.interp(full, hours, vals[:, j]) for j in range(3)]
    missing = np.setdiff1d(full, hours)
    filled = tuple(times[0] + dt.timedelta(hours=int(h)) for h in missing)
    archive = WeatherArchive(times[0], cols[0], cols[1], cols[2], grid, filled)
    if window is not None:
        first, last = window
        need_start = dt.datetime.combine(first, dt.time())
        need_end = dt.datetime.combine(last, dt.time()) + dt.timedelta(hours=23)
        end = times[0] + dt.timedelta(hours=int(hours[-1]))
        if times[0] > need_start or end < need_end:
            raise WeatherError(f"{path}: archive {times[0]}..{end} does not cover {first}..{last}")
    return archive


@dataclass(frozen=True)
class ClimateDeltaTable:
    """Temperature offsets (F) keyed by (scenario, year, month or None)."""
    rows: dict
    baseline_year: Optional[int] = None

    def keys(self) -> list:
        """Distinct (scenario, year) pairs, sorted."""
        return sorted({(s, y) for s, y, _ in self.rows})

    def years(self, scenario=None) -> list:
        return sorted({y for s, y, _ in self.rows if scenario is None or s == scenario})

    def has(self, scenario: str, year: int) -> bool:
        return year == self.baseline_year or any(s == scenario and y == year for s, y, _ in self.rows)

    def monthly(self, scenario: str, year: int) -> np.ndarray:
        """Offset for each calendar month (index 1..12; index 0 unused)."""
        annual = self.rows.get((scenario, year, None))
        months = np.full(13, np.nan)
        if annual is not None:
            months[:] = annual
        for m in range(1, 13):
            v = self.rows.get((scenario, year, m))
            if v is not None:
                months[m] = v
        if np.all(np.isnan(months[1:])):
            if year == self.baseline_year:
                return np.zeros(13)
            raise DeltaError(f"no temperature delta for {scenario} {year}")
        return months


def load_deltas(path, celsius: bool = False, baseline_year: Optional[int] = None) -> ClimateDeltaTable:
    """Read ``scenario,year[,month],delta_f`` (or ``delta_c`` / ``celsius=True``)."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in reader.fieldnames or []]
        reader.fieldnames = fields
        col = "delta_f" if "delta_f" in fields else "delta_c" if "delta_c" in fields else None
        if col is None:
            raise DeltaError(f"{path}: need a delta_f or delta_c column")
        factor = 1.8 if (celsius or col == "delta_c") else 1.0
        for row in reader:
            line = reader.line_num
            scen = row["scenario"].strip().upper()
            if scen not in SCENARIOS:
                raise DeltaError(f"{path}: line {line}: unknown scenario {row['scenario']!r}")
            try:
                year = int(row["year"])
                m = (row.get("month") or "").strip()
                month = int(m) if m else None
                delta = float(row[col]) * factor
            except ValueError as exc:
                raise DeltaError(f"{path}: line {line}: {exc}") from None
            if month is not None and not 1 <= month <= 12:
                raise DeltaError(f"{path}: line {line}: month {month} out of range")
            key = (scen, year, month)
            if key in rows:
                raise DeltaError(f"{path}: line {line}: duplicate delta for {scen} {year}"
                                 + (f" month {month}" if month else ""))
            rows[key] = delta
    if baseline_year is not None:
        bad = [k for k, v in rows.items() if k[1] == baseline_year and v != 0.0]
        if bad:
            raise DeltaError(f"{path}: baseline year {baseline_year} must have zero delta, got {bad[0]}")
    return ClimateDeltaTable(rows, baseline_year)


def project(baseline: WeatherArchive, deltas: ClimateDeltaTable, scenario: str, year: int) -> WeatherArchive:
    """Shift every hourly temperature by the (scenario, year[, month]) delta.

    Humidity and wind are carried over unchanged; timestamps move to
    ``year`` keeping month, day and hour.
    """
    months_delta = deltas.monthly(scenario, year)
    ts = baseline.timestamps
    month_of = np.array([t.month for t in ts], dtype=np.int64)
    shift = months_delta[month_of]
    if np.any(np.isnan(shift)):
        m = int(month_of[np.isnan(shift)][0])
        raise DeltaError(f"no temperature delta for {scenario} {year} month {m}")
    try:
        start = baseline.start.replace(year=year)
        end = ts[-1].replace(year=year + (ts[-1].year - baseline.start.year))
    except ValueError:
        raise WeatherError(f"cannot relabel {baseline.start.year} archive to {year} (Feb 29)") from None
    if end - start != ts[-1] - baseline.start:
        raise WeatherError(f"relabelling to {year} breaks hourly contiguity (leap day)")
    temp = baseline.temp_f + shift if np.any(shift != 0.0) else baseline.temp_f.copy()
    return replace(baseline, start=start, temp_f=temp, rh_pct=baseline.rh_pct.copy(),
                   wind_mph=baseline.wind_mph.copy(), filled=())


def parse_years(text: str) -> list:
    """``"2019:2100"`` -> [2019, ..., 2100]; ``"2019,2050"`` -> [2019, 2050]."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out
