"""Weighted rider trip records: survey ingestion, synthetic cohorts and filters.

Trip CSV columns::

    trip_id, origin_lat, origin_lon, dest_lat, dest_lon, depart_time (HH:MM:SS),
    service_date (YYYY-MM-DD), weight, age, income, race, gender, vehicles,
    [access_mode], [first_board_stop]
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import shapely
from shapely.geometry import shape

from .errors import CohortError
from .feed import format_gtfs_time, parse_gtfs_time
from .geo import offset_point

log = logging.getLogger(__name__)

DIMENSIONS = {
    "age": ("under-18", "18-24", "25-34", "35-44", "45-54", "55-64", "65+"),
    "income": ("<10k", "10k-19k", "20k-29k", "30k-39k", "40k-49k", "50k-59k", "60k-74k", "75k+"),
    "race": ("Black/African American", "White/Caucasian", "Asian", "American Indian Alaska", "Other"),
    "gender": ("Female", "Male", "Other"),
    "vehicles": ("0", "1", "2+"),
}
ACCESS_MODES = ("walk", "bike", "micromobility")

CSV_FIELDS = ["trip_id", "origin_lat", "origin_lon", "dest_lat", "dest_lon", "depart_time",
              "service_date", "weight", *DIMENSIONS, "access_mode", "first_board_stop"]


@dataclass(frozen=True)
class Demographics:
    age: str
    income: str
    race: str
    gender: str
    vehicles: str

    def __post_init__(self):
        for dim, allowed in DIMENSIONS.items():
            if getattr(self, dim) not in allowed:
                raise ValueError(f"{dim} {getattr(self, dim)!r} not in {allowed}")

    def get(self, dimension: str) -> str:
        return getattr(self, dimension)


@dataclass(frozen=True)
class TripRecord:
    trip_id: str
    origin: tuple
    destination: tuple
    depart_time: int
    service_date: dt.date
    weight: float
    demographics: Demographics
    access_mode: str = "walk"
    first_board_stop: Optional[str] = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        if self.access_mode not in ACCESS_MODES:
            raise ValueError(f"unknown access mode {self.access_mode!r}")


@dataclass
class Rejected:
    line: int
    trip_id: str
    reason: str
    weight: float = 0.0


@dataclass
class TripLoad:
    trips: list
    rejects: list = field(default_factory=list)

    @property
    def weight(self) -> float:
        return math.fsum(t.weight for t in self.trips)

    def summary(self) -> str:
        rw = math.fsum(r.weight for r in self.rejects)
        return (f"{len(self.trips):,} valid trips representing {self.weight:,.1f} trip-equivalents; "
                f"{len(self.rejects):,} rejected ({rw:,.1f} weight)")


def _in_bbox(pt, bbox):
    if bbox is None:
        return True
    min_lat, min_lon, max_lat, max_lon = bbox
    return min_lat <= pt[0] <= max_lat and min_lon <= pt[1] <= max_lon


def _parse_row(row, bbox):
    origin = (float(row["origin_lat"]), float(row["origin_lon"]))
    dest = (float(row["dest_lat"]), float(row["dest_lon"]))
    for pt in (origin, dest):
        if not (-90 <= pt[0] <= 90 and -180 <= pt[1] <= 180) or not _in_bbox(pt, bbox):
            raise ValueError(f"coordinate {pt} outside study area")
    demo = Demographics(**{d: (row.get(d) or "").strip() for d in DIMENSIONS})
    return TripRecord(
        trip_id=row["trip_id"].strip(),
        origin=origin,
        destination=dest,
        depart_time=parse_gtfs_time(row["depart_time"]),
        service_date=dt.date.fromisoformat(row["service_date"].strip()),
        weight=float(row["weight"]),
        demographics=demo,
        access_mode=(row.get("access_mode") or "walk").strip() or "walk",
        first_board_stop=(row.get("first_board_stop") or "").strip() or None,
    )


def load_trips(path, bbox: Optional[tuple] = None, max_reject_share: float = 0.5) -> TripLoad:
    """Read and validate trip records; bad rows go to ``rejects`` with a reason.

    ``bbox`` is (min_lat, min_lon, max_lat, max_lon).  More than
    ``max_reject_share`` rejected rows aborts the load.
    """
    trips, rejects = [], []
    seen = set()
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise CohortError(f"cannot read trips file: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        for row in reader:
            line = reader.line_num
            tid = (row.get("trip_id") or "").strip()
            try:
                w = float(row.get("weight") or "nan")
            except ValueError:
                w = float("nan")
            try:
                rec = _parse_row(row, bbox)
                if rec.trip_id in seen:
                    raise ValueError(f"duplicate trip_id {rec.trip_id!r}")
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                rejects.append(Rejected(line, tid, str(exc), w if w > 0 else 0.0))
                continue
            seen.add(rec.trip_id)
            trips.append(rec)
    total = len(trips) + len(rejects)
    if total and len(rejects) / total > max_reject_share:
        raise CohortError(f"{len(rejects)} of {total} trip rows rejected; first: line "
                          f"{rejects[0].line}: {rejects[0].reason}")
    out = TripLoad(trips, rejects)
    log.info(out.summary())
    return out


def write_trips(trips, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for t in trips:
            d = t.demographics
            w.writerow([t.trip_id, repr(t.origin[0]), repr(t.origin[1]), repr(t.destination[0]),
                        repr(t.destination[1]), format_gtfs_time(t.depart_time), t.service_date.isoformat(),
                        repr(t.weight), d.age, d.income, d.race, d.gender, d.vehicles, t.access_mode,
                        t.first_board_stop or ""])


# ---------------------------------------------------------------------------
# synthetic cohorts

DEFAULT_MARGINALS = {
    "age": {"under-18": 0.04, "18-24": 0.22, "25-34": 0.27, "35-44": 0.18, "45-54": 0.14,
            "55-64": 0.11, "65+": 0.04},
    "income": {"<10k": 0.25, "10k-19k": 0.17, "20k-29k": 0.16, "30k-39k": 0.12, "40k-49k": 0.08,
               "50k-59k": 0.07, "60k-74k": 0.06, "75k+": 0.09},
    "race": {"Black/African American": 0.72, "White/Caucasian": 0.14, "Asian": 0.04,
             "American Indian Alaska": 0.02, "Other": 0.08},
    "gender": {"Female": 0.46, "Male": 0.53, "Other": 0.01},
    "vehicles": {"0": 0.62, "1": 0.24, "2+": 0.14},
    "access_mode": {"walk": 0.9, "bike": 0.05, "micromobility": 0.05},
}


@dataclass(frozen=True)
class SynthConfig:
    n: int = 1000
    seed: int = 0
    marginals: dict = field(default_factory=lambda: DEFAULT_MARGINALS)
    window: tuple = (dt.date(2019, 8, 1), dt.date(2019, 9, 15))
    depart_window_s: tuple = (6 * 3600, 20 * 3600)
    jitter_m: float = 300.0
    weight_range: tuple = (1.0, 10.0)
    weekdays_only: bool = True

    def __post_init__(self):
        if self.n < 0:
            raise CohortError("n must be >= 0")
        for dim, dist in self.marginals.items():
            s = math.fsum(dist.values())
            if abs(s - 1.0) > 1e-9 or any(p < 0 for p in dist.values()):
                raise CohortError(f"marginal for {dim!r} sums to {s}, not 1")
            allowed = ACCESS_MODES if dim == "access_mode" else DIMENSIONS.get(dim)
            if allowed is None:
                raise CohortError(f"unknown dimension {dim!r}")
            bad = set(dist) - set(allowed)
            if bad:
                raise CohortError(f"unknown {dim} values {sorted(bad)}")

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        raw = json.loads(text)
        marg = dict(DEFAULT_MARGINALS)
        marg.update(raw.get("marginals", {}))
        kw = {"marginals": marg}
        for k in ("n", "seed", "jitter_m"):
            if k in raw:
                kw[k] = raw[k]
        if "window" in raw:
            kw["window"] = tuple(dt.date.fromisoformat(x) for x in raw["window"])
        if "depart_window" in raw:
            kw["depart_window_s"] = tuple(parse_gtfs_time(x) for x in raw["depart_window"])
        if "weight_range" in raw:
            kw["weight_range"] = tuple(float(x) for x in raw["weight_range"])
        if "weekdays_only" in raw:
            kw["weekdays_only"] = bool(raw["weekdays_only"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "SynthConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _draw(rng, dist, n):
    values = list(dist)
    p = np.array([dist[v] for v in values], dtype=float)
    idx = rng.choice(len(values), size=n, p=p / p.sum())
    return [values[i] for i in idx]


def synthesize(config: SynthConfig, network, seed: Optional[int] = None) -> list:
    """Deterministic stand-in cohort with endpoints scattered around network stops.

    Every demographic field is drawn independently from its marginal.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = config.n
    if n == 0:
        return []
    days = []
    d = config.window[0]
    while d <= config.window[1]:
        if not config.weekdays_only or d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    if not days:
        raise CohortError("synthesis window contains no eligible days")

    cols = {dim: _draw(rng, config.marginals[dim], n) for dim in (*DIMENSIONS, "access_mode")}
    n_stops = network.n_stops
    o_stop = rng.integers(0, n_stops, size=n)
    d_stop = rng.integers(0, n_stops, size=n)
    if n_stops > 1:
        same = d_stop == o_stop
        d_stop[same] = (d_stop[same] + 1 + rng.integers(0, n_stops - 1, size=int(same.sum()))) % n_stops
    # uniform in a disc of radius jitter_m
    r = config.jitter_m * np.sqrt(rng.random((n, 2)))
    theta = 2 * np.pi * rng.random((n, 2))
    t0, t1 = config.depart_window_s
    depart = rng.integers(t0, t1, size=n)
    day_idx = rng.integers(0, len(days), size=n)
    lo, hi = config.weight_range
    weights = np.round(rng.uniform(lo, hi, size=n), 3)

    trips = []
    for i in range(n):
        o = offset_point(network.lat[o_stop[i]], network.lon[o_stop[i]],
                         r[i, 0] * np.cos(theta[i, 0]), r[i, 0] * np.sin(theta[i, 0]))
        dd = offset_point(network.lat[d_stop[i]], network.lon[d_stop[i]],
                          r[i, 1] * np.cos(theta[i, 1]), r[i, 1] * np.sin(theta[i, 1]))
        trips.append(TripRecord(
            trip_id=f"S{i:06d}",
            origin=(round(float(o[0]), 7), round(float(o[1]), 7)),
            destination=(round(float(dd[0]), 7), round(float(dd[1]), 7)),
            depart_time=int(depart[i]),
            service_date=days[int(day_idx[i])],
            weight=float(max(weights[i], 0.001)),
            demographics=Demographics(*(cols[dim][i] for dim in DIMENSIONS)),
            access_mode=cols["access_mode"][i],
        ))
    return trips


# ---------------------------------------------------------------------------
# filters

@dataclass(frozen=True, eq=False)
class AirportZone:
    """Either a polygon (lon/lat, boundary counts as inside) or a stop-id set.

    For a stop set, a point is inside when its nearest network stop is in
    the set and no farther than ``stop_radius_m``.
    """
    polygon: object = None
    stop_ids: frozenset = frozenset()
    stop_radius_m: float = 400.0

    def __post_init__(self):
        if self.polygon is None and not self.stop_ids:
            raise CohortError("airport zone is empty")

    @classmethod
    def load(cls, path, stop_radius_m: float = 400.0) -> "AirportZone":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() in (".json", ".geojson"):
            geo = json.loads(text)
            if geo.get("type") == "FeatureCollection":
                geom = shapely.union_all([shape(f["geometry"]) for f in geo["features"]])
            elif geo.get("type") == "Feature":
                geom = shape(geo["geometry"])
            else:
                geom = shape(geo)
            return cls(polygon=geom)
        ids = frozenset(line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#"))
        return cls(stop_ids=ids, stop_radius_m=stop_radius_m)

    def contains(self, points, network=None) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.polygon is not None:
            return np.asarray(shapely.covers(self.polygon, shapely.points(pts[:, 1], pts[:, 0])), dtype=bool)
        if network is None:
            raise CohortError("a stop-id airport zone needs the transit network")
        out = np.zeros(len(pts), dtype=bool)
        for i, (la, lo) in enumerate(pts):
            s, d = network.nearest_stop(la, lo)
            out[i] = network.stop_ids[s] in self.stop_ids and d <= self.stop_radius_m
        return out


def filter_airport(trips, zone: AirportZone, network=None):
    """Drop records with either endpoint in the zone; returns ``(kept, removed)``."""
    trips = list(trips)
    if not trips:
        return [], []
    o = zone.contains([t.origin for t in trips], network)
    d = zone.contains([t.destination for t in trips], network)
    kept = [t for t, a, b in zip(trips, o, d) if not (a or b)]
    removed = [t for t, a, b in zip(trips, o, d) if a or b]
    log.info("airport filter removed %d trips", len(removed))
    return kept, removed


def filter_window(trips, first: dt.date, last: dt.date):
    """Keep records whose service date lies in ``[first, last]``; returns ``(kept, dropped)``."""
    kept, dropped = [], []
    for t in trips:
        (kept if first <= t.service_date <= last else dropped).append(t)
    return kept, dropped
