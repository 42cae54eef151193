"""GTFS ingestion and the in-memory timetable network used by the router.

Feeds are read with the stdlib :mod:`csv` module so that every malformed
row can be reported with its file, line number and field.  Times are kept
as seconds of the service day; values past ``24:00:00`` are legal in GTFS
and are preserved as-is.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyNetworkError, FeedError, FeedValidationError
from .geo import chord_for_distance, haversine_m, travel_seconds, unit_vectors

log = logging.getLogger(__name__)

REQUIRED_TABLES = ("stops", "routes", "trips", "stop_times", "calendar")
WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
DEFAULT_WALK_SPEED = 1.2
DEFAULT_MAX_FOOTPATH_M = 400.0


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class Route:
    route_id: str
    short_name: str
    mode: int


@dataclass(frozen=True)
class Trip:
    trip_id: str
    route_id: str
    service_id: str


@dataclass(frozen=True)
class StopTime:
    trip_id: str
    stop_id: str
    arrival: int
    departure: int
    sequence: int


@dataclass(frozen=True)
class Service:
    service_id: str
    weekdays: tuple  # seven bools, Monday first
    start: dt.date
    end: dt.date

    def runs_on(self, day: dt.date) -> bool:
        return self.start <= day <= self.end and bool(self.weekdays[day.weekday()])


@dataclass(frozen=True)
class ServiceException:
    service_id: str
    date: dt.date
    exception_type: int  # 1 added, 2 removed


@dataclass(frozen=True)
class Transfer:
    from_stop: str
    to_stop: str
    transfer_type: int
    min_transfer_s: int | None


@dataclass(frozen=True)
class FeedBundle:
    stops: tuple
    routes: tuple
    trips: tuple
    stop_times: tuple
    services: tuple
    transfers: tuple = ()
    calendar_dates: tuple = ()


# ---------------------------------------------------------------------------
# field parsers

def parse_gtfs_time(text: str) -> int:
    """``"25:10:00"`` -> ``90600``.  Hours may exceed 23."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"expected H:MM:SS, got {text!r}")
    h, m, s = (int(p) for p in parts)
    if h < 0 or not (0 <= m < 60) or not (0 <= s < 60):
        raise ValueError(f"time out of range: {text!r}")
    return h * 3600 + m * 60 + s


def format_gtfs_time(seconds: int) -> str:
    h, rem = divmod(int(seconds), 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


def parse_gtfs_date(text: str) -> dt.date:
    return dt.datetime.strptime(text.strip(), "%Y%m%d").date()


def format_gtfs_date(day: dt.date) -> str:
    return day.strftime("%Y%m%d")


def _rows(path: Path):
    """Yield ``(line_number, row_dict)``; line numbers count the header as 1."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        for row in reader:
            yield reader.line_num, row


def _get(row, name, path, line, required=True):
    value = row.get(name)
    if value is None or value.strip() == "":
        if required:
            raise FeedError("missing value", path.name, line, name)
        return None
    return value.strip()


def _convert(fn, row, name, path, line, required=True):
    raw = _get(row, name, path, line, required)
    if raw is None:
        return None
    try:
        return fn(raw)
    except ValueError as exc:
        raise FeedError(f"cannot parse {raw!r} ({exc})", path.name, line, name) from None


# ---------------------------------------------------------------------------
# loading

def _read_tables(directory: Path):
    stops, routes, trips, stop_times, services, transfers, exceptions = [], [], [], [], [], [], []

    p = directory / "stops.txt"
    for line, row in _rows(p):
        stops.append(Stop(
            _get(row, "stop_id", p, line),
            (row.get("stop_name") or "").strip(),
            _convert(float, row, "stop_lat", p, line),
            _convert(float, row, "stop_lon", p, line),
        ))

    p = directory / "routes.txt"
    for line, row in _rows(p):
        routes.append(Route(
            _get(row, "route_id", p, line),
            (row.get("route_short_name") or "").strip(),
            _convert(int, row, "route_type", p, line),
        ))

    p = directory / "trips.txt"
    for line, row in _rows(p):
        trips.append(Trip(
            _get(row, "trip_id", p, line),
            _get(row, "route_id", p, line),
            _get(row, "service_id", p, line),
        ))

    p = directory / "stop_times.txt"
    for line, row in _rows(p):
        arr = _convert(parse_gtfs_time, row, "arrival_time", p, line, required=False)
        dep = _convert(parse_gtfs_time, row, "departure_time", p, line, required=False)
        if arr is None and dep is None:
            raise FeedError("stop time has neither arrival nor departure", p.name, line, "arrival_time")
        stop_times.append(StopTime(
            _get(row, "trip_id", p, line),
            _get(row, "stop_id", p, line),
            dep if arr is None else arr,
            arr if dep is None else dep,
            _convert(int, row, "stop_sequence", p, line),
        ))

    p = directory / "calendar.txt"
    for line, row in _rows(p):
        days = []
        for name in WEEKDAYS:
            flag = _convert(int, row, name, p, line)
            if flag not in (0, 1):
                raise FeedError(f"weekday flag must be 0 or 1, got {flag}", p.name, line, name)
            days.append(bool(flag))
        services.append(Service(
            _get(row, "service_id", p, line),
            tuple(days),
            _convert(parse_gtfs_date, row, "start_date", p, line),
            _convert(parse_gtfs_date, row, "end_date", p, line),
        ))

    p = directory / "transfers.txt"
    if p.exists():
        for line, row in _rows(p):
            transfers.append(Transfer(
                _get(row, "from_stop_id", p, line),
                _get(row, "to_stop_id", p, line),
                _convert(int, row, "transfer_type", p, line, required=False) or 0,
                _convert(int, row, "min_transfer_time", p, line, required=False),
            ))

    p = directory / "calendar_dates.txt"
    if p.exists():
        for line, row in _rows(p):
            kind = _convert(int, row, "exception_type", p, line)
            if kind not in (1, 2):
                raise FeedError(f"exception_type must be 1 or 2, got {kind}", p.name, line, "exception_type")
            exceptions.append(ServiceException(
                _get(row, "service_id", p, line),
                _convert(parse_gtfs_date, row, "date", p, line),
                kind,
            ))
    else:
        log.warning("%s has no calendar_dates.txt; service exceptions skipped", directory)

    return FeedBundle(tuple(stops), tuple(routes), tuple(trips), tuple(stop_times),
                      tuple(services), tuple(transfers), tuple(exceptions))


def check_bundle(bundle: FeedBundle):
    """Return ``(errors, warnings)`` as lists of human-readable strings."""
    errors, warnings = [], []

    def dupes(items, key, label):
        seen = set()
        for item in items:
            k = getattr(item, key)
            if k in seen:
                errors.append(f"duplicate {label} {k!r}")
            seen.add(k)
        return seen

    stop_ids = dupes(bundle.stops, "stop_id", "stop_id")
    route_ids = dupes(bundle.routes, "route_id", "route_id")
    trip_ids = dupes(bundle.trips, "trip_id", "trip_id")
    service_ids = dupes(bundle.services, "service_id", "service_id")

    for s in bundle.stops:
        if not (-90.0 <= s.lat <= 90.0 and -180.0 <= s.lon <= 180.0):
            errors.append(f"stop {s.stop_id!r} has coordinates out of range")
    for t in bundle.trips:
        if t.route_id not in route_ids:
            errors.append(f"trip {t.trip_id!r} references unknown route {t.route_id!r}")
        if t.service_id not in service_ids:
            exc_ids = {e.service_id for e in bundle.calendar_dates}
            if t.service_id not in exc_ids:
                errors.append(f"trip {t.trip_id!r} references unknown service {t.service_id!r}")
    for svc in bundle.services:
        if svc.end < svc.start:
            errors.append(f"service {svc.service_id!r} ends before it starts")

    by_trip = defaultdict(list)
    for st in bundle.stop_times:
        if st.trip_id not in trip_ids:
            errors.append(f"stop_time references unknown trip {st.trip_id!r}")
            continue
        if st.stop_id not in stop_ids:
            errors.append(f"stop_time of trip {st.trip_id!r} references unknown stop {st.stop_id!r}")
            continue
        by_trip[st.trip_id].append(st)

    for trip_id, rows in by_trip.items():
        rows.sort(key=lambda r: r.sequence)
        prev = None
        for r in rows:
            if r.departure < r.arrival:
                errors.append(f"trip {trip_id!r} departs stop {r.stop_id!r} before arriving")
            if prev is not None:
                if r.sequence == prev.sequence:
                    errors.append(f"trip {trip_id!r} repeats stop_sequence {r.sequence}")
                if r.arrival < prev.departure:
                    errors.append(f"trip {trip_id!r} goes back in time at sequence {r.sequence}")
            prev = r
        if len(rows) < 2:
            warnings.append(f"trip {trip_id!r} has fewer than two stop times")
    for t in bundle.trips:
        if t.trip_id not in by_trip:
            warnings.append(f"trip {t.trip_id!r} has no stop times")

    for tr in bundle.transfers:
        for sid in (tr.from_stop, tr.to_stop):
            if sid not in stop_ids:
                errors.append(f"transfer references unknown stop {sid!r}")
    return errors, warnings


def load_feed(directory) -> FeedBundle:
    """Parse and validate a GTFS directory.

    Raises :class:`FeedError` for a missing table or an unparseable row and
    :class:`FeedValidationError` (with ``offenders``) for dangling references
    or broken stop orderings.
    """
    directory = Path(directory)
    for name in REQUIRED_TABLES:
        if not (directory / f"{name}.txt").is_file():
            raise FeedError(f"required table {name}.txt is missing from {directory}", f"{name}.txt")
    bundle = _read_tables(directory)
    errors, warnings = check_bundle(bundle)
    for w in warnings:
        log.warning(w)
    if errors:
        raise FeedValidationError("feed failed validation", errors)
    return bundle


def validate_feed(directory) -> dict:
    """Structured validation report; never raises for bad data."""
    directory = Path(directory)
    report = {"feed": str(directory), "ok": False, "errors": [], "warnings": [], "counts": {}}
    try:
        for name in REQUIRED_TABLES:
            if not (directory / f"{name}.txt").is_file():
                raise FeedError(f"required table {name}.txt is missing", f"{name}.txt")
        bundle = _read_tables(directory)
    except FeedError as exc:
        report["errors"].append({"kind": "parse", "message": str(exc), "file": exc.file,
                                 "line": exc.line, "field": exc.field})
        return report
    errors, warnings = check_bundle(bundle)
    report["errors"] = [{"kind": "validation", "message": e} for e in errors]
    report["warnings"] = warnings
    report["counts"] = {
        "stops": len(bundle.stops), "routes": len(bundle.routes), "trips": len(bundle.trips),
        "stop_times": len(bundle.stop_times), "services": len(bundle.services),
        "transfers": len(bundle.transfers), "calendar_dates": len(bundle.calendar_dates),
    }
    report["ok"] = not errors
    return report


def write_feed(bundle: FeedBundle, directory) -> None:
    """Serialize a bundle back to GTFS text (inverse of :func:`load_feed`)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def dump(name, header, rows):
        with open(directory / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    dump("stops.txt", ["stop_id", "stop_name", "stop_lat", "stop_lon"],
         [(s.stop_id, s.name, repr(s.lat), repr(s.lon)) for s in bundle.stops])
    dump("routes.txt", ["route_id", "route_short_name", "route_type"],
         [(r.route_id, r.short_name, r.mode) for r in bundle.routes])
    dump("trips.txt", ["route_id", "service_id", "trip_id"],
         [(t.route_id, t.service_id, t.trip_id) for t in bundle.trips])
    dump("stop_times.txt", ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"],
         [(st.trip_id, format_gtfs_time(st.arrival), format_gtfs_time(st.departure), st.stop_id, st.sequence)
          for st in bundle.stop_times])
    dump("calendar.txt", ["service_id", *WEEKDAYS, "start_date", "end_date"],
         [(s.service_id, *(int(d) for d in s.weekdays), format_gtfs_date(s.start), format_gtfs_date(s.end))
          for s in bundle.services])
    if bundle.transfers:
        dump("transfers.txt", ["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"],
             [(t.from_stop, t.to_stop, t.transfer_type, "" if t.min_transfer_s is None else t.min_transfer_s)
              for t in bundle.transfers])
    if bundle.calendar_dates:
        dump("calendar_dates.txt", ["service_id", "date", "exception_type"],
             [(e.service_id, format_gtfs_date(e.date), e.exception_type) for e in bundle.calendar_dates])


def active_services(services, calendar_dates, service_date: dt.date) -> set:
    active = {s.service_id for s in services if s.runs_on(service_date)}
    for exc in calendar_dates:
        if exc.date != service_date:
            continue
        if exc.exception_type == 1:
            active.add(exc.service_id)
        else:
            active.discard(exc.service_id)
    return active


def active_trips(bundle: FeedBundle, service_date: dt.date) -> set:
    """Trip ids running on ``service_date`` per calendar and calendar_dates."""
    covered = any(s.start <= service_date <= s.end for s in bundle.services) or any(
        e.date == service_date for e in bundle.calendar_dates)
    if not covered:
        log.warning("%s is outside every service range of the feed", service_date)
        return set()
    services = active_services(bundle.services, bundle.calendar_dates, service_date)
    return {t.trip_id for t in bundle.trips if t.service_id in services}


# ---------------------------------------------------------------------------
# network

@dataclass(frozen=True, eq=False)
class Pattern:
    """Trips sharing one ordered stop list, sorted so no trip overtakes another.

    ``arrivals`` and ``departures`` are ``(n_trips, n_stops)`` integer arrays;
    every column is non-decreasing.
    """
    route_id: str
    stops: tuple          # stop indices
    trip_ids: tuple
    service_ids: tuple
    arrivals: np.ndarray
    departures: np.ndarray


@dataclass(frozen=True, eq=False)
class TransitNetwork:
    stop_ids: tuple
    stop_names: tuple
    lat: np.ndarray
    lon: np.ndarray
    patterns: tuple
    footpaths: tuple                  # per stop: tuple of (other stop index, seconds)
    min_transfer: dict                # (from idx, to idx) -> seconds, from transfers.txt
    services: tuple
    calendar_dates: tuple
    walk_speed: float = DEFAULT_WALK_SPEED
    _tree: cKDTree = field(default=None, repr=False)
    _active_cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def stop_index(self) -> dict:
        return {sid: i for i, sid in enumerate(self.stop_ids)}

    @cached_property
    def stop_patterns(self) -> tuple:
        """Per stop, the ``(pattern index, position)`` pairs that serve it."""
        out = [[] for _ in self.stop_ids]
        for pi, pat in enumerate(self.patterns):
            for pos, s in enumerate(pat.stops):
                out[s].append((pi, pos))
        return tuple(tuple(x) for x in out)

    @property
    def n_stops(self) -> int:
        return len(self.stop_ids)

    def stops_within(self, lat: float, lon: float, radius_m: float):
        """``[(stop index, distance m)]`` sorted by distance, then index."""
        if radius_m < 0:
            return []
        cand = self._tree.query_ball_point(unit_vectors([lat], [lon])[0], chord_for_distance(radius_m) * (1 + 1e-9))
        if not cand:
            return []
        cand = np.asarray(sorted(cand))
        d = haversine_m(lat, lon, self.lat[cand], self.lon[cand])
        d = np.atleast_1d(d)
        keep = d <= radius_m
        pairs = [(int(i), float(x)) for i, x in zip(cand[keep], d[keep])]
        pairs.sort(key=lambda p: (p[1], p[0]))
        return pairs

    def nearest_stop(self, lat: float, lon: float):
        _, i = self._tree.query(unit_vectors([lat], [lon])[0])
        i = int(i)
        return i, haversine_m(lat, lon, self.lat[i], self.lon[i])

    def footpath_seconds(self, a: int, b: int):
        for other, sec in self.footpaths[a]:
            if other == b:
                return sec
        return None

    def active_timetables(self, service_date: dt.date) -> tuple:
        """Per pattern, ``(trip rows, arrivals, departures)`` restricted to trips running that day."""
        hit = self._active_cache.get(service_date)
        if hit is not None:
            return hit
        active = active_services(self.services, self.calendar_dates, service_date)
        out = []
        for pat in self.patterns:
            rows = np.array([i for i, sid in enumerate(pat.service_ids) if sid in active], dtype=np.int64)
            out.append((rows, pat.arrivals[rows], pat.departures[rows]))
        out = tuple(out)
        self._active_cache[service_date] = out
        return out


def _fifo_groups(order, times):
    """Split trips (already sorted by first departure) into non-overtaking groups."""
    groups = []
    for t in order:
        arr, dep = times[t]
        for g in groups:
            last_arr, last_dep = times[g[-1]]
            if np.all(arr >= last_arr) and np.all(dep >= last_dep):
                g.append(t)
                break
        else:
            groups.append([t])
    return groups


def build_network(bundle: FeedBundle, max_footpath_m: float = DEFAULT_MAX_FOOTPATH_M,
                  walk_speed: float = DEFAULT_WALK_SPEED) -> TransitNetwork:
    """Index a validated feed for routing.

    Footpaths link every stop pair within ``max_footpath_m`` (great circle);
    duration is the distance over ``walk_speed``, rounded up to whole seconds.
    """
    if walk_speed <= 0:
        raise ValueError("walk_speed must be positive")
    if not bundle.stops:
        raise EmptyNetworkError("feed has no stops")

    stop_ids = tuple(s.stop_id for s in bundle.stops)
    index = {sid: i for i, sid in enumerate(stop_ids)}
    lat = np.array([s.lat for s in bundle.stops], dtype=float)
    lon = np.array([s.lon for s in bundle.stops], dtype=float)
    tree = cKDTree(unit_vectors(lat, lon))

    # footpaths, symmetric by construction
    paths = [dict() for _ in stop_ids]
    if max_footpath_m > 0 and len(stop_ids) > 1:
        pairs = tree.query_pairs(chord_for_distance(max_footpath_m) * (1 + 1e-9), output_type="ndarray")
        if len(pairs):
            d = np.atleast_1d(haversine_m(lat[pairs[:, 0]], lon[pairs[:, 0]], lat[pairs[:, 1]], lon[pairs[:, 1]]))
            for (a, b), dist in zip(pairs, d):
                if dist <= max_footpath_m:
                    sec = travel_seconds(float(dist), walk_speed)
                    paths[a][b] = sec
                    paths[b][a] = sec
    min_transfer = {}
    for tr in bundle.transfers:
        if tr.transfer_type == 3:  # transfers not possible
            a, b = index[tr.from_stop], index[tr.to_stop]
            if a != b:
                paths[a].pop(b, None)
                paths[b].pop(a, None)
            continue
        if tr.min_transfer_s is not None:
            min_transfer[(index[tr.from_stop], index[tr.to_stop])] = int(tr.min_transfer_s)
    footpaths = tuple(tuple(sorted(p.items())) for p in paths)

    # patterns
    trip_meta = {t.trip_id: t for t in bundle.trips}
    by_trip = defaultdict(list)
    for st in bundle.stop_times:
        by_trip[st.trip_id].append(st)
    grouped = defaultdict(list)
    times = {}
    for trip_id in sorted(by_trip):
        rows = sorted(by_trip[trip_id], key=lambda r: r.sequence)
        if len(rows) < 2:
            continue
        key = (trip_meta[trip_id].route_id, tuple(index[r.stop_id] for r in rows))
        grouped[key].append(trip_id)
        times[trip_id] = (np.array([r.arrival for r in rows], dtype=np.int64),
                          np.array([r.departure for r in rows], dtype=np.int64))
    patterns = []
    for (route_id, stops) in sorted(grouped, key=lambda k: (k[0], k[1])):
        trips = sorted(grouped[(route_id, stops)], key=lambda t: (int(times[t][1][0]), t))
        for g in _fifo_groups(trips, times):
            arr = np.vstack([times[t][0] for t in g])
            dep = np.vstack([times[t][1] for t in g])
            arr.setflags(write=False)
            dep.setflags(write=False)
            patterns.append(Pattern(route_id, stops, tuple(g),
                                    tuple(trip_meta[t].service_id for t in g), arr, dep))

    lat.setflags(write=False)
    lon.setflags(write=False)
    return TransitNetwork(
        stop_ids=stop_ids,
        stop_names=tuple(s.name for s in bundle.stops),
        lat=lat, lon=lon,
        patterns=tuple(patterns),
        footpaths=footpaths,
        min_transfer=min_transfer,
        services=bundle.services,
        calendar_dates=bundle.calendar_dates,
        walk_speed=walk_speed,
        _tree=tree,
    )
