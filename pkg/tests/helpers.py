"""Fixture builders shared by the test modules."""
import csv
import datetime as dt
import random
from pathlib import Path

from transitheat.geo import offset_point

SERVICE_START = dt.date(2019, 1, 1)
SERVICE_END = dt.date(2019, 12, 31)
MONDAY = dt.date(2019, 8, 5)
SUNDAY = dt.date(2019, 8, 4)

BASE = (33.75, -84.39)


def hms(text):
    h, m, s = (int(x) for x in text.split(":"))
    return h * 3600 + m * 60 + s


def fmt(sec):
    return f"{sec // 3600:02d}:{sec % 3600 // 60:02d}:{sec % 60:02d}"


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_feed(directory, stops, trips, services=None, transfers=None, calendar_dates=None):
    """Write a GTFS directory.

    ``stops``: [(stop_id, lat, lon)].
    ``trips``: [(trip_id, route_id, [(stop_id, arrival_s, departure_s), ...])] or with a
    fourth element naming the service id.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _write(d / "stops.txt", ["stop_id", "stop_name", "stop_lat", "stop_lon"],
           [(sid, f"Stop {sid}", repr(lat), repr(lon)) for sid, lat, lon in stops])
    routes = sorted({t[1] for t in trips})
    _write(d / "routes.txt", ["route_id", "route_short_name", "route_type"], [(r, r, 3) for r in routes])
    _write(d / "trips.txt", ["route_id", "service_id", "trip_id"],
           [(t[1], t[3] if len(t) > 3 else "WK", t[0]) for t in trips])
    rows = []
    for t in trips:
        for seq, (sid, arr, dep) in enumerate(t[2], start=1):
            rows.append((t[0], fmt(arr), fmt(dep), sid, seq))
    _write(d / "stop_times.txt", ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"], rows)
    if services is None:
        services = [("WK", (1, 1, 1, 1, 1, 0, 0), SERVICE_START, SERVICE_END)]
    _write(d / "calendar.txt",
           ["service_id", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
            "start_date", "end_date"],
           [(sid, *days, a.strftime("%Y%m%d"), b.strftime("%Y%m%d")) for sid, days, a, b in services])
    if transfers:
        _write(d / "transfers.txt", ["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"], transfers)
    if calendar_dates:
        _write(d / "calendar_dates.txt", ["service_id", "date", "exception_type"],
               [(s, day.strftime("%Y%m%d"), k) for s, day, k in calendar_dates])
    return d


def line_feed(directory):
    """Two stops 6 km apart with one route A->B departing 08:00, arriving 08:10 (and a later trip)."""
    a = BASE
    b = offset_point(*BASE, north_m=6000.0)
    stops = [("A", *a), ("B", *b)]
    trips = [
        ("T1", "R1", [("A", hms("08:00:00"), hms("08:00:00")), ("B", hms("08:10:00"), hms("08:10:00"))]),
        ("T2", "R1", [("A", hms("08:30:00"), hms("08:30:00")), ("B", hms("08:40:00"), hms("08:40:00"))]),
    ]
    return write_feed(directory, stops, trips)


def random_feed(directory, seed, n_stops=6, max_trips=12):
    """Small random feed: a handful of routes over at most six stops, up to twelve trips."""
    rng = random.Random(seed)
    stops = []
    for i in range(n_stops):
        lat, lon = offset_point(*BASE, north_m=rng.uniform(0, 2500), east_m=rng.uniform(0, 2500))
        stops.append((f"S{i}", lat, lon))
    trips = []
    n_routes = rng.randint(2, 4)
    for r in range(n_routes):
        k = rng.randint(2, min(5, n_stops))
        seq = rng.sample([s[0] for s in stops], k)
        for _ in range(rng.randint(1, 4)):
            if len(trips) >= max_trips:
                break
            t = rng.randint(hms("07:00:00"), hms("08:30:00"))
            times = []
            for _sid in seq:
                arr = t
                dep = arr + rng.choice([0, 0, 30])
                times.append((_sid, arr, dep))
                t = dep + rng.randint(90, 420)
            trips.append((f"R{r}T{len(trips)}", f"R{r}", times))
    return write_feed(directory, stops, trips)


def write_weather(path, start, temps, rh=50.0, wind=5.0, skip=()):
    """Hourly CSV from ``start`` (datetime); ``temps`` a list or a callable of the hour index."""
    rows = []
    n = len(temps)
    for i in range(n):
        if i in skip:
            continue
        ts = start + dt.timedelta(hours=i)
        r = rh[i] if isinstance(rh, (list, tuple)) else rh
        rows.append((ts.isoformat(), temps[i], r, wind))
    _write(path, ["timestamp", "temp_f", "rh_pct", "wind_mph"], rows)
    return Path(path)


def write_deltas(path, rows, monthly=False):
    header = ["scenario", "year", "month", "delta_f"] if monthly else ["scenario", "year", "delta_f"]
    _write(path, header, rows)
    return Path(path)


def grid_feed(directory, n=6, spacing_m=800.0, headway_s=600, first="05:00:00", last="23:00:00"):
    """``n`` east-west and ``n`` north-south lines on a square lattice, both directions, all day."""
    stops = []
    for i in range(n):
        for j in range(n):
            lat, lon = offset_point(*BASE, north_m=i * spacing_m, east_m=j * spacing_m)
            stops.append((f"G{i}_{j}", lat, lon))
    hop = int(spacing_m / 8.0)
    lines = []
    for i in range(n):
        row = [f"G{i}_{j}" for j in range(n)]
        col = [f"G{j}_{i}" for j in range(n)]
        lines += [(f"E{i}", row), (f"W{i}", row[::-1]), (f"N{i}", col), (f"S{i}", col[::-1])]
    trips = []
    for k, (route, seq) in enumerate(lines):
        t = hms(first) + (k * 97) % headway_s
        while t <= hms(last):
            times = [(sid, t + m * hop, t + m * hop) for m, sid in enumerate(seq)]
            trips.append((f"{route}_{t}", route, times))
            t += headway_s
    return write_feed(directory, stops, trips)


def summer_weather(path, first=dt.datetime(2019, 8, 1), days=46, low=74.0, high=97.0, rh=55.0):
    """Diurnal cycle peaking at 15:00."""
    import math
    temps = []
    for h in range(days * 24):
        phase = math.cos((h % 24 - 15) / 24 * 2 * math.pi)
        temps.append(round(low + (high - low) * (phase + 1) / 2, 2))
    return write_weather(path, first, temps, rh=rh, wind=4.0)


RAMPS = {"SSP245": 0.05, "SSP370": 0.08, "SSP585": 0.11}


def ramp_deltas(path, years=range(2019, 2101), base=2019, ramps=RAMPS):
    rows = [(s, y, round((y - base) * r, 4)) for s, r in ramps.items() for y in years]
    return write_deltas(path, rows)


def synth_config(path, n, seed=0, **extra):
    import json
    Path(path).write_text(json.dumps({"n": n, "seed": seed, **extra}))
    return Path(path)


def sweep_inputs(directory, n=60, years="2019:2100", **overrides):
    """Write a complete toy run and return the config mapping."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    grid_feed(d / "gtfs")
    summer_weather(d / "weather.csv")
    ramp_deltas(d / "deltas.csv")
    synth_config(d / "synth.json", n)
    cfg = {"gtfs": str(d / "gtfs"), "baseline": str(d / "weather.csv"), "deltas": str(d / "deltas.csv"),
           "synth": str(d / "synth.json"), "output": str(d / "out"), "years": years, "seed": "7"}
    cfg.update(overrides)
    return cfg
