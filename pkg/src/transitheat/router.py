"""Earliest-arrival multimodal trip planning.

A round-based timetable search (RAPTOR family): round ``k`` finds the best
arrival at every stop using at most ``k`` vehicle boardings.  Between rounds
riders may stay at the alighting stop (subject to a minimum transfer slack)
or walk a footpath to a neighbouring stop.

Ties on arrival time go to fewer boardings, then to less time spent on
access, transfer and egress legs.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .feed import TransitNetwork
from .geo import haversine_m, travel_seconds


class SegmentKind(str, Enum):
    ACCESS_WALK = "AccessWalk"
    ACCESS_BIKE = "AccessBike"
    ACCESS_MICROMOBILITY = "AccessMicromobility"
    WAIT = "Wait"
    RIDE = "Ride"
    TRANSFER_WALK = "TransferWalk"
    EGRESS_WALK = "EgressWalk"


ACCESS_KIND = {
    "walk": SegmentKind.ACCESS_WALK,
    "bike": SegmentKind.ACCESS_BIKE,
    "micromobility": SegmentKind.ACCESS_MICROMOBILITY,
}


@dataclass(frozen=True)
class RouterConfig:
    walk_speed: float = 1.2
    bike_speed: float = 4.0
    micromobility_speed: float = 4.5
    transfer_slack_s: int = 60
    # None: direct legs are allowed up to the query's max_access_m
    direct_cutoff_m: Optional[float] = None

    def speed(self, mode: str) -> float:
        try:
            return {"walk": self.walk_speed, "bike": self.bike_speed,
                    "micromobility": self.micromobility_speed}[mode]
        except KeyError:
            raise ValueError(f"unknown access mode {mode!r}") from None


DEFAULT_CONFIG = RouterConfig()


@dataclass(frozen=True)
class TripQuery:
    origin: tuple
    destination: tuple
    depart_time: int
    service_date: dt.date
    access_mode: str = "walk"
    max_transfers: int = 3
    max_access_m: float = 800.0
    first_board_stop: Optional[str] = None

    def __post_init__(self):
        if self.depart_time < 0:
            raise ValueError("depart_time must be >= 0")
        if self.max_transfers < 0:
            raise ValueError("max_transfers must be >= 0")
        if self.access_mode not in ACCESS_KIND:
            raise ValueError(f"unknown access mode {self.access_mode!r}")


@dataclass(frozen=True)
class TripSegment:
    kind: SegmentKind
    start_s: int
    end_s: int
    start: tuple
    end: tuple
    trip_id: Optional[str] = None
    from_stop: Optional[str] = None
    to_stop: Optional[str] = None
    # (t, lat, lon) waypoints; positions interpolate linearly in time between them
    path: tuple = field(default=(), repr=False)

    @property
    def duration(self) -> int:
        return self.end_s - self.start_s

    def waypoints(self) -> tuple:
        return self.path or ((self.start_s, *self.start), (self.end_s, *self.end))

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "start_s": self.start_s, "end_s": self.end_s,
             "start": list(self.start), "end": list(self.end)}
        for name in ("trip_id", "from_stop", "to_stop"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        return d


@dataclass(frozen=True)
class Itinerary:
    segments: tuple
    transfers: int = 0

    @property
    def start_s(self) -> int:
        return self.segments[0].start_s if self.segments else 0

    @property
    def end_s(self) -> int:
        return self.segments[-1].end_s if self.segments else 0

    @property
    def duration(self) -> int:
        return self.end_s - self.start_s

    @property
    def rides(self) -> int:
        return sum(1 for s in self.segments if s.kind is SegmentKind.RIDE)

    @property
    def walk_seconds(self) -> int:
        return sum(s.duration for s in self.segments if s.kind not in (SegmentKind.RIDE, SegmentKind.WAIT))

    def to_dict(self) -> dict:
        return {"start_s": self.start_s, "end_s": self.end_s, "duration_s": self.duration,
                "transfers": self.transfers, "segments": [s.to_dict() for s in self.segments]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class NoPath(Exception):
    """No itinerary exists; ``reason`` is a short machine-readable code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def direct_walk(query: TripQuery, config: RouterConfig = DEFAULT_CONFIG,
                cutoff_m: Optional[float] = None) -> Itinerary:
    """Single access-mode leg from origin to destination.

    ``cutoff_m`` falls back to ``config.direct_cutoff_m`` and then to the
    query's ``max_access_m``.
    """
    if cutoff_m is None:
        cutoff_m = config.direct_cutoff_m if config.direct_cutoff_m is not None else query.max_access_m
    dist = haversine_m(*query.origin, *query.destination)
    if dist > cutoff_m:
        raise NoPath("beyond_cutoff", f"{dist:.0f} m > {cutoff_m:.0f} m")
    dur = travel_seconds(dist, config.speed(query.access_mode))
    seg = TripSegment(ACCESS_KIND[query.access_mode], query.depart_time, query.depart_time + dur,
                      tuple(query.origin), tuple(query.destination))
    return Itinerary((seg,), transfers=0)


class _Ready(NamedTuple):
    """Earliest moment a rider can board at ``stop``."""
    time: int
    walk: int
    stop: int
    kind: str          # "access" | "stay" | "foot"
    source: object     # access: (stop, seconds); otherwise the _Ride we came from
    leg: int           # access or footpath seconds


class _Ride(NamedTuple):
    arrival: int
    walk: int
    stop: int
    pattern: int
    row: int
    board_pos: int
    alight_pos: int
    boarded: _Ready


def _transfer_edges(network: TransitNetwork, config: RouterConfig):
    cache = network._active_cache
    key = ("transfer_edges", config.transfer_slack_s)
    if key in cache:
        return cache[key]
    edges = []
    for a in range(network.n_stops):
        out = {b: sec for b, sec in network.footpaths[a]}
        for (x, y), sec in network.min_transfer.items():
            if x == a and y != a:
                out[y] = sec
        out.pop(a, None)
        stay = network.min_transfer.get((a, a), config.transfer_slack_s)
        edges.append((stay, tuple(sorted(out.items()))))
    edges = tuple(edges)
    cache[key] = edges
    return edges


def plan_trip(network: TransitNetwork, query: TripQuery,
              config: RouterConfig = DEFAULT_CONFIG) -> Itinerary:
    """Minimum-arrival itinerary for ``query``; raises :class:`NoPath`."""
    t0 = query.depart_time
    direct = None
    if query.first_board_stop is None:
        try:
            direct = direct_walk(query, config)
        except NoPath:
            pass

    if query.first_board_stop is not None:
        try:
            s = network.stop_index[query.first_board_stop]
        except KeyError:
            raise NoPath("unknown_stop", query.first_board_stop) from None
        access = [(s, haversine_m(*query.origin, network.lat[s], network.lon[s]))]
    else:
        access = network.stops_within(*query.origin, query.max_access_m)
    egress = network.stops_within(*query.destination, query.max_access_m)
    if not access or not egress:
        if direct is not None:
            return direct
        raise NoPath("no_origin_stop" if not access else "no_destination_stop")

    acc_speed = config.speed(query.access_mode)
    egress_s = {s: travel_seconds(d, config.walk_speed) for s, d in egress}
    tables = network.active_timetables(query.service_date)
    stop_patterns = network.stop_patterns
    edges = _transfer_edges(network, config)

    ready = {}
    for s, d in access:
        sec = travel_seconds(d, acc_speed)
        lbl = _Ready(t0 + sec, sec, s, "access", None, sec)
        if s not in ready or lbl[:2] < ready[s][:2]:
            ready[s] = lbl
    marked = set(ready)
    best_ride = {}
    candidates = []   # (arrival, boardings, walk, ride label)

    for k in range(1, query.max_transfers + 2):
        queue = {}
        for s in marked:
            for pi, pos in stop_patterns[s]:
                if pos < queue.get(pi, 1 << 30):
                    queue[pi] = pos
        rides = {}
        for pi in sorted(queue):
            rows, arrs, deps = tables[pi]
            if len(rows) == 0:
                continue
            stops = network.patterns[pi].stops
            cur = None  # (row, board_pos, ready label)
            for pos in range(queue[pi], len(stops)):
                s = stops[pos]
                if cur is not None:
                    r, bpos, blbl = cur
                    key = (int(arrs[r, pos]), blbl.walk)
                    prev = rides.get(s)
                    if key < best_ride.get(s, (1 << 62, 0)) and (prev is None or key < prev[:2]):
                        rides[s] = _Ride(key[0], key[1], s, pi, r, bpos, pos, blbl)
                        best_ride[s] = key
                lbl = ready.get(s)
                if lbl is None or pos == len(stops) - 1:
                    continue
                col = deps[:, pos]
                r = int(np.searchsorted(col, lbl.time, side="left"))
                if r >= len(col):
                    continue
                if cur is None or r < cur[0] or (r == cur[0] and lbl.walk < cur[2].walk):
                    cur = (r, pos, lbl)

        if not rides:
            break
        for s, ride in rides.items():
            if s in egress_s:
                e = egress_s[s]
                candidates.append((ride.arrival + e, k, ride.walk + e, ride))

        new_ready = dict(ready)
        marked = set()
        for s in sorted(rides):
            ride = rides[s]
            stay, foot = edges[s]
            options = [(s, ride.arrival + stay, ride.walk, "stay", 0)]
            options += [(q, ride.arrival + sec, ride.walk + sec, "foot", sec) for q, sec in foot]
            for q, t, w, kind, leg in options:
                old = new_ready.get(q)
                if old is None or (t, w) < old[:2]:
                    new_ready[q] = _Ready(t, w, q, kind, ride, leg)
                    marked.add(q)
        ready = new_ready

    if not candidates:
        if direct is not None:
            return direct
        raise NoPath("unreachable")
    arrival, k, walk, ride = min(candidates, key=lambda c: c[:3])
    if direct is not None and (direct.end_s, 0, direct.walk_seconds) <= (arrival, k, walk):
        return direct
    return _assemble(network, query, ride, egress_s[ride.stop], tables)


def _stop_point(network, s):
    return (float(network.lat[s]), float(network.lon[s]))


def _assemble(network, query, last: _Ride, egress_sec, tables) -> Itinerary:
    chain = []
    ride = last
    while True:
        chain.append(ride)
        lbl = ride.boarded
        if lbl.kind == "access":
            break
        ride = lbl.source
    chain.reverse()

    access_kind = ACCESS_KIND[query.access_mode]
    segs = []
    first = chain[0].boarded
    segs.append(TripSegment(access_kind, query.depart_time, first.time, tuple(query.origin),
                            _stop_point(network, first.stop), to_stop=network.stop_ids[first.stop]))
    t = first.time
    for i, ride in enumerate(chain):
        pat = network.patterns[ride.pattern]
        rows, arrs, deps = tables[ride.pattern]
        trip_id = pat.trip_ids[rows[ride.row]]
        b = pat.stops[ride.board_pos]
        lbl = ride.boarded
        if i > 0 and lbl.kind == "foot":
            prev = chain[i - 1]
            segs.append(TripSegment(SegmentKind.TRANSFER_WALK, t, t + lbl.leg,
                                    _stop_point(network, prev.stop), _stop_point(network, b),
                                    from_stop=network.stop_ids[prev.stop], to_stop=network.stop_ids[b]))
            t += lbl.leg
        dep = int(deps[ride.row, ride.board_pos])
        if dep > t:
            segs.append(TripSegment(SegmentKind.WAIT, t, dep, _stop_point(network, b), _stop_point(network, b),
                                    from_stop=network.stop_ids[b], to_stop=network.stop_ids[b]))
        path = [(dep, *_stop_point(network, b))]
        for pos in range(ride.board_pos + 1, ride.alight_pos + 1):
            p = _stop_point(network, pat.stops[pos])
            path.append((int(arrs[ride.row, pos]), *p))
            if pos < ride.alight_pos and deps[ride.row, pos] > arrs[ride.row, pos]:
                path.append((int(deps[ride.row, pos]), *p))
        a = pat.stops[ride.alight_pos]
        segs.append(TripSegment(SegmentKind.RIDE, dep, ride.arrival, _stop_point(network, b),
                                _stop_point(network, a), trip_id=trip_id,
                                from_stop=network.stop_ids[b], to_stop=network.stop_ids[a], path=tuple(path)))
        t = ride.arrival
    a = last.stop
    segs.append(TripSegment(SegmentKind.EGRESS_WALK, t, t + egress_sec, _stop_point(network, a),
                            tuple(query.destination), from_stop=network.stop_ids[a]))
    return Itinerary(tuple(segs), transfers=len(chain) - 1)
