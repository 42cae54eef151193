"""Expand an itinerary into a 1 Hz activity profile."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .router import Itinerary, SegmentKind

KINDS = tuple(SegmentKind)
KIND_CODE = {k: i for i, k in enumerate(KINDS)}

_EPOCH = dt.date(1970, 1, 1)


def day_start(service_date: dt.date) -> int:
    """Absolute second of local midnight (calendar arithmetic, no DST)."""
    return (service_date - _EPOCH).days * 86400


@dataclass(frozen=True, eq=False)
class ActivityProfile:
    """Per-second samples of one traveller-trip.

    ``t`` holds absolute seconds, ``activity`` holds indices into :data:`KINDS`
    and ``segment`` the index of the enclosing itinerary segment.
    """
    trip_id: str
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    activity: np.ndarray
    segment: np.ndarray

    def __len__(self):
        return len(self.t)

    def kinds(self):
        return [KINDS[i] for i in self.activity]

    def counts(self) -> dict:
        c = np.bincount(self.activity, minlength=len(KINDS))
        return {k: int(n) for k, n in zip(KINDS, c) if n}


def _interp_positions(seg, seconds):
    pts = seg.waypoints()
    times = np.array([p[0] for p in pts], dtype=float)
    lats = np.array([p[1] for p in pts], dtype=float)
    lons = np.array([p[2] for p in pts], dtype=float)
    if len(times) == 1 or times[-1] == times[0]:
        return np.full(len(seconds), lats[0]), np.full(len(seconds), lons[0])
    return np.interp(seconds, times, lats), np.interp(seconds, times, lons)


def expand(itinerary: Itinerary, trip_id: str = "", service_date: dt.date | None = None) -> ActivityProfile:
    """One sample per whole second in ``[start, end)`` of the itinerary.

    A second belongs to the segment containing its start instant, so joins
    between segments are not counted twice.  Wait samples sit at the stop.
    With ``service_date`` the timestamps become absolute seconds; otherwise
    they stay in seconds of the service day.
    """
    offset = day_start(service_date) if service_date is not None else 0
    ts, la, lo, act, seg_idx = [], [], [], [], []
    for i, seg in enumerate(itinerary.segments):
        if seg.end_s <= seg.start_s:
            continue
        secs = np.arange(seg.start_s, seg.end_s, dtype=np.int64)
        if seg.kind is SegmentKind.WAIT:
            lat = np.full(len(secs), seg.start[0])
            lon = np.full(len(secs), seg.start[1])
        else:
            lat, lon = _interp_positions(seg, secs.astype(float))
        ts.append(secs + offset)
        la.append(lat)
        lo.append(lon)
        act.append(np.full(len(secs), KIND_CODE[seg.kind], dtype=np.int8))
        seg_idx.append(np.full(len(secs), i, dtype=np.int32))
    if not ts:
        return ActivityProfile(trip_id, np.empty(0, np.int64), np.empty(0), np.empty(0),
                               np.empty(0, np.int8), np.empty(0, np.int32))
    return ActivityProfile(trip_id, np.concatenate(ts), np.concatenate(la), np.concatenate(lo),
                           np.concatenate(act), np.concatenate(seg_idx))


def dump_profile(profile: ActivityProfile, directory) -> Path:
    """Write ``<trip_id>.csv`` with columns t,lat,lon,activity,segment."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{profile.trip_id or 'profile'}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "lat", "lon", "activity", "segment"])
        for t, a, b, k, s in zip(profile.t, profile.lat, profile.lon, profile.activity, profile.segment):
            w.writerow([int(t), f"{a:.7f}", f"{b:.7f}", KINDS[k].value, int(s)])
    return path
