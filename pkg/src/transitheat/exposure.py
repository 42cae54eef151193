"""Cumulative heat exposure scored as a rest deficit against a work/rest schedule.

Each second of an activity profile is one of

* neutral: the activity is exempt (air-conditioned vehicles);
* rest: Light activity while the heat index is below the schedule's first
  band; it pays back one second of owed rest;
* work: everything else.  With ``W`` permissible work minutes per hour, a
  work minute owes ``(60 - W) / W`` minutes of rest.  ``W = 0`` also sets
  the immediate-risk latch.

The running deficit never drops below zero.  Internally the deficit is
kept as an integer count of ``1 / unit`` minutes so that "deficit > 0" is
an exact test rather than a float comparison.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import IntEnum
from importlib import resources
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigError
from .router import Itinerary, SegmentKind
from .thermal import WeatherSample, heat_index
from .trajectory import KINDS, ActivityProfile


class Workload(IntEnum):
    LIGHT = 0
    MODERATE = 1
    HEAVY = 2


def workload_of(met: float) -> Workload:
    if met <= 0:
        raise ValueError("MET must be positive")
    if met < 3.0:
        return Workload.LIGHT
    if met <= 6.0:
        return Workload.MODERATE
    return Workload.HEAVY


@dataclass(frozen=True)
class MetTable:
    met: dict       # activity name -> MET
    exempt: frozenset

    def __post_init__(self):
        bad = [k for k, v in self.met.items() if not v > 0]
        if bad:
            raise ConfigError(f"MET values must be positive: {bad}")
        missing = [k.value for k in KINDS if k.value not in self.met]
        if missing:
            raise ConfigError(f"MET table lacks activities {missing}")
        if SegmentKind.RIDE.value not in self.exempt:
            raise ConfigError("Ride must be exposure-exempt")

    @classmethod
    def from_csv(cls, text: str) -> "MetTable":
        met, exempt = {}, set()
        for row in csv.DictReader(io.StringIO(text)):
            name = row["activity"].strip()
            met[name] = float(row["met"])
            if row.get("exempt", "0").strip().lower() in ("1", "true", "yes"):
                exempt.add(name)
        return cls(met, frozenset(exempt))

    @classmethod
    def load(cls, path=None) -> "MetTable":
        if path is None:
            return cls.from_csv(resources.files("transitheat.data").joinpath("met.csv").read_text())
        with open(path) as fh:
            return cls.from_csv(fh.read())

    def workload(self, kind) -> Optional[Workload]:
        """``None`` for exempt activities."""
        name = kind.value if isinstance(kind, SegmentKind) else kind
        if name in self.exempt:
            return None
        return workload_of(self.met[name])


@dataclass(frozen=True)
class WorkRestSchedule:
    """Heat-index bands (lower edges, F) by workload -> work minutes per hour."""
    edges: tuple
    minutes: tuple   # one (light, moderate, heavy) triple per band

    def __post_init__(self):
        if not self.edges:
            raise ConfigError("work/rest schedule needs at least one band")
        if list(self.edges) != sorted(set(self.edges)):
            raise ConfigError("band edges must be strictly increasing")
        if len(self.minutes) != len(self.edges) or any(len(r) != 3 for r in self.minutes):
            raise ConfigError("each band needs light, moderate and heavy minutes")
        m = np.asarray(self.minutes)
        if m.min() < 0 or m.max() > 60:
            raise ConfigError("permissible minutes must lie in [0, 60]")
        if np.any(np.diff(m, axis=0) > 0):
            raise ConfigError("permissible minutes must not rise with heat index")
        if np.any(np.diff(m, axis=1) > 0):
            raise ConfigError("permissible minutes must not rise from Light to Heavy")

    @classmethod
    def from_csv(cls, text: str) -> "WorkRestSchedule":
        rows = sorted(
            (float(r["heat_index_f"]), (int(r["light"]), int(r["moderate"]), int(r["heavy"])))
            for r in csv.DictReader(io.StringIO(text)))
        return cls(tuple(e for e, _ in rows), tuple(m for _, m in rows))

    @classmethod
    def load(cls, path=None) -> "WorkRestSchedule":
        if path is None:
            return cls.from_csv(resources.files("transitheat.data").joinpath("workrest.csv").read_text())
        with open(path) as fh:
            return cls.from_csv(fh.read())


def permissible_work(schedule: WorkRestSchedule, heat_index_f: float, workload: Workload) -> int:
    """Work minutes per hour; 60 below the lowest band."""
    band = int(np.searchsorted(np.asarray(schedule.edges), heat_index_f, side="right")) - 1
    if band < 0:
        return 60
    return schedule.minutes[band][int(workload)]


class Scorer:
    """Vectorized per-second accounting for one (MET table, schedule) pair."""

    def __init__(self, met: MetTable, schedule: WorkRestSchedule):
        self.met = met
        self.schedule = schedule
        self.edges = np.asarray(schedule.edges, dtype=float)
        cells = np.asarray(schedule.minutes, dtype=np.int64)
        # W = 0 is charged as W = 1 so the charge stays monotone in W
        eff = np.maximum(cells, 1)
        unit = 60
        for w in np.unique(eff):
            unit = math.lcm(unit, 60 * int(w))
        self.unit = unit
        self.cell_units = (60 - eff) * unit // (60 * eff)
        self.zero_cells = cells == 0
        self.credit = unit // 60
        cls = []
        for k in KINDS:
            w = met.workload(k)
            cls.append(-1 if w is None else int(w))
        self.kind_class = np.array(cls, dtype=np.int64)

    def steps(self, hi: np.ndarray, activity: np.ndarray):
        """Per-second deficit increments (units) and latch flags.

        ``hi`` may carry leading dimensions (e.g. one row per climate pass);
        ``activity`` broadcasts against its last axis.
        """
        cls = self.kind_class[activity]
        exempt = cls < 0
        band = np.searchsorted(self.edges, hi, side="right") - 1
        in_band = band >= 0
        b = np.where(in_band, band, 0)
        c = np.where(exempt, 0, cls)
        work_units = np.where(in_band, self.cell_units[b, c], 0)
        latch = in_band & self.zero_cells[b, c] & ~exempt
        rest = (cls == 0) & ~in_band
        inc = np.where(exempt, 0, np.where(rest, -self.credit, work_units))
        return inc, latch

    def running(self, inc: np.ndarray, initial_units: int = 0) -> np.ndarray:
        """Deficit after each second, floored at zero (units)."""
        s = np.cumsum(inc, axis=-1)
        m = np.minimum(np.minimum.accumulate(s, axis=-1), -int(initial_units))
        return s - m


@dataclass(frozen=True, eq=False)
class ExposureResult:
    trip_id: str
    rest_deficit: float        # minutes
    at_risk: bool
    latched: bool
    deficit_units: int
    unit: int                  # deficit_units / unit == rest_deficit
    segment_flags: tuple       # per itinerary segment index
    trace: Optional[np.ndarray] = None   # running deficit in minutes after each second


WeatherLookup = Callable[[int, float, float], WeatherSample]


def _heat_index_series(profile: ActivityProfile, weather) -> np.ndarray:
    if hasattr(weather, "sample_arrays"):
        temp, rh, _ = weather.sample_arrays(profile.t, profile.lat, profile.lon)
        return np.asarray(heat_index(temp, rh), dtype=float)
    out = np.empty(len(profile))
    for i, (t, a, b) in enumerate(zip(profile.t, profile.lat, profile.lon)):
        w = weather(int(t), float(a), float(b))
        out[i] = heat_index(w.air_temp, w.rel_humidity)
    return out


def segment_flags(n_segments: int, segment: np.ndarray, inc: np.ndarray, latch: np.ndarray) -> tuple:
    """A segment is flagged when it adds to the rest deficit or trips the latch.

    Seconds that only pay a deficit back, or exempt seconds carried along
    by one, do not flag their segment.
    """
    flags = [False] * n_segments
    if len(segment):
        hot = (inc > 0) | latch
        for i in np.unique(segment[hot]):
            flags[int(i)] = True
    return tuple(flags)


def accumulate(profile: ActivityProfile, weather: Union[WeatherLookup, object], met: MetTable,
               schedule: WorkRestSchedule, initial_deficit: float = 0.0, *,
               n_segments: Optional[int] = None, keep_trace: bool = True,
               scorer: Optional[Scorer] = None, initial_units: Optional[int] = None) -> ExposureResult:
    """Score one activity profile.

    ``weather`` is either an archive exposing ``sample_arrays`` (fast path)
    or a callable ``(t, lat, lon) -> WeatherSample``.  ``initial_deficit``
    (minutes) seeds the running value, which lets consecutive trips be
    chained; ``initial_units`` does the same without rounding.
    """
    if len(profile) == 0:
        raise ValueError("cannot score an empty profile")
    scorer = scorer or Scorer(met, schedule)
    hi = _heat_index_series(profile, weather)
    return score_series(profile.trip_id, hi, profile.activity, profile.segment, scorer,
                        n_segments=n_segments, keep_trace=keep_trace,
                        initial_units=initial_units if initial_units is not None
                        else int(round(initial_deficit * scorer.unit)))


def score_series(trip_id, hi, activity, segment, scorer: Scorer, *, n_segments=None,
                 keep_trace=True, initial_units=0) -> ExposureResult:
    inc, latch = scorer.steps(hi, activity)
    run = scorer.running(inc, initial_units)
    final = int(run[-1]) if len(run) else int(initial_units)
    latched = bool(latch.any())
    if n_segments is None:
        n_segments = int(segment.max()) + 1 if len(segment) else 0
    return ExposureResult(
        trip_id=trip_id,
        rest_deficit=final / scorer.unit,
        at_risk=final > 0 or latched,
        latched=latched,
        deficit_units=final,
        unit=scorer.unit,
        segment_flags=segment_flags(n_segments, segment, inc, latch),
        trace=run / scorer.unit if keep_trace else None,
    )


VULNERABLE_KINDS = (
    SegmentKind.ACCESS_WALK,
    SegmentKind.ACCESS_BIKE,
    SegmentKind.ACCESS_MICROMOBILITY,
    SegmentKind.WAIT,
    SegmentKind.TRANSFER_WALK,
)


def segment_vulnerability(result: ExposureResult, itinerary: Itinerary) -> dict:
    """Per activity kind: was any segment of that kind flagged?"""
    flags = {k: False for k in VULNERABLE_KINDS}
    for seg, hot in zip(itinerary.segments, result.segment_flags):
        if seg.kind in flags and hot:
            flags[seg.kind] = True
    return flags
