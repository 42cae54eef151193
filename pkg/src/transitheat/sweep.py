"""Full (year, scenario) sweep: route once, score every climate pass, aggregate.

Itineraries and activity profiles do not depend on weather, so they are
computed once per trip.  Exposure is then scored for every climate pass;
each worker handles a block of trips against all passes and the blocks are
reassembled by trip index, so results do not depend on the worker count.
"""
from __future__ import annotations

import configparser
import csv
import datetime as dt
import hashlib
import json
import logging
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .climate import SCENARIOS, SpatialGrid, load_baseline, load_deltas, parse_years, project
from .cohort import DIMENSIONS, AirportZone, SynthConfig, filter_airport, filter_window, load_trips, synthesize
from .equity import risk_table, segment_share, sweep_matrix
from .errors import ConfigError
from .exposure import VULNERABLE_KINDS, MetTable, Scorer, WorkRestSchedule
from .feed import build_network, load_feed
from .router import NoPath, RouterConfig, TripQuery, plan_trip
from .thermal import heat_index
from .trajectory import KIND_CODE, dump_profile, expand

log = logging.getLogger(__name__)

BASELINE = "baseline"
_VULN_CODES = np.array([KIND_CODE[k] for k in VULNERABLE_KINDS])


@dataclass(frozen=True)
class RunConfig:
    gtfs: str
    baseline: str
    deltas: str
    output: str
    survey: Optional[str] = None
    synth: Optional[str] = None
    airport: Optional[str] = None
    grid: Optional[str] = None
    thermal: Optional[str] = None
    met: Optional[str] = None
    workrest: Optional[str] = None
    scenarios: tuple = SCENARIOS
    years: tuple = tuple(range(2019, 2101))
    workers: int = 1
    seed: int = 0
    dump_profiles: bool = False
    window: Optional[tuple] = None         # (first, last) service dates kept
    delta_celsius: bool = False
    max_access_m: float = 800.0
    max_transfers: int = 3
    max_footpath_m: float = 400.0
    walk_speed: float = 1.2
    bike_speed: float = 4.0
    micromobility_speed: float = 4.5
    transfer_slack_s: int = 60
    formats: tuple = ("csv", "json", "text")
    suppress_floor: int = 50

    def __post_init__(self):
        if (self.survey is None) == (self.synth is None):
            raise ConfigError("exactly one of survey / synth must be given")
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad:
            raise ConfigError(f"unknown scenarios {bad}")
        if not self.years:
            raise ConfigError("empty year range")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def router(self) -> RouterConfig:
        return RouterConfig(self.walk_speed, self.bike_speed, self.micromobility_speed, self.transfer_slack_s)

    def fingerprint(self) -> str:
        """Hash of everything that can change results (not workers or output location)."""
        d = asdict(self)
        for k in ("workers", "output", "formats"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        """Read an INI-style run file; relative paths resolve against its directory."""
        path = Path(path)
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not cp.read(path):
            raise ConfigError(f"cannot read run config {path}")
        flat = {}
        for section in cp.sections():
            flat.update(cp[section])
        return cls.from_mapping(flat, base=path.parent, **overrides)

    @classmethod
    def from_mapping(cls, raw: dict, base=None, **overrides) -> "RunConfig":
        base = Path(base) if base is not None else None
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, value in {**raw, **{k: v for k, v in overrides.items() if v is not None}}.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown run option {key!r}")
            kw[key] = value
        paths = ("gtfs", "baseline", "deltas", "output", "survey", "synth", "airport", "grid",
                 "thermal", "met", "workrest")
        for k in paths:
            if isinstance(kw.get(k), (str, Path)) and base is not None and kw[k] != "":
                kw[k] = str(base / kw[k]) if not os.path.isabs(kw[k]) else str(kw[k])
            if kw.get(k) == "":
                kw[k] = None
        try:
            if isinstance(kw.get("scenarios"), str):
                kw["scenarios"] = tuple(s.strip().upper() for s in kw["scenarios"].split(",") if s.strip())
            if isinstance(kw.get("years"), str):
                kw["years"] = tuple(parse_years(kw["years"]))
            if isinstance(kw.get("formats"), str):
                kw["formats"] = tuple(s.strip() for s in kw["formats"].split(",") if s.strip())
            if isinstance(kw.get("window"), str):
                a, b = kw["window"].split(":")
                kw["window"] = (dt.date.fromisoformat(a.strip()), dt.date.fromisoformat(b.strip()))
            for k in ("workers", "seed", "max_transfers", "transfer_slack_s", "suppress_floor"):
                if k in kw:
                    kw[k] = int(kw[k])
            for k in ("max_access_m", "max_footpath_m", "walk_speed", "bike_speed", "micromobility_speed"):
                if k in kw:
                    kw[k] = float(kw[k])
            for k in ("dump_profiles", "delta_celsius"):
                if isinstance(kw.get(k), str):
                    kw[k] = kw[k].strip().lower() in ("1", "true", "yes", "on")
        except ValueError as exc:
            raise ConfigError(f"bad run option: {exc}") from None
        for k in ("gtfs", "baseline", "deltas", "output"):
            if not kw.get(k):
                raise ConfigError(f"run option {k!r} is required")
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class _Prepared:
    """Weather-independent per-trip arrays."""
    pos: np.ndarray        # hourly record index per second
    offset: Optional[np.ndarray]
    activity: np.ndarray
    starts: np.ndarray     # first sample of each non-empty segment
    seg_kind: np.ndarray   # activity code of each non-empty segment


@dataclass(eq=False)
class RunArtifacts:
    config: RunConfig
    cells: list                      # [(scenario, year)], baseline first
    trips: list                      # routed trips, cohort order
    airport: np.ndarray              # bool per routed trip
    deficit_units: np.ndarray        # (n_trips, n_cells)
    latched: np.ndarray
    kind_flags: np.ndarray           # (n_trips, n_cells, n_kinds)
    kind_present: np.ndarray         # (n_trips, n_kinds)
    unit: int
    unroutable: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def at_risk(self) -> np.ndarray:
        return (self.deficit_units > 0) | self.latched

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.trips], dtype=float)

    @property
    def passes(self) -> list:
        return [c for c in self.cells if c[0] != BASELINE]

    def matrix(self) -> dict:
        return sweep_matrix(self.at_risk, self.weights, self.cells)

    def segment_table(self) -> dict:
        return segment_share(self.kind_flags, self.kind_present, self.weights, self.cells)

    def equity_tables(self, cell) -> dict:
        """Demographic tables for one cell, airport trips excluded."""
        j = self.cells.index(cell)
        keep = ~self.airport
        trips = [t for t, k in zip(self.trips, keep) if k]
        w = self.weights[keep]
        risk = self.at_risk[keep, j]
        return {dim: risk_table(risk, w, [t.demographics.get(dim) for t in trips], dim,
                                suppress={"gender": ("Other",)}, n_floor=self.config.suppress_floor)
                for dim in DIMENSIONS}

    def manifest(self) -> dict:
        return {
            "version": __version__,
            "config_hash": self.config.fingerprint(),
            "inputs": self.inputs,
            "scenarios": list(self.config.scenarios),
            "years": [min(self.config.years), max(self.config.years)],
            "counts": self.counts,
            "exposure_passes": len(self.passes),
            "deficit_unit_per_minute": self.unit,
            "timing": self.timing,
        }


# ---------------------------------------------------------------------------
# workers

def _score_trip(prep: _Prepared, temps: np.ndarray, rh: np.ndarray, scorer: Scorer):
    t = temps[:, prep.pos]
    if prep.offset is not None:
        t = t + prep.offset
    hi = heat_index(t, rh[prep.pos])
    inc, latch = scorer.steps(hi, prep.activity)
    run = scorer.running(inc)
    hot = (inc > 0) | latch
    seg_hot = np.logical_or.reduceat(hot, prep.starts, axis=1)
    kinds = np.zeros((temps.shape[0], len(_VULN_CODES)), dtype=bool)
    for k, code in enumerate(_VULN_CODES):
        m = prep.seg_kind == code
        if m.any():
            kinds[:, k] = seg_hot[:, m].any(axis=1)
    return run[:, -1], latch.any(axis=1), kinds


def _score_block(args):
    preps, temps, rh, met, schedule = args
    scorer = Scorer(met, schedule)
    n, c = len(preps), temps.shape[0]
    units = np.zeros((n, c), dtype=np.int64)
    latched = np.zeros((n, c), dtype=bool)
    kinds = np.zeros((n, c, len(_VULN_CODES)), dtype=bool)
    for i, p in enumerate(preps):
        units[i], latched[i], kinds[i] = _score_trip(p, temps, rh, scorer)
    return units, latched, kinds


# ---------------------------------------------------------------------------
# driver

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_dir(path) -> str:
    h = hashlib.sha256()
    for name in sorted(os.listdir(path)):
        p = os.path.join(path, name)
        if os.path.isfile(p):
            h.update(name.encode())
            h.update(_sha256_file(p).encode())
    return h.hexdigest()


def _checksums(cfg: RunConfig) -> dict:
    out = {}
    for k in ("gtfs", "baseline", "deltas", "survey", "synth", "airport", "grid", "thermal", "met", "workrest"):
        p = getattr(cfg, k)
        if p is None:
            continue
        out[k] = _sha256_dir(p) if os.path.isdir(p) else _sha256_file(p)
    return out


def run_sweep(config: RunConfig, write: bool = True) -> RunArtifacts:
    """Execute the whole pipeline; with ``write`` the reports land in ``config.output``.

    On any error nothing is left behind in the output directory.
    """
    t_start = time.perf_counter()
    cfg = config
    log.info("loading feed %s", cfg.gtfs)
    network = build_network(load_feed(cfg.gtfs), cfg.max_footpath_m, cfg.walk_speed)
    grid = SpatialGrid.load(cfg.grid) if cfg.grid else None
    baseline = load_baseline(cfg.baseline, grid=grid)
    base_year = baseline.start.year
    deltas = load_deltas(cfg.deltas, celsius=cfg.delta_celsius, baseline_year=base_year)
    met = MetTable.load(cfg.met)
    schedule = WorkRestSchedule.load(cfg.workrest)
    scorer = Scorer(met, schedule)

    counts = {}
    if cfg.survey:
        loaded = load_trips(cfg.survey)
        trips, counts["rejected"] = loaded.trips, len(loaded.rejects)
    else:
        synth = SynthConfig.load(cfg.synth)
        trips = synthesize(synth, network, seed=cfg.seed)
        counts["rejected"] = 0
    counts["input_trips"] = len(trips) + counts["rejected"]
    if cfg.window is not None:
        trips, dropped = filter_window(trips, *cfg.window)
        counts["outside_window"] = len(dropped)

    # route once
    routed, itineraries, unroutable = [], [], []
    plan_calls = 0
    rcfg = cfg.router
    for t in trips:
        q = TripQuery(t.origin, t.destination, t.depart_time, t.service_date, t.access_mode,
                      cfg.max_transfers, cfg.max_access_m, t.first_board_stop)
        plan_calls += 1
        try:
            itin = plan_trip(network, q, rcfg)
        except NoPath as exc:
            unroutable.append((t.trip_id, exc.reason))
            continue
        if itin.duration == 0:
            unroutable.append((t.trip_id, "zero_duration"))
            continue
        routed.append(t)
        itineraries.append(itin)
    counts.update(routed=len(routed), unroutable=len(unroutable), plan_trip_calls=plan_calls)
    log.info("routed %d of %d trips", len(routed), len(trips))

    airport = np.zeros(len(routed), dtype=bool)
    if cfg.airport:
        zone = AirportZone.load(cfg.airport)
        _, removed = filter_airport(routed, zone, network)
        ids = {t.trip_id for t in removed}
        airport = np.array([t.trip_id in ids for t in routed], dtype=bool)
    counts["airport_excluded"] = int(airport.sum())

    # weather-independent trip data
    preps, present = [], np.zeros((len(routed), len(VULNERABLE_KINDS)), dtype=bool)
    profile_dir = None
    for i, (t, itin) in enumerate(zip(routed, itineraries)):
        prof = expand(itin, t.trip_id, t.service_date)
        if cfg.dump_profiles:
            profile_dir = profile_dir or Path(tempfile.mkdtemp(prefix="profiles-"))
            dump_profile(prof, profile_dir)
        pos = baseline.hour_positions(prof.t)
        offset = grid.offset(prof.lat, prof.lon) if grid is not None else None
        change = np.flatnonzero(np.diff(prof.segment)) + 1
        starts = np.concatenate([[0], change]).astype(np.intp)
        seg_kind = prof.activity[starts].astype(np.int64)
        present[i] = [bool(np.any(seg_kind == c)) for c in _VULN_CODES]
        preps.append(_Prepared(pos, offset, prof.activity, starts, seg_kind))

    # climate passes
    cells = [(BASELINE, base_year)]
    temps = [baseline.temp_f]
    for scen in cfg.scenarios:
        for year in cfg.years:
            temps.append(project(baseline, deltas, scen, year).temp_f)
            cells.append((scen, year))
    temps = np.vstack(temps)
    counts["exposure_passes"] = len(cells) - 1
    log.info("scoring %d trips x %d passes", len(routed), len(cells) - 1)

    n_blocks = max(1, min(len(preps), cfg.workers * 4))
    bounds = np.linspace(0, len(preps), n_blocks + 1).astype(int)
    jobs = [(preps[a:b], temps, baseline.rh_pct, met, schedule) for a, b in zip(bounds[:-1], bounds[1:])]
    if cfg.workers > 1 and len(preps) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_score_block, jobs))
    else:
        parts = [_score_block(j) for j in jobs]
    if parts:
        units = np.concatenate([p[0] for p in parts])
        latched = np.concatenate([p[1] for p in parts])
        kinds = np.concatenate([p[2] for p in parts])
    else:
        units = np.zeros((0, len(cells)), dtype=np.int64)
        latched = np.zeros((0, len(cells)), dtype=bool)
        kinds = np.zeros((0, len(cells), len(VULNERABLE_KINDS)), dtype=bool)

    art = RunArtifacts(cfg, cells, routed, airport, units, latched, kinds, present, scorer.unit,
                       unroutable=unroutable, counts=counts, inputs=_checksums(cfg))
    art.timing = {"wall_s": round(time.perf_counter() - t_start, 3),
                  "finished": dt.datetime.now().isoformat(timespec="seconds")}
    if write:
        try:
            _publish(art, profile_dir)
        finally:
            if profile_dir is not None:
                shutil.rmtree(profile_dir, ignore_errors=True)
    return art


def _publish(art: RunArtifacts, profile_dir=None) -> None:
    out = Path(art.config.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        for fmt in art.config.formats:
            report(art, fmt, tmp)
        write_trip_results(art, tmp / "trip_results.csv")
        with open(tmp / "unroutable.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trip_id", "reason"])
            w.writerows(art.unroutable)
        if profile_dir is not None:
            shutil.move(str(profile_dir), tmp / "profiles")
        with open(tmp / "manifest.json", "w") as fh:
            json.dump(art.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


# ---------------------------------------------------------------------------
# reports

def _pct(x, nd):
    return "" if x is None else f"{x:.{nd}f}"


def _pct_json(x, nd):
    return None if x is None else round(x, nd)


def write_trip_results(art: RunArtifacts, path) -> None:
    names = [k.value for k in VULNERABLE_KINDS]
    at_risk = art.at_risk
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_id", "year", "scenario", "deficit_min", "at_risk", *names])
        for j, (scen, year) in enumerate(art.cells):
            for i, t in enumerate(art.trips):
                w.writerow([t.trip_id, year, scen, f"{art.deficit_units[i, j] / art.unit:.6f}",
                            int(at_risk[i, j]), *(int(x) for x in art.kind_flags[i, j])])


def _matrix_rows(art: RunArtifacts):
    m = art.matrix()
    base_year = art.cells[0][1]
    years = sorted({base_year, *art.config.years})
    rows = []
    for y in years:
        row = {"year": y, BASELINE: m[(BASELINE, base_year)] if y == base_year else None}
        for s in art.config.scenarios:
            # the baseline year is shown once, in the baseline column
            row[s] = None if y == base_year else m.get((s, y))
        rows.append(row)
    return rows


def _table_records(table, nd=1):
    return [{"group": r.group, "n_trips": r.n_trips, "weight": round(r.weight, 6),
             "weight_at_risk": round(r.weight_at_risk, 6), "rate_pct": _pct_json(r.rate, nd),
             "share_safe_pct": _pct_json(r.share_safe, nd), "share_at_risk_pct": _pct_json(r.share_at_risk, nd),
             "suppressed": r.suppressed} for r in table.rows]


def report(art: RunArtifacts, fmt: str, directory) -> list:
    """Write one report format into ``directory``; returns the paths written.

    ``csv``: one file per table; ``json``: a single bundle; ``text``: a short
    summary of the sweep matrix.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    scen = list(art.config.scenarios)
    if fmt == "csv":
        p = d / "sweep_matrix.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["year", BASELINE, *scen])
            for row in _matrix_rows(art):
                w.writerow([row["year"], _pct(row[BASELINE], 2), *(_pct(row[s], 2) for s in scen)])
        written.append(p)
        p = d / "segment_share.csv"
        seg = art.segment_table()
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["segment_kind", "scenario", "year", "pct_flagged"])
            for kind in VULNERABLE_KINDS:
                for cell in art.cells:
                    w.writerow([kind.value, cell[0], cell[1], _pct(seg[(kind, cell)], 1)])
        written.append(p)
        for cell in art.cells:
            sub = d / "equity" / f"{cell[0]}_{cell[1]}"
            sub.mkdir(parents=True, exist_ok=True)
            for dim, table in art.equity_tables(cell).items():
                p = sub / f"{dim}.csv"
                with open(p, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["group", "n_trips", "weight", "weight_at_risk", "rate_pct",
                                "share_safe_pct", "share_at_risk_pct", "suppressed"])
                    for r in table.rows:
                        w.writerow([r.group, r.n_trips, f"{r.weight:.6f}", f"{r.weight_at_risk:.6f}",
                                    _pct(r.rate, 1), _pct(r.share_safe, 1), _pct(r.share_at_risk, 1),
                                    int(r.suppressed)])
                written.append(p)
    elif fmt == "json":
        seg = art.segment_table()
        bundle = {
            "sweep_matrix": [{k: (_pct_json(v, 2) if k != "year" else v) for k, v in row.items()}
                             for row in _matrix_rows(art)],
            "segment_share": [{"segment_kind": k.value, "scenario": c[0], "year": c[1],
                               "pct_flagged": _pct_json(seg[(k, c)], 1)}
                              for k in VULNERABLE_KINDS for c in art.cells],
            "equity": [{"scenario": c[0], "year": c[1], "dimension": dim, "rows": _table_records(t)}
                       for c in art.cells for dim, t in art.equity_tables(c).items()],
        }
        p = d / "results.json"
        with open(p, "w") as fh:
            json.dump(bundle, fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(p)
    elif fmt == "text":
        p = d / "summary.txt"
        p.write_text(summary_text(art))
        written.append(p)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    return written


def summary_text(art: RunArtifacts) -> str:
    m = art.matrix()
    base = art.cells[0]
    lines = [f"trips routed: {len(art.trips)} (unroutable {len(art.unroutable)}), "
             f"weight {art.weights.sum():.1f}",
             f"exposure passes: {len(art.passes)}",
             f"baseline {base[1]}: {_pct(m[base], 2)} % of trips at risk"]
    last = max(art.config.years)
    for s in art.config.scenarios:
        lines.append(f"{s} {last}: {_pct(m.get((s, last)), 2)} %")
    return "\n".join(lines) + "\n"
