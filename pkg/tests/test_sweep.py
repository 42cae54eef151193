import csv
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from helpers import sweep_inputs, write_deltas
from transitheat import sweep as sweep_mod
from transitheat.climate import load_baseline, load_deltas, project
from transitheat.cohort import DIMENSIONS
from transitheat.errors import ConfigError, DeltaError
from transitheat.exposure import VULNERABLE_KINDS, MetTable, WorkRestSchedule, accumulate, segment_vulnerability
from transitheat.feed import build_network, load_feed
from transitheat.router import TripQuery, plan_trip
from transitheat.sweep import BASELINE, RunConfig, run_sweep
from transitheat.trajectory import expand


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    cfg = RunConfig.from_mapping(sweep_inputs(d, n=40, years="2019,2050,2100"))
    return cfg, run_sweep(cfg)


def test_cells_and_passes(small):
    cfg, art = small
    assert art.cells[0] == (BASELINE, 2019)
    assert len(art.passes) == 9
    assert art.manifest()["exposure_passes"] == 9
    assert art.counts["plan_trip_calls"] == 40


def test_single_pass(tmp_path):
    cfg = RunConfig.from_mapping(sweep_inputs(tmp_path, n=5, years="2050", scenarios="SSP245"))
    art = run_sweep(cfg, write=False)
    assert art.manifest()["exposure_passes"] == 1


def test_route_once(tmp_path, monkeypatch):
    calls = []
    real = sweep_mod.plan_trip

    def counting(*a, **k):
        calls.append(1)
        return real(*a, **k)

    monkeypatch.setattr(sweep_mod, "plan_trip", counting)
    run_sweep(RunConfig.from_mapping(sweep_inputs(tmp_path, n=15, years="2019:2040")), write=False)
    assert len(calls) == 15


def test_fast_path_matches_reference_scoring(small):
    cfg, art = small
    net = build_network(load_feed(cfg.gtfs))
    base = load_baseline(cfg.baseline)
    deltas = load_deltas(cfg.deltas, baseline_year=2019)
    met, sched = MetTable.load(), WorkRestSchedule.load()
    for i, t in enumerate(art.trips):
        it = plan_trip(net, TripQuery(t.origin, t.destination, t.depart_time, t.service_date, t.access_mode))
        prof = expand(it, t.trip_id, t.service_date)
        for j, (scen, year) in enumerate(art.cells):
            arch = base if scen == BASELINE else project(base, deltas, scen, year)
            # profiles carry baseline-year timestamps; the projection keeps the hour order
            arch = replace(arch, start=base.start)
            r = accumulate(prof, arch, met, sched)
            assert r.deficit_units == art.deficit_units[i, j]
            assert r.at_risk == art.at_risk[i, j]
            flags = segment_vulnerability(r, it)
            assert [flags[k] for k in VULNERABLE_KINDS] == list(art.kind_flags[i, j])


def test_ordering_properties(small):
    cfg, art = small
    m = art.matrix()
    for s in cfg.scenarios:
        col = [m[(s, y)] for y in cfg.years]
        assert col == sorted(col)
    for y in cfg.years:
        assert m[("SSP245", y)] <= m[("SSP370", y)] <= m[("SSP585", y)]
    assert m[("SSP245", 2019)] == m[(BASELINE, 2019)]


def test_report_files(small):
    cfg, art = small
    out = Path(cfg.output)
    names = {p.name for p in out.iterdir()}
    assert {"sweep_matrix.csv", "segment_share.csv", "results.json", "summary.txt", "manifest.json",
            "trip_results.csv", "unroutable.csv", "equity"} <= names
    rows = list(csv.DictReader(open(out / "sweep_matrix.csv")))
    assert [r["year"] for r in rows] == ["2019", "2050", "2100"]
    assert rows[0]["baseline"] != "" and rows[0]["SSP245"] == ""
    assert rows[1]["baseline"] == "" and rows[1]["SSP585"] != ""
    assert len(list((out / "equity").iterdir())) == len(art.cells)
    assert {p.stem for p in (out / "equity" / "SSP585_2100").iterdir()} == set(DIMENSIONS)
    bundle = json.loads((out / "results.json").read_text())
    assert {"sweep_matrix", "segment_share", "equity"} == set(bundle)
    summary = (out / "summary.txt").read_text()
    assert "baseline 2019" in summary and "SSP585 2100" in summary
    trip_rows = list(csv.reader(open(out / "trip_results.csv")))
    assert trip_rows[0][:5] == ["trip_id", "year", "scenario", "deficit_min", "at_risk"]
    assert len(trip_rows) == 1 + len(art.trips) * len(art.cells)
    seg = list(csv.DictReader(open(out / "segment_share.csv")))
    assert "Ride" not in {r["segment_kind"] for r in seg}
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {"gtfs", "baseline", "deltas", "synth"}


def test_rerun_identical(small, tmp_path):
    cfg, _ = small
    again = RunConfig.from_mapping({**{k: getattr(cfg, k) for k in ("gtfs", "baseline", "deltas", "synth")},
                                    "output": str(tmp_path / "again"), "years": "2019,2050,2100", "seed": "7"})
    run_sweep(again)
    a, b = Path(cfg.output), tmp_path / "again"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for f in files:
        if f.name == "manifest.json":
            ma, mb = json.loads((a / f).read_text()), json.loads((b / f).read_text())
            ma.pop("timing"), mb.pop("timing")
            assert ma == mb
        else:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_failure_leaves_no_output(tmp_path):
    raw = sweep_inputs(tmp_path, n=5, years="2019:2030")
    write_deltas(tmp_path / "short.csv", [("SSP245", 2020, 1.0)])
    raw["deltas"] = str(tmp_path / "short.csv")
    with pytest.raises(DeltaError):
        run_sweep(RunConfig.from_mapping(raw))
    assert not Path(raw["output"]).exists()
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".out")] == []


def test_airport_only_leaves_equity_tables(tmp_path):
    raw = sweep_inputs(tmp_path, n=30, years="2050", scenarios="SSP585")
    base = run_sweep(RunConfig.from_mapping(raw), write=False)
    zone = tmp_path / "airport.txt"
    zone.write_text("G0_0\nG0_1\nG1_0\nG1_1\n")
    art = run_sweep(RunConfig.from_mapping({**raw, "airport": str(zone)}), write=False)
    assert art.counts["airport_excluded"] > 0
    assert art.matrix() == base.matrix()
    kept = float(np.sum(art.weights[~art.airport]))
    for table in art.equity_tables(art.cells[-1]).values():
        assert math.isclose(table.total_weight, kept, rel_tol=1e-9)


def test_profile_dump(tmp_path):
    raw = sweep_inputs(tmp_path, n=3, years="2050", scenarios="SSP245", dump_profiles="yes")
    art = run_sweep(RunConfig.from_mapping(raw))
    dumped = sorted(p.stem for p in (Path(raw["output"]) / "profiles").iterdir())
    assert dumped == sorted(t.trip_id for t in art.trips)


def test_run_config_file(tmp_path):
    raw = sweep_inputs(tmp_path / "in", n=3)
    ini = tmp_path / "in" / "run.cfg"
    ini.write_text("[inputs]\ngtfs = gtfs\nbaseline = weather.csv\ndeltas = deltas.csv\nsynth = synth.json\n"
                   "[sweep]\nscenarios = SSP245, SSP585\nyears = 2019:2030\nworkers = 2\noutput = out\n")
    cfg = RunConfig.from_file(ini)
    assert cfg.gtfs == raw["gtfs"] and cfg.scenarios == ("SSP245", "SSP585")
    assert cfg.years == tuple(range(2019, 2031)) and cfg.workers == 2
    assert RunConfig.from_file(ini, workers=8).fingerprint() == cfg.fingerprint()
    assert RunConfig.from_file(ini, seed=3).fingerprint() != cfg.fingerprint()


def test_run_config_errors(tmp_path):
    raw = sweep_inputs(tmp_path, n=3)
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({**raw, "survey": "x.csv"})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({**raw, "scenarios": "RCP45"})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({**raw, "colour": "blue"})


def test_run_file_inline_comments(tmp_path):
    sweep_inputs(tmp_path, n=3)
    ini = tmp_path / "run.cfg"
    ini.write_text("[inputs]\ngtfs = gtfs\nbaseline = weather.csv\ndeltas = deltas.csv\n"
                   "synth = synth.json          ; or: survey = trips.csv\n"
                   "[sweep]\n; window = 2019-08-01:2019-09-15\nyears = 2019:2100\noutput = out\n")
    cfg = RunConfig.from_file(ini)
    assert cfg.synth == str(tmp_path / "synth.json") and cfg.window is None
