import csv
import datetime as dt
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from helpers import BASE, random_feed
from transitheat.cohort import (CSV_FIELDS, DEFAULT_MARGINALS, AirportZone, Demographics, SynthConfig, TripRecord,
                                filter_airport, filter_window, load_trips, synthesize, write_trips)
from transitheat.errors import CohortError
from transitheat.feed import build_network, load_feed

DEMO = dict(age="25-34", income="<10k", race="Black/African American", gender="Female", vehicles="0")


def row(tid, weight="1.0", **over):
    r = dict(trip_id=tid, origin_lat="33.75", origin_lon="-84.39", dest_lat="33.76", dest_lon="-84.38",
             depart_time="08:00:00", service_date="2019-08-05", weight=weight, access_mode="walk",
             first_board_stop="", **DEMO)
    r.update(over)
    return r


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def trip(tid="t", origin=BASE, dest=(33.76, -84.38), day=dt.date(2019, 8, 5), weight=1.0):
    return TripRecord(tid, origin, dest, 8 * 3600, day, weight, Demographics(**DEMO))


@pytest.fixture(scope="module")
def network(tmp_path_factory):
    return build_network(load_feed(random_feed(tmp_path_factory.mktemp("f"), 3)))


def test_weight_passthrough(tmp_path):
    load = load_trips(write_rows(tmp_path / "t.csv", [row("a", "5.289"), row("b")]))
    assert load.trips[0].weight == 5.289
    assert load.weight == pytest.approx(6.289)


def test_missing_race_rejected(tmp_path):
    load = load_trips(write_rows(tmp_path / "t.csv", [row("a"), row("b", race=""), row("c")]))
    assert [t.trip_id for t in load.trips] == ["a", "c"]
    assert load.rejects[0].trip_id == "b" and load.rejects[0].line == 3
    assert "race" in load.rejects[0].reason


def test_summary_counts(tmp_path):
    rows = [row(f"r{i}", "5.288") for i in range(6807)] + [row("last", "3.584")]
    load = load_trips(write_rows(tmp_path / "t.csv", rows))
    text = load.summary()
    assert "6,808 valid trips" in text and "35,999" in text


def test_too_many_rejects(tmp_path):
    with pytest.raises(CohortError):
        load_trips(write_rows(tmp_path / "t.csv", [row("a"), row("b", weight="-1"), row("c", gender="X")]))


def test_unreadable(tmp_path):
    with pytest.raises(CohortError):
        load_trips(tmp_path / "nope.csv")


def test_bbox(tmp_path):
    load = load_trips(write_rows(tmp_path / "t.csv", [row("a"), row("b"), row("c", origin_lat="40.0")]),
                      bbox=(33.0, -85.0, 34.0, -84.0))
    assert len(load.trips) == 2 and "outside" in load.rejects[0].reason


def test_round_trip(tmp_path, network):
    trips = synthesize(SynthConfig(n=50, seed=3), network)
    write_trips(trips, tmp_path / "t.csv")
    assert load_trips(tmp_path / "t.csv").trips == trips


def test_synthesis_deterministic(tmp_path, network):
    a = synthesize(SynthConfig(n=1000, seed=42), network)
    b = synthesize(SynthConfig(n=1000, seed=42), network)
    write_trips(a, tmp_path / "a.csv")
    write_trips(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert synthesize(SynthConfig(n=1000, seed=43), network) != a


def test_synthesis_marginal(network):
    marg = dict(DEFAULT_MARGINALS, vehicles={"0": 0.8, "1": 0.1, "2+": 0.1})
    trips = synthesize(SynthConfig(n=10000, seed=7, marginals=marg), network)
    share = sum(t.demographics.vehicles == "0" for t in trips) / len(trips)
    assert abs(share - 0.8) <= 0.02


def test_synthesis_empty(network):
    assert synthesize(SynthConfig(n=0), network) == []


def test_synthesis_window_and_weekdays(network):
    trips = synthesize(SynthConfig(n=500, seed=1), network)
    assert all(dt.date(2019, 8, 1) <= t.service_date <= dt.date(2019, 9, 15) for t in trips)
    assert all(t.service_date.weekday() < 5 for t in trips)
    assert all(t.weight > 0 for t in trips)


def test_marginals_must_normalise():
    with pytest.raises(CohortError):
        SynthConfig(marginals=dict(DEFAULT_MARGINALS, gender={"Female": 0.5, "Male": 0.4, "Other": 0.0}))


def test_synth_config_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"n": 12, "seed": 9, "window": ["2019-08-01", "2019-08-31"],
                             "marginals": {"vehicles": {"0": 1.0}}}))
    cfg = SynthConfig.load(p)
    assert cfg.n == 12 and cfg.window[1] == dt.date(2019, 8, 31)
    assert cfg.marginals["vehicles"] == {"0": 1.0} and cfg.marginals["race"] == DEFAULT_MARGINALS["race"]


SQUARE = {"type": "Polygon", "coordinates": [[[-84.45, 33.60], [-84.40, 33.60], [-84.40, 33.65],
                                              [-84.45, 33.65], [-84.45, 33.60]]]}


@pytest.fixture
def zone(tmp_path):
    p = tmp_path / "airport.geojson"
    p.write_text(json.dumps({"type": "Feature", "geometry": SQUARE, "properties": {}}))
    return AirportZone.load(p)


def test_airport_filter(zone):
    inside = trip("in", origin=(33.62, -84.42))
    outside = trip("out")
    edge = trip("edge", dest=(33.65, -84.42))
    kept, removed = filter_airport([inside, outside, edge], zone)
    assert [t.trip_id for t in kept] == ["out"]
    assert [t.trip_id for t in removed] == ["in", "edge"]


def test_airport_stop_ids(tmp_path, network):
    p = tmp_path / "stops.txt"
    p.write_text("S0\n")
    z = AirportZone.load(p, stop_radius_m=50)
    at_stop = trip("a", origin=(network.lat[0], network.lon[0]), dest=(network.lat[1], network.lon[1]))
    kept, removed = filter_airport([at_stop], z, network)
    assert removed == [at_stop]


def test_window_filter():
    recs = [trip("a", day=dt.date(2019, 8, 1)), trip("b", day=dt.date(2019, 9, 16)), trip("c", day=dt.date(2019, 9, 15))]
    kept, dropped = filter_window(recs, dt.date(2019, 8, 1), dt.date(2019, 9, 15))
    assert [t.trip_id for t in kept] == ["a", "c"] and [t.trip_id for t in dropped] == ["b"]
    assert filter_window(recs, dt.date(2019, 9, 1), dt.date(2019, 8, 1))[0] == []


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(33.55, 33.70), st.floats(-84.50, -84.35), st.floats(0.01, 50),
                          st.integers(0, 60)), max_size=40))
def test_weight_conservation(rows):
    from shapely.geometry import shape
    z = AirportZone(polygon=shape(SQUARE))
    recs = [trip(f"t{i}", origin=(a, b), weight=w, day=dt.date(2019, 7, 20) + dt.timedelta(days=d))
            for i, (a, b, w, d) in enumerate(rows)]
    total = math.fsum(t.weight for t in recs)
    kept, removed = filter_airport(recs, z)
    assert math.isclose(math.fsum(t.weight for t in kept + removed), total, rel_tol=1e-12, abs_tol=1e-12)
    kept2, dropped = filter_window(kept, dt.date(2019, 8, 1), dt.date(2019, 9, 15))
    assert math.isclose(math.fsum(t.weight for t in kept2 + dropped + removed), total, rel_tol=1e-12, abs_tol=1e-12)
