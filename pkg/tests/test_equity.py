import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transitheat.cohort import DIMENSIONS, Demographics, TripRecord
from transitheat.equity import (exposure_composition, risk_table, segment_share, specific_exposure_rate,
                                sweep_matrix, weighted_rate)
from transitheat.exposure import VULNERABLE_KINDS
from transitheat.router import SegmentKind as K


def make_trips(groups, weights, dimension="race"):
    out = []
    for i, (g, w) in enumerate(zip(groups, weights)):
        demo = dict(age="25-34", income="<10k", race="Other", gender="Female", vehicles="0")
        demo[dimension] = g
        out.append(TripRecord(f"t{i}", (33.7, -84.4), (33.8, -84.3), 28800, dt.date(2019, 8, 5), w,
                              Demographics(**demo)))
    return out


def test_specific_rate_arithmetic():
    trips = make_trips(["Asian", "Asian"], [2.0, 3.0])
    t = specific_exposure_rate({"t0": True, "t1": False}, trips, "race")
    assert t.row("Asian").rate == pytest.approx(40.0)


def test_rate_extremes():
    trips = make_trips(["Asian"] * 3, [1.0, 2.0, 3.0])
    assert specific_exposure_rate([False] * 3, trips, "race").row("Asian").rate == 0.0
    assert specific_exposure_rate([True] * 3, trips, "race").row("Asian").rate == 100.0


def test_empty_group_is_null():
    t = specific_exposure_rate([True], make_trips(["Asian"], [1.0]), "race")
    assert t.row("White/Caucasian").rate is None and t.row("White/Caucasian").n_trips == 0


def test_missing_result_join():
    with pytest.raises(ValueError):
        specific_exposure_rate({"zzz": True}, make_trips(["Asian"], [1.0]), "race")


def test_composition():
    trips = make_trips(["Asian", "Other"], [8.0, 2.0])
    t = exposure_composition([True, True], trips, "race")
    assert t.row("Asian").share_at_risk == pytest.approx(80.0)
    assert t.row("Other").share_at_risk == pytest.approx(20.0)
    assert all(r.share_safe is None for r in t.rows)


def test_single_group_composition():
    t = exposure_composition([True, False], make_trips(["Asian", "Asian"], [1.0, 4.0]), "race")
    assert t.row("Asian").share_at_risk == 100.0 and t.row("Asian").share_safe == 100.0


def test_suppression_floor():
    trips = make_trips(["Other"] * 3 + ["Female"] * 60, [1.0] * 63, "gender")
    t = specific_exposure_rate([True] * 63, trips, "gender", suppress={"gender": ("Other",)}, n_floor=50)
    assert t.row("Other").suppressed and not t.row("Female").suppressed


dims = st.sampled_from(sorted(DIMENSIONS))


@settings(max_examples=100, deadline=None)
@given(st.data(), st.integers(1, 60))
def test_conservation_and_composition(data, n):
    weights = data.draw(st.lists(st.floats(0.001, 100), min_size=n, max_size=n))
    at_risk = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    rows = [{d: data.draw(st.sampled_from(v)) for d, v in DIMENSIONS.items()} for _ in range(n)]
    trips = [TripRecord(f"t{i}", (0, 0), (0, 0), 0, dt.date(2019, 8, 5), w, Demographics(**r))
             for i, (w, r) in enumerate(zip(weights, rows))]
    total = math.fsum(weights)
    overall = None
    for dim in DIMENSIONS:
        t = specific_exposure_rate(at_risk, trips, dim)
        assert math.isclose(math.fsum(r.weight for r in t.rows), total, rel_tol=1e-6)
        assert math.isclose(math.fsum(r.weight_at_risk + (r.weight - r.weight_at_risk) for r in t.rows), total,
                            rel_tol=1e-6)
        for col in ("share_safe", "share_at_risk"):
            vals = [getattr(r, col) for r in t.rows if getattr(r, col) is not None]
            if vals:
                assert abs(math.fsum(vals) - 100.0) <= 0.01
        for r in t.rows:
            assert r.rate is None or 0.0 <= r.rate <= 100.0 + 1e-9
        if overall is not None:
            assert t.overall_rate == overall
        overall = t.overall_rate


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 50), st.booleans(), st.sampled_from(DIMENSIONS["age"])), min_size=1,
                max_size=30), st.floats(0.1, 1000))
def test_reweighting_neutrality(rows, c):
    w = np.array([r[0] for r in rows])
    flags = [r[1] for r in rows]
    groups = [r[2] for r in rows]
    a = risk_table(flags, w, groups, "age")
    b = risk_table(flags, w * c, groups, "age")
    for x, y in zip(a.rows, b.rows):
        for col in ("rate", "share_safe", "share_at_risk"):
            u, v = getattr(x, col), getattr(y, col)
            assert (u is None and v is None) or math.isclose(u, v, rel_tol=1e-9, abs_tol=1e-9)


def test_sweep_matrix_fraction():
    weights = [1.0] * 12
    flags = np.zeros((12, 2), dtype=bool)
    flags[0, 0] = True
    flags[:6, 1] = True
    m = sweep_matrix(flags, weights, [("baseline", 2019), ("SSP245", 2050)], expected=[("SSP585", 2100)])
    assert round(m[("baseline", 2019)], 2) == 8.33
    assert m[("SSP245", 2050)] == 50.0
    assert m[("SSP585", 2100)] is None


def test_sweep_matrix_order_independent():
    rng = np.random.default_rng(0)
    w = rng.uniform(0.1, 10, 500)
    flags = rng.random((500, 3)) < 0.3
    cells = ["a", "b", "c"]
    perm = rng.permutation(500)
    assert sweep_matrix(flags, w, cells) == sweep_matrix(flags[perm], w[perm], cells)


def test_weighted_rate_empty():
    assert weighted_rate([], []) is None


def test_segment_share():
    kinds = VULNERABLE_KINDS
    tw, wt = kinds.index(K.TRANSFER_WALK), kinds.index(K.WAIT)
    present = np.zeros((4, len(kinds)), dtype=bool)
    present[:, tw] = True
    present[:, wt] = True
    flags = np.zeros((4, 1, len(kinds)), dtype=bool)
    flags[:, 0, tw] = True
    flags[:2, 0, wt] = True
    out = segment_share(flags, present, [1.0] * 4, ["c"])
    assert out[(K.TRANSFER_WALK, "c")] == 100.0
    assert out[(K.WAIT, "c")] == 50.0
    assert out[(K.ACCESS_BIKE, "c")] is None
    assert all(k is not K.RIDE for k, _ in out)
