"""
One trip, second by second
==========================

Builds a two-line toy feed, plans a trip with one transfer, expands it to a
1 Hz activity profile and scores the profile against a hot afternoon.
"""

import datetime as dt
import tempfile

import numpy as np

from transitheat.exposure import MetTable, WorkRestSchedule, accumulate, segment_vulnerability
from transitheat.feed import FeedBundle, Route, Service, Stop, StopTime, Trip, build_network, load_feed, write_feed
from transitheat.geo import offset_point
from transitheat.router import TripQuery, plan_trip
from transitheat.thermal import WeatherSample
from transitheat.trajectory import expand

origin = (33.7490, -84.3880)
A = origin
B = offset_point(*A, north_m=3000)
C = offset_point(*B, east_m=150)
D = offset_point(*C, east_m=3500)

stops = [Stop(s, s, *p) for s, p in zip("ABCD", (A, B, C, D))]
trips, times = [], []
for k in range(12):
    t0 = 12 * 3600 + k * 900
    trips += [Trip(f"NS{k}", "NS", "WK"), Trip(f"EW{k}", "EW", "WK")]
    times += [StopTime(f"NS{k}", "A", t0, t0, 1), StopTime(f"NS{k}", "B", t0 + 420, t0 + 420, 2),
              StopTime(f"EW{k}", "C", t0 + 600, t0 + 600, 1), StopTime(f"EW{k}", "D", t0 + 1080, t0 + 1080, 2)]
bundle = FeedBundle(tuple(stops), (Route("NS", "NS", 3), Route("EW", "EW", 3)), tuple(trips), tuple(times),
                    (Service("WK", (1, 1, 1, 1, 1, 0, 0), dt.date(2019, 1, 1), dt.date(2019, 12, 31)),))

# round trip through GTFS text, as a real feed would arrive
feed_dir = tempfile.mkdtemp()
write_feed(bundle, feed_dir)
network = build_network(load_feed(feed_dir))

###############################################################################
# Plan from 300 m south of A to 200 m past D on a Monday afternoon.

query = TripQuery(offset_point(*A, north_m=-300), offset_point(*D, east_m=200),
                  depart_time=13 * 3600, service_date=dt.date(2019, 8, 5))
itinerary = plan_trip(network, query)
for seg in itinerary.segments:
    print(f"{seg.kind.value:14s} {seg.duration:5d} s  {seg.from_stop or '':>2s} -> {seg.to_stop or ''}")

###############################################################################
# Every second becomes one sample; the kinds partition the trip.

profile = expand(itinerary, "demo", query.service_date)
print(len(profile), "samples", {k.value: n for k, n in profile.counts().items()})


###############################################################################
# Score against a flat 97 F / 45 % afternoon.

def hot(t, lat, lon):
    return WeatherSample(97.0, 45.0, 3.0)


result = accumulate(profile, hot, MetTable.load(), WorkRestSchedule.load())
print(f"rest deficit {result.rest_deficit:.2f} min, at risk: {result.at_risk}")
print({k.value: v for k, v in segment_vulnerability(result, itinerary).items()})
print("peak running deficit", np.max(result.trace).round(2), "min")
