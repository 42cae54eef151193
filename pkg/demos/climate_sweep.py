"""
A small climate sweep
=====================

Writes a toy feed, a summer weather archive and linear delta ramps to a
scratch directory, synthesizes a cohort and runs the year x scenario sweep.
"""

import csv
import datetime as dt
import json
import math
import tempfile
from pathlib import Path

from transitheat.feed import FeedBundle, Route, Service, Stop, StopTime, Trip, write_feed
from transitheat.geo import offset_point
from transitheat.sweep import RunConfig, run_sweep

work = Path(tempfile.mkdtemp())
center = (33.7490, -84.3880)

###############################################################################
# Four lines on a 5 x 5 lattice, every 10 minutes from 05:00 to 22:00.

n, spacing = 5, 900.0
stops = [Stop(f"S{i}{j}", f"S{i}{j}", *offset_point(*center, north_m=i * spacing, east_m=j * spacing))
         for i in range(n) for j in range(n)]
lines = {"E1": [f"S1{j}" for j in range(n)], "E3": [f"S3{j}" for j in range(n)],
         "N1": [f"S{i}1" for i in range(n)], "N3": [f"S{i}3" for i in range(n)]}
lines.update({k[0].translate(str.maketrans("EN", "WS")) + k[1]: v[::-1] for k, v in list(lines.items())})
served = {s for seq in lines.values() for s in seq}
stops = [s for s in stops if s.stop_id in served]
trips, times = [], []
for route, seq in lines.items():
    for t0 in range(5 * 3600, 22 * 3600, 600):
        tid = f"{route}-{t0}"
        trips.append(Trip(tid, route, "WK"))
        times += [StopTime(tid, s, t0 + 110 * k, t0 + 110 * k, k + 1) for k, s in enumerate(seq)]
write_feed(FeedBundle(tuple(stops), tuple(Route(r, r, 3) for r in lines), tuple(trips), tuple(times),
                      (Service("WK", (1, 1, 1, 1, 1, 0, 0), dt.date(2019, 1, 1), dt.date(2019, 12, 31)),)),
           work / "gtfs")

###############################################################################
# 46 summer days peaking mid-afternoon, with a slow day-to-day swing.

with open(work / "weather.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["timestamp", "temp_f", "rh_pct", "wind_mph"])
    start = dt.datetime(2019, 8, 1)
    for h in range(46 * 24):
        day = h // 24
        temp = 82 + 4 * math.sin(day / 7.3) + 11 * math.cos((h % 24 - 15) / 24 * 2 * math.pi)
        w.writerow([(start + dt.timedelta(hours=h)).isoformat(), round(temp, 1), 50, 4])

with open(work / "deltas.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["scenario", "year", "delta_f"])
    for scen, per_year in (("SSP245", 0.04), ("SSP370", 0.07), ("SSP585", 0.10)):
        for year in range(2019, 2101):
            w.writerow([scen, year, round((year - 2019) * per_year, 3)])

(work / "synth.json").write_text(json.dumps({"n": 300, "seed": 1}))

###############################################################################
# Run every tenth year and print the matrix.

cfg = RunConfig.from_mapping({"gtfs": work / "gtfs", "baseline": work / "weather.csv",
                              "deltas": work / "deltas.csv", "synth": work / "synth.json",
                              "output": work / "out", "years": "2019:2100", "seed": 1})
art = run_sweep(cfg)
print((work / "out" / "summary.txt").read_text())
m = art.matrix()
print("year   " + "  ".join(cfg.scenarios))
for year in range(2020, 2101, 10):
    print(year, "  ".join(f"{m[(s, year)]:6.2f}" for s in cfg.scenarios))
print("reports in", work / "out")
