"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 internal error.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys

from .errors import InputError
from .thermal import WeatherSample, apparent_temperature, comfort_class, heat_index, wind_chill


def _latlon(text):
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lat,lon, got {text!r}") from None


def _cmd_simulate(args):
    from .sweep import RunConfig, run_sweep
    if args.validate:
        if not args.gtfs:
            raise InputError("--validate needs --gtfs")
        return _cmd_validate(args)
    overrides = {
        "gtfs": args.gtfs, "baseline": args.baseline, "deltas": args.deltas, "survey": args.survey,
        "synth": args.synthesize, "seed": args.seed, "output": args.out, "workers": args.workers,
        "scenarios": args.scenarios, "years": args.years, "airport": args.airport,
        "dump_profiles": True if args.dump_profiles else None,
    }
    if args.config:
        cfg = RunConfig.from_file(args.config, **overrides)
    else:
        cfg = RunConfig.from_mapping({}, **overrides)
    art = run_sweep(cfg)
    print(f"wrote {cfg.output}: {len(art.passes)} exposure passes, {len(art.trips)} trips", file=sys.stderr)
    return 0


def _cmd_plan(args):
    from .feed import build_network, load_feed
    from .feed import parse_gtfs_time
    from .router import NoPath, RouterConfig, TripQuery, plan_trip
    net = build_network(load_feed(args.gtfs), args.max_footpath)
    try:
        q = TripQuery(args.origin, args.destination, parse_gtfs_time(args.depart),
                      dt.date.fromisoformat(args.date), args.access, args.max_transfers, args.max_access)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        itin = plan_trip(net, q, RouterConfig())
    except NoPath as exc:
        print(json.dumps({"no_path": exc.reason}))
        return 1
    print(json.dumps(itin.to_dict(), indent=2))
    return 0


def _cmd_validate(args):
    from .feed import validate_feed
    rep = validate_feed(args.gtfs)
    print(json.dumps(rep, indent=2))
    return 0 if rep["ok"] else 1


def _sample(args):
    try:
        return WeatherSample(args.temp, args.rh, args.wind)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _cmd_hi(args):
    s = _sample(args)
    a = apparent_temperature(s)
    print(json.dumps({"heat_index_f": round(heat_index(args.temp, args.rh), 2),
                      "apparent_f": round(a.value, 2), "branch": a.branch.value,
                      "band": comfort_class(a).value}))
    return 0


def _cmd_wc(args):
    s = _sample(args)
    a = apparent_temperature(s)
    print(json.dumps({"wind_chill_f": round(wind_chill(args.temp, args.wind), 2),
                      "apparent_f": round(a.value, 2), "branch": a.branch.value,
                      "band": comfort_class(a).value}))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="transitheat", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the full (year, scenario) sweep")
    s.add_argument("--config")
    s.add_argument("--gtfs")
    s.add_argument("--baseline")
    s.add_argument("--deltas")
    s.add_argument("--scenarios", help="comma list, e.g. SSP245,SSP370,SSP585")
    s.add_argument("--years", help="range, e.g. 2019:2100")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--survey")
    g.add_argument("--synthesize", metavar="CFG")
    s.add_argument("--seed", type=int)
    s.add_argument("--airport")
    s.add_argument("--out")
    s.add_argument("--workers", type=int)
    s.add_argument("--dump-profiles", action="store_true")
    s.add_argument("--validate", action="store_true", help="only validate --gtfs and print the JSON report")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("plan", help="plan one trip and print it as JSON")
    s.add_argument("--gtfs", required=True)
    s.add_argument("--from", dest="origin", type=_latlon, required=True)
    s.add_argument("--to", dest="destination", type=_latlon, required=True)
    s.add_argument("--depart", required=True, help="HH:MM:SS")
    s.add_argument("--date", required=True, help="YYYY-MM-DD")
    s.add_argument("--access", choices=("walk", "bike", "micromobility"), default="walk")
    s.add_argument("--max-transfers", type=int, default=3)
    s.add_argument("--max-access", type=float, default=800.0)
    s.add_argument("--max-footpath", type=float, default=400.0)
    s.set_defaults(func=_cmd_plan)

    s = sub.add_parser("validate", help="validate a GTFS feed, JSON report on stdout")
    s.add_argument("--gtfs", required=True)
    s.set_defaults(func=_cmd_validate)

    for name, fn, extra in (("hi", _cmd_hi, "rh"), ("wc", _cmd_wc, "wind")):
        s = sub.add_parser(name, help="evaluate one apparent temperature")
        s.add_argument("temp", type=float, help="air temperature, F")
        if extra == "rh":
            s.add_argument("rh", type=float, help="relative humidity, %%")
            s.add_argument("--wind", type=float, default=0.0)
        else:
            s.add_argument("wind", type=float, help="wind speed, mph")
            s.add_argument("--rh", type=float, default=50.0)
        s.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "simulate" else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
