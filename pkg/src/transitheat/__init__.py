"""Heat exposure and heat-risk simulation for transit riders under climate scenarios."""

__version__ = "0.1.0"

from .climate import load_baseline, load_deltas, project, weather_at
from .cohort import filter_airport, filter_window, load_trips, synthesize
from .equity import exposure_composition, segment_share, specific_exposure_rate, sweep_matrix
from .exposure import accumulate, permissible_work, segment_vulnerability, workload_of
from .feed import active_trips, build_network, load_feed
from .router import direct_walk, plan_trip
from .thermal import apparent_temperature, comfort_class, heat_index, wind_chill
from .sweep import RunConfig, run_sweep
from .trajectory import expand

__all__ = [
    "load_baseline", "load_deltas", "project", "weather_at",
    "filter_airport", "filter_window", "load_trips", "synthesize",
    "exposure_composition", "segment_share", "specific_exposure_rate", "sweep_matrix",
    "accumulate", "permissible_work", "segment_vulnerability", "workload_of",
    "active_trips", "build_network", "load_feed",
    "direct_walk", "plan_trip",
    "RunConfig", "run_sweep",
    "apparent_temperature", "comfort_class", "heat_index", "wind_chill",
    "expand",
]
