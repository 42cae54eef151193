"""Apparent temperature (NWS heat index and wind chill) and comfort bands.

Units are degrees Fahrenheit, percent relative humidity and miles per hour
throughout, which is what the NWS equations are written in.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np


class Branch(str, Enum):
    HEAT_INDEX = "HeatIndex"
    WIND_CHILL = "WindChill"
    AIR_TEMP = "AirTemp"


class Band(str, Enum):
    SAFE = "Safe"
    CAUTION = "Caution"
    EXTREME_CAUTION = "ExtremeCaution"
    DANGER = "Danger"
    EXTREME_DANGER = "ExtremeDanger"
    COLD_RISK = "ColdRisk"


@dataclass(frozen=True)
class WeatherSample:
    air_temp: float
    rel_humidity: float
    wind_speed: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rel_humidity <= 100.0:
            raise ValueError(f"relative humidity {self.rel_humidity} outside [0, 100]")
        if self.wind_speed < 0:
            raise ValueError(f"negative wind speed {self.wind_speed}")


@dataclass(frozen=True)
class ApparentTemp:
    value: float
    branch: Branch


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def steadman_simple(air_temp, rel_humidity):
    """NWS simple heat-index formula, used below the regression's range."""
    t = np.asarray(air_temp, dtype=float)
    rh = np.asarray(rel_humidity, dtype=float)
    return _scalar_or_array(0.5 * (t + 61.0 + (t - 68.0) * 1.2 + rh * 0.094))


def heat_index_applies(air_temp, rel_humidity):
    """True where the NWS procedure switches to the full regression.

    That happens when the simple formula, averaged with the air
    temperature, reaches 80 F.
    """
    t = np.asarray(air_temp, dtype=float)
    out = (steadman_simple(t, rel_humidity) + t) / 2.0 >= 80.0
    return bool(out) if np.ndim(out) == 0 else out


def heat_index(air_temp, rel_humidity):
    """NWS heat index in F (Rothfusz regression with the published adjustments).

    Accepts scalars or arrays.  Below the activation threshold the simple
    formula's value is returned.
    """
    t = np.asarray(air_temp, dtype=float)
    rh = np.asarray(rel_humidity, dtype=float)
    simple = 0.5 * (t + 61.0 + (t - 68.0) * 1.2 + rh * 0.094)

    t2 = t * t
    rh2 = rh * rh
    hi = (-42.379 + 2.04901523 * t + 10.14333127 * rh
          - 0.22475541 * t * rh - 6.83783e-3 * t2 - 5.481717e-2 * rh2
          + 1.22874e-3 * t2 * rh + 8.5282e-4 * t * rh2 - 1.99e-6 * t2 * rh2)

    dry = (rh < 13.0) & (t >= 80.0) & (t <= 112.0)
    dry_adj = ((13.0 - rh) / 4.0) * np.sqrt(np.clip(17.0 - np.abs(t - 95.0), 0.0, None) / 17.0)
    hi = np.where(dry, hi - dry_adj, hi)
    humid = (rh > 85.0) & (t >= 80.0) & (t <= 87.0)
    hi = np.where(humid, hi + ((rh - 85.0) / 10.0) * ((87.0 - t) / 5.0), hi)

    out = np.where((simple + t) / 2.0 >= 80.0, hi, simple)
    return _scalar_or_array(out)


def wind_chill_applies(air_temp, wind_speed):
    t = np.asarray(air_temp, dtype=float)
    v = np.asarray(wind_speed, dtype=float)
    out = (t <= 50.0) & (v > 3.0)
    return bool(out) if np.ndim(out) == 0 else out


def wind_chill(air_temp, wind_speed):
    """NWS (2001) wind chill in F; air temperature where the formula does not apply."""
    t = np.asarray(air_temp, dtype=float)
    v = np.asarray(wind_speed, dtype=float)
    vp = np.power(np.clip(v, 0.0, None), 0.16)
    wc = 35.74 + 0.6215 * t - 35.75 * vp + 0.4275 * t * vp
    return _scalar_or_array(np.where((t <= 50.0) & (v > 3.0), wc, t))


def apparent_temperature(sample: WeatherSample) -> ApparentTemp:
    if heat_index_applies(sample.air_temp, sample.rel_humidity):
        return ApparentTemp(heat_index(sample.air_temp, sample.rel_humidity), Branch.HEAT_INDEX)
    if wind_chill_applies(sample.air_temp, sample.wind_speed):
        return ApparentTemp(wind_chill(sample.air_temp, sample.wind_speed), Branch.WIND_CHILL)
    return ApparentTemp(float(sample.air_temp), Branch.AIR_TEMP)


@dataclass(frozen=True)
class ComfortConfig:
    """Lower edges (F) of Caution, Extreme Caution, Danger and Extreme Danger."""
    edges: tuple = (80.0, 90.0, 103.0, 125.0)
    cold_threshold: float = -18.0

    def __post_init__(self):
        if len(self.edges) != 4 or list(self.edges) != sorted(self.edges):
            raise ValueError("comfort band edges must be four ascending values")

    @classmethod
    def from_ini(cls, text: str) -> "ComfortConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        b = cp["bands"] if cp.has_section("bands") else {}
        default = cls()
        edges = tuple(float(b.get(k, d)) for k, d in zip(
            ("caution", "extreme_caution", "danger", "extreme_danger"), default.edges))
        cold = cp.getfloat("cold", "threshold", fallback=default.cold_threshold)
        return cls(edges, cold)

    @classmethod
    def load(cls, path=None) -> "ComfortConfig":
        if path is None:
            return cls.from_ini(resources.files("transitheat.data").joinpath("thermal.ini").read_text())
        with open(path) as fh:
            return cls.from_ini(fh.read())


_HOT_BANDS = (Band.SAFE, Band.CAUTION, Band.EXTREME_CAUTION, Band.DANGER, Band.EXTREME_DANGER)


def comfort_class(apparent: ApparentTemp, config: ComfortConfig = ComfortConfig()) -> Band:
    if apparent.branch is Branch.WIND_CHILL:
        return Band.COLD_RISK if apparent.value < config.cold_threshold else Band.SAFE
    i = int(np.searchsorted(np.asarray(config.edges), apparent.value, side="right"))
    return _HOT_BANDS[i]
