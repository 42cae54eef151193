"""Great-circle helpers shared by the feed, router and cohort code."""
import math

import numpy as np

EARTH_RADIUS_M = 6371008.8


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters. Works on scalars or numpy arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    if np.ndim(d) == 0:
        return float(d)
    return d


def travel_seconds(distance_m, speed_mps):
    """Whole seconds needed to cover ``distance_m`` at ``speed_mps``, rounded up.

    A 1e-9 s slack absorbs float noise so that e.g. 120 m at 1.2 m/s is 100 s,
    not 101 s.
    """
    return int(math.ceil(distance_m / speed_mps - 1e-9))


def unit_vectors(lat, lon):
    """Earth-centred unit vectors, used to index points in a KD-tree."""
    la = np.radians(np.asarray(lat, dtype=float))
    lo = np.radians(np.asarray(lon, dtype=float))
    return np.column_stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)])


def chord_for_distance(distance_m):
    """Unit-sphere chord length equivalent to a great-circle distance."""
    return 2.0 * math.sin(min(distance_m / EARTH_RADIUS_M, math.pi) / 2.0)


def offset_point(lat, lon, north_m=0.0, east_m=0.0):
    """Point displaced by small north/east offsets (spherical approximation)."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
    return lat + dlat, lon + dlon
