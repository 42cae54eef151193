"""Weighted heat-risk rates by demographic group, climate pass and segment kind.

All shares are weighted by the trip expansion weights.  Sums use
:func:`math.fsum`, which is exactly rounded and therefore independent of
summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cohort import DIMENSIONS
from .exposure import VULNERABLE_KINDS


@dataclass(frozen=True)
class RiskRow:
    group: str
    n_trips: int
    weight: float
    weight_at_risk: float
    rate: Optional[float]             # % of the group's weighted trips at risk
    share_safe: Optional[float]       # group's % of all weighted safe trips
    share_at_risk: Optional[float]    # group's % of all weighted at-risk trips
    suppressed: bool = False


@dataclass(frozen=True)
class RiskTable:
    dimension: str
    rows: tuple
    total_weight: float
    total_at_risk: float

    @property
    def overall_rate(self) -> Optional[float]:
        return None if self.total_weight == 0 else 100.0 * self.total_at_risk / self.total_weight

    def row(self, group: str) -> RiskRow:
        for r in self.rows:
            if r.group == group:
                return r
        raise KeyError(group)


def _at_risk_flag(r):
    return bool(r.at_risk) if hasattr(r, "at_risk") else bool(r)


def _join(results, trips):
    if isinstance(results, dict):
        try:
            return [_at_risk_flag(results[t.trip_id]) for t in trips]
        except KeyError as exc:
            raise ValueError(f"no exposure result for trip {exc.args[0]!r}") from None
    flags = [_at_risk_flag(r) for r in results]
    if len(flags) != len(trips):
        raise ValueError("results and trips differ in length")
    return flags


def risk_table(at_risk, weights, groups, dimension: str, order=None,
               suppress: Optional[dict] = None, n_floor: int = 50) -> RiskTable:
    """Core fold behind both the specific rate and the composition views.

    ``suppress`` maps dimension -> groups that are flagged ``suppressed``
    when they hold fewer than ``n_floor`` records.
    """
    at_risk = np.asarray(at_risk, dtype=bool)
    weights = np.asarray(weights, dtype=float)
    groups = list(groups)
    order = list(order if order is not None else DIMENSIONS.get(dimension, sorted(set(groups))))
    for g in sorted(set(groups) - set(order)):
        order.append(g)
    total = math.fsum(weights)
    total_risk = math.fsum(weights[at_risk])
    total_safe = math.fsum(weights[~at_risk])
    garr = np.asarray(groups, dtype=object)
    hidden = (suppress or {}).get(dimension, ())
    rows = []
    for g in order:
        m = garr == g if len(garr) else np.zeros(0, dtype=bool)
        w = math.fsum(weights[m])
        wr = math.fsum(weights[m & at_risk])
        ws = math.fsum(weights[m & ~at_risk])
        n = int(m.sum())
        rows.append(RiskRow(
            group=g, n_trips=n, weight=w, weight_at_risk=wr,
            rate=None if n == 0 else 100.0 * wr / w,
            share_safe=None if total_safe == 0 else 100.0 * ws / total_safe,
            share_at_risk=None if total_risk == 0 else 100.0 * wr / total_risk,
            suppressed=g in hidden and n < n_floor,
        ))
    return RiskTable(dimension, tuple(rows), total, total_risk)


def specific_exposure_rate(results, trips, dimension: str, **kw) -> RiskTable:
    """Per group: weighted at-risk trips / weighted trips x 100."""
    trips = list(trips)
    return risk_table(_join(results, trips), [t.weight for t in trips],
                      [t.demographics.get(dimension) for t in trips], dimension, **kw)


def exposure_composition(results, trips, dimension: str, **kw) -> RiskTable:
    """Each group's share of the weighted safe and at-risk strata.

    Same table as :func:`specific_exposure_rate`; read ``share_safe`` and
    ``share_at_risk``.
    """
    return specific_exposure_rate(results, trips, dimension, **kw)


def weighted_rate(at_risk, weights) -> Optional[float]:
    weights = np.asarray(weights, dtype=float)
    total = math.fsum(weights)
    if total == 0:
        return None
    return 100.0 * math.fsum(weights[np.asarray(at_risk, dtype=bool)]) / total


def sweep_matrix(at_risk, weights, cells, expected=None) -> dict:
    """``{cell: % of weighted trips at risk}`` for an ``(n_trips, n_cells)`` flag matrix.

    Cells listed in ``expected`` but absent from ``cells`` map to ``None``.
    """
    at_risk = np.asarray(at_risk, dtype=bool).reshape(len(weights), len(cells))
    out = {c: weighted_rate(at_risk[:, j], weights) for j, c in enumerate(cells)}
    for c in expected or ():
        out.setdefault(c, None)
    return out


def segment_share(flags, present, weights, cells, kinds=VULNERABLE_KINDS) -> dict:
    """``{(kind, cell): %}`` of weighted trips containing ``kind`` whose ``kind`` legs were flagged.

    ``flags`` is ``(n_trips, n_cells, n_kinds)``; ``present`` is
    ``(n_trips, n_kinds)``.  Kinds absent from the cohort map to ``None``.
    """
    weights = np.asarray(weights, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    present = np.asarray(present, dtype=bool)
    out = {}
    for k, kind in enumerate(kinds):
        has = present[:, k]
        denom = math.fsum(weights[has])
        for j, c in enumerate(cells):
            out[(kind, c)] = None if denom == 0 else 100.0 * math.fsum(weights[has & flags[:, j, k]]) / denom
    return out
