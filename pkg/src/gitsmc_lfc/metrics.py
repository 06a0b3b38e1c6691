"""Integral performance indices, transient metrics and controller comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

INDEX_NAMES = ("itae", "itse", "ise", "iae")
DEFAULT_BAND = 2e-4


@dataclass(frozen=True)
class IndexReport:
    itae: float
    itse: float
    ise: float
    iae: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in INDEX_NAMES}


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def indices_from_arrays(t, df, dp_tie) -> IndexReport:
    """Indices from ``(N,)`` times and ``(N, areas)`` deviations.

    ITAE/IAE integrate the area sum of ``|df| + |dP_tie|``; ITSE/ISE the area
    sum of ``df**2 + dP_tie**2``.  Trapezoidal rule on the given grid.
    """
    t = np.asarray(t, dtype=float)
    df = np.asarray(df, dtype=float).reshape(len(t), -1)
    dp = np.asarray(dp_tie, dtype=float).reshape(len(t), -1)
    if len(t) == 0:
        raise ValueError("empty trace")
    if len(t) == 1:
        return IndexReport(0.0, 0.0, 0.0, 0.0)
    e_abs = (np.abs(df) + np.abs(dp)).sum(axis=1)
    e_sq = (df ** 2 + dp ** 2).sum(axis=1)
    return IndexReport(itae=_trapezoid(t * e_abs, t), itse=_trapezoid(t * e_sq, t),
                       ise=_trapezoid(e_sq, t), iae=_trapezoid(e_abs, t))


def integral_indices(trace) -> IndexReport:
    return indices_from_arrays(trace.t, trace.df, trace.dp_tie)


@dataclass(frozen=True)
class EventMetrics:
    area: int
    event_time: float
    window_end: float
    overshoot: float         # max df in the window
    undershoot: float        # min df in the window
    peak: float              # max |df|
    settling_time: float     # from the event; window length when unsettled
    unsettled: bool
    final_abs: float         # |df| at the last sample before the next event


@dataclass(frozen=True)
class TransientReport:
    band: float
    events: tuple            # event times
    entries: tuple           # EventMetrics, area-major

    def get(self, area: int, event_time: float) -> EventMetrics:
        for e in self.entries:
            if e.area == area and math.isclose(e.event_time, event_time, abs_tol=1e-9):
                return e
        raise KeyError((area, event_time))


def _settling(t: np.ndarray, y: np.ndarray, band: float) -> tuple[float, bool]:
    """Last exit of |y| from the band, linearly interpolated, relative to t[0]."""
    out = np.flatnonzero(np.abs(y) > band)
    if out.size == 0:
        return 0.0, False
    i = int(out[-1])
    if i == len(y) - 1:
        return float(t[-1] - t[0]), True
    a, b = abs(y[i]), abs(y[i + 1])
    frac = (a - band) / (a - b) if a != b else 0.0
    return float(t[i] + frac * (t[i + 1] - t[i]) - t[0]), False


def transient_metrics(trace, events: Sequence[float] | None = None,
                      band: float = DEFAULT_BAND) -> TransientReport:
    """Per area and event window: extremes of df and settling time to ``band``.

    A window runs from an event to the next event (or the horizon).
    """
    t = trace.t
    events = sorted(trace.edges if events is None else events)
    if any(e < t[0] - 1e-9 or e > t[-1] + 1e-9 for e in events):
        raise ValueError("events must lie within the trace horizon")
    bounds = list(events) + [float(t[-1])]
    entries = []
    for area in range(trace.df.shape[1]):
        f = trace.df[:, area]
        for e0, e1 in zip(bounds[:-1], bounds[1:]):
            last = e1 == bounds[-1]
            mask = (t >= e0 - 1e-9) & ((t <= e1 + 1e-9) if last else (t < e1 - 1e-9))
            tw, fw = t[mask], f[mask]
            if tw.size == 0:
                continue
            ts, unsettled = _settling(tw, fw, band)
            entries.append(EventMetrics(area, float(e0), float(e1), float(fw.max()),
                                        float(fw.min()), float(np.abs(fw).max()), ts,
                                        unsettled, float(abs(fw[-1]))))
    return TransientReport(band, tuple(events), tuple(entries))


@dataclass(frozen=True)
class IndexComparison:
    name: str
    test: float
    baseline: float
    improvement_pct: float | None    # None when undefined

    @property
    def undefined(self) -> bool:
        return self.improvement_pct is None

    @property
    def ratio(self) -> float:
        if self.baseline == 0:
            return 1.0 if self.test == 0 else math.inf
        return self.test / self.baseline


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple

    def __getitem__(self, name: str) -> IndexComparison:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def improvement(test: float, baseline: float) -> float | None:
    """``(baseline - test) / baseline * 100``; None when the baseline is zero and test is not."""
    if baseline == 0:
        return 0.0 if test == 0 else None
    return (baseline - test) / baseline * 100.0


def compare_controllers(report_test: IndexReport, report_baseline: IndexReport) -> ComparisonReport:
    return ComparisonReport(tuple(
        IndexComparison(k, getattr(report_test, k), getattr(report_baseline, k),
                        improvement(getattr(report_test, k), getattr(report_baseline, k)))
        for k in INDEX_NAMES))
