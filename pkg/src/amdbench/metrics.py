"""Classification metrics and the time-decay area-under-time aggregate.

0/0 metric cells evaluate to 0.0 and are flagged, never silently NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

METRIC_NAMES = ("f1", "accuracy", "tpr", "fpr")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionCounts:
    """Standard confusion counts with malicious (1) as the positive class."""
    if len(labels) != len(predictions):
        raise ValueError(f"length mismatch: {len(labels)} labels vs {len(predictions)} predictions")
    tp = fp = tn = fn = 0
    for y, p in zip(labels, predictions):
        if y not in (0, 1) or p not in (0, 1):
            raise ValueError("labels and predictions must be binary (0/1)")
        if y == 1 and p == 1:
            tp += 1
        elif y == 0 and p == 1:
            fp += 1
        elif y == 0 and p == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def f1(c: ConfusionCounts) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / denom if denom else 0.0


def accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total if c.total else 0.0


def tpr(c: ConfusionCounts) -> float:
    denom = c.tp + c.fn
    return c.tp / denom if denom else 0.0


def fpr(c: ConfusionCounts) -> float:
    denom = c.fp + c.tn
    return c.fp / denom if denom else 0.0


_METRIC_FNS = {"f1": f1, "accuracy": accuracy, "tpr": tpr, "fpr": fpr}


def metric(name: str, c: ConfusionCounts) -> float:
    return _METRIC_FNS[name](c)


def metric_undefined(name: str, c: ConfusionCounts) -> bool:
    """True when the metric's denominator is zero (0/0 reported as 0, flagged)."""
    if name == "f1":
        return (2 * c.tp + c.fp + c.fn) == 0
    if name == "accuracy":
        return c.total == 0
    if name == "tpr":
        return (c.tp + c.fn) == 0
    if name == "fpr":
        return (c.fp + c.tn) == 0
    raise KeyError(name)


# ---------------------------------------------------------------------------
# Area Under Time


@dataclass(frozen=True)
class MetricSeries:
    """Metric values aligned to evolution periods; index 0 is the base period."""

    name: str
    values: tuple[float, ...]
    missing: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.missing and len(self.missing) != len(self.values):
            raise ValueError("missing mask length mismatch")

    def defined_values(self) -> list[float]:
        if not self.missing:
            return list(self.values)
        return [v for v, m in zip(self.values, self.missing) if not m]


def aut(values: Sequence[float]) -> float:
    """Trapezoidal average of a metric over N periods: needs N >= 2 points."""
    n = len(values)
    if n < 2:
        raise ValueError("aut requires at least 2 periods")
    total = sum((values[k + 1] + values[k]) / 2.0 for k in range(n - 1))
    return total / (n - 1)


def aut_series(series: MetricSeries, n_periods: int) -> float:
    """AUT over the first 1 + n_periods points, skipping flagged-missing values.

    Missing points are excluded and the trapezoid average renormalized over
    the surviving consecutive pairs.
    """
    values = series.values[: n_periods + 1]
    missing = series.missing[: n_periods + 1] if series.missing else (False,) * len(values)
    surviving = [v for v, m in zip(values, missing) if not m]
    if len(surviving) < 2:
        raise ValueError("not enough defined periods for aut")
    return aut(surviving)


def evolution_series(
    name: str,
    labels_by_period: Sequence[Sequence[int]],
    predictions_by_period: Sequence[Sequence[int]],
) -> MetricSeries:
    """Per-period metric series; empty periods are flagged missing."""
    if len(labels_by_period) != len(predictions_by_period):
        raise ValueError("period count mismatch")
    values = []
    missing = []
    for y, p in zip(labels_by_period, predictions_by_period):
        c = confusion(y, p)
        undefined = metric_undefined(name, c) or c.total == 0
        values.append(metric(name, c))
        missing.append(undefined)
    return MetricSeries(name=name, values=tuple(values), missing=tuple(missing))
