"""Wall-clock accounting for transform / train / test phases."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

PHASES = ("transform", "train", "test")


@dataclass(frozen=True)
class TimingRecord:
    approach: str
    phase: str
    wall_seconds: float
    n_items: int = 0
    year: int | None = None

    def __post_init__(self):
        if self.wall_seconds < 0:
            raise ValueError("negative wall_seconds")
        if self.n_items < 0:
            raise ValueError("negative n_items")


def time_phase(
    thunk: Callable[[], T],
    approach: str,
    phase: str,
    n_items: int = 0,
    year: int | None = None,
) -> tuple[T, TimingRecord]:
    """Run *thunk* under a monotonic clock; errors propagate with a partial record."""
    start = time.perf_counter()
    try:
        result = thunk()
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        exc.timing_record = TimingRecord(  # type: ignore[attr-defined]
            approach=approach, phase=phase, wall_seconds=elapsed, n_items=n_items, year=year
        )
        raise
    elapsed = time.perf_counter() - start
    return result, TimingRecord(
        approach=approach, phase=phase, wall_seconds=elapsed, n_items=n_items, year=year
    )


def timer_overhead(samples: int = 100) -> float:
    """Median wall time of timing a no-op, measured at startup."""
    times = []
    for _ in range(samples):
        _, rec = time_phase(lambda: None, approach="_overhead", phase="transform")
        times.append(rec.wall_seconds)
    times.sort()
    return times[len(times) // 2]


def efficiency_report(records: Sequence[TimingRecord]) -> list[dict]:
    """Aggregate per (approach, year, phase): total seconds, items, mean per item."""
    groups: dict[tuple, list[TimingRecord]] = {}
    for rec in records:
        groups.setdefault((rec.approach, rec.year, rec.phase), []).append(rec)
    rows = []
    for (approach, year, phase), recs in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1] if kv[0][1] is not None else -1, kv[0][2])
    ):
        total = sum(r.wall_seconds for r in recs)
        items = sum(r.n_items for r in recs)
        rows.append(
            {
                "approach": approach,
                "year": year,
                "phase": phase,
                "wall_seconds": total,
                "n_items": items,
                "seconds_per_item": total / items if items else 0.0,
            }
        )
    return rows


def write_timings_csv(records: Sequence[TimingRecord], path: str | Path) -> None:
    rows = efficiency_report(records)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["approach", "year", "phase", "wall_seconds", "n_items", "seconds_per_item"])
        for row in rows:
            writer.writerow(
                [
                    row["approach"],
                    "" if row["year"] is None else row["year"],
                    row["phase"],
                    f"{row['wall_seconds']:.6f}",
                    row["n_items"],
                    f"{row['seconds_per_item']:.9f}",
                ]
            )
