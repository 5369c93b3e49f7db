import pytest

from amdbench.profiler import (
    TimingRecord,
    efficiency_report,
    time_phase,
    timer_overhead,
    write_timings_csv,
)


def test_time_noop_nonnegative():
    result, rec = time_phase(lambda: 42, approach="x", phase="train", n_items=3)
    assert result == 42
    assert rec.wall_seconds >= 0.0
    assert rec.n_items == 3


def test_nested_timers_inner_within_outer():
    def outer():
        _, inner_rec = time_phase(lambda: sum(range(1000)), approach="x", phase="test")
        return inner_rec

    inner_rec, outer_rec = time_phase(outer, approach="x", phase="train")
    assert inner_rec.wall_seconds <= outer_rec.wall_seconds


def test_failing_thunk_carries_record():
    def boom():
        raise RuntimeError("nope")

    with pytest.raises(RuntimeError) as err:
        time_phase(boom, approach="x", phase="transform")
    assert isinstance(err.value.timing_record, TimingRecord)
    assert err.value.timing_record.phase == "transform"


def test_timing_record_rejects_negative():
    with pytest.raises(ValueError):
        TimingRecord(approach="x", phase="train", wall_seconds=-1.0)


def test_efficiency_report_aggregates():
    records = [
        TimingRecord("a", "train", 1.0, n_items=10, year=2011),
        TimingRecord("a", "train", 2.0, n_items=10, year=2011),
        TimingRecord("a", "test", 0.5, n_items=5, year=2012),
    ]
    rows = efficiency_report(records)
    assert len(rows) == 2
    train_row = next(r for r in rows if r["phase"] == "train")
    assert train_row["wall_seconds"] == pytest.approx(3.0)
    assert train_row["n_items"] == 20
    assert train_row["seconds_per_item"] == pytest.approx(0.15)


def test_efficiency_report_empty():
    assert efficiency_report([]) == []


def test_timings_csv(tmp_path):
    records = [TimingRecord("a", "train", 1.25, n_items=4, year=2011)]
    path = tmp_path / "timings.csv"
    write_timings_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "approach,year,phase,wall_seconds,n_items,seconds_per_item"
    assert lines[1].startswith("a,2011,train,1.250000,4,")


def test_timer_overhead_small():
    assert 0.0 <= timer_overhead(samples=20) < 0.01
