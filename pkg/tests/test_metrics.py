import dataclasses

import pytest

from cabasim.metrics import (CSV_COLUMNS, Category, CycleBreakdown, RunMetrics, attribute, csv_text,
                             record_issue_cycle, summary)


def sample(**kw):
    base = {f.name: 0 for f in dataclasses.fields(RunMetrics)}
    base.update(name="x", algorithm="BDI", bandwidth_scale=1.0, uncompressed_l2=False, ipc=0.5,
                bandwidth_utilization=0.25, compression_ratio=2.0, md_hit_rate=0.5, cycles=100,
                issue_slots=200, active=120, memory_stall=80, cycles_per_burst=2,
                dram_data_bursts=10, dram_md_bursts=2, dram_busy_cycles=24)
    base.update(kw)
    return RunMetrics(**base)


def test_attribution_priority():
    assert attribute({Category.COMPUTE, Category.MEMORY}) == Category.MEMORY
    assert attribute({Category.DATA_DEPENDENCE, Category.COMPUTE}) == Category.COMPUTE
    assert attribute(set()) == Category.IDLE


def test_record_issue_cycle():
    b = CycleBreakdown()
    record_issue_cycle(b, Category.ACTIVE, 3)
    record_issue_cycle(b, "Idle")
    assert (b.active, b.idle, b.total) == (3, 1, 4)
    assert b.get(Category.ACTIVE) == 3


def test_check_accepts_consistent_metrics():
    assert sample().check() == []


@pytest.mark.parametrize("kw,needle", [
    ({"active": 10}, "breakdown"),
    ({"dram_busy_cycles": 23}, "DRAM busy"),
    ({"md_hit_rate": 1.5}, "md_hit_rate"),
    ({"algorithm": "NONE"}, "compression ratio"),
    ({"triggers_fired": 1}, "conservation"),
])
def test_check_reports_inconsistency(kw, needle):
    assert any(needle in e for e in sample(**kw).check())


def test_csv_is_stable():
    text = csv_text([sample(), sample(name="y")])
    lines = text.splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 3
    assert text == csv_text([sample(), sample(name="y")])
    assert ",0.500000," in lines[1]


def test_summary_mentions_key_numbers():
    s = summary(sample())
    assert "IPC            0.5000" in s and "compression    2.0000" in s
