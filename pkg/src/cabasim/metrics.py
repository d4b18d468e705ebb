"""Run metrics: issue-slot breakdown, IPC, bandwidth and compression ratio."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import asdict, dataclass, fields


class Category(str, enum.Enum):
    ACTIVE = "Active"
    MEMORY = "Memory"
    COMPUTE = "Compute"
    DATA_DEPENDENCE = "DataDependence"
    IDLE = "Idle"


# stall attribution when several causes coexist
STALL_PRIORITY = (Category.MEMORY, Category.COMPUTE, Category.DATA_DEPENDENCE)


@dataclass
class CycleBreakdown:
    compute_stall: int = 0
    memory_stall: int = 0
    data_dependence_stall: int = 0
    idle: int = 0
    active: int = 0

    _FIELD = {
        Category.COMPUTE: "compute_stall",
        Category.MEMORY: "memory_stall",
        Category.DATA_DEPENDENCE: "data_dependence_stall",
        Category.IDLE: "idle",
        Category.ACTIVE: "active",
    }

    @property
    def total(self) -> int:
        return self.compute_stall + self.memory_stall + self.data_dependence_stall + self.idle + self.active

    def get(self, category: Category) -> int:
        return getattr(self, self._FIELD[Category(category)])


def record_issue_cycle(breakdown: CycleBreakdown, category: Category, slots: int = 1) -> None:
    name = CycleBreakdown._FIELD[Category(category)]
    setattr(breakdown, name, getattr(breakdown, name) + slots)


def attribute(reasons) -> Category:
    """Single category for an empty issue slot given every observed stall reason."""
    for cat in STALL_PRIORITY:
        if cat in reasons:
            return cat
    return Category.IDLE


@dataclass(frozen=True)
class RunMetrics:
    name: str
    algorithm: str
    bandwidth_scale: float
    uncompressed_l2: bool
    seed: int
    cycles: int
    parent_instructions: int
    ipc: float
    bandwidth_utilization: float
    compression_ratio: float
    md_hit_rate: float
    md_hits: int
    md_misses: int
    dram_data_bursts: int
    dram_md_bursts: int
    dram_raw_bursts: int
    dram_busy_cycles: int
    cycles_per_burst: int
    assist_instructions_issued: int
    triggers_fired: int
    triggers_completed: int
    triggers_killed: int
    triggers_rejected: int
    live_in_moves: int
    l1_hits: int
    l1_misses: int
    l2_hits: int
    l2_misses: int
    store_retries: int
    writes_compressed: int
    writes_raw: int
    active: int
    memory_stall: int
    compute_stall: int
    data_dependence_stall: int
    idle: int
    issue_slots: int

    @property
    def breakdown(self) -> CycleBreakdown:
        return CycleBreakdown(self.compute_stall, self.memory_stall, self.data_dependence_stall,
                              self.idle, self.active)

    def check(self) -> list[str]:
        """Internal-consistency violations (empty when sound)."""
        errs = []
        if self.breakdown.total != self.issue_slots:
            errs.append(f"breakdown sums to {self.breakdown.total}, expected {self.issue_slots} slots")
        if self.ipc < 0:
            errs.append("negative IPC")
        for name in ("bandwidth_utilization", "md_hit_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                errs.append(f"{name}={v} outside [0, 1]")
        if self.dram_busy_cycles != (self.dram_data_bursts + self.dram_md_bursts) * self.cycles_per_burst:
            errs.append("DRAM busy cycles disagree with burst count")
        if self.algorithm == "NONE" and self.compression_ratio != 1.0:
            errs.append("compression ratio must be 1 without compression")
        if self.triggers_fired != self.triggers_completed + self.triggers_killed + self.triggers_rejected:
            errs.append("trigger conservation violated")
        return errs


CSV_COLUMNS = tuple(f.name for f in fields(RunMetrics))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def csv_text(rows) -> str:
    """CSV with a header line and one row per run, byte-stable for equal inputs."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for m in rows:
        d = asdict(m)
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(rows))


def summary(m: RunMetrics) -> str:
    slots = max(m.issue_slots, 1)
    pct = lambda n: f"{100.0 * n / slots:5.1f}%"  # noqa: E731
    return "\n".join([
        f"run            {m.name}",
        f"algorithm      {m.algorithm}  bandwidth x{m.bandwidth_scale:g}"
        + ("  uncompressed-L2" if m.uncompressed_l2 else ""),
        f"cycles         {m.cycles}",
        f"IPC            {m.ipc:.4f}  ({m.parent_instructions} parent instructions)",
        f"bandwidth util {m.bandwidth_utilization:.4f}",
        f"compression    {m.compression_ratio:.4f}  ({m.dram_raw_bursts} raw / {m.dram_data_bursts} actual bursts)",
        f"MD cache       hit rate {m.md_hit_rate:.4f}  ({m.md_misses} misses)",
        f"assist         {m.assist_instructions_issued} instructions; triggers fired {m.triggers_fired}, "
        f"completed {m.triggers_completed}, killed {m.triggers_killed}, rejected {m.triggers_rejected}",
        f"issue slots    active {pct(m.active)}  memory {pct(m.memory_stall)}  compute {pct(m.compute_stall)}  "
        f"data-dep {pct(m.data_dependence_stall)}  idle {pct(m.idle)}",
    ])
