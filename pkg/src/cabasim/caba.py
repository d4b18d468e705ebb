"""Assist Warp Controller: trigger table, AWT, AWB partitions, throttling."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .codec import Algorithm
from .isa import Op, Priority, Subroutine, SubroutineLibrary
from .simt import AssistMemory, LaneState


class TriggerKind(str, enum.Enum):
    LOAD_COMPRESSED_FILL = "LoadCompressedFill"
    STORE_ELIGIBLE = "StoreEligible"
    CUSTOM = "Custom"


class RejectReason(str, enum.Enum):
    ALREADY_ACTIVE = "AlreadyActive"
    AWT_FULL = "AwtFull"
    NO_HANDLER = "NoHandler"


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason

    def __bool__(self) -> bool:
        return False


@dataclass
class TriggerEvent:
    """An architectural event that may start an assist warp.

    ``data`` is what the subroutine reads (the compressed image for a fill,
    the raw line for a store) and ``live_in_values`` the parent register
    contents named by ``live_in_regs`` at trigger time.
    """

    kind: TriggerKind
    parent_warp_id: int
    algorithm: Algorithm | None = None
    encoding: str | None = None
    line_addr: int = 0
    data: bytes = b""
    line_size: int = 128
    live_in_regs: tuple[int, ...] = (0,)
    live_in_values: tuple[int, ...] = ()
    on_done: Callable | None = None
    on_kill: Callable | None = None
    tag: str = ""


@dataclass(eq=False)
class AwtEntry:
    sr_id: int
    sub: Subroutine
    parent_warp_id: int
    priority: Priority
    active_mask: int
    live_in_regs: tuple[int, ...]
    live_out_regs: tuple[int, ...]
    lanes: LaneState
    mem: AssistMemory
    on_done: Callable | None = None
    on_kill: Callable | None = None
    inst_id: int = 0
    decode_blocked: bool = False   # waiting for a decoded branch to resolve
    exit_decoded: bool = False
    live: bool = True
    started: int = 0
    last_progress: int = 0
    issued: int = 0
    pending: dict = field(default_factory=dict)  # register -> ready cycle (None while in memory)

    @property
    def kind(self) -> str:
        return self.sub.direction.value


def throttle_decision(utilization: float, threshold: float = 0.9) -> bool:
    """Low-priority deployment is allowed while functional units are below ``threshold``."""
    if not 0.0 <= utilization <= 1.0:
        raise ValueError(f"utilization {utilization} outside [0, 1]")
    return utilization < threshold


@dataclass
class ThrottleState:
    """Functional-unit utilisation sampled over fixed windows.

    The decision only changes at window boundaries, which gives the
    hysteresis: a burst shorter than one window cannot flip it twice.
    """

    threshold: float = 0.9
    window: int = 128
    low_priority_timeout: int = 10_000
    fu_utilization: float = 0.0
    deploy_enabled: bool = True
    window_start: int = 0
    busy: int = 0

    def record_busy(self, unit_cycles: int) -> None:
        self.busy += unit_cycles

    def advance(self, cycle: int, units: int) -> None:
        """Close every window that ended at or before ``cycle``."""
        while cycle >= self.window_start + self.window:
            cap = self.window * max(units, 1)
            self.fu_utilization = min(1.0, self.busy / cap)
            self.busy = max(0, self.busy - cap)
            self.deploy_enabled = throttle_decision(self.fu_utilization, self.threshold)
            self.window_start += self.window

    def next_boundary(self) -> int:
        return self.window_start + self.window


@dataclass
class AwcCounters:
    fired: int = 0
    completed: int = 0
    killed: int = 0
    rejected: int = 0
    rejected_by: dict = field(default_factory=lambda: {r.value: 0 for r in RejectReason})
    killed_by: dict = field(default_factory=dict)
    live_in_moves: int = 0
    live_out_moves: int = 0
    decoded: int = 0


class AssistWarpController:
    """Tracks live assist warps and feeds their instructions to the issue stage."""

    def __init__(self, library: SubroutineLibrary, capacity: int = 48, decode_per_cycle: int = 1,
                 ib_entries: int = 2, low_partition: int = 2, throttle: ThrottleState | None = None):
        self.library = library
        self.capacity = capacity
        self.decode_per_cycle = decode_per_cycle
        self.ib_entries = ib_entries
        self.low_partition = low_partition
        self.throttle = throttle or ThrottleState()
        self.entries: list[AwtEntry] = []
        self.high_ib: dict[int, deque] = {}
        self.low_ib: deque = deque()
        self._rr = {Priority.HIGH: 0, Priority.LOW: 0}
        self.counters = AwcCounters()
        self.table = {
            TriggerKind.LOAD_COMPRESSED_FILL: lambda ev: self.library.decompressor(ev.algorithm, ev.encoding),
            TriggerKind.STORE_ELIGIBLE: lambda ev: self.library.compressor(ev.algorithm),
        }

    # ------------------------------------------------------------ triggering

    def find(self, parent: int, sr_id: int) -> AwtEntry | None:
        for e in self.entries:
            if e.parent_warp_id == parent and e.sr_id == sr_id:
                return e
        return None

    def trigger(self, event: TriggerEvent, cycle: int = 0) -> AwtEntry | Rejected:
        self.counters.fired += 1
        handler = self.table.get(event.kind)
        if handler is None:
            return self._reject(RejectReason.NO_HANDLER)
        sub = handler(event)
        if self.find(event.parent_warp_id, sub.sr_id) is not None:
            return self._reject(RejectReason.ALREADY_ACTIVE)
        if len(self.entries) >= self.capacity:
            return self._reject(RejectReason.AWT_FULL)
        values = event.live_in_values or (event.line_addr,) * len(sub.live_in)
        out = event.line_size if sub.priority == Priority.HIGH else 2 * event.line_size
        entry = AwtEntry(
            sr_id=sub.sr_id, sub=sub, parent_warp_id=event.parent_warp_id, priority=sub.priority,
            active_mask=sub.static_mask, live_in_regs=tuple(event.live_in_regs[:len(sub.live_in)]),
            live_out_regs=sub.live_out,
            lanes=LaneState(sub.register_requirement, sub.static_mask, tuple(values)),
            mem=AssistMemory(event.data, out, event.line_addr),
            on_done=event.on_done, on_kill=event.on_kill, started=cycle, last_progress=cycle)
        self.entries.append(entry)
        if sub.priority == Priority.HIGH:
            self.high_ib.setdefault(entry.parent_warp_id, deque())
        return entry

    def _reject(self, reason: RejectReason) -> Rejected:
        self.counters.rejected += 1
        self.counters.rejected_by[reason.value] += 1
        return Rejected(reason)

    # ------------------------------------------------------------ deployment

    def _can_deploy(self, e: AwtEntry) -> bool:
        if not e.live or e.decode_blocked or e.exit_decoded or e.inst_id >= len(e.sub.ops):
            return False
        if e.priority == Priority.HIGH:
            return len(self.high_ib[e.parent_warp_id]) < self.ib_entries
        return self.throttle.deploy_enabled and len(self.low_ib) < self.low_partition

    def deploy_cycle(self, cycle: int = 0) -> int:
        """Decode up to ``decode_per_cycle`` instructions, round-robin within each priority, High first."""
        decoded = 0
        while decoded < self.decode_per_cycle:
            entry = self._next(Priority.HIGH) or self._next(Priority.LOW)
            if entry is None:
                break
            self._decode(entry)
            decoded += 1
        self.counters.decoded += decoded
        return decoded

    def _next(self, prio: Priority) -> AwtEntry | None:
        cands = [e for e in self.entries if e.priority == prio]
        if not cands:
            return None
        start = self._rr[prio] % len(cands)
        for k in range(len(cands)):
            e = cands[(start + k) % len(cands)]
            if self._can_deploy(e):
                self._rr[prio] = (start + k + 1) % len(cands)
                return e
        return None

    def _decode(self, e: AwtEntry) -> None:
        idx = e.inst_id
        op = e.sub.ops[idx]
        if e.priority == Priority.HIGH:
            self.high_ib[e.parent_warp_id].append((e, idx))
        else:
            self.low_ib.append((e, idx))
        if op.opcode == Op.BRA_P:
            e.decode_blocked = True
        elif op.opcode == Op.EXIT:
            e.exit_decoded = True
        else:
            e.inst_id = idx + 1

    def resolve_branch(self, e: AwtEntry, next_pc: int) -> None:
        e.inst_id = next_pc
        e.decode_blocked = False

    def high_head(self, warp: int):
        q = self.high_ib.get(warp)
        return q[0] if q else None

    def has_live_high(self, warp: int) -> bool:
        return any(e.parent_warp_id == warp and e.priority == Priority.HIGH for e in self.entries)

    def pop_high(self, warp: int) -> None:
        self.high_ib[warp].popleft()

    # ------------------------------------------------------------ retirement

    def complete(self, e: AwtEntry) -> None:
        """EXIT issued: free the AWT entry and hand the output to the requester."""
        if not e.live:
            return
        e.live = False
        self.entries.remove(e)
        self.counters.completed += 1
        self.counters.live_out_moves += len(e.live_out_regs)
        if e.on_done is not None:
            e.on_done(bytes(e.mem.out))

    def kill(self, e: AwtEntry | None, reason: str = "") -> bool:
        """Flush ``e`` from the AWT and AWB. No-op for finished entries."""
        if e is None or not e.live:
            return False
        e.live = False
        self.entries.remove(e)
        if e.priority == Priority.HIGH:
            q = self.high_ib.get(e.parent_warp_id)
            if q:
                self.high_ib[e.parent_warp_id] = deque(x for x in q if x[0] is not e)
        else:
            self.low_ib = deque(x for x in self.low_ib if x[0] is not e)
        self.counters.killed += 1
        self.counters.killed_by[reason] = self.counters.killed_by.get(reason, 0) + 1
        if e.on_kill is not None:
            e.on_kill()
        return True

    def expire(self, cycle: int) -> int:
        """Kill low-priority entries that made no progress for the timeout."""
        limit = self.throttle.low_priority_timeout
        stale = [e for e in self.entries if e.priority == Priority.LOW and cycle - e.last_progress > limit]
        for e in stale:
            self.kill(e, "timeout")
        return len(stale)

    def next_timeout(self) -> int | None:
        lows = [e.last_progress for e in self.entries if e.priority == Priority.LOW]
        return min(lows) + self.throttle.low_priority_timeout + 1 if lows else None

    def idle(self) -> bool:
        return not self.entries

    def conservation_ok(self) -> bool:
        c = self.counters
        return c.fired == c.completed + c.killed + c.rejected + len(self.entries)
