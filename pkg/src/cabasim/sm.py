"""Cycle-level model of one SM running parent warps and assist warps.

Each cycle: due memory events fire, the LSU and DRAM advance one step, the
assist warp controller decodes into the AWB, then every scheduler issues at
most one instruction. Issue priority inside a scheduler is

1. a ready high-priority assist instruction (greedy-then-oldest by warp),
2. a ready parent instruction (greedy-then-oldest),
3. a low-priority assist instruction, only if nothing above could issue.

A parent warp with a live high-priority assist is blocked until it exits.
Cycles in which nothing at all changes are skipped in one step; their issue
slots are attributed exactly as the first such cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .caba import AssistWarpController, Rejected, ThrottleState, TriggerEvent, TriggerKind
from .codec import Algorithm
from .errors import ConfigError, SimFault
from .isa import MEMORY_OPS, Op, Priority, build_library
from .memhier import EventQueue, MemConfig, MemorySystem
from .metrics import Category, CycleBreakdown, RunMetrics, attribute, record_issue_cycle
from .simt import WARP_WIDTH, execute_microop
from .workload import ADDR_REG, Workload

P_REG = -1  # per-lane predicate
G_REG = -2  # global predicate

_WRITES_P = {Op.CMP_FITS, Op.SETP}
_READS_P = {Op.PAND_GLOBAL}


@dataclass
class PipelineConfig:
    warps_per_sm: int = 48
    schedulers: int = 2
    alu_latency: int = 1
    alu_occupancy: int = 2  # cycles a 32-thread warp instruction holds a 16-lane unit
    total_registers: int = 32768
    regs_per_thread: int = 8
    ib_entries: int = 2
    low_partition: int = 2
    assist_decode_per_cycle: int = 1
    awt_capacity: int | None = None
    throttle_threshold: float = 0.9
    throttle_window: int = 128
    low_priority_timeout: int = 10_000
    max_cycles: int = 50_000_000

    def validate(self) -> list[str]:
        errs = []
        for name in ("warps_per_sm", "schedulers", "alu_latency", "alu_occupancy", "total_registers",
                     "regs_per_thread", "ib_entries", "low_partition", "assist_decode_per_cycle",
                     "throttle_window", "low_priority_timeout"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be positive")
        if not 0.0 < self.throttle_threshold <= 1.0:
            errs.append("throttle_threshold must be in (0, 1]")
        return errs


def assist_reads(op) -> tuple[int, ...]:
    regs = list(op.reads())
    code = op.opcode
    if code in _READS_P or (code == Op.SETMASK and op.mode in ("p", "np", "andp")) \
            or (code == Op.STW and op.mode == "t") or (code == Op.CMP_FITS and op.mode.endswith("|")):
        regs.append(P_REG)
    if code == Op.BRA_P and op.mode != "always" or code == Op.PAND_GLOBAL and op.mode == "acc":
        regs.append(G_REG)
    return tuple(regs)


def assist_writes(op) -> tuple[int, ...]:
    regs = list(op.writes())
    code = op.opcode
    if code in _WRITES_P or (code == Op.LDC and op.mode == "t"):
        regs.append(P_REG)
    if code == Op.PAND_GLOBAL:
        regs.append(G_REG)
    return tuple(regs)


class Warp:
    __slots__ = ("warp_id", "program", "pc", "pending", "regs", "exited", "sched")

    def __init__(self, warp_id: int, program, schedulers: int):
        self.warp_id = warp_id
        self.program = program
        self.pc = 0
        self.pending: dict[int, int | None] = {}
        self.regs: dict[int, object] = {ADDR_REG: 0}
        self.exited = not program
        self.sched = warp_id % schedulers

    @property
    def head(self):
        return self.program[self.pc] if self.pc < len(self.program) else None


class SM:
    """Single-SM simulator. ``caba=False`` builds the machine without any assist structures."""

    def __init__(self, workload: Workload, algorithm="NONE", pipeline: PipelineConfig | None = None,
                 mem: MemConfig | None = None, caba: bool = True, trace=None, library=None):
        self.pipe = pipeline or PipelineConfig()
        self.memcfg = mem or MemConfig(line_size=workload.line_size)
        errs = self.pipe.validate()
        self.algorithm = algorithm if algorithm == "BESTOFALL" else Algorithm(algorithm)
        if workload.line_size != self.memcfg.line_size:
            errs.append(f"workload line size {workload.line_size} != memory line size {self.memcfg.line_size}")
        if workload.warps > self.pipe.warps_per_sm:
            errs.append(f"{workload.warps} warps exceed warps_per_sm={self.pipe.warps_per_sm}")
        errs += self.memcfg.validate()
        if errs:
            raise ConfigError(errs)
        self.library = library
        enabled = []
        if caba:
            self.library = library or build_library(self.memcfg.line_size)
            if self.algorithm == "BESTOFALL":
                enabled = list(self.library)
            elif self.algorithm != Algorithm.NONE:
                enabled = self.library.for_algorithm(self.algorithm)
        per_warp = self.pipe.regs_per_thread + sum(s.register_requirement for s in enabled)
        need = per_warp * WARP_WIDTH * workload.warps
        if need > self.pipe.total_registers:
            errs.append(f"register file needs {need} registers ({workload.warps} warps x {per_warp} per thread "
                        f"x {WARP_WIDTH}), only {self.pipe.total_registers} available")
        if errs:
            raise ConfigError(errs)
        self.registers_used = need
        self.workload = workload
        self.events = EventQueue()
        self.mem = MemorySystem(self.memcfg, workload.memory, self.algorithm, self.events)
        self.L = self.memcfg.line_size
        self.awc = None
        S = self.pipe.schedulers
        if caba:
            throttle = ThrottleState(self.pipe.throttle_threshold, self.pipe.throttle_window,
                                     self.pipe.low_priority_timeout)
            self.awc = AssistWarpController(self.library, self.pipe.awt_capacity or self.pipe.warps_per_sm,
                                            self.pipe.assist_decode_per_cycle * S, self.pipe.ib_entries,
                                            self.pipe.low_partition, throttle)
        self.mem.load_done = self._load_done
        self.mem.decompress = self._trigger_decompress
        self.mem.compress = self._trigger_compress
        self.mem.kill = self._kill
        self._freed_seen = -1
        if self.awc is not None:
            self.mem.retry_ready = self._assist_freed
        self.warps = [Warp(i, list(p), S) for i, p in enumerate(workload.programs)]
        self.by_sched = [[w for w in self.warps if w.sched == s] for s in range(S)]
        self.greedy = [None] * S
        self.greedy_assist = [None] * S
        self.alu_free = [0] * S
        self.cycle = 0
        self.breakdown = CycleBreakdown()
        self.parent_issued = 0
        self.assist_issued = 0
        self.trace = trace
        self.violations: list[str] = []
        self._metrics = None
        self._issued_now = False

    # ------------------------------------------------------------ hooks from memory

    def _load_done(self, warp: int, reg: int, data: bytes) -> None:
        w = self.warps[warp]
        w.regs[reg] = data
        w.pending.pop(reg, None)

    def _trigger_decompress(self, warp: int, form, line_addr: int, callback) -> bool:
        if self.awc is None:
            callback(bytes(codec.decompress(form)))
            return True
        ev = TriggerEvent(TriggerKind.LOAD_COMPRESSED_FILL, warp, form.algorithm, form.encoding, line_addr,
                          form.data, self.L, (ADDR_REG,), (line_addr,),
                          on_done=lambda out: callback(out[:self.L]))
        res = self.awc.trigger(ev, self.cycle)
        return not isinstance(res, Rejected)

    def _trigger_compress(self, warp: int, line: bytes, line_addr: int, callback, on_kill):
        if self.awc is None:
            return None
        alg = self.algorithm
        if alg == "BESTOFALL":
            best, _ = codec.best_of_all(line, self.memcfg.burst_size)
            alg = best if best != Algorithm.NONE else codec.TIE_ORDER[0]

        def done(out: bytes) -> None:
            callback(b"" if out[0] == 0 else out[:codec.image_size(out, self.L)])

        ev = TriggerEvent(TriggerKind.STORE_ELIGIBLE, warp, alg, "ALL", line_addr, line, self.L,
                          (ADDR_REG,), (line_addr,), on_done=done, on_kill=on_kill)
        res = self.awc.trigger(ev, self.cycle)
        return None if isinstance(res, Rejected) else res

    def _assist_freed(self) -> bool:
        """True once per change in retired assists; rejected fills only retry then."""
        c = self.awc.counters
        n = c.completed + c.killed
        if n == self._freed_seen:
            return False
        self._freed_seen = n
        return True

    def _kill(self, handle) -> None:
        if self.awc is not None:
            self.awc.kill(handle, "store")

    # ------------------------------------------------------------ readiness

    def _parent_state(self, w: Warp, now: int):
        """(True, None) if the head can issue, else (False, stall category)."""
        if self.awc is not None and self.awc.has_live_high(w.warp_id):
            return False, Category.MEMORY
        ins = w.head
        if ins is None:
            return False, Category.MEMORY  # drained program waiting on loads
        worst = None
        regs = ins.srcs + ((ins.dst,) if ins.dst is not None else ())
        for r in regs:
            if r in w.pending:
                t = w.pending[r]
                if t is None:
                    return False, Category.MEMORY
                if t > now:
                    worst = Category.DATA_DEPENDENCE
        if ins.op == "ALU":
            if self.alu_free[w.sched] > now:
                return False, Category.COMPUTE
        elif not self.mem.lsu_free():
            return False, Category.MEMORY
        if worst is not None:
            return False, worst
        return True, None

    def _assist_state(self, e, idx: int, sched: int, now: int):
        op = e.sub.ops[idx]
        worst = None
        for r in (*assist_reads(op), *assist_writes(op)):
            if r in e.pending:
                t = e.pending[r]
                if t is None:
                    return False, Category.MEMORY
                if t > now:
                    worst = Category.DATA_DEPENDENCE
        if op.opcode == Op.EXIT and e.pending:
            return False, Category.MEMORY if None in e.pending.values() else Category.DATA_DEPENDENCE
        if op.opcode in MEMORY_OPS:
            if not self.mem.assist_port_free(now):
                return False, Category.MEMORY
        elif op.opcode not in (Op.BRA_P, Op.EXIT) and self.alu_free[sched] > now:
            return False, Category.COMPUTE
        if worst is not None:
            return False, worst
        return True, None

    # ------------------------------------------------------------ issue

    def select_issue(self, sched: int, now: int):
        """Pick this scheduler's instruction for the cycle.

        Returns ``(kind, warp, item, reasons)`` where kind is "high", "parent",
        "low" or None; ``reasons`` holds the stall categories seen.
        """
        reasons = set()
        warps = self.by_sched[sched]
        awc = self.awc
        if awc is not None:
            heads = [(w, h) for w in warps if (h := awc.high_head(w.warp_id)) is not None]
            # greedy on the last-issuing assist, then oldest trigger first
            greedy = self.greedy_assist[sched]
            heads.sort(key=lambda x: (x[1][0] is not greedy, x[1][0].started, x[0].warp_id))
            for w, head in heads:
                ok, why = self._assist_state(head[0], head[1], sched, now)
                if ok:
                    return "high", w, head, reasons
                reasons.add(why)
        for w in self._gto(warps, self.greedy[sched]):
            if w.exited:
                continue
            ok, why = self._parent_state(w, now)
            if ok:
                return "parent", w, None, reasons
            reasons.add(why)
        if awc is not None and awc.low_ib:
            seen = set()
            for item in awc.low_ib:
                e, idx = item
                if id(e) in seen:
                    continue
                seen.add(id(e))
                if e.parent_warp_id % self.pipe.schedulers != sched:
                    continue
                ok, why = self._assist_state(e, idx, sched, now)
                if ok:
                    return "low", self.warps[e.parent_warp_id], item, reasons
                reasons.add(why)
        return None, None, None, reasons

    @staticmethod
    def _gto(warps, greedy):
        if greedy is None or greedy.exited:
            return warps
        return [greedy] + [w for w in warps if w is not greedy]

    def _issue_parent(self, w: Warp, sched: int, now: int) -> str:
        ins = w.program[w.pc]
        w.pc += 1
        self.parent_issued += 1
        self.greedy[sched] = w
        if ins.op == "ALU":
            if ins.dst is not None:
                w.pending[ins.dst] = now + self.pipe.alu_latency
            self._use_alu(sched, now)
        elif ins.op == "LD":
            w.regs[ADDR_REG] = ins.addr - ins.addr % self.L
            w.pending[ins.dst] = None
            self.mem.issue_load(w.warp_id, ins.dst, ins.addr, ins.size)
        else:
            w.regs[ADDR_REG] = ins.addr - ins.addr % self.L
            if ins.data is not None:
                data = ins.data
            else:
                val = w.regs.get(ins.srcs[0], b"") if ins.srcs else b""
                data = bytes(val)[:ins.size].ljust(ins.size, b"\0")
            self.mem.issue_store(w.warp_id, ins.addr, data)
        self._retire_check(w)
        return str(ins)

    def _retire_check(self, w: Warp) -> None:
        if w.pc >= len(w.program) and not any(t is None for t in w.pending.values()):
            w.exited = True

    def _use_alu(self, sched: int, now: int) -> None:
        self.alu_free[sched] = now + self.pipe.alu_occupancy
        if self.awc is not None:
            self.awc.throttle.record_busy(self.pipe.alu_occupancy)

    def execute_microop(self, e, idx: int, sched: int, now: int) -> str:
        """Issue one assist instruction: apply its lane effects and book its latency."""
        op = e.sub.ops[idx]
        st = e.lanes
        st.pc = idx
        execute_microop(st, op, e.mem)
        e.issued += 1
        e.last_progress = now
        self.assist_issued += 1
        awc = self.awc
        if op.opcode == Op.MOVE and op.mode == "livein":
            awc.counters.live_in_moves += 1
        writes = assist_writes(op)
        if op.opcode in MEMORY_OPS:
            for r in writes:
                e.pending[r] = None
            if writes:
                self.mem.issue_assist_mem(lambda e=e, regs=writes: self._assist_mem_done(e, regs))
            else:
                self.mem.issue_assist_mem(lambda: None)
        elif op.opcode == Op.BRA_P:
            awc.resolve_branch(e, st.pc)
        elif op.opcode == Op.EXIT:
            awc.complete(e)
        else:
            for r in writes:
                e.pending[r] = now + self.pipe.alu_latency
            self._use_alu(sched, now)
        return op.text()

    def _assist_mem_done(self, e, regs) -> None:
        for r in regs:
            e.pending.pop(r, None)

    # ------------------------------------------------------------ main loop

    def _prune(self, now: int) -> None:
        for w in self.warps:
            if w.pending:
                for r in [r for r, t in w.pending.items() if t is not None and t <= now]:
                    del w.pending[r]
            if not w.exited and w.pc >= len(w.program):
                self._retire_check(w)
        if self.awc is not None:
            for e in self.awc.entries:
                if e.pending:
                    for r in [r for r, t in e.pending.items() if t is not None and t <= now]:
                        del e.pending[r]

    def step(self) -> bool:
        """Advance one cycle (or skip a stretch of identical idle cycles). False once finished."""
        if self.done():
            return False
        now = self.cycle
        self.mem.cycle = now
        changed = self.events.run_due(now) > 0
        self._prune(now)
        awc = self.awc
        if awc is not None:
            awc.throttle.advance(now, self.pipe.schedulers)
            if awc.expire(now):
                changed = True
            if awc.entries and all(w.exited for w in self.warps):
                # kernel over: opportunistic compression is abandoned, lines go raw
                for e in [e for e in awc.entries if e.priority == Priority.LOW]:
                    awc.kill(e, "drain")
                    changed = True
        if self.mem.tick(now):
            changed = True
        if awc is not None and awc.deploy_cycle(now):
            changed = True
        cats = []
        for s in range(self.pipe.schedulers):
            kind, w, item, reasons = self.select_issue(s, now)
            if kind is None:
                cat = attribute(reasons)
                cats.append(cat)
                self._trace(now, "-", cat, "")
                continue
            changed = True
            if kind == "parent":
                if awc is not None and awc.high_head(w.warp_id) is not None:
                    self.violations.append(f"cycle {now}: parent w{w.warp_id} issued ahead of its assist")
                text = self._issue_parent(w, s, now)
            else:
                e, idx = item
                if kind == "high":
                    awc.pop_high(w.warp_id)
                    self.greedy_assist[s] = e
                else:
                    awc.low_ib.remove(item)
                text = self.execute_microop(e, idx, s, now)
            cats.append(Category.ACTIVE)
            self._trace(now, w.warp_id, Category.ACTIVE, f"{kind}:{text}")
        span = 1
        if not changed:
            nxt = self._next_wake(now)
            if nxt is None:
                raise SimFault(f"deadlock at cycle {now}: nothing pending can make progress")
            span = nxt - now
        for cat in cats:
            record_issue_cycle(self.breakdown, cat, span)
        self.cycle = now + span
        if self.cycle > self.pipe.max_cycles:
            raise SimFault(f"exceeded max_cycles={self.pipe.max_cycles}")
        return True

    def _next_wake(self, now: int) -> int | None:
        cands = []
        t = self.events.next_cycle()
        if t is not None:
            cands.append(t)
        t = self.mem.dram.next_wake(now)
        if t is not None:
            cands.append(t)
        cands += [t for t in self.alu_free if t > now]
        for w in self.warps:
            cands += [t for t in w.pending.values() if t is not None and t > now]
        if self.awc is not None:
            for e in self.awc.entries:
                cands += [t for t in e.pending.values() if t is not None and t > now]
            if any(e.priority == Priority.LOW for e in self.awc.entries):
                cands.append(self.awc.throttle.next_boundary())
                t = self.awc.next_timeout()
                if t is not None:
                    cands.append(t)
        cands = [c for c in cands if c > now]
        return min(cands) if cands else None

    def done(self) -> bool:
        if any(not w.exited for w in self.warps):
            return False
        if self.awc is not None and not self.awc.idle():
            return False
        return not (self.mem.busy() or len(self.events))

    def run(self) -> RunMetrics:
        while self.step():
            pass
        return self.finalize()

    def _trace(self, cycle, warp, cat, text) -> None:
        if self.trace is not None:
            self.trace.write(f"{cycle} {warp} {cat.value} {text}".rstrip() + "\n")

    # ------------------------------------------------------------ results

    def finalize(self, name: str = "", bandwidth_scale: float = 1.0, seed: int = 0) -> RunMetrics:
        if self._metrics is not None:
            return self._metrics
        d = self.mem.dram
        c = self.awc.counters if self.awc is not None else None
        cycles = self.cycle
        st = self.mem.stats
        bd = self.breakdown
        alg = getattr(self.algorithm, "value", self.algorithm)
        m = RunMetrics(
            name=name or self.workload.name, algorithm=alg, bandwidth_scale=bandwidth_scale,
            uncompressed_l2=self.memcfg.uncompressed_l2, seed=seed, cycles=cycles,
            parent_instructions=self.parent_issued,
            ipc=self.parent_issued / cycles if cycles else 0.0,
            bandwidth_utilization=min(1.0, d.busy_cycles / cycles) if cycles else 0.0,
            compression_ratio=d.raw_bursts / d.data_bursts if d.data_bursts else 1.0,
            md_hit_rate=self.mem.md_cache.hit_rate, md_hits=self.mem.md_cache.hits,
            md_misses=self.mem.md_cache.misses, dram_data_bursts=d.data_bursts, dram_md_bursts=d.md_bursts,
            dram_raw_bursts=d.raw_bursts, dram_busy_cycles=d.busy_cycles, cycles_per_burst=d.cpb,
            assist_instructions_issued=self.assist_issued,
            triggers_fired=c.fired if c else 0, triggers_completed=c.completed if c else 0,
            triggers_killed=c.killed if c else 0, triggers_rejected=c.rejected if c else 0,
            live_in_moves=c.live_in_moves if c else 0,
            l1_hits=st["l1_hits"], l1_misses=st["l1_misses"], l2_hits=st["l2_hits"], l2_misses=st["l2_misses"],
            store_retries=st["store_retries"], writes_compressed=st["writes_compressed"],
            writes_raw=st["writes_raw"], active=bd.active, memory_stall=bd.memory_stall,
            compute_stall=bd.compute_stall, data_dependence_stall=bd.data_dependence_stall, idle=bd.idle,
            issue_slots=cycles * self.pipe.schedulers)
        self._metrics = m
        return m
