"""SM subclass that asserts the issue-priority invariants on every cycle."""

from cabasim.sm import SM
from cabasim.workload import ADDR_REG


class CheckedSM(SM):
    """Records a violation whenever

    - a parent issues while its own warp holds a live high-priority assist,
    - a low-priority assist issues although a parent or high-priority
      instruction on the same scheduler was ready,
    - a parent reads a loaded register before the value arrived, or the
      value differs from a flat reference memory.
    """

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.ref = bytearray(self.memcfg.memory_size)
        self.ref[:len(self.workload.memory)] = self.workload.memory
        self.expected = {}
        self.errors = []
        self.low_issued = 0
        self.high_issued = 0

    def select_issue(self, sched, now):
        kind, w, item, reasons = super().select_issue(sched, now)
        if kind == "parent" and self.awc is not None and self.awc.has_live_high(w.warp_id):
            self.errors.append(f"{now}: parent w{w.warp_id} issued with a live high assist")
        if kind == "low":
            self.low_issued += 1
            for other in self.by_sched[sched]:
                if not other.exited and self._parent_state(other, now)[0]:
                    self.errors.append(f"{now}: low assist issued while parent w{other.warp_id} was ready")
                head = self.awc.high_head(other.warp_id)
                if head is not None and self._assist_state(head[0], head[1], sched, now)[0]:
                    self.errors.append(f"{now}: low assist issued while a high assist was ready")
        if kind == "high":
            self.high_issued += 1
        return kind, w, item, reasons

    def _issue_parent(self, w, sched, now):
        ins = w.program[w.pc]
        for r in ins.srcs:
            if r in w.pending:
                self.errors.append(f"{now}: w{w.warp_id} read r{r} while it was pending")
            want = self.expected.get((w.warp_id, r))
            if want is not None and bytes(w.regs.get(r, b"")) != want:
                self.errors.append(f"{now}: w{w.warp_id} r{r} holds a wrong value")
        if ins.op == "LD":
            self.expected[(w.warp_id, ins.dst)] = bytes(self.ref[ins.addr:ins.addr + ins.size])
        elif ins.op == "ST":
            if ins.data is not None:
                data = ins.data
            else:
                val = w.regs.get(ins.srcs[0], b"") if ins.srcs else b""
                data = bytes(val)[:ins.size].ljust(ins.size, b"\0")
            self.ref[ins.addr:ins.addr + ins.size] = data
        elif ins.dst is not None:
            self.expected.pop((w.warp_id, ins.dst), None)
        return super()._issue_parent(w, sched, now)

    def _load_done(self, warp, reg, data):
        want = self.expected.get((warp, reg))
        if want is not None and reg != ADDR_REG and data != want:
            self.errors.append(f"w{warp} r{reg}: load returned wrong bytes")
        super()._load_done(warp, reg, data)

    def run_checked(self):
        while self.step():
            pass
        self.errors += self.violations
        return self.finalize()
