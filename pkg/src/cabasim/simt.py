"""Lock-step SIMT execution of assist-warp micro-ops.

This module holds the functional side: per-lane register state, the memory
view an assist instance sees, and ``execute_microop``. The cycle-level SM
that schedules these ops lives in :mod:`cabasim.sm`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SimFault
from .isa import WARP_WIDTH, Op, MicroOp, Subroutine

FULL_MASK = (1 << WARP_WIDTH) - 1


class AssistMemory:
    """Bit-addressed view of one line: loads read ``src``, stores fill ``out``."""

    __slots__ = ("src", "out", "line_addr", "reads", "writes")

    def __init__(self, src: bytes, out_size: int, line_addr: int = 0):
        self.src = bytes(src)
        self.out = bytearray(out_size)
        self.line_addr = line_addr
        self.reads = 0
        self.writes = 0

    def read(self, bit: int, nbits: int) -> int:
        if bit < 0:
            raise SimFault(f"negative load address bit {bit}")
        lo, hi = bit >> 3, (bit + nbits + 7) >> 3
        if hi > len(self.src):
            raise SimFault(f"load of bytes {lo}..{hi} past image of {len(self.src)} bytes")
        self.reads += 1
        return (int.from_bytes(self.src[lo:hi], "little") >> (bit & 7)) & ((1 << nbits) - 1)

    def write(self, bit: int, nbits: int, value: int) -> None:
        if bit < 0:
            raise SimFault(f"negative store address bit {bit}")
        lo, hi = bit >> 3, (bit + nbits + 7) >> 3
        if hi > len(self.out):
            raise SimFault(f"store of bytes {lo}..{hi} past buffer of {len(self.out)} bytes")
        self.writes += 1
        sh = bit & 7
        fm = ((1 << nbits) - 1) << sh
        cur = int.from_bytes(self.out[lo:hi], "little")
        cur = (cur & ~fm) | ((value << sh) & fm)
        self.out[lo:hi] = cur.to_bytes(hi - lo, "little")


@dataclass
class LaneState:
    """Architectural state of one assist-warp instance."""

    nregs: int
    static_mask: int = FULL_MASK
    live_in: tuple[int, ...] = ()
    regs: list = field(default=None)
    p: list = field(default=None)
    g: bool = False
    mask: int = 0
    pc: int = 0
    done: bool = False

    def __post_init__(self):
        if self.regs is None:
            self.regs = [[0] * WARP_WIDTH for _ in range(self.nregs)]
        if self.p is None:
            self.p = [False] * WARP_WIDTH
        self.mask = self.static_mask

    def active(self) -> list[int]:
        m = self.mask
        return [lane for lane in range(WARP_WIDTH) if m >> lane & 1]

    def reg(self, r: int) -> list[int]:
        if not 0 <= r < self.nregs:
            raise SimFault(f"register r{r} outside window of {self.nregs}")
        return self.regs[r]

    def pmask(self) -> int:
        return sum(1 << lane for lane in range(WARP_WIDTH) if self.p[lane])


def _signed(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def _fits(v: int, bits: int, word: int, tagged: bool) -> bool:
    v = _signed(v, 8 * word)
    if bits == 0:
        return v == 0
    half = 1 << (bits - 2 if tagged else bits - 1)
    return -half <= v < half


def _field(x: int, op: MicroOp) -> int:
    if op.shift or op.fmask:
        x >>= op.shift
        if op.fmask:
            x &= op.fmask
    return x


def _base(st: LaneState, op: MicroOp, mem: AssistMemory) -> int:
    return 0 if op.a is None else st.reg(op.a)[0] - mem.line_addr


def execute_microop(st: LaneState, op: MicroOp, mem: AssistMemory) -> None:
    """Apply ``op`` to ``st`` and ``mem`` and advance the pc."""
    code = op.opcode
    nxt = st.pc + 1
    if code == Op.EXIT:
        st.done = True
    elif code == Op.BRA_P:
        if op.mode == "always" or (op.mode == "g") == st.g:
            nxt = op.target
    elif code == Op.SETMASK:
        m = op.mode
        if m == "all":
            st.mask = st.static_mask
        elif m == "imm":
            st.mask = op.imm & st.static_mask
        elif m == "p":
            st.mask = st.static_mask & st.pmask()
        elif m == "np":
            st.mask &= ~st.pmask()
        elif m == "andp":
            st.mask &= st.pmask()
        else:
            raise SimFault(f"unknown SETMASK mode {m!r}")
    elif code == Op.PAND_GLOBAL:
        r = all(st.p[lane] for lane in st.active())
        st.g = (st.g and r) if op.mode == "acc" else r
    elif code == Op.ADDI:
        v = op.imm + (st.reg(op.a)[0] if op.a is not None else 0)
        st.reg(op.dst)[:] = [v] * WARP_WIDTH
    elif code == Op.MOVE:
        dst = st.reg(op.dst)
        if op.mode == "livein":
            if not 0 <= op.a < len(st.live_in):
                raise SimFault(f"live-in slot {op.a} not provided")
            dst[:] = [st.live_in[op.a]] * WARP_WIDTH
        elif op.mode == "first":
            lanes = st.active()
            if lanes:
                dst[:] = [st.reg(op.a)[lanes[0]]] * WARP_WIDTH
        else:
            src = st.reg(op.a) if op.a is not None else None
            for lane in st.active():
                dst[lane] = src[lane] if src is not None else op.imm
    elif code == Op.ADD or code == Op.SUB:
        a, dst = st.reg(op.a), st.reg(op.dst)
        b = st.reg(op.b) if op.b is not None else None
        wrap = (1 << (8 * op.word)) - 1
        neg = code == Op.SUB
        for lane in st.active():
            y = b[lane] if b is not None else op.imm
            dst[lane] = (a[lane] - y if neg else a[lane] + y) & wrap
    elif code == Op.CMP_FITS:
        a = st.reg(op.a)
        tagged = op.mode.startswith("t")
        accumulate = op.mode.endswith("|")
        act = st.mask
        for lane in range(WARP_WIDTH):
            if act >> lane & 1:
                f = _fits(a[lane], op.bits, op.word, tagged)
                st.p[lane] = (st.p[lane] or f) if accumulate else f
            elif not accumulate:
                st.p[lane] = False
    elif code == Op.SETP:
        a = st.reg(op.a)
        b = st.reg(op.b) if op.b is not None else None
        act = st.mask
        for lane in range(WARP_WIDTH):
            if act >> lane & 1:
                right = _field(b[lane], op) if b is not None else op.imm
                st.p[lane] = _field(a[lane], op) == right
            else:
                st.p[lane] = False
    elif code == Op.LDW or code == Op.LDC:
        dst = st.reg(op.dst)
        idx = st.reg(op.b) if code == Op.LDW and op.b is not None else None
        start = 8 * (_base(st, op, mem) + op.off) + op.shift
        bits = op.bits
        for lane in st.active():
            bit = start + (lane - op.lane0) * op.stride
            if idx is not None:
                bit += 8 * op.imm * (idx[lane] & op.fmask)
            v = mem.read(bit, bits)
            if code == Op.LDC:
                if op.mode == "s":
                    v = _signed(v, bits)
                elif op.mode == "t":
                    st.p[lane] = bool(v >> (bits - 1))
                    v = _signed(v, bits - 1)
            dst[lane] = v
        if code == Op.LDC and op.mode == "t":
            act = st.mask
            for lane in range(WARP_WIDTH):
                if not act >> lane & 1:
                    st.p[lane] = False
    elif code == Op.STW:
        src = st.reg(op.b)
        start = 8 * (_base(st, op, mem) + op.off) + op.shift
        bits = op.bits
        tagged = op.mode == "t"
        for lane in st.active():
            v = src[lane]
            if tagged:
                v = (v & ((1 << (bits - 1)) - 1)) | (int(st.p[lane]) << (bits - 1))
            mem.write(start + (lane - op.lane0) * op.stride, bits, v)
    else:  # pragma: no cover - enum is closed
        raise SimFault(f"unknown opcode {code}")
    st.pc = nxt


@dataclass
class RunResult:
    out: bytes
    executed: int
    trace: list


def run_subroutine(sub: Subroutine, src: bytes, *, line_addr: int = 0, out_size: int | None = None,
                   live_in: tuple[int, ...] | None = None, max_steps: int = 1_000_000,
                   keep_trace: bool = False) -> RunResult:
    """Execute ``sub`` to EXIT on one line and return the output buffer."""
    if live_in is None:
        live_in = (line_addr,) * len(sub.live_in)
    if out_size is None:
        out_size = 2 * max(len(src), 1)
    mem = AssistMemory(src, out_size, line_addr)
    st = LaneState(sub.register_requirement, sub.static_mask, tuple(live_in))
    trace = []
    steps = 0
    while not st.done:
        if steps >= max_steps:
            raise SimFault(f"{sub.name} did not exit within {max_steps} micro-ops")
        if not 0 <= st.pc < len(sub.ops):
            raise SimFault(f"{sub.name} pc {st.pc} outside subroutine")
        op = sub.ops[st.pc]
        if keep_trace:
            trace.append(st.pc)
        execute_microop(st, op, mem)
        steps += 1
    return RunResult(bytes(mem.out), steps, trace)


def simt_decompress(library, c) -> bytes:
    """Decompress a CompressedLine by running its library subroutine."""
    sub = library.decompressor(c.algorithm, c.encoding)
    return run_subroutine(sub, c.data, out_size=c.line_size).out


def simt_compress_image(library, algorithm, line: bytes) -> bytes:
    """Image written by the compression subroutine, or b"" when it gave up."""
    from .codec import image_size

    res = run_subroutine(library.compressor(algorithm), line, out_size=2 * len(line))
    if res.out[0] == 0:
        return b""
    return res.out[:image_size(res.out, len(line))]
