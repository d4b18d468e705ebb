"""Assist-warp micro-ISA and the compression subroutine library.

Registers hold one Python int per lane. Besides the register window each
warp has a per-lane predicate ``p``, a warp-wide global predicate ``g`` and
an active mask. Memory operands are bit-addressed relative to the line the
assist instance was triggered for::

    bit = 8 * (base + off) + shift + (lane - lane0) * stride

where ``base`` is the scalar value of register ``a`` minus the line address
(0 when ``a`` is None). Loads read the source image, stores write the output
buffer. Only active lanes touch memory.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from . import _kernels_py as _ref
from .codec import (BDI_KIND_NAMES, BDI_SHAPES, BDI_TEST_ORDER, CPACK_ENCODINGS, LINE_SIZES,
                    Algorithm, header_len)
from .errors import ConfigError

WARP_WIDTH = 32
MAX_ITERATIONS = 4


class Op(str, enum.Enum):
    MOVE = "MOVE"
    LDW = "LDW"
    LDC = "LDC"
    STW = "STW"
    ADDI = "ADDI"
    ADD = "ADD"
    SUB = "SUB"
    CMP_FITS = "CMP_FITS"
    SETP = "SETP"
    PAND_GLOBAL = "PAND_GLOBAL"
    SETMASK = "SETMASK"
    BRA_P = "BRA_P"
    EXIT = "EXIT"


MEMORY_OPS = frozenset({Op.LDW, Op.LDC, Op.STW})
CONTROL_OPS = frozenset({Op.BRA_P, Op.EXIT})


class Priority(str, enum.Enum):
    HIGH = "High"
    LOW = "Low"


class Direction(str, enum.Enum):
    LOAD = "load"    # decompress on a compressed fill
    STORE = "store"  # compress before writeback


@dataclass(frozen=True, slots=True)
class MicroOp:
    """One assist-warp instruction. Unused operand fields keep their defaults.

    ``mode`` refines the opcode:

    - MOVE: ``""`` copies ``a`` (or ``imm`` when ``a`` is None), ``"first"``
      broadcasts ``a`` from the lowest active lane to every lane, ``"livein"``
      broadcasts live-in slot ``a`` from the parent warp.
    - LDC: ``"u"`` unsigned, ``"s"`` sign-extended, ``"t"`` tagged (top bit to
      ``p``, remaining bits sign-extended).
    - STW: ``"t"`` writes ``p`` into the top bit of each field.
    - CMP_FITS: ``"t"`` tagged range, ``"s"`` signed range; ``"|"`` suffix ORs
      into ``p`` instead of overwriting.
    - PAND_GLOBAL: ``"acc"`` ANDs with the previous ``g``.
    - SETMASK: ``all``, ``imm``, ``p``, ``np``, ``andp``.
    - BRA_P: ``g``, ``ng``, ``always``.
    """

    opcode: Op
    dst: int | None = None
    a: int | None = None
    b: int | None = None
    imm: int = 0
    off: int = 0
    bits: int = 0
    stride: int = 0
    lane0: int = 0
    shift: int = 0
    fmask: int = 0
    word: int = 4
    mode: str = ""
    target: int | str | None = None

    def reads(self) -> tuple[int, ...]:
        op = self.opcode
        if op == Op.MOVE:
            return (self.a,) if self.mode in ("", "first") and self.a is not None else ()
        if op == Op.STW:
            return tuple(r for r in (self.a, self.b) if r is not None)
        if op == Op.BRA_P or op == Op.EXIT or op == Op.SETMASK or op == Op.PAND_GLOBAL:
            return ()
        return tuple(r for r in (self.a, self.b) if r is not None)

    def writes(self) -> tuple[int, ...]:
        return () if self.dst is None else (self.dst,)

    @property
    def is_memory(self) -> bool:
        return self.opcode in MEMORY_OPS

    def text(self) -> str:
        """Stable single-line disassembly."""
        parts = [self.opcode.value + (f".{self.mode}" if self.mode else "")]
        ops = []
        if self.dst is not None:
            ops.append(f"r{self.dst}")
        if self.opcode in MEMORY_OPS:
            base = "line" if self.a is None else f"r{self.a}"
            mem = f"[{base}+{self.off}"
            if self.shift:
                mem += f":{self.shift}"
            mem += f"]{{{self.bits}b"
            if self.stride:
                mem += f" x{self.stride}"
            if self.lane0:
                mem += f" @{self.lane0}"
            mem += "}"
            if self.opcode == Op.STW:
                ops.append(f"r{self.b}")
                ops.insert(0, mem)
            else:
                ops.append(mem)
                if self.b is not None:
                    ops.append(f"idx=r{self.b}&{self.fmask:#x}*{self.imm}")
        else:
            for r in (self.a, self.b):
                if r is not None:
                    ops.append(f"r{r}" if not (self.opcode == Op.MOVE and self.mode == "livein") else f"in{r}")
            if self.opcode == Op.SETP and (self.shift or self.fmask):
                ops.append(f">>{self.shift}&{self.fmask:#x}")
            if self.opcode == Op.CMP_FITS:
                ops.append(f"{self.bits}b")
            if self.opcode in (Op.ADD, Op.SUB, Op.CMP_FITS) and self.word != 4:
                ops.append(f"w{self.word}")
            needs_imm = (self.opcode in (Op.ADDI, Op.SETMASK) and self.mode in ("", "imm")
                         or self.opcode in (Op.MOVE, Op.SETP, Op.ADD) and self.b is None
                         and (self.a is None or self.opcode != Op.MOVE))
            if needs_imm and not (self.opcode == Op.MOVE and self.mode):
                ops.append(f"#{self.imm:#x}")
            if self.target is not None:
                ops.append(f"-> {self.target}")
        if ops:
            parts.append(", ".join(ops))
        return " ".join(parts)


@dataclass(frozen=True)
class Subroutine:
    sr_id: int
    name: str
    algorithm: Algorithm
    encoding: str
    direction: Direction
    ops: tuple[MicroOp, ...]
    register_requirement: int
    priority: Priority
    live_in: tuple[int, ...] = ()
    live_out: tuple[int, ...] = ()
    static_mask: int = (1 << WARP_WIDTH) - 1

    def __len__(self) -> int:
        return len(self.ops)

    def disassemble(self) -> str:
        head = (f"; {self.name} sr={self.sr_id} prio={self.priority.value} "
                f"regs={self.register_requirement} mask={self.static_mask:#010x} "
                f"live_in={list(self.live_in)} live_out={list(self.live_out)}")
        return "\n".join([head] + [f"{i:4d}: {op.text()}" for i, op in enumerate(self.ops)])


@dataclass(frozen=True)
class SubroutineLibrary:
    line_size: int
    subroutines: tuple[Subroutine, ...]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for s in self.subroutines:
            self._index[(s.algorithm, s.encoding, s.direction)] = s

    def get(self, algorithm, encoding: str, direction: Direction) -> Subroutine:
        return self._index[(Algorithm(algorithm), encoding, Direction(direction))]

    def decompressor(self, algorithm, encoding: str) -> Subroutine:
        return self.get(algorithm, encoding, Direction.LOAD)

    def compressor(self, algorithm) -> Subroutine:
        return self.get(algorithm, "ALL", Direction.STORE)

    def by_id(self, sr_id: int) -> Subroutine:
        return self.subroutines[sr_id]

    def for_algorithm(self, algorithm) -> list[Subroutine]:
        return [s for s in self.subroutines if s.algorithm == Algorithm(algorithm)]

    def __iter__(self):
        return iter(self.subroutines)

    def __len__(self) -> int:
        return len(self.subroutines)


class _Asm:
    """Collects ops and resolves label targets at the end."""

    def __init__(self):
        self.ops: list[MicroOp] = []
        self.labels: dict[str, int] = {}

    def __call__(self, opcode: Op, **kw) -> None:
        self.ops.append(MicroOp(opcode, **kw))

    def label(self, name: str) -> None:
        if name in self.labels:
            raise ValueError(f"duplicate label {name}")
        self.labels[name] = len(self.ops)

    def header(self, tag: int, tmp: int) -> None:
        self(Op.SETMASK, mode="imm", imm=1)
        self(Op.MOVE, dst=tmp, imm=tag)
        self(Op.STW, b=tmp, bits=8)
        self(Op.EXIT)

    def finish(self) -> tuple[MicroOp, ...]:
        out = []
        for op in self.ops:
            if isinstance(op.target, str):
                op = replace(op, target=self.labels[op.target])
            out.append(op)
        return tuple(out)


def _lanes(n: int) -> int:
    return (1 << min(n, WARP_WIDTH)) - 1


def _chunks(n: int) -> int:
    return -(-n // WARP_WIDTH)


def _regs(ops) -> int:
    ids = [r for op in ops for r in (*op.reads(), *op.writes())]
    return max(ids) + 1 if ids else 0


# ------------------------------------------------------------------ BDI

def _bdi_decompress(kind: str, L: int) -> tuple[tuple[MicroOp, ...], int, tuple[int, ...]]:
    asm = _Asm()
    if kind == "ZEROS":
        asm(Op.SETMASK, mode="all")
        asm(Op.MOVE, dst=1, imm=0)
        asm(Op.STW, b=1, bits=64, stride=64)
        asm(Op.EXIT)
        return asm.finish(), _lanes(L // 8), ()
    if kind == "REPEATED":
        asm(Op.LDW, dst=1, off=1, bits=64)
        asm(Op.STW, b=1, bits=64, stride=64)
        asm(Op.EXIT)
        return asm.finish(), _lanes(L // 8), ()
    x, y = BDI_SHAPES[kind]
    n = L // x
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    asm(Op.LDW, dst=1, a=0, off=1, bits=8 * x)
    for c in range(_chunks(n)):
        if c:
            asm(Op.SETMASK, mode="all")
        asm(Op.LDC, dst=2, a=0, off=1 + x + c * WARP_WIDTH * y, bits=8 * y, stride=8 * y, mode="t")
        asm(Op.SETMASK, mode="p")
        asm(Op.ADD, dst=2, a=2, b=1, word=x)
        asm(Op.SETMASK, mode="all")
        asm(Op.STW, a=0, b=2, off=c * WARP_WIDTH * x, bits=8 * x, stride=8 * x)
    asm(Op.EXIT)
    return asm.finish(), _lanes(n), (0,)


def _bdi_compress(L: int) -> tuple[tuple[MicroOp, ...], int]:
    asm = _Asm()
    tmp = 6
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    n8 = L // 8
    asm(Op.SETMASK, mode="imm", imm=_lanes(n8))
    asm(Op.LDW, dst=2, a=0, bits=64, stride=64)
    asm(Op.SETP, a=2, imm=0)
    asm(Op.PAND_GLOBAL)
    asm(Op.BRA_P, mode="ng", target="REPEATED")
    asm.header(0x10 | BDI_KIND_NAMES.index("ZEROS"), tmp)

    order = BDI_TEST_ORDER[1:]
    for i, kind in enumerate(order):
        nxt = order[i + 1] if i + 1 < len(order) else "FAIL"
        asm.label(kind)
        if kind == "REPEATED":
            asm(Op.SETMASK, mode="imm", imm=_lanes(n8))
            asm(Op.LDW, dst=1, a=0, bits=64)
            asm(Op.SETP, a=2, b=1)
            asm(Op.PAND_GLOBAL)
            asm(Op.BRA_P, mode="ng", target=nxt)
            asm(Op.SETMASK, mode="imm", imm=1)
            asm(Op.MOVE, dst=tmp, imm=0x10 | BDI_KIND_NAMES.index(kind))
            asm(Op.STW, a=0, b=tmp, bits=8)
            asm(Op.STW, a=0, b=1, off=1, bits=64)
            asm(Op.EXIT)
            continue
        x, y = BDI_SHAPES[kind]
        n = L // x
        asm(Op.SETMASK, mode="imm", imm=_lanes(n))
        asm(Op.LDW, dst=1, a=0, bits=8 * x)
        for c in range(_chunks(n)):
            asm(Op.SETMASK, mode="imm", imm=_lanes(n))
            asm(Op.LDW, dst=2, a=0, off=c * WARP_WIDTH * x, bits=8 * x, stride=8 * x)
            asm(Op.SUB, dst=3, a=2, b=1, word=x)
            asm(Op.CMP_FITS, a=3, bits=8 * y, word=x, mode="t")
            asm(Op.CMP_FITS, a=2, bits=8 * y, word=x, mode="t|")
            asm(Op.PAND_GLOBAL, mode="acc" if c else "")
        asm(Op.BRA_P, mode="ng", target=nxt)
        asm(Op.SETMASK, mode="imm", imm=1)
        asm(Op.MOVE, dst=tmp, imm=0x10 | BDI_KIND_NAMES.index(kind))
        asm(Op.STW, a=0, b=tmp, bits=8)
        asm(Op.STW, a=0, b=1, off=1, bits=8 * x)
        for c in range(_chunks(n)):
            asm(Op.SETMASK, mode="imm", imm=_lanes(n))
            asm(Op.LDW, dst=2, a=0, off=c * WARP_WIDTH * x, bits=8 * x, stride=8 * x)
            asm(Op.SUB, dst=3, a=2, b=1, word=x)
            asm(Op.CMP_FITS, a=3, bits=8 * y, word=x, mode="t")
            asm(Op.SETMASK, mode="np")
            asm(Op.MOVE, dst=3, a=2)
            asm(Op.SETMASK, mode="imm", imm=_lanes(n))
            asm(Op.STW, a=0, b=3, off=1 + x + c * WARP_WIDTH * y, bits=8 * y, stride=8 * y, mode="t")
        asm(Op.EXIT)
    asm.label("FAIL")
    asm.header(0, tmp)
    return asm.finish(), _lanes(L // 2)


# ------------------------------------------------------------------ FPC

_FPC_LOADS = ((1, 8, "s", 4), (2, 16, "s", 8), (3, 32, "u", 16))


def _fpc_decompress(L: int) -> tuple[tuple[MicroOp, ...], int]:
    # Branch-free: every pattern is tried under its own mask so the
    # instruction count depends only on the line size.
    asm = _Asm()
    n = L // 4
    hlen = header_len(Algorithm.FPC, L)
    per_chunk = WARP_WIDTH * 4 // _ref.FPC_SEGMENT
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    asm(Op.ADDI, dst=3, a=0, imm=hlen)
    for s in range(L // _ref.FPC_SEGMENT):
        c, lane0 = divmod(s, per_chunk)
        lane0 *= 4
        seg = 0xF << lane0
        asm(Op.SETMASK, mode="all")
        asm(Op.LDC, dst=4, a=0, off=1, shift=2 * s, bits=2, mode="u")
        asm(Op.SETMASK, mode="imm", imm=seg)
        asm(Op.MOVE, dst=2, imm=0)
        for code, bits, sign, adv in _FPC_LOADS:
            asm(Op.SETMASK, mode="all")
            asm(Op.SETP, a=4, imm=code)
            asm(Op.SETMASK, mode="imm", imm=seg)
            asm(Op.SETMASK, mode="andp")
            asm(Op.LDC, dst=2, a=3, bits=bits, stride=bits, lane0=lane0, mode=sign)
            asm(Op.SETMASK, mode="p")
            asm(Op.ADD, dst=3, a=3, imm=adv)
        if (s + 1) % per_chunk == 0 or s + 1 == L // _ref.FPC_SEGMENT:
            asm(Op.SETMASK, mode="all")
            asm(Op.STW, a=0, b=2, off=c * WARP_WIDTH * 4, bits=32, stride=32)
    asm(Op.EXIT)
    return asm.finish(), _lanes(n)


def _fpc_compress(L: int) -> tuple[tuple[MicroOp, ...], int]:
    asm = _Asm()
    n = L // 4
    tmp = 6
    hlen = header_len(Algorithm.FPC, L)
    per_chunk = WARP_WIDTH * 4 // _ref.FPC_SEGMENT
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    asm(Op.ADDI, dst=3, a=0, imm=hlen)
    for s in range(L // _ref.FPC_SEGMENT):
        c, lane0 = divmod(s, per_chunk)
        lane0 *= 4
        if lane0 == 0:
            asm(Op.SETMASK, mode="all")
            asm(Op.LDW, dst=2, a=0, off=c * WARP_WIDTH * 4, bits=32, stride=32)
        asm(Op.SETMASK, mode="imm", imm=0xF << lane0)
        for code, bits in ((0, 0), (1, 8), (2, 16)):
            asm(Op.CMP_FITS, a=2, bits=bits, mode="s")
            asm(Op.PAND_GLOBAL)
            asm(Op.BRA_P, mode="g", target=f"P{code}_{s}")
        asm(Op.STW, a=3, b=2, bits=32, stride=32, lane0=lane0)
        asm(Op.ADDI, dst=3, a=3, imm=16)
        asm(Op.MOVE, dst=tmp, imm=3)
        asm(Op.BRA_P, mode="always", target=f"W{s}")
        asm.label(f"P0_{s}")
        asm(Op.MOVE, dst=tmp, imm=0)
        asm(Op.BRA_P, mode="always", target=f"W{s}")
        for code, bits, _, adv in _FPC_LOADS[:2]:
            asm.label(f"P{code}_{s}")
            asm(Op.STW, a=3, b=2, bits=bits, stride=bits, lane0=lane0)
            asm(Op.ADDI, dst=3, a=3, imm=adv)
            asm(Op.MOVE, dst=tmp, imm=code)
            if code == 1:
                asm(Op.BRA_P, mode="always", target=f"W{s}")
        asm.label(f"W{s}")
        asm(Op.SETMASK, mode="imm", imm=1 << lane0)
        asm(Op.STW, a=0, b=tmp, off=1, shift=2 * s, bits=2, lane0=lane0)
    asm.header(_ref.ALG_FPC << 4, tmp)
    return asm.finish(), _lanes(n)


# ------------------------------------------------------------------ C-Pack

def _cpack_decompress(count: int, mm: bool, L: int) -> tuple[tuple[MicroOp, ...], int]:
    asm = _Asm()
    n = L // 4
    dict_off = 1 + n // 2
    mm_off = dict_off + 4 * count
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    for c in range(_chunks(n)):
        asm(Op.SETMASK, mode="all")
        asm(Op.LDC, dst=1, a=0, off=1, shift=c * WARP_WIDTH * 4, bits=4, stride=4, mode="u")
        asm(Op.MOVE, dst=2, imm=0)
        if count:
            # classes full/partial read the dictionary, zero/zero-extend start from 0
            asm(Op.SETP, a=1, shift=2, fmask=1, imm=1)
            asm(Op.SETMASK, mode="p")
            asm(Op.LDW, dst=2, a=0, b=1, off=dict_off, bits=32, fmask=3, imm=4)
            asm(Op.SETMASK, mode="all")
        asm(Op.STW, a=0, b=2, off=c * WARP_WIDTH * 4, bits=32, stride=32)
        if mm:
            asm(Op.LDC, dst=3, a=0, off=mm_off + c * WARP_WIDTH, bits=8, stride=8, mode="u")
            asm(Op.SETP, a=1, shift=3, fmask=1, imm=1)
            asm(Op.SETMASK, mode="p")
            asm(Op.STW, a=0, b=3, off=c * WARP_WIDTH * 4, bits=8, stride=32)
    asm(Op.EXIT)
    return asm.finish(), _lanes(n)


def _cpack_compress(L: int) -> tuple[tuple[MicroOp, ...], int]:
    asm = _Asm()
    n = L // 4
    chunks = _chunks(n)
    dict_off = 1 + n // 2
    tmp, entry = 6, 1
    w, cls, idx, cov = ([7 + 4 * c + k for c in range(chunks)] for k in range(4))
    asm(Op.MOVE, dst=0, a=0, mode="livein")
    for c in range(chunks):
        asm(Op.SETMASK, mode="all")
        asm(Op.LDW, dst=w[c], a=0, off=c * WARP_WIDTH * 4, bits=32, stride=32)
        asm(Op.MOVE, dst=cls[c], imm=0)
        asm(Op.MOVE, dst=idx[c], imm=0)
        asm(Op.MOVE, dst=cov[c], imm=0)
        asm(Op.SETP, a=w[c], shift=8, fmask=0xFFFFFF, imm=0)
        asm(Op.SETMASK, mode="p")
        asm(Op.MOVE, dst=cls[c], imm=_ref.CP_ZEXT << 2)
        asm(Op.MOVE, dst=cov[c], imm=1)
        asm(Op.SETMASK, mode="all")
        asm(Op.SETP, a=w[c], imm=0)
        asm(Op.SETMASK, mode="p")
        asm(Op.MOVE, dst=cls[c], imm=_ref.CP_ZERO << 2)
    for k in range(_ref.CP_MAX_DICT):
        # next dictionary entry: first word not yet covered
        for c in range(chunks):
            asm(Op.SETMASK, mode="all")
            asm(Op.SETP, a=cov[c], imm=1)
            asm(Op.PAND_GLOBAL)
            asm(Op.BRA_P, mode="g", target=f"SKIP{k}_{c}")
            asm(Op.SETMASK, mode="np")
            asm(Op.MOVE, dst=entry, a=w[c], mode="first")
            asm(Op.BRA_P, mode="always", target=f"FOUND{k}")
            asm.label(f"SKIP{k}_{c}")
        asm(Op.BRA_P, mode="always", target=f"DONE{k}")
        asm.label(f"FOUND{k}")
        asm(Op.SETMASK, mode="imm", imm=1)
        asm(Op.STW, a=0, b=entry, off=dict_off + 4 * k, bits=32)
        for c in range(chunks):
            asm(Op.SETMASK, mode="all")
            asm(Op.SETP, a=cov[c], imm=0)
            asm(Op.SETMASK, mode="p")
            asm(Op.SETP, a=w[c], b=entry, shift=8, fmask=0xFFFFFF)
            asm(Op.SETMASK, mode="andp")
            asm(Op.MOVE, dst=idx[c], imm=k)
            asm(Op.MOVE, dst=cls[c], imm=_ref.CP_PARTIAL << 2)
            asm(Op.MOVE, dst=cov[c], imm=1)
            asm(Op.SETP, a=w[c], b=entry)
            asm(Op.SETMASK, mode="andp")
            asm(Op.MOVE, dst=cls[c], imm=_ref.CP_FULL << 2)
    for c in range(chunks):
        asm(Op.SETMASK, mode="all")
        asm(Op.SETP, a=cov[c], imm=1)
        asm(Op.PAND_GLOBAL, mode="acc" if c else "")
    asm(Op.BRA_P, mode="g", target=f"DONE{_ref.CP_MAX_DICT}")
    asm.header(0, tmp)
    for k in range(_ref.CP_MAX_DICT + 1):
        asm.label(f"DONE{k}")
        for c in range(chunks):
            asm(Op.SETMASK, mode="all")
            asm(Op.SETP, a=cls[c], shift=3, fmask=1, imm=0)
            asm(Op.PAND_GLOBAL, mode="acc" if c else "")
        asm(Op.BRA_P, mode="g", target=f"NOMM{k}")
        for mm in (True, False):
            if not mm:
                asm.label(f"NOMM{k}")
            for c in range(chunks):
                asm(Op.SETMASK, mode="all")
                asm(Op.ADD, dst=tmp, a=cls[c], b=idx[c])
                asm(Op.STW, a=0, b=tmp, off=1 + c * WARP_WIDTH // 2, bits=4, stride=4)
                if mm:
                    asm(Op.STW, a=0, b=w[c], off=dict_off + 4 * k + c * WARP_WIDTH, bits=8, stride=8)
            asm.header((_ref.ALG_CPACK << 4) | (8 if mm else 0) | k, tmp)
    return asm.finish(), _lanes(n)


# ------------------------------------------------------------------ library

def build_library(line_size: int = 128, warp_width: int = WARP_WIDTH,
                  max_iterations: int = MAX_ITERATIONS) -> SubroutineLibrary:
    """Every decompress subroutine (High) and one compressor per algorithm (Low)."""
    errors = []
    if line_size not in LINE_SIZES:
        errors.append(f"line_size {line_size} not in {LINE_SIZES}")
    if warp_width != WARP_WIDTH:
        errors.append(f"warp_width must be {WARP_WIDTH}")
    if not errors:
        widest = line_size // min(x for x, _ in BDI_SHAPES.values())
        if widest > warp_width * max_iterations:
            errors.append(f"{widest} words exceed {warp_width} lanes x {max_iterations} iterations")
    if errors:
        raise ConfigError(errors)

    built = []

    def add(alg, enc, direction, ops, mask, live_in=(0,)):
        prio = Priority.HIGH if direction == Direction.LOAD else Priority.LOW
        name = f"{alg.value}/{enc}/{direction.value}"
        built.append(Subroutine(len(built), name, alg, enc, direction, ops, _regs(ops), prio,
                                live_in, (), mask))

    for kind in BDI_KIND_NAMES:
        ops, mask, live_in = _bdi_decompress(kind, line_size)
        add(Algorithm.BDI, kind, Direction.LOAD, ops, mask, live_in)
    ops, mask = _fpc_decompress(line_size)
    add(Algorithm.FPC, "SEGMENTED", Direction.LOAD, ops, mask)
    for enc in CPACK_ENCODINGS:
        count, mm = int(enc[4]), enc.endswith("_MM")
        ops, mask = _cpack_decompress(count, mm, line_size)
        add(Algorithm.CPACK, enc, Direction.LOAD, ops, mask)
    for alg, builder in ((Algorithm.BDI, _bdi_compress), (Algorithm.FPC, _fpc_compress),
                         (Algorithm.CPACK, _cpack_compress)):
        ops, mask = builder(line_size)
        add(alg, "ALL", Direction.STORE, ops, mask)
    return SubroutineLibrary(line_size, tuple(built))


def validate(sub: Subroutine) -> list[str]:
    """All structural problems in ``sub``; empty when well formed."""
    errors = []
    ops = sub.ops
    if not ops:
        return ["no terminator: empty subroutine"]
    n = len(ops)
    for i, op in enumerate(ops):
        for r in (*op.reads(), *op.writes()):
            if not 0 <= r < sub.register_requirement:
                errors.append(f"register out of window: r{r} at {i} (window {sub.register_requirement})")
        if op.opcode == Op.MOVE and op.mode == "livein" and not 0 <= (op.a or 0) < len(sub.live_in):
            errors.append(f"live-in slot {op.a} undeclared at {i}")
        if op.opcode == Op.BRA_P and not (isinstance(op.target, int) and 0 <= op.target < n):
            errors.append(f"branch target {op.target!r} out of range at {i}")
    # every reachable path must hit EXIT before running off the end
    seen, work = set(), [0]
    while work:
        i = work.pop()
        if i in seen:
            continue
        if i >= n:
            errors.append("no terminator: control falls off the end")
            continue
        seen.add(i)
        op = ops[i]
        if op.opcode == Op.EXIT:
            continue
        if op.opcode == Op.BRA_P:
            if isinstance(op.target, int) and 0 <= op.target < n:
                work.append(op.target)
            if op.mode == "always":
                continue
        work.append(i + 1)
    used = _regs(ops)
    if used != sub.register_requirement and not errors:
        errors.append(f"register_requirement {sub.register_requirement} != max id + 1 ({used})")
    return errors
