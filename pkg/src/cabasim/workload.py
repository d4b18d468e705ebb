"""Synthetic kernels, data profiles and the text trace format.

A workload is a memory image (bytes from address 0) plus one in-order
instruction list per parent warp. Instructions operate at coalesced-line
granularity: a warp-wide load of 32 x 4 B is one ``LD`` of 128 bytes.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError

TRACE_HEADER = "#cabatrace v1"
ADDR_REG = 0  # holds the coalesced line address of the last memory op


class KernelKind(str, enum.Enum):
    STREAM_COPY = "StreamCopy"
    STRIDED_READ = "StridedRead"
    REDUCTION = "Reduction"


@dataclass(frozen=True)
class LowDynamicRange:
    base: int = 0x8001D000
    delta_bits: int = 8


@dataclass(frozen=True)
class FrequentPattern:
    zero_fraction: float = 0.5
    narrow_fraction: float = 0.3


@dataclass(frozen=True)
class Dictionary:
    distinct_words: int = 3


@dataclass(frozen=True)
class Random:
    pass


DataProfile = LowDynamicRange | FrequentPattern | Dictionary | Random

PROFILES = {
    "LowDynamicRange": LowDynamicRange,
    "FrequentPattern": FrequentPattern,
    "Dictionary": Dictionary,
    "Random": Random,
}


def parse_profile(text: str) -> DataProfile:
    """``"LowDynamicRange(0x8001D000, 8)"`` -> profile object."""
    text = text.strip()
    name, _, rest = text.partition("(")
    cls = PROFILES.get(name.strip())
    if cls is None:
        raise ConfigError(f"unknown data profile {name!r}; valid: {', '.join(PROFILES)}")
    args = [a.strip() for a in rest.rstrip(")").split(",") if a.strip()]
    try:
        vals = [float(a) if "." in a else int(a, 0) for a in args]
        return cls(*vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad arguments for {name}: {exc}") from None


def profile_text(p: DataProfile) -> str:
    if isinstance(p, LowDynamicRange):
        return f"LowDynamicRange({p.base:#x}, {p.delta_bits})"
    if isinstance(p, FrequentPattern):
        return f"FrequentPattern({p.zero_fraction}, {p.narrow_fraction})"
    if isinstance(p, Dictionary):
        return f"Dictionary({p.distinct_words})"
    return "Random()"


def _validate_profile(p: DataProfile) -> list[str]:
    errs = []
    if isinstance(p, FrequentPattern):
        for name in ("zero_fraction", "narrow_fraction"):
            v = getattr(p, name)
            if not 0.0 <= v <= 1.0:
                errs.append(f"{name}={v} outside [0, 1]")
        if p.zero_fraction + p.narrow_fraction > 1.0 + 1e-12:
            errs.append("zero_fraction + narrow_fraction exceeds 1")
    elif isinstance(p, LowDynamicRange):
        if not 3 <= p.delta_bits <= 32:
            errs.append(f"delta_bits={p.delta_bits} outside 3..32")
    elif isinstance(p, Dictionary):
        if p.distinct_words < 1:
            errs.append("distinct_words must be >= 1")
    return errs


def profile_lines(profile: DataProfile, count: int, seed: int, line_size: int = 128) -> np.ndarray:
    """``count`` lines drawn from ``profile`` as a (count, line_size) uint8 array."""
    errs = _validate_profile(profile)
    if errs:
        raise ConfigError(errs)
    rng = np.random.default_rng(seed)
    if isinstance(profile, Random):
        return rng.integers(0, 256, size=(count, line_size), dtype=np.uint8)
    if isinstance(profile, LowDynamicRange):
        # deltas in [0, 2^(bits-2)) keep every pairwise difference inside a signed (bits-1)-bit field
        n = line_size // 8
        span = 1 << (profile.delta_bits - 2)
        deltas = rng.integers(0, span, size=(count, n), dtype=np.uint64)
        imm = rng.random((count, n)) < 0.25
        imm[:, 0] = False
        words = np.where(imm, deltas, np.uint64(profile.base) + deltas)
        return words.astype("<u8").view(np.uint8).reshape(count, line_size)
    if isinstance(profile, FrequentPattern):
        nseg = line_size // 16
        u = rng.random((count, nseg))
        zero = u < profile.zero_fraction
        narrow = (u >= profile.zero_fraction) & (u < profile.zero_fraction + profile.narrow_fraction)
        words = rng.integers(0, 1 << 32, size=(count, nseg, 4), dtype=np.uint64)
        small = rng.integers(-128, 128, size=(count, nseg, 4)).astype(np.int64) & 0xFFFFFFFF
        words = np.where(narrow[..., None], small.astype(np.uint64), words)
        words = np.where(zero[..., None], np.uint64(0), words)
        return words.astype("<u4").view(np.uint8).reshape(count, line_size)
    # Dictionary: words from a few random values, some with a perturbed low byte, some zero
    n = line_size // 4
    k = profile.distinct_words
    values = rng.integers(1 << 8, 1 << 32, size=(count, k), dtype=np.uint64)
    pick = rng.integers(0, k, size=(count, n))
    words = np.take_along_axis(values, pick, axis=1)
    u = rng.random((count, n))
    low = rng.integers(0, 256, size=(count, n), dtype=np.uint64)
    words = np.where(u < 0.25, (words & np.uint64(0xFFFFFF00)) | low, words)
    words = np.where(u > 0.9, np.uint64(0), words)
    return words.astype("<u4").view(np.uint8).reshape(count, line_size)


# ------------------------------------------------------------ instructions

@dataclass(frozen=True, slots=True)
class ParentInstr:
    """One warp-level instruction. ``data`` is the literal payload of a store."""

    op: str  # "LD" | "ST" | "ALU"
    dst: int | None = None
    srcs: tuple[int, ...] = ()
    addr: int = 0
    size: int = 0
    data: bytes | None = None

    def __str__(self) -> str:
        if self.op == "ALU":
            return f"ALU r{self.dst} <- {','.join(f'r{s}' for s in self.srcs)}"
        if self.op == "LD":
            return f"LD r{self.dst} <- [{self.addr:#x}] {self.size}B"
        src = f"r{self.srcs[0]}" if self.srcs else "imm"
        return f"ST [{self.addr:#x}] <- {src} {self.size}B"


@dataclass
class Workload:
    memory: bytes
    programs: list[list[ParentInstr]]
    line_size: int = 128
    name: str = ""

    @property
    def warps(self) -> int:
        return len(self.programs)

    def instruction_count(self) -> int:
        return sum(len(p) for p in self.programs)


@dataclass(frozen=True)
class SyntheticKernelSpec:
    kind: KernelKind = KernelKind.STREAM_COPY
    warps: int = 16
    elements: int = 16384  # 4-byte elements per input array
    data_profile: DataProfile = field(default_factory=LowDynamicRange)
    unroll: int = 4
    stride_lines: int = 2
    alu_per_line: int = 1

    def validate(self, memory_size: int = 64 << 20, line_size: int = 128, regs_per_thread: int = 8) -> list[str]:
        errs = []
        if self.warps < 1:
            errs.append("warps must be >= 1")
        if self.elements < 1:
            errs.append("elements must be >= 1")
        if self.unroll < 1 or self.unroll + 2 > regs_per_thread:
            errs.append(f"unroll={self.unroll} needs {self.unroll + 2} registers, have {regs_per_thread}")
        if self.stride_lines < 1:
            errs.append("stride_lines must be >= 1")
        footprint = 2 * self.elements * 4 + line_size
        if footprint > memory_size:
            errs.append(f"elements x 4 B ({footprint} B with output) exceeds modeled memory {memory_size} B")
        errs.extend(_validate_profile(self.data_profile))
        return errs


def generate(spec: SyntheticKernelSpec, seed: int, line_size: int = 128,
             memory_size: int = 64 << 20, regs_per_thread: int = 8) -> Workload:
    """Deterministic (memory image, per-warp programs) for ``spec`` and ``seed``."""
    errs = spec.validate(memory_size, line_size, regs_per_thread)
    if errs:
        raise ConfigError(errs)
    nlines = -(-spec.elements * 4 // line_size)
    src = profile_lines(spec.data_profile, nlines, seed, line_size)
    src_bytes = src.tobytes()
    dst_base = nlines * line_size
    kind = KernelKind(spec.kind)
    programs: list[list[ParentInstr]] = [[] for _ in range(spec.warps)]
    acc = spec.unroll + 1

    if kind == KernelKind.STREAM_COPY:
        memory = src_bytes + bytes(nlines * line_size)
        for w in range(spec.warps):
            mine = list(range(w, nlines, spec.warps))
            prog = programs[w]
            for i in range(0, len(mine), spec.unroll):
                group = mine[i:i + spec.unroll]
                for j, ln in enumerate(group):
                    prog.append(ParentInstr("LD", dst=1 + j, addr=ln * line_size, size=line_size))
                for _ in range(spec.alu_per_line * len(group)):
                    prog.append(ParentInstr("ALU", dst=acc, srcs=(acc,)))
                for j, ln in enumerate(group):
                    prog.append(ParentInstr("ST", srcs=(1 + j,), addr=dst_base + ln * line_size, size=line_size))
    elif kind == KernelKind.STRIDED_READ:
        memory = src_bytes
        step = spec.warps * spec.stride_lines
        for w in range(spec.warps):
            prog = programs[w]
            mine = list(range(w * spec.stride_lines, nlines, step))
            for i in range(0, len(mine), spec.unroll):
                group = mine[i:i + spec.unroll]
                for j, ln in enumerate(group):
                    prog.append(ParentInstr("LD", dst=1 + j, addr=ln * line_size, size=line_size))
                for j in range(len(group)):
                    for _ in range(spec.alu_per_line):
                        prog.append(ParentInstr("ALU", dst=acc, srcs=(acc, 1 + j)))
    else:  # REDUCTION: each warp sums its lines and stores one 4-byte partial
        memory = src_bytes + bytes(line_size * (-(-spec.warps * 4 // line_size)))
        words = src.view("<u4").reshape(nlines, line_size // 4)
        for w in range(spec.warps):
            prog = programs[w]
            mine = list(range(w, nlines, spec.warps))
            for i in range(0, len(mine), spec.unroll):
                group = mine[i:i + spec.unroll]
                for j, ln in enumerate(group):
                    prog.append(ParentInstr("LD", dst=1 + j, addr=ln * line_size, size=line_size))
                for j in range(len(group)):
                    for _ in range(spec.alu_per_line):
                        prog.append(ParentInstr("ALU", dst=acc, srcs=(acc, 1 + j)))
            total = int(words[mine].sum(dtype=np.uint64)) & 0xFFFFFFFF if mine else 0
            prog.append(ParentInstr("ST", srcs=(acc,), addr=dst_base + 4 * w, size=4,
                                    data=total.to_bytes(4, "little")))
    return Workload(memory=memory, programs=programs, line_size=line_size,
                    name=f"{kind.value}/{profile_text(spec.data_profile)}")


# ------------------------------------------------------------------ traces

@dataclass(frozen=True, slots=True)
class TraceRecord:
    warp_id: int
    op: str
    addr: int
    size: int


def parse_trace(source) -> list[TraceRecord]:
    """Parse a ``#cabatrace v1`` file (path or text lines)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).is_file()):
        lines = Path(source).read_text().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)
    records = []
    seen_header = False
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            if text.startswith("#cabatrace"):
                if text != TRACE_HEADER:
                    raise ParseError(lineno, f"unsupported trace version {text!r}")
                seen_header = True
            continue
        if not seen_header:
            raise ParseError(lineno, f"missing {TRACE_HEADER!r} header")
        parts = text.split()
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(parts)}")
        warp_s, op, addr_s, size_s = parts
        op = op.upper()
        if op not in ("LD", "ST", "ALU"):
            raise ParseError(lineno, f"unknown op {op!r}")
        try:
            warp, addr, size = int(warp_s, 16), int(addr_s, 16), int(size_s, 16)
        except ValueError:
            raise ParseError(lineno, "fields must be hexadecimal") from None
        if size <= 0:
            raise ParseError(lineno, "size must be positive")
        records.append(TraceRecord(warp, op, addr, size))
    return records


def write_trace(records, path) -> None:
    out = [TRACE_HEADER]
    out += [f"{r.warp_id:x} {r.op} {r.addr:x} {r.size:x}" for r in records]
    Path(path).write_text("\n".join(out) + "\n")


def _store_bytes(seed: int, index: int, size: int) -> bytes:
    h = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=32)
    out = bytearray()
    while len(out) < size:
        out += h.digest()
        h.update(b"+")
    return bytes(out[:size])


def trace_program(records, line_size: int = 128, memory: bytes = b"", seed: int = 0,
                  regs_per_thread: int = 8) -> Workload:
    """Turn trace records into per-warp programs. Store payloads are seeded pseudo-random bytes."""
    if not records:
        return Workload(memory=memory, programs=[], line_size=line_size, name="trace")
    nwarps = max(r.warp_id for r in records) + 1
    programs: list[list[ParentInstr]] = [[] for _ in range(nwarps)]
    nregs = max(2, regs_per_thread - 1)
    last_ld: dict[int, int] = {}
    for i, r in enumerate(records):
        if r.op != "ALU" and (r.addr % line_size) + r.size > line_size:
            raise ParseError(i + 1, f"access {r.addr:#x}+{r.size} crosses a line boundary")
        prog = programs[r.warp_id]
        if r.op == "LD":
            reg = 1 + sum(1 for p in prog if p.op == "LD") % (nregs - 1)
            prog.append(ParentInstr("LD", dst=reg, addr=r.addr, size=r.size))
            last_ld[r.warp_id] = reg
        elif r.op == "ST":
            prog.append(ParentInstr("ST", addr=r.addr, size=r.size, data=_store_bytes(seed, i, r.size)))
        else:
            src = last_ld.get(r.warp_id)
            prog.append(ParentInstr("ALU", dst=nregs, srcs=(src,) if src is not None else ()))
    return Workload(memory=memory, programs=programs, line_size=line_size, name="trace")
