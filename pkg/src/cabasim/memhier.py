"""L1, store buffer, L2, DRAM and compression metadata.

The L1 only ever holds raw bytes. L2 and DRAM hold each line in its stored
form (compressed or raw); a compressed line still takes a full L2 slot. The
DRAM data bus is charged per 32-byte burst, and every DRAM access first
consults the metadata cache to learn how many bursts the line occupies.

Stores use an optimistic protocol: a partial store is sent downstream as if
the target were raw. If L2 finds the line compressed it returns the stored
form instead of merging, the core decompresses it with an assist warp,
merges and retransmits the full line raw. Full-line stores are offered to a
low-priority compression assist before being written back.
"""

from __future__ import annotations

import enum
import heapq
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Callable

from . import codec
from .codec import Algorithm, CompressedLine
from .errors import AddressOutOfRange, ConfigError


class EventQueue:
    """Deterministic timed callbacks: ties run in scheduling order."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0

    def at(self, cycle: int, fn: Callable, *args) -> None:
        heapq.heappush(self._heap, (cycle, self._seq, fn, args))
        self._seq += 1

    def next_cycle(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def run_due(self, cycle: int) -> int:
        n = 0
        heap = self._heap
        while heap and heap[0][0] <= cycle:
            _, _, fn, args = heapq.heappop(heap)
            fn(*args)
            n += 1
        return n

    def __len__(self) -> int:
        return len(self._heap)


class LruCache:
    """Set-associative LRU over integer keys; ``key % sets`` picks the set."""

    def __init__(self, sets: int, ways: int):
        if sets < 1 or ways < 1:
            raise ConfigError(f"cache needs sets >= 1 and ways >= 1, got {sets}x{ways}")
        self.nsets = sets
        self.ways = ways
        self.sets = [OrderedDict() for _ in range(sets)]

    def get(self, key: int, touch: bool = True):
        s = self.sets[key % self.nsets]
        if key not in s:
            return None
        if touch:
            s.move_to_end(key)
        return s[key]

    def __contains__(self, key: int) -> bool:
        return key in self.sets[key % self.nsets]

    def put(self, key: int, value):
        """Insert or update; returns the evicted ``(key, value)`` or None."""
        s = self.sets[key % self.nsets]
        if key in s:
            s[key] = value
            s.move_to_end(key)
            return None
        victim = s.popitem(last=False) if len(s) >= self.ways else None
        s[key] = value
        return victim

    def pop(self, key: int, default=None):
        return self.sets[key % self.nsets].pop(key, default)

    def items(self):
        for s in self.sets:
            yield from s.items()


class MdCache:
    """Cache of 2-bit burst codes; one block covers ``block_size * 4`` lines."""

    def __init__(self, size: int = 8 << 10, ways: int = 4, block_size: int = 64):
        blocks = size // block_size
        self.lines_per_block = block_size * 4
        self.cache = LruCache(blocks // ways, ways)
        self.hits = 0
        self.misses = 0

    def access(self, line_index: int) -> bool:
        block = line_index // self.lines_per_block
        if self.cache.get(block) is not None:
            self.hits += 1
            return True
        self.cache.put(block, True)
        self.misses += 1
        return False

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


class MetadataStore:
    """Per-line burst code 1..4 in DRAM; 4 also means stored raw."""

    def __init__(self, lines: int, default_code: int):
        self.lines = lines
        self.default = default_code
        self.codes: dict[int, int] = {}

    def get(self, line_index: int) -> int:
        return self.codes.get(line_index, self.default)

    def set(self, line_index: int, code: int) -> None:
        if not 1 <= code <= 4:
            raise ValueError(f"metadata code {code} outside 1..4")
        self.codes[line_index] = code

    @property
    def backing_bytes(self) -> int:
        return -(-2 * self.lines // 8)


@dataclass
class DramRequest:
    line: int
    bursts: int
    md_bursts: int
    write: bool
    done: Callable | None
    bank: int = 0
    row: int = 0
    activated: bool = False  # needed its own row activation


class DramModel:
    """One data bus shared by ``banks`` banks; FCFS per bank with a short row-hit bypass."""

    def __init__(self, cycles_per_burst: int = 2, banks: int = 16, lines_per_row: int = 16,
                 row_hit_latency: int = 20, row_miss_penalty: int = 20, bypass_depth: int = 4):
        self.cpb = cycles_per_burst
        self.banks = banks
        self.lines_per_row = lines_per_row
        self.t_hit = row_hit_latency
        self.t_miss = row_miss_penalty
        self.bypass = bypass_depth
        self.queue: list[DramRequest] = []
        self.bank_ready = [0] * banks
        self.open_row = [-1] * banks
        self.bus_free = 0
        self.busy_cycles = 0
        self.data_bursts = 0
        self.md_bursts = 0
        self.raw_bursts = 0
        self.reads = 0
        self.writes = 0
        self.row_hits = 0

    def enqueue(self, line: int, bursts: int, md_bursts: int, write: bool, raw_bursts: int,
                done: Callable | None = None) -> None:
        chunk = line // self.lines_per_row
        req = DramRequest(line, bursts, md_bursts, write, done, chunk % self.banks, chunk // self.banks)
        self.queue.append(req)
        self.data_bursts += bursts
        self.md_bursts += md_bursts
        self.raw_bursts += raw_bursts
        if write:
            self.writes += 1
        else:
            self.reads += 1

    def _pick(self, cycle: int) -> int | None:
        """Index of the next request: each ready bank offers its first row hit among its
        ``bypass`` oldest requests (else its oldest); the oldest offer wins the bus."""
        seen: dict[int, int] = {}
        offer: dict[int, int] = {}
        for i, r in enumerate(self.queue):
            b = r.bank
            if self.bank_ready[b] > cycle:
                continue
            k = seen.get(b, 0)
            if k >= self.bypass:
                continue
            seen[b] = k + 1
            if b not in offer:
                offer[b] = i
            elif self.open_row[b] == r.row and self.open_row[b] != self.queue[offer[b]].row:
                offer[b] = i
        return min(offer.values()) if offer else None

    def tick(self, cycle: int, events: EventQueue) -> bool:
        """Issue at most one DRAM command (activate or column access) this cycle."""
        if not self.queue:
            return False
        i = self._pick(cycle)
        if i is None:
            return False
        r = self.queue[i]
        if self.open_row[r.bank] != r.row:
            # activation occupies only the bank; other banks keep using the bus
            self.open_row[r.bank] = r.row
            self.bank_ready[r.bank] = cycle + self.t_miss
            r.activated = True
            return True
        if self.bus_free > cycle + self.t_hit:
            return False
        self.queue.pop(i)
        self.row_hits += not r.activated
        n = r.bursts + r.md_bursts
        self.bank_ready[r.bank] = cycle + n * self.cpb
        start = max(cycle + self.t_hit, self.bus_free)
        self.bus_free = start + n * self.cpb
        self.busy_cycles += n * self.cpb
        if r.done is not None:
            events.at(self.bus_free, r.done)
        return True

    def next_wake(self, cycle: int) -> int | None:
        if not self.queue:
            return None
        t = max(cycle + 1, self.bus_free - self.t_hit)
        soonest_bank = min(self.bank_ready[r.bank] for r in self.queue)
        return max(t, soonest_bank)


@dataclass
class L2Line:
    form: CompressedLine
    dirty: bool = False


class SbState(str, enum.Enum):
    FULL = "full"            # whole line buffered, not yet sent
    COMPRESSING = "compressing"
    PARTIAL = "partial"      # optimistic partial write in flight
    RETRY = "retry"          # target was compressed, decompress assist running


@dataclass
class SbEntry:
    line: int
    warp: int
    data: bytearray
    mask: bytearray
    state: SbState
    seq: int
    assist: object = None
    dirty_after_send: bool = False

    @property
    def full(self) -> bool:
        return all(self.mask)


@dataclass
class Mshr:
    line: int
    owner: int
    waiters: list = field(default_factory=list)   # (warp, reg, offset, size, patches seen)
    patches: list = field(default_factory=list)   # (offset, bytes)


@dataclass
class MemConfig:
    line_size: int = 128
    burst_size: int = 32
    memory_size: int = 64 << 20
    l1_size: int = 16 << 10
    l1_ways: int = 4
    store_buffer_sets: int = 2
    l2_size: int = 768 << 10
    l2_ways: int = 16
    mshrs: int = 32
    lsu_depth: int = 16
    l1_latency: int = 4
    l2_request_latency: int = 10
    l2_latency: int = 20
    cycles_per_burst: int = 2
    dram_banks: int = 16
    row_hit_latency: int = 20
    row_miss_penalty: int = 20
    bypass_depth: int = 4
    md_cache_size: int = 8 << 10
    md_cache_ways: int = 4
    md_block_size: int = 64
    uncompressed_l2: bool = False

    @property
    def l1_sets(self) -> int:
        return self.l1_size // (self.line_size * self.l1_ways)

    @property
    def store_buffer_lines(self) -> int:
        return self.store_buffer_sets * self.l1_ways

    def validate(self) -> list[str]:
        errs = []
        if self.line_size not in codec.LINE_SIZES:
            errs.append(f"line_size {self.line_size} not in {codec.LINE_SIZES}")
        elif self.line_size % self.burst_size:
            errs.append("line_size must be a multiple of burst_size")
        elif self.line_size // self.burst_size > 4:
            errs.append("a line must fit in at most 4 bursts (2-bit metadata)")
        if self.memory_size <= 0 or self.memory_size % self.line_size:
            errs.append("memory_size must be a positive multiple of line_size")
        if self.l1_sets <= self.store_buffer_sets:
            errs.append("L1 needs more sets than the store buffer reserves")
        for name in ("mshrs", "lsu_depth", "l1_latency", "l2_latency", "cycles_per_burst", "dram_banks",
                     "l2_request_latency"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        return errs


class MemorySystem:
    """Timing and contents of everything below the register file.

    The owner wires four hooks before use:

    - ``load_done(warp, reg, data)``
    - ``decompress(warp, form, line_addr, callback) -> bool`` (False: retry later)
    - ``compress(warp, line_bytes, line_addr, callback, on_kill) -> handle | None``
    - ``kill(handle)``
    """

    def __init__(self, cfg: MemConfig, image: bytes, algorithm, events: EventQueue):
        errs = cfg.validate()
        if len(image) > cfg.memory_size:
            errs.append(f"memory image of {len(image)} B exceeds memory_size {cfg.memory_size}")
        if errs:
            raise ConfigError(errs)
        self.cfg = cfg
        self.L = cfg.line_size
        self.algorithm = algorithm
        self.compression = algorithm not in (Algorithm.NONE, "NONE")
        self.events = events
        self.cycle = 0
        self._amem_cycle = -1
        L = self.L
        self.nlines = cfg.memory_size // L
        self._zero_form = self._compress(bytes(L))
        self.backing: dict[int, CompressedLine] = {}
        for i in range(0, len(image), L):
            chunk = image[i:i + L]
            if len(chunk) < L:
                chunk = chunk + bytes(L - len(chunk))
            if any(chunk):
                self.backing[i // L] = self._compress(chunk)
        self.metadata = MetadataStore(self.nlines, self._zero_form.bursts(cfg.burst_size))
        for idx, form in self.backing.items():
            self.metadata.set(idx, form.bursts(cfg.burst_size))
        self.md_cache = MdCache(cfg.md_cache_size, cfg.md_cache_ways, cfg.md_block_size)
        self.dram = DramModel(cfg.cycles_per_burst, cfg.dram_banks, 2048 // L, cfg.row_hit_latency,
                              cfg.row_miss_penalty, cfg.bypass_depth)
        self.l1 = LruCache(cfg.l1_sets - cfg.store_buffer_sets, cfg.l1_ways)
        self.l2 = LruCache(cfg.l2_size // (L * cfg.l2_ways), cfg.l2_ways)
        self.l2_pending: dict[int, list] = {}
        self.mshr: dict[int, Mshr] = {}
        # compressed lines parked in L1 until their assist finishes; they hold no MSHR
        self.decoding: dict[int, Mshr] = {}
        self.lsu: deque = deque()
        self.sb: OrderedDict[int, SbEntry] = OrderedDict()
        self._sb_seq = 0
        self.retry_queue: list = []   # decompress triggers waiting for an AWT slot
        self.retry_ready: Callable[[], bool] = lambda: True
        self.stats = {"l1_hits": 0, "l1_misses": 0, "l2_hits": 0, "l2_misses": 0, "store_retries": 0,
                      "sb_overflows": 0, "writes_compressed": 0, "writes_raw": 0, "loads": 0, "stores": 0}
        self.load_done = lambda warp, reg, data: None
        self.decompress = None
        self.compress = None
        self.kill = lambda handle: None

    # ---------------------------------------------------------- helpers

    def _compress(self, line: bytes) -> CompressedLine:
        if not self.compression:
            return codec.raw(line)
        return codec.compress(line, self.algorithm, self.cfg.burst_size)

    def finish_image(self, image: bytes, line: bytes) -> CompressedLine:
        """Stored form for a compression assist's output (raw if it gave up or saved nothing)."""
        if not image:
            return codec.raw(line)
        alg, _ = codec.decode_tag(image)
        return codec.finish(alg, image, line, self.cfg.burst_size)

    def check_addr(self, addr: int, size: int) -> int:
        if addr < 0 or size <= 0 or addr + size > self.cfg.memory_size:
            raise AddressOutOfRange(f"access {addr:#x}+{size} outside memory of {self.cfg.memory_size:#x} B")
        line, off = divmod(addr, self.L)
        if off + size > self.L:
            raise AddressOutOfRange(f"access {addr:#x}+{size} crosses a line boundary")
        return line

    def stored_form(self, line: int) -> CompressedLine:
        return self.backing.get(line, self._zero_form)

    def lsu_free(self) -> bool:
        return len(self.lsu) < self.cfg.lsu_depth

    def busy(self) -> bool:
        return bool(self.lsu or self.sb or self.mshr or self.decoding or self.l2_pending or self.dram.queue or self.retry_queue)

    # ---------------------------------------------------------- core side

    def issue_load(self, warp: int, reg: int, addr: int, size: int) -> None:
        line = self.check_addr(addr, size)
        self.lsu.append(("LD", warp, reg, line, addr % self.L, size))

    def issue_store(self, warp: int, addr: int, data: bytes) -> None:
        line = self.check_addr(addr, len(data))
        self.lsu.append(("ST", warp, line, addr % self.L, bytes(data)))

    def assist_port_free(self, cycle: int) -> bool:
        return self._amem_cycle != cycle

    def issue_assist_mem(self, done: Callable) -> None:
        # assist loads and stores hit the staging buffer on their own port,
        # so they never queue behind parent loads waiting for an MSHR
        self._amem_cycle = self.cycle
        self.events.at(self.cycle + self.cfg.l1_latency, done)

    def tick(self, cycle: int) -> bool:
        """One LSU step, one DRAM scheduling step and trigger retries. True if anything moved."""
        self.cycle = cycle
        moved = False
        if self.retry_queue and self.retry_ready():
            pending, self.retry_queue = self.retry_queue, []
            for args in pending:
                if self.decompress(*args):
                    moved = True
                else:
                    self.retry_queue.append(args)
        if self.lsu and self._lsu_step(cycle):
            moved = True
        if self.dram.tick(cycle, self.events):
            moved = True
        return moved

    def _lsu_step(self, cycle: int) -> bool:
        req = self.lsu[0]
        if req[0] == "LD":
            if not self._load(cycle, *req[1:]):
                return False
        elif not self._store(cycle, *req[1:]):
            return False
        self.lsu.popleft()
        return True

    def _load(self, cycle, warp, reg, line, off, size) -> bool:
        data = self.l1.get(line)
        if data is not None:
            self.stats["l1_hits"] += 1
            self.stats["loads"] += 1
            self.events.at(cycle + self.cfg.l1_latency, self.load_done, warp, reg, bytes(data[off:off + size]))
            return True
        m = self.mshr.get(line) or self.decoding.get(line)
        if m is None:
            if len(self.mshr) >= self.cfg.mshrs:
                return False
            m = self.mshr[line] = Mshr(line, warp)
            e = self.sb.get(line)
            if e is not None:
                m.patches.extend(_runs(e.data, e.mask))
            self._to_l2(cycle, ("READ", line, self._fill))
        self.stats["l1_misses"] += 1
        self.stats["loads"] += 1
        m.waiters.append((warp, reg, off, size, len(m.patches)))
        return True

    def _store(self, cycle, warp, line, off, data) -> bool:
        L = self.L
        e = self.sb.get(line)
        if e is None and len(self.sb) >= self.cfg.store_buffer_lines:
            victim = next((x for x in self.sb.values() if x.state in (SbState.FULL, SbState.COMPRESSING)), None)
            if victim is None:
                return False
            self.stats["sb_overflows"] += 1
            if victim.state == SbState.COMPRESSING:
                self.kill(victim.assist)  # the kill callback writes it raw
            else:
                self._send_full(cycle, victim, codec.raw(bytes(victim.data)))
        self.stats["stores"] += 1
        cached = self.l1.get(line, touch=False)
        if cached is not None:
            cached[off:off + len(data)] = data
        m = self.mshr.get(line) or self.decoding.get(line)
        if m is not None:
            m.patches.append((off, data))
        if e is None:
            self._sb_seq += 1
            e = SbEntry(line, warp, bytearray(L), bytearray(L), SbState.FULL, self._sb_seq)
            e.data[off:off + len(data)] = data
            e.mask[off:off + len(data)] = b"\x01" * len(data)
            self.sb[line] = e
            if e.full:
                self._handle_full(cycle, e)
            else:
                e.state = SbState.PARTIAL
                self._to_l2(cycle, ("PWRITE", line, _runs(e.data, e.mask), self._partial_reply))
            return True
        e.data[off:off + len(data)] = data
        e.mask[off:off + len(data)] = b"\x01" * len(data)
        if e.state == SbState.COMPRESSING:
            handle, e.assist = e.assist, None
            e.state = SbState.FULL
            self.kill(handle)
            self._handle_full(cycle, e)
        elif e.state == SbState.FULL:
            self._handle_full(cycle, e)
        else:
            e.dirty_after_send = True
        return True

    def _handle_full(self, cycle: int, e: SbEntry) -> None:
        e.state = SbState.FULL
        line_bytes = bytes(e.data)
        if self.compression and self.compress is not None:
            handle = self.compress(e.warp, line_bytes, e.line * self.L,
                                   lambda image, e=e, b=line_bytes: self._compressed(e, b, image),
                                   lambda e=e: self.on_assist_killed(e))
            if handle is not None:
                e.state = SbState.COMPRESSING
                e.assist = handle
                return
        self._send_full(cycle, e, codec.raw(line_bytes))

    def _compressed(self, e: SbEntry, line_bytes: bytes, image: bytes) -> None:
        if self.sb.get(e.line) is not e or e.state != SbState.COMPRESSING:
            return
        e.assist = None
        self._send_full(self.cycle, e, self.finish_image(image, line_bytes))

    def on_assist_killed(self, e: SbEntry) -> None:
        """A compression assist for ``e`` was killed: write the line raw."""
        if self.sb.get(e.line) is e and e.state == SbState.COMPRESSING:
            e.assist = None
            self._send_full(self.cycle, e, codec.raw(bytes(e.data)))

    def _send_full(self, cycle: int, e: SbEntry, form: CompressedLine) -> None:
        self.stats["writes_compressed" if form.compressed else "writes_raw"] += 1
        del self.sb[e.line]
        self._to_l2(cycle, ("FWRITE", e.line, form))

    def _partial_reply(self, line: int, form: CompressedLine | None) -> None:
        e = self.sb[line]
        if form is None:  # merged at L2
            if e.dirty_after_send:
                e.dirty_after_send = False
                if e.full:
                    self._handle_full(self.cycle, e)
                else:
                    self._to_l2(self.cycle, ("PWRITE", line, _runs(e.data, e.mask), self._partial_reply))
            else:
                del self.sb[line]
            return
        self.stats["store_retries"] += 1
        e.state = SbState.RETRY
        args = (e.warp, form, line * self.L, lambda raw, e=e: self._retry_merge(e, raw))
        if not self.decompress(*args):
            self.retry_queue.append(args)

    def _retry_merge(self, e: SbEntry, raw: bytes) -> None:
        merged = bytearray(raw)
        for i in range(self.L):
            if e.mask[i]:
                merged[i] = e.data[i]
        e.data[:] = merged
        e.mask[:] = b"\x01" * self.L
        e.dirty_after_send = False
        self._send_full(self.cycle, e, codec.raw(bytes(merged)))

    def _fill(self, line: int, form: CompressedLine, from_dram: bool) -> None:
        m = self.mshr[line]
        needs_assist = form.compressed and (from_dram or not self.cfg.uncompressed_l2)
        if not needs_assist:
            self._complete_fill(m, bytes(codec.decompress(form)))
            return
        self.decoding[line] = self.mshr.pop(line)
        args = (m.owner, form, line * self.L, lambda raw, m=m: self._complete_fill(m, raw))
        if not self.decompress(*args):
            self.retry_queue.append(args)

    def _complete_fill(self, m: Mshr, raw: bytes) -> None:
        data = bytearray(raw)
        applied = 0
        replies = []
        # a waiter sees only the stores that were ahead of it in the LSU
        for warp, reg, off, size, seen in m.waiters:
            for poff, b in m.patches[applied:seen]:
                data[poff:poff + len(b)] = b
            applied = max(applied, seen)
            replies.append((warp, reg, bytes(data[off:off + size])))
        for poff, b in m.patches[applied:]:
            data[poff:poff + len(b)] = b
        if self.mshr.get(m.line) is m:
            del self.mshr[m.line]
        else:
            del self.decoding[m.line]
        self.l1.put(m.line, data)
        for warp, reg, value in replies:
            self.load_done(warp, reg, value)

    # ---------------------------------------------------------- L2 side

    def _to_l2(self, cycle: int, req: tuple) -> None:
        self.events.at(cycle + self.cfg.l2_request_latency, self._l2_arrive, req)

    def _reply(self, fn: Callable, *args) -> None:
        self.events.at(self.cycle + self.cfg.l2_latency, fn, *args)

    def _l2_arrive(self, req: tuple) -> None:
        line = req[1]
        waiting = self.l2_pending.get(line)
        if waiting is not None:
            waiting.append(req)
            return
        entry = self.l2.get(line)
        if entry is not None:
            self.stats["l2_hits"] += 1
            self._l2_process(req, entry, False)
            return
        if req[0] == "FWRITE":
            self.stats["l2_misses"] += 1
            self._l2_install(line, L2Line(req[2], True))
            return
        self.stats["l2_misses"] += 1
        self.l2_pending[line] = [req]
        self._dram_read(line)

    def _l2_process(self, req: tuple, entry: L2Line, from_dram: bool) -> None:
        kind, line = req[0], req[1]
        if kind == "READ":
            self._reply(req[2], line, entry.form, from_dram)
        elif kind == "FWRITE":
            entry.form = req[2]
            entry.dirty = True
            self.l2.get(line)
        else:  # PWRITE
            form = entry.form
            if form.compressed and not self.cfg.uncompressed_l2:
                self._reply(req[3], line, form)
                return
            data = bytearray(codec.decompress(form))
            for off, b in req[2]:
                data[off:off + len(b)] = b
            entry.form = codec.raw(bytes(data))
            entry.dirty = True
            self._reply(req[3], line, None)

    def _l2_install(self, line: int, entry: L2Line) -> None:
        victim = self.l2.put(line, entry)
        if victim is not None:
            vline, ventry = victim
            if ventry.dirty:
                self._dram_write(vline, ventry.form)

    def _md(self, line: int) -> int:
        if not self.compression:
            return 0
        return 0 if self.md_cache.access(line) else 1

    def _dram_read(self, line: int) -> None:
        md = self._md(line)
        bursts = self.metadata.get(line)
        self.dram.enqueue(line, bursts, md, False, self.L // self.cfg.burst_size,
                          lambda line=line: self._dram_fill(line))

    def _dram_fill(self, line: int) -> None:
        entry = L2Line(self.stored_form(line))
        self._l2_install(line, entry)
        queued = self.l2_pending.pop(line)
        for i, req in enumerate(queued):
            self._l2_process(req, entry, i == 0)

    def _dram_write(self, line: int, form: CompressedLine) -> None:
        md = self._md(line)
        bursts = form.bursts(self.cfg.burst_size)
        self.backing[line] = form
        self.metadata.set(line, bursts)
        self.dram.enqueue(line, bursts, md, True, self.L // self.cfg.burst_size)

    # ---------------------------------------------------------- functional view

    def read_line(self, line: int) -> bytes:
        """Current architectural contents of a line, ignoring timing."""
        data = None
        entry = self.l2.get(line, touch=False)
        form = entry.form if entry is not None else self.stored_form(line)
        data = bytearray(codec.decompress(form))
        e = self.sb.get(line)
        if e is not None:
            for off, b in _runs(e.data, e.mask):
                data[off:off + len(b)] = b
        return bytes(data)

    def dump(self, size: int | None = None) -> bytes:
        """Memory image of the first ``size`` bytes (default: through the highest touched line)."""
        touched = set(self.backing) | {k for k, _ in self.l2.items()} | set(self.sb)
        if size is None:
            size = (max(touched) + 1) * self.L if touched else 0
        out = bytearray(size)
        for line in sorted(touched):
            lo = line * self.L
            if lo < size:
                chunk = self.read_line(line)
                out[lo:lo + len(chunk)] = chunk[:size - lo]
        return bytes(out)

    def check_metadata(self) -> list[int]:
        """Lines whose metadata code disagrees with the stored form."""
        bad = []
        for line, form in self.backing.items():
            if self.metadata.get(line) != form.bursts(self.cfg.burst_size):
                bad.append(line)
        return bad


def _runs(data: bytearray, mask: bytearray) -> list[tuple[int, bytes]]:
    """Contiguous masked byte runs as ``(offset, bytes)``."""
    out = []
    i, n = 0, len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            out.append((i, bytes(data[i:j])))
            i = j
        else:
            i += 1
    return out
