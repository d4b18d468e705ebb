"""Cache-line compression: BDI, FPC and C-Pack over fixed-size lines.

Every compressed image starts with a one-byte tag whose high nibble names
the algorithm. A line whose compressed form would not save at least one
DRAM burst is kept raw (``Algorithm.NONE``) with no header at all.

Layouts (little-endian, ``n`` words per line):

BDI ``[tag][base: x B][n fields: y B]``. Each field holds a signed
``8y-1``-bit delta; its top bit selects the explicit base (1) or the
implicit zero base (0). ``ZEROS`` is the tag alone, ``REPEATED`` the tag
plus one 8-byte value.

FPC ``[tag][2-bit pattern per 16 B segment][segments...]``. Patterns:
zero words, sign-extended byte, sign-extended halfword, raw.

C-Pack ``[tag: mm<<3 | dict_count][4-bit code per word][dict: 4 B each]
[low byte of every word, only if mm]``. Code is ``class<<2 | index`` with
classes zero, full match, zero-extend, partial (low byte differs).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from . import _kernels_py as _ref
from . import kernels
from .errors import MalformedHeader, SizeOutOfRange

LINE_SIZES = (32, 64, 128, 256)
DEFAULT_LINE = 128
DEFAULT_BURST = 32
WORD_SIZE = 4


class Algorithm(str, enum.Enum):
    BDI = "BDI"
    FPC = "FPC"
    CPACK = "CPACK"
    NONE = "NONE"


_TAG_ALG = {_ref.ALG_BDI: Algorithm.BDI, _ref.ALG_FPC: Algorithm.FPC, _ref.ALG_CPACK: Algorithm.CPACK}

BDI_KIND_NAMES = ("ZEROS", "REPEATED", "B8D1", "B8D2", "B8D4", "B4D1", "B4D2", "B2D1")
BDI_TEST_ORDER = tuple(BDI_KIND_NAMES[k] for k in _ref.BDI_ORDER)
BDI_SHAPES = {BDI_KIND_NAMES[k]: v for k, v in _ref.BDI_SHAPE.items()}
FPC_ENCODINGS = ("SEGMENTED",)
# C-Pack decode shape depends on dictionary size and whether mismatch bytes follow
CPACK_ENCODINGS = tuple(f"DICT{k}{mm}" for mm in ("", "_MM") for k in range(5))

# best_of_all tie-break: lower assumed decode cost first
TIE_ORDER = (Algorithm.BDI, Algorithm.CPACK, Algorithm.FPC)


class CacheLineData(bytes):
    """Uncompressed cache-line contents. Length must be a supported line size."""

    def __new__(cls, data=b""):
        obj = super().__new__(cls, data)
        if len(obj) not in LINE_SIZES:
            raise SizeOutOfRange(f"line size {len(obj)} not in {LINE_SIZES}")
        return obj

    @property
    def line_size(self) -> int:
        return len(self)


def encodings(algorithm: Algorithm) -> tuple[str, ...]:
    return {
        Algorithm.BDI: BDI_KIND_NAMES,
        Algorithm.FPC: FPC_ENCODINGS,
        Algorithm.CPACK: CPACK_ENCODINGS,
        Algorithm.NONE: ("RAW",),
    }[Algorithm(algorithm)]


def burst_count(total_size: int, line_size: int = DEFAULT_LINE, burst_size: int = DEFAULT_BURST) -> int:
    if not 0 < total_size <= line_size:
        raise SizeOutOfRange(f"size {total_size} outside 1..{line_size}")
    return -(-total_size // burst_size)


def header_len(algorithm: Algorithm, line_size: int) -> int:
    if algorithm == Algorithm.FPC:
        return _ref.fpc_header_len(line_size)
    if algorithm == Algorithm.CPACK:
        return 1 + line_size // 8
    if algorithm == Algorithm.BDI:
        return 1
    return 0


def decode_tag(data: bytes) -> tuple[Algorithm, str]:
    """Algorithm and encoding name read from the first byte of an image."""
    if not data:
        raise MalformedHeader("empty image")
    tag = data[0]
    alg = _TAG_ALG.get(tag >> 4)
    if alg is None:
        raise MalformedHeader(f"unknown algorithm tag {tag:#04x}")
    low = tag & 0xF
    if alg == Algorithm.BDI:
        if low >= len(BDI_KIND_NAMES):
            raise MalformedHeader(f"undefined BDI encoding {low}")
        return alg, BDI_KIND_NAMES[low]
    if alg == Algorithm.FPC:
        if low:
            raise MalformedHeader("FPC tag low bits must be zero")
        return alg, "SEGMENTED"
    if low & 7 > _ref.CP_MAX_DICT:
        raise MalformedHeader(f"C-Pack dictionary count {low & 7}")
    return alg, f"DICT{low & 7}" + ("_MM" if low & 8 else "")


def image_size(data: bytes, line_size: int) -> int:
    """Total compressed size implied by the header of ``data``."""
    alg, enc = decode_tag(data)
    if alg == Algorithm.BDI:
        return _ref.bdi_size(BDI_KIND_NAMES.index(enc), line_size)
    if alg == Algorithm.FPC:
        hlen = _ref.fpc_header_len(line_size)
        if len(data) < hlen:
            raise MalformedHeader("truncated FPC header")
        codes = int.from_bytes(data[1:hlen], "little")
        nseg = line_size // _ref.FPC_SEGMENT
        return hlen + sum(4 * _ref.FPC_FIELD[(codes >> (2 * s)) & 3] for s in range(nseg))
    n = line_size // WORD_SIZE
    return 1 + n // 2 + 4 * (data[0] & 7) + (n if data[0] & 8 else 0)


@dataclass(frozen=True, slots=True)
class CompressedLine:
    algorithm: Algorithm
    data: bytes
    line_size: int = DEFAULT_LINE

    @property
    def total_size(self) -> int:
        return len(self.data)

    @property
    def header(self) -> bytes:
        return self.data[: header_len(self.algorithm, self.line_size)]

    @property
    def payload(self) -> bytes:
        return self.data[header_len(self.algorithm, self.line_size):]

    @property
    def encoding(self) -> str:
        if self.algorithm == Algorithm.NONE:
            return "RAW"
        return decode_tag(self.data)[1]

    @property
    def compressed(self) -> bool:
        return self.algorithm != Algorithm.NONE

    def bursts(self, burst_size: int = DEFAULT_BURST) -> int:
        return burst_count(self.total_size, self.line_size, burst_size)


def raw(line: bytes) -> CompressedLine:
    return CompressedLine(Algorithm.NONE, bytes(line), len(line))


def finish(algorithm: Algorithm, image: bytes, line: bytes, burst_size: int = DEFAULT_BURST) -> CompressedLine:
    """Wrap a compressor image, falling back to raw when it saves no burst."""
    size = len(line)
    if not image or len(image) > size:
        return raw(line)
    if -(-len(image) // burst_size) >= size // burst_size:
        return raw(line)
    return CompressedLine(algorithm, bytes(image), size)


def _check(line) -> None:
    if len(line) not in LINE_SIZES:
        raise SizeOutOfRange(f"line size {len(line)} not in {LINE_SIZES}")


def bdi_compress(line: bytes, burst_size: int = DEFAULT_BURST) -> CompressedLine:
    _check(line)
    return finish(Algorithm.BDI, kernels.bdi_compress(line), line, burst_size)


def fpc_compress(line: bytes, burst_size: int = DEFAULT_BURST) -> CompressedLine:
    _check(line)
    return finish(Algorithm.FPC, kernels.fpc_compress(line), line, burst_size)


def cpack_compress(line: bytes, burst_size: int = DEFAULT_BURST) -> CompressedLine:
    _check(line)
    return finish(Algorithm.CPACK, kernels.cpack_compress(line), line, burst_size)


def _expect(c: CompressedLine, alg: Algorithm) -> None:
    if c.algorithm != alg:
        raise MalformedHeader(f"expected {alg.value} line, got {c.algorithm.value}")


def bdi_decompress(c: CompressedLine) -> CacheLineData:
    _expect(c, Algorithm.BDI)
    return CacheLineData(kernels.bdi_decompress(c.data, c.line_size))


def fpc_decompress(c: CompressedLine) -> CacheLineData:
    _expect(c, Algorithm.FPC)
    return CacheLineData(kernels.fpc_decompress(c.data, c.line_size))


def cpack_decompress(c: CompressedLine) -> CacheLineData:
    _expect(c, Algorithm.CPACK)
    return CacheLineData(kernels.cpack_decompress(c.data, c.line_size))


_COMPRESS = {Algorithm.BDI: bdi_compress, Algorithm.FPC: fpc_compress, Algorithm.CPACK: cpack_compress}
_DECOMPRESS = {Algorithm.BDI: bdi_decompress, Algorithm.FPC: fpc_decompress, Algorithm.CPACK: cpack_decompress}


def compress(line: bytes, algorithm, burst_size: int = DEFAULT_BURST) -> CompressedLine:
    """Compress with one algorithm; ``"BESTOFALL"`` picks per line."""
    if algorithm == "BESTOFALL":
        return best_of_all(line, burst_size)[1]
    algorithm = Algorithm(algorithm)
    if algorithm == Algorithm.NONE:
        _check(line)
        return raw(line)
    return _COMPRESS[algorithm](line, burst_size)


def decompress(c: CompressedLine) -> CacheLineData:
    if c.algorithm == Algorithm.NONE:
        return CacheLineData(c.data)
    return _DECOMPRESS[c.algorithm](c)


def best_of_all(line: bytes, burst_size: int = DEFAULT_BURST) -> tuple[Algorithm, CompressedLine]:
    best = None
    for alg in TIE_ORDER:
        c = _COMPRESS[alg](line, burst_size)
        if c.compressed and (best is None or c.bursts(burst_size) < best.bursts(burst_size)):
            best = c
    if best is None:
        best = raw(line)
    return best.algorithm, best


def bdi_encoding(line: bytes) -> str | None:
    """First BDI encoding that fits ``line`` in test order, before any burst check."""
    kind = kernels.bdi_select(line)
    return None if kind < 0 else BDI_KIND_NAMES[kind]


def from_image(data: bytes, line_size: int, compressed: bool) -> CompressedLine:
    """Rebuild a CompressedLine from stored bytes plus the metadata raw/compressed bit."""
    if not compressed:
        return CompressedLine(Algorithm.NONE, bytes(data), line_size)
    alg, _ = decode_tag(data)
    return CompressedLine(alg, bytes(data), line_size)


# ----------------------------------------------------------- offline mode

CSV_COLUMNS = ("algorithm", "lines", "raw_bursts", "compressed_bursts", "ratio")


def compress_stream(data: bytes, algorithms, line_size: int = DEFAULT_LINE,
                    burst_size: int = DEFAULT_BURST) -> list[dict]:
    """Per-algorithm burst totals over consecutive lines of ``data``."""
    if len(data) % line_size:
        raise SizeOutOfRange(f"input length {len(data)} is not a multiple of line size {line_size}")
    lines = [data[i:i + line_size] for i in range(0, len(data), line_size)]
    raw_bursts = len(lines) * (line_size // burst_size)
    rows = []
    for alg in algorithms:
        total = sum(compress(ln, alg, burst_size).bursts(burst_size) for ln in lines)
        name = alg.value if isinstance(alg, Algorithm) else str(alg)
        rows.append({
            "algorithm": name,
            "lines": len(lines),
            "raw_bursts": raw_bursts,
            "compressed_bursts": total,
            "ratio": raw_bursts / total if total else 1.0,
        })
    return rows


def compress_file(path, algorithms, line_size: int = DEFAULT_LINE, burst_size: int = DEFAULT_BURST) -> list[dict]:
    return compress_stream(Path(path).read_bytes(), algorithms, line_size, burst_size)
