"""Pure-Python codec kernels.

Reference twin of ``_kernels.pyx``. Both modules expose the same functions
with the same byte-exact outputs; ``cabasim.kernels`` picks one at import.

All multi-byte fields are little-endian. Byte 0 of every compressed image
is a tag: high nibble = algorithm, low nibble = algorithm-specific bits.
Compressors return ``b""`` when the line cannot be encoded at all.
"""

from .errors import DictIndexOutOfRange, MalformedHeader

ALG_BDI = 1
ALG_FPC = 2
ALG_CPACK = 3

BDI_ZEROS = 0
BDI_REPEATED = 1
BDI_B8D1 = 2
BDI_B8D2 = 3
BDI_B8D4 = 4
BDI_B4D1 = 5
BDI_B4D2 = 6
BDI_B2D1 = 7

BDI_ORDER = (BDI_ZEROS, BDI_REPEATED, BDI_B8D1, BDI_B8D2, BDI_B4D1, BDI_B8D4, BDI_B4D2, BDI_B2D1)
# kind -> (base bytes, delta bytes)
BDI_SHAPE = {
    BDI_B8D1: (8, 1),
    BDI_B8D2: (8, 2),
    BDI_B8D4: (8, 4),
    BDI_B4D1: (4, 1),
    BDI_B4D2: (4, 2),
    BDI_B2D1: (2, 1),
}

FPC_SEGMENT = 16
FPC_ZERO = 0
FPC_BYTE = 1
FPC_HALF = 2
FPC_RAW = 3
FPC_FIELD = (0, 1, 2, 4)  # bytes per word for each pattern

CP_ZERO = 0
CP_FULL = 1
CP_ZEXT = 2
CP_PARTIAL = 3
CP_MAX_DICT = 4


def _signed(v, bits):
    if v >> (bits - 1):
        return v - (1 << bits)
    return v


def _words(line, size):
    return [int.from_bytes(line[i:i + size], "little") for i in range(0, len(line), size)]


# --------------------------------------------------------------------- BDI

def bdi_select(line):
    """Index of the first BDI kind (in test order) that encodes ``line``, or -1."""
    if not any(line):
        return BDI_ZEROS
    if len(line) >= 8:
        w8 = _words(line, 8)
        if all(w == w8[0] for w in w8):
            return BDI_REPEATED
    for kind in BDI_ORDER[2:]:
        x, y = BDI_SHAPE[kind]
        if _bdi_fits(line, x, y):
            return kind
    return -1


def _bdi_fits(line, x, y):
    bits = 8 * x
    mod = 1 << bits
    lim = 1 << (8 * y - 2)
    words = _words(line, x)
    base = words[0]
    for w in words:
        d = _signed((w - base) % mod, bits)
        if -lim <= d < lim:
            continue
        v = _signed(w, bits)
        if -lim <= v < lim:
            continue
        return False
    return True


def bdi_compress(line):
    kind = bdi_select(line)
    if kind < 0:
        return b""
    head = bytes([(ALG_BDI << 4) | kind])
    if kind == BDI_ZEROS:
        return head
    if kind == BDI_REPEATED:
        return head + line[:8]
    x, y = BDI_SHAPE[kind]
    bits = 8 * x
    mod = 1 << bits
    fbits = 8 * y - 1
    lim = 1 << (fbits - 1)
    low = (1 << fbits) - 1
    words = _words(line, x)
    base = words[0]
    out = bytearray(head)
    out += base.to_bytes(x, "little")
    for w in words:
        d = _signed((w - base) % mod, bits)
        if -lim <= d < lim:
            field = (d & low) | (1 << fbits)
        else:
            field = _signed(w, bits) & low
        out += field.to_bytes(y, "little")
    return bytes(out)


def bdi_size(kind, line_size):
    if kind == BDI_ZEROS:
        return 1
    if kind == BDI_REPEATED:
        return 9
    x, y = BDI_SHAPE[kind]
    return 1 + x + (line_size // x) * y


def bdi_decompress(data, line_size):
    if not data or data[0] >> 4 != ALG_BDI:
        raise MalformedHeader("not a BDI line")
    kind = data[0] & 0xF
    if kind > BDI_B2D1:
        raise MalformedHeader(f"undefined BDI encoding {kind}")
    if kind == BDI_REPEATED and line_size < 8:
        raise MalformedHeader("repeated encoding needs 8-byte words")
    if len(data) != bdi_size(kind, line_size):
        raise MalformedHeader(f"BDI size mismatch: {len(data)} bytes")
    if kind == BDI_ZEROS:
        return bytes(line_size)
    if kind == BDI_REPEATED:
        return bytes(data[1:9]) * (line_size // 8)
    x, y = BDI_SHAPE[kind]
    mod = 1 << (8 * x)
    fbits = 8 * y - 1
    low = (1 << fbits) - 1
    base = int.from_bytes(data[1:1 + x], "little")
    out = bytearray()
    pos = 1 + x
    for _ in range(line_size // x):
        field = int.from_bytes(data[pos:pos + y], "little")
        pos += y
        v = _signed(field & low, fbits)
        if field >> fbits:
            v += base
        out += (v % mod).to_bytes(x, "little")
    return bytes(out)


# --------------------------------------------------------------------- FPC

def fpc_header_len(line_size):
    nseg = line_size // FPC_SEGMENT
    return 1 + (2 * nseg + 7) // 8


def _fpc_pattern(seg_words):
    sv = [_signed(w, 32) for w in seg_words]
    if all(v == 0 for v in sv):
        return FPC_ZERO
    if all(-128 <= v < 128 for v in sv):
        return FPC_BYTE
    if all(-32768 <= v < 32768 for v in sv):
        return FPC_HALF
    return FPC_RAW


def fpc_compress(line):
    nseg = len(line) // FPC_SEGMENT
    hlen = fpc_header_len(len(line))
    codes = 0
    payload = bytearray()
    for s in range(nseg):
        seg = line[s * FPC_SEGMENT:(s + 1) * FPC_SEGMENT]
        words = _words(seg, 4)
        pat = _fpc_pattern(words)
        codes |= pat << (2 * s)
        width = FPC_FIELD[pat]
        if pat == FPC_RAW:
            payload += seg
        elif width:
            mask = (1 << (8 * width)) - 1
            for w in words:
                payload += (w & mask).to_bytes(width, "little")
    return bytes([ALG_FPC << 4]) + codes.to_bytes(hlen - 1, "little") + bytes(payload)


def fpc_decompress(data, line_size):
    nseg = line_size // FPC_SEGMENT
    hlen = fpc_header_len(line_size)
    if len(data) < hlen or data[0] != ALG_FPC << 4:
        raise MalformedHeader("not an FPC line")
    codes = int.from_bytes(data[1:hlen], "little")
    if codes >> (2 * nseg):
        raise MalformedHeader("nonzero FPC header padding")
    expect = hlen + sum(4 * FPC_FIELD[(codes >> (2 * s)) & 3] for s in range(nseg))
    if len(data) != expect:
        raise MalformedHeader(f"FPC size mismatch: {len(data)} != {expect}")
    out = bytearray()
    pos = hlen
    for s in range(nseg):
        pat = (codes >> (2 * s)) & 3
        width = FPC_FIELD[pat]
        if pat == FPC_ZERO:
            out += bytes(FPC_SEGMENT)
        elif pat == FPC_RAW:
            out += data[pos:pos + FPC_SEGMENT]
            pos += FPC_SEGMENT
        else:
            for _ in range(4):
                v = _signed(int.from_bytes(data[pos:pos + width], "little"), 8 * width)
                pos += width
                out += (v & 0xFFFFFFFF).to_bytes(4, "little")
    return bytes(out)


# ------------------------------------------------------------------ C-Pack

def cpack_classify(words):
    """Return (dictionary, codes) or None when more than four entries are needed.

    Each code is ``(class << 2) | dict_index``.
    """
    dictionary = []
    for w in words:
        if w >> 8 == 0:
            continue
        if any((w >> 8) == (d >> 8) for d in dictionary):
            continue
        if len(dictionary) == CP_MAX_DICT:
            return None
        dictionary.append(w)
    codes = []
    for w in words:
        if w == 0:
            codes.append(CP_ZERO << 2)
        elif w >> 8 == 0:
            codes.append(CP_ZEXT << 2)
        else:
            for i, d in enumerate(dictionary):
                if d == w:
                    codes.append((CP_FULL << 2) | i)
                    break
            else:
                for i, d in enumerate(dictionary):
                    if d >> 8 == w >> 8:
                        codes.append((CP_PARTIAL << 2) | i)
                        break
    return dictionary, codes


def cpack_compress(line):
    words = _words(line, 4)
    res = cpack_classify(words)
    if res is None:
        return b""
    dictionary, codes = res
    mm = any(c >> 3 for c in codes)  # ZEXT and PARTIAL carry a byte
    packed = 0
    for i, c in enumerate(codes):
        packed |= c << (4 * i)
    out = bytearray([(ALG_CPACK << 4) | (mm << 3) | len(dictionary)])
    out += packed.to_bytes(len(words) // 2, "little")
    for d in dictionary:
        out += d.to_bytes(4, "little")
    if mm:
        out += bytes(w & 0xFF for w in words)
    return bytes(out)


def cpack_decompress(data, line_size):
    n = line_size // 4
    if not data or data[0] >> 4 != ALG_CPACK:
        raise MalformedHeader("not a C-Pack line")
    count = data[0] & 7
    mm = (data[0] >> 3) & 1
    if count > CP_MAX_DICT:
        raise MalformedHeader(f"C-Pack dictionary count {count} > {CP_MAX_DICT}")
    clen = n // 2
    dict_off = 1 + clen
    mm_off = dict_off + 4 * count
    if len(data) != mm_off + (n if mm else 0):
        raise MalformedHeader(f"C-Pack size mismatch: {len(data)} bytes")
    packed = int.from_bytes(data[1:dict_off], "little")
    dictionary = [int.from_bytes(data[dict_off + 4 * i:dict_off + 4 * i + 4], "little") for i in range(count)]
    out = bytearray()
    for i in range(n):
        code = (packed >> (4 * i)) & 0xF
        cls, idx = code >> 2, code & 3
        if cls in (CP_ZERO, CP_ZEXT):
            if idx:
                raise MalformedHeader(f"word {i}: index bits set on class {cls}")
            if cls == CP_ZERO:
                w = 0
            else:
                if not mm:
                    raise MalformedHeader("zero-extend word without mismatch bytes")
                w = data[mm_off + i]
        else:
            if idx >= count:
                raise DictIndexOutOfRange(f"word {i}: index {idx} >= {count}")
            w = dictionary[idx]
            if cls == CP_PARTIAL:
                if not mm:
                    raise MalformedHeader("partial match without mismatch bytes")
                w = (w & ~0xFF) | data[mm_off + i]
        out += w.to_bytes(4, "little")
    return bytes(out)
