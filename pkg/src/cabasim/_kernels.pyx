# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled codec kernels. Byte-exact twin of ``_kernels_py``."""

from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t
from libc.string cimport memcpy, memset

from .errors import DictIndexOutOfRange, MalformedHeader

DEF MAXW = 256

cdef int ALG_BDI = 1
cdef int ALG_FPC = 2
cdef int ALG_CPACK = 3

cdef int[8] ORDER = [0, 1, 2, 3, 5, 4, 6, 7]
cdef int[8] BASE_B = [0, 0, 8, 8, 8, 4, 4, 2]
cdef int[8] DELTA_B = [0, 0, 1, 2, 4, 1, 2, 1]
cdef int[4] FPC_FIELD = [0, 1, 2, 4]


cdef inline uint64_t load_le(const uint8_t* p, int n) nogil:
    cdef uint64_t v = 0
    cdef int i
    for i in range(n - 1, -1, -1):
        v = (v << 8) | p[i]
    return v


cdef inline void store_le(uint8_t* p, uint64_t v, int n) nogil:
    cdef int i
    for i in range(n):
        p[i] = <uint8_t>(v & 0xFF)
        v >>= 8


cdef inline int64_t sext(uint64_t v, int bits) nogil:
    if bits >= 64:
        return <int64_t>v
    v &= ((<uint64_t>1) << bits) - 1
    if (v >> (bits - 1)) & 1:
        return <int64_t>v - ((<int64_t>1) << bits)
    return <int64_t>v


cdef inline uint64_t wmask(int bits) nogil:
    if bits >= 64:
        return <uint64_t>0xFFFFFFFFFFFFFFFF
    return ((<uint64_t>1) << bits) - 1


cdef bint bdi_fits(const uint8_t* p, int n, int x, int y) nogil:
    cdef int bits = 8 * x
    cdef uint64_t m = wmask(bits)
    cdef int64_t lim = (<int64_t>1) << (8 * y - 2)
    cdef uint64_t base = load_le(p, x)
    cdef uint64_t w
    cdef int64_t d
    cdef int i
    i = 0
    while i < n:
        w = load_le(p + i, x)
        i += x
        d = sext((w - base) & m, bits)
        if -lim <= d < lim:
            continue
        d = sext(w, bits)
        if -lim <= d < lim:
            continue
        return False
    return True


cdef int bdi_select_c(const uint8_t* p, int n) nogil:
    cdef int i, k, kind
    cdef bint same
    for i in range(n):
        if p[i]:
            break
    if i == n - 1 and p[i] == 0:
        return 0
    if n >= 8:
        same = True
        for i in range(8, n):
            if p[i] != p[i % 8]:
                same = False
                break
        if same:
            return 1
    for k in range(2, 8):
        kind = ORDER[k]
        if bdi_fits(p, n, BASE_B[kind], DELTA_B[kind]):
            return kind
    return -1


def bdi_select(const uint8_t[::1] line):
    return bdi_select_c(&line[0], line.shape[0])


def bdi_size(int kind, int line_size):
    if kind == 0:
        return 1
    if kind == 1:
        return 9
    return 1 + BASE_B[kind] + (line_size // BASE_B[kind]) * DELTA_B[kind]


def bdi_compress(const uint8_t[::1] line):
    cdef int n = line.shape[0]
    cdef const uint8_t* p = &line[0]
    cdef int kind = bdi_select_c(p, n)
    if kind < 0:
        return b""
    cdef uint8_t buf[2 * MAXW]
    buf[0] = <uint8_t>((ALG_BDI << 4) | kind)
    if kind == 0:
        return (<char*>buf)[:1]
    if kind == 1:
        memcpy(buf + 1, p, 8)
        return (<char*>buf)[:9]
    cdef int x = BASE_B[kind], y = DELTA_B[kind]
    cdef int bits = 8 * x, fbits = 8 * y - 1
    cdef uint64_t m = wmask(bits)
    cdef int64_t lim = (<int64_t>1) << (fbits - 1)
    cdef uint64_t low = wmask(fbits)
    cdef uint64_t base = load_le(p, x)
    cdef uint64_t w, field
    cdef int64_t d
    cdef int i, pos = 1 + x
    memcpy(buf + 1, p, x)
    i = 0
    while i < n:
        w = load_le(p + i, x)
        i += x
        d = sext((w - base) & m, bits)
        if -lim <= d < lim:
            field = ((<uint64_t>d) & low) | ((<uint64_t>1) << fbits)
        else:
            field = (<uint64_t>sext(w, bits)) & low
        store_le(buf + pos, field, y)
        pos += y
    return (<char*>buf)[:pos]


def bdi_decompress(const uint8_t[::1] data, int line_size):
    cdef int ln = data.shape[0]
    if ln == 0 or (data[0] >> 4) != ALG_BDI:
        raise MalformedHeader("not a BDI line")
    cdef int kind = data[0] & 0xF
    if kind > 7:
        raise MalformedHeader(f"undefined BDI encoding {kind}")
    if kind == 1 and line_size < 8:
        raise MalformedHeader("repeated encoding needs 8-byte words")
    if ln != bdi_size(kind, line_size):
        raise MalformedHeader(f"BDI size mismatch: {ln} bytes")
    cdef uint8_t out[MAXW]
    cdef int i
    if kind == 0:
        memset(out, 0, line_size)
        return (<char*>out)[:line_size]
    if kind == 1:
        for i in range(line_size):
            out[i] = data[1 + (i % 8)]
        return (<char*>out)[:line_size]
    cdef int x = BASE_B[kind], y = DELTA_B[kind]
    cdef int fbits = 8 * y - 1
    cdef uint64_t m = wmask(8 * x), low = wmask(fbits)
    cdef uint64_t base = load_le(&data[1], x)
    cdef uint64_t field, v
    cdef int pos = 1 + x
    i = 0
    while i < line_size:
        field = load_le(&data[pos], y)
        pos += y
        v = <uint64_t>sext(field & low, fbits)
        if field >> fbits:
            v += base
        store_le(out + i, v & m, x)
        i += x
    return (<char*>out)[:line_size]


def fpc_header_len(int line_size):
    return 1 + (2 * (line_size // 16) + 7) // 8


def fpc_compress(const uint8_t[::1] line):
    cdef int n = line.shape[0]
    cdef int nseg = n // 16
    cdef int hlen = 1 + (2 * nseg + 7) // 8
    cdef uint8_t buf[2 * MAXW + 8]
    cdef int s, j, pat, width, pos = hlen
    cdef int64_t v, lo, hi
    cdef uint64_t codes = 0
    cdef const uint8_t* seg
    for s in range(nseg):
        seg = &line[s * 16]
        lo = 0
        hi = 0
        for j in range(4):
            v = sext(load_le(seg + 4 * j, 4), 32)
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        if lo == 0 and hi == 0:
            pat = 0
        elif lo >= -128 and hi < 128:
            pat = 1
        elif lo >= -32768 and hi < 32768:
            pat = 2
        else:
            pat = 3
        codes |= (<uint64_t>pat) << (2 * s)
        if pat == 3:
            memcpy(buf + pos, seg, 16)
            pos += 16
        elif pat:
            width = FPC_FIELD[pat]
            for j in range(4):
                store_le(buf + pos, load_le(seg + 4 * j, 4), width)
                pos += width
    buf[0] = <uint8_t>(ALG_FPC << 4)
    store_le(buf + 1, codes, hlen - 1)
    return (<char*>buf)[:pos]


def fpc_decompress(const uint8_t[::1] data, int line_size):
    cdef int nseg = line_size // 16
    cdef int hlen = 1 + (2 * nseg + 7) // 8
    cdef int ln = data.shape[0]
    if ln < hlen or data[0] != (ALG_FPC << 4):
        raise MalformedHeader("not an FPC line")
    cdef uint64_t codes = load_le(&data[1], hlen - 1)
    if nseg < 32 and (codes >> (2 * nseg)):
        raise MalformedHeader("nonzero FPC header padding")
    cdef int s, j, pat, width, expect = hlen
    for s in range(nseg):
        expect += 4 * FPC_FIELD[(codes >> (2 * s)) & 3]
    if ln != expect:
        raise MalformedHeader(f"FPC size mismatch: {ln} != {expect}")
    cdef uint8_t out[MAXW]
    cdef int pos = hlen
    for s in range(nseg):
        pat = (codes >> (2 * s)) & 3
        if pat == 0:
            memset(out + 16 * s, 0, 16)
        elif pat == 3:
            memcpy(out + 16 * s, &data[pos], 16)
            pos += 16
        else:
            width = FPC_FIELD[pat]
            for j in range(4):
                store_le(out + 16 * s + 4 * j,
                         (<uint64_t>sext(load_le(&data[pos], width), 8 * width)) & 0xFFFFFFFF, 4)
                pos += width
    return (<char*>out)[:line_size]


def cpack_compress(const uint8_t[::1] line):
    cdef int n = line.shape[0] // 4
    cdef uint32_t words[64]
    cdef uint32_t dic[4]
    cdef uint8_t codes[64]
    cdef int count = 0, i, k, mm = 0
    cdef uint32_t w
    cdef bint hit
    for i in range(n):
        words[i] = <uint32_t>load_le(&line[4 * i], 4)
    for i in range(n):
        w = words[i]
        if (w >> 8) == 0:
            continue
        hit = False
        for k in range(count):
            if (dic[k] >> 8) == (w >> 8):
                hit = True
                break
        if hit:
            continue
        if count == 4:
            return b""
        dic[count] = w
        count += 1
    for i in range(n):
        w = words[i]
        if w == 0:
            codes[i] = 0
        elif (w >> 8) == 0:
            codes[i] = 2 << 2
            mm = 1
        else:
            codes[i] = 0xFF
            for k in range(count):
                if dic[k] == w:
                    codes[i] = (1 << 2) | k
                    break
            if codes[i] == 0xFF:
                for k in range(count):
                    if (dic[k] >> 8) == (w >> 8):
                        codes[i] = (3 << 2) | k
                        mm = 1
                        break
    cdef uint8_t buf[2 * MAXW]
    buf[0] = <uint8_t>((ALG_CPACK << 4) | (mm << 3) | count)
    for i in range(n // 2):
        buf[1 + i] = codes[2 * i] | (codes[2 * i + 1] << 4)
    cdef int pos = 1 + n // 2
    for k in range(count):
        store_le(buf + pos, dic[k], 4)
        pos += 4
    if mm:
        for i in range(n):
            buf[pos + i] = <uint8_t>(words[i] & 0xFF)
        pos += n
    return (<char*>buf)[:pos]


def cpack_decompress(const uint8_t[::1] data, int line_size):
    cdef int n = line_size // 4
    cdef int ln = data.shape[0]
    if ln == 0 or (data[0] >> 4) != ALG_CPACK:
        raise MalformedHeader("not a C-Pack line")
    cdef int count = data[0] & 7
    cdef int mm = (data[0] >> 3) & 1
    if count > 4:
        raise MalformedHeader(f"C-Pack dictionary count {count} > 4")
    cdef int dict_off = 1 + n // 2
    cdef int mm_off = dict_off + 4 * count
    if ln != mm_off + (n if mm else 0):
        raise MalformedHeader(f"C-Pack size mismatch: {ln} bytes")
    cdef uint8_t out[MAXW]
    cdef int i, code, cls, idx
    cdef uint32_t w
    for i in range(n):
        code = (data[1 + i // 2] >> (4 * (i & 1))) & 0xF
        cls = code >> 2
        idx = code & 3
        if cls == 0 or cls == 2:
            if idx:
                raise MalformedHeader(f"word {i}: index bits set on class {cls}")
            if cls == 0:
                w = 0
            else:
                if not mm:
                    raise MalformedHeader("zero-extend word without mismatch bytes")
                w = data[mm_off + i]
        else:
            if idx >= count:
                raise DictIndexOutOfRange(f"word {i}: index {idx} >= {count}")
            w = <uint32_t>load_le(&data[dict_off + 4 * idx], 4)
            if cls == 3:
                if not mm:
                    raise MalformedHeader("partial match without mismatch bytes")
                w = (w & 0xFFFFFF00) | data[mm_off + i]
        store_le(out + 4 * i, w, 4)
    return (<char*>out)[:line_size]
