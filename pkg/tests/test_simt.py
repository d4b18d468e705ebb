import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cabasim import codec, isa
from cabasim.codec import Algorithm
from cabasim.errors import SimFault
from cabasim.isa import MicroOp, Op
from cabasim.simt import (FULL_MASK, AssistMemory, LaneState, execute_microop, run_subroutine,
                          simt_compress_image, simt_decompress)

from lines import lines
from oracles import ref_bdi_image, ref_cpack_image, ref_fpc_image

ALGS = (Algorithm.BDI, Algorithm.FPC, Algorithm.CPACK)
REF = {Algorithm.BDI: ref_bdi_image, Algorithm.FPC: ref_fpc_image, Algorithm.CPACK: ref_cpack_image}
LIBS = {n: isa.build_library(n) for n in codec.LINE_SIZES}


def state(nregs=4, **kw):
    return LaneState(nregs, **kw)


def mem(src=bytes(64), out=64):
    return AssistMemory(src, out)


def test_add_under_half_mask_touches_only_low_lanes():
    s = state()
    s.regs[0] = list(range(32))
    s.regs[1] = [100] * 32
    s.regs[2] = [-1] * 32
    s.mask = 0x0000FFFF
    execute_microop(s, MicroOp(Op.ADD, dst=2, a=0, b=1), mem())
    assert s.regs[2][:16] == [100 + i for i in range(16)]
    assert s.regs[2][16:] == [-1] * 16
    assert s.pc == 1


def test_add_wraps_at_word_width():
    s = state()
    s.regs[0] = [0xFF] * 32
    execute_microop(s, MicroOp(Op.ADD, dst=1, a=0, imm=1, word=1), mem())
    assert s.regs[1] == [0] * 32


def test_pand_global():
    s = state()
    s.p = [True] * 32
    execute_microop(s, MicroOp(Op.PAND_GLOBAL), mem())
    assert s.g is True
    s.p[5] = False
    execute_microop(s, MicroOp(Op.PAND_GLOBAL), mem())
    assert s.g is False
    s.mask = 0xFFFF_FF00  # lane 5 inactive: its predicate no longer counts
    execute_microop(s, MicroOp(Op.PAND_GLOBAL), mem())
    assert s.g is True
    s.mask = FULL_MASK
    execute_microop(s, MicroOp(Op.PAND_GLOBAL, mode="acc"), mem())
    assert s.g is False


def test_cmp_fits_tagged_and_signed():
    s = state()
    s.regs[0] = [63, 64, -64, -65] + [0] * 28
    s.regs[0] = [v & 0xFFFFFFFF for v in s.regs[0]]
    execute_microop(s, MicroOp(Op.CMP_FITS, a=0, bits=8, mode="t"), mem())
    assert s.p[:4] == [True, False, True, False]
    execute_microop(s, MicroOp(Op.CMP_FITS, a=0, bits=8, mode="s"), mem())
    assert s.p[:4] == [True, True, True, True]


def test_ldc_tagged_sets_predicate():
    src = bytes([0x85, 0x05, 0x7F, 0xFF]) + bytes(60)
    s = state(static_mask=0xF)
    execute_microop(s, MicroOp(Op.LDC, dst=0, bits=8, stride=8, mode="t"), mem(src))
    assert s.regs[0][:4] == [5, 5, -1, -1]
    assert s.p[:4] == [True, False, False, True]
    assert not any(s.p[4:])


def test_stw_then_ldw_roundtrip():
    m = mem()
    s = state(static_mask=0xFF)
    s.regs[1] = [i * 0x01010101 for i in range(32)]
    execute_microop(s, MicroOp(Op.STW, b=1, bits=32, stride=32), m)
    m2 = AssistMemory(bytes(m.out), 64)
    execute_microop(s, MicroOp(Op.LDW, dst=2, bits=32, stride=32), m2)
    assert s.regs[2][:8] == s.regs[1][:8]


def test_setmask_modes():
    s = state(static_mask=0xFF)
    s.p = [i % 2 == 0 for i in range(32)]
    for mode, want in (("p", 0x55), ("all", 0xFF), ("np", 0xAA), ("andp", 0x00)):
        execute_microop(s, MicroOp(Op.SETMASK, mode=mode), mem())
        assert s.mask == want, mode
    execute_microop(s, MicroOp(Op.SETMASK, mode="imm", imm=0xFFFF), mem())
    assert s.mask == 0xFF  # never widens past the static mask


def test_branch_on_global_predicate():
    s = state()
    s.g = True
    execute_microop(s, MicroOp(Op.BRA_P, mode="g", target=7), mem())
    assert s.pc == 7
    execute_microop(s, MicroOp(Op.BRA_P, mode="ng", target=2), mem())
    assert s.pc == 8


def test_register_outside_window_faults():
    with pytest.raises(SimFault):
        execute_microop(state(2), MicroOp(Op.ADD, dst=2, a=0, imm=1), mem())


def test_load_past_image_faults():
    with pytest.raises(SimFault):
        execute_microop(state(), MicroOp(Op.LDW, dst=0, off=60, bits=64), mem())


def test_store_past_buffer_faults():
    with pytest.raises(SimFault):
        execute_microop(state(), MicroOp(Op.STW, b=0, off=60, bits=64), mem(out=64))


def test_runaway_subroutine_is_bounded():
    ops = (MicroOp(Op.BRA_P, mode="always", target=0), MicroOp(Op.EXIT))
    sub = isa.Subroutine(0, "spin", Algorithm.BDI, "X", isa.Direction.LOAD, ops, 0, isa.Priority.HIGH)
    with pytest.raises(SimFault):
        run_subroutine(sub, b"", max_steps=100)


@settings(max_examples=200, deadline=None)
@given(lines(codec.LINE_SIZES), st.sampled_from(ALGS))
def test_simt_decompress_matches_scalar(line, alg):
    c = codec.compress(line, alg)
    if not c.compressed:
        return
    assert simt_decompress(LIBS[len(line)], c) == line


@settings(max_examples=120, deadline=None)
@given(lines(codec.LINE_SIZES), st.sampled_from(ALGS))
def test_simt_compressor_matches_reference(line, alg):
    assert simt_compress_image(LIBS[len(line)], alg, line) == REF[alg](line)


@pytest.mark.parametrize("size", codec.LINE_SIZES)
def test_compressor_encoding_selection(size):
    """The assist compressor picks the same encoding as the scalar one on corner inputs."""
    lib = LIBS[size]
    cases = [bytes(size), b"\x01" * size, (7).to_bytes(8, "little") * (size // 8),
             bytes(range(256))[:size], b"\xff" * size]
    for line in cases:
        for alg in ALGS:
            img = simt_compress_image(lib, alg, line)
            assert img == REF[alg](line)
            c = codec.compress(line, alg)
            if c.compressed:
                assert codec.decode_tag(img)[1] == c.encoding
