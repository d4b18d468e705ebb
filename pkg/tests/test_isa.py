from dataclasses import replace

import pytest
from hypothesis import given, settings

from cabasim import codec, isa
from cabasim.codec import Algorithm
from cabasim.errors import ConfigError
from cabasim.isa import Direction, MicroOp, Op, Priority
from cabasim.simt import run_subroutine

from lines import lines
from oracles import fig4_line


@pytest.fixture(scope="module")
def lib():
    return isa.build_library(128)


def opcodes(sub):
    return [(op.opcode, op.mode) for op in sub.ops]


@pytest.mark.parametrize("size", codec.LINE_SIZES)
def test_library_is_complete_and_valid(size):
    lib = isa.build_library(size)
    for alg in (Algorithm.BDI, Algorithm.FPC, Algorithm.CPACK):
        for enc in codec.encodings(alg):
            sub = lib.decompressor(alg, enc)
            assert sub.priority == Priority.HIGH
            assert sub.direction == Direction.LOAD
        assert lib.compressor(alg).priority == Priority.LOW
    assert [s.sr_id for s in lib] == list(range(len(lib)))
    for sub in lib:
        assert isa.validate(sub) == [], sub.name
        assert lib.by_id(sub.sr_id) is sub


def test_b8d1_decompress_shape(lib):
    sub = lib.decompressor("BDI", "B8D1")
    assert opcodes(sub) == [(Op.MOVE, "livein"), (Op.LDW, ""), (Op.LDC, "t"), (Op.SETMASK, "p"),
                            (Op.ADD, ""), (Op.SETMASK, "all"), (Op.STW, ""), (Op.EXIT, "")]
    assert sub.register_requirement == 3


def test_zeros_decompress_shape(lib):
    sub = lib.decompressor("BDI", "ZEROS")
    assert opcodes(sub) == [(Op.SETMASK, "all"), (Op.MOVE, ""), (Op.STW, ""), (Op.EXIT, "")]
    assert sub.ops[1].imm == 0


def test_missing_exit_is_rejected(lib):
    sub = lib.decompressor("BDI", "B8D1")
    broken = replace(sub, ops=sub.ops[:-1])
    assert any(e.startswith("no terminator") for e in isa.validate(broken))
    assert isa.validate(replace(sub, ops=())) == ["no terminator: empty subroutine"]


def test_register_out_of_window(lib):
    sub = lib.decompressor("BDI", "B8D1")
    ops = list(sub.ops)
    ops[4] = replace(ops[4], dst=sub.register_requirement)
    errs = isa.validate(replace(sub, ops=tuple(ops)))
    assert any(e.startswith("register out of window") for e in errs)


def test_branch_target_out_of_range(lib):
    sub = lib.decompressor("BDI", "ZEROS")
    ops = (MicroOp(Op.BRA_P, mode="always", target=99),) + sub.ops
    errs = isa.validate(replace(sub, ops=ops))
    assert any(e.startswith("branch target") for e in errs)


def test_undeclared_live_in(lib):
    sub = lib.decompressor("BDI", "B8D1")
    assert any("live-in" in e for e in isa.validate(replace(sub, live_in=())))


def test_overstated_register_requirement(lib):
    sub = lib.decompressor("BDI", "B8D1")
    assert any(e.startswith("register_requirement") for e in isa.validate(replace(sub, register_requirement=9)))


def test_unconditional_branch_loop_without_exit():
    ops = (MicroOp(Op.ADDI, dst=0, a=0, imm=1), MicroOp(Op.BRA_P, mode="always", target=0))
    sub = isa.Subroutine(0, "loop", Algorithm.BDI, "X", Direction.LOAD, ops, 1, Priority.HIGH)
    assert isa.validate(sub) == []  # no path falls off the end; runtime bounds catch the loop


@pytest.mark.parametrize("size", [16, 100, 512])
def test_bad_line_size(size):
    with pytest.raises(ConfigError):
        isa.build_library(size)


def test_iteration_bound():
    with pytest.raises(ConfigError) as exc:
        isa.build_library(256, max_iterations=1)
    assert "iterations" in str(exc.value)


def test_disassembly_is_stable(lib):
    again = isa.build_library(128)
    for a, b in zip(lib, again):
        assert a.disassemble() == b.disassemble()
    text = lib.decompressor("BDI", "B8D1").disassemble().splitlines()
    assert text[0].startswith("; BDI/B8D1/load sr=2 prio=High regs=3")
    assert text[2] == "   1: LDW r1, [r0+1]{64b}"
    assert text[-1] == "   7: EXIT"


def test_memory_op_classification():
    assert MicroOp(Op.LDW).is_memory and MicroOp(Op.STW).is_memory
    assert not MicroOp(Op.ADD).is_memory
    assert MicroOp(Op.STW, a=0, b=3).reads() == (0, 3)
    assert MicroOp(Op.MOVE, dst=1, a=0, mode="livein").reads() == ()


def test_fig4_line_decompresses_in_eight_ops():
    c = codec.bdi_compress(fig4_line())
    res = run_subroutine(isa.build_library(64).decompressor("BDI", c.encoding), c.data, out_size=64)
    assert res.out == fig4_line()
    assert res.executed == 8


@settings(max_examples=150, deadline=None)
@given(lines(codec.LINE_SIZES))
def test_decompress_cost_is_data_independent(line):
    lib = _libs(len(line))
    for alg in (Algorithm.BDI, Algorithm.FPC, Algorithm.CPACK):
        c = codec.compress(line, alg)
        if not c.compressed:
            continue
        sub = lib.decompressor(alg, c.encoding)
        res = run_subroutine(sub, c.data, out_size=len(line))
        assert res.executed == len(sub.ops)  # straight-line code



_LIBS = {}


def _libs(size):
    if size not in _LIBS:
        _LIBS[size] = isa.build_library(size)
    return _LIBS[size]
