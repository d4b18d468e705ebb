import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cabasim import codec
from cabasim.codec import Algorithm
from cabasim.errors import ConfigError, ParseError
from cabasim.workload import (Dictionary, FrequentPattern, KernelKind, LowDynamicRange, Random,
                              SyntheticKernelSpec, TraceRecord, generate, parse_profile, parse_trace,
                              profile_lines, profile_text, trace_program, write_trace)

PROFILES = [LowDynamicRange(), FrequentPattern(), Dictionary(), Random()]


@pytest.mark.parametrize("profile", PROFILES, ids=lambda p: type(p).__name__)
def test_profile_text_roundtrip(profile):
    assert parse_profile(profile_text(profile)) == profile


def test_parse_profile_arguments():
    assert parse_profile("LowDynamicRange(0x1000, 12)") == LowDynamicRange(0x1000, 12)
    assert parse_profile("FrequentPattern(0.25, 0.5)") == FrequentPattern(0.25, 0.5)
    with pytest.raises(ConfigError):
        parse_profile("Gaussian()")
    with pytest.raises(ConfigError):
        parse_profile("Dictionary(1, 2, 3)")


@pytest.mark.parametrize("bad", [LowDynamicRange(delta_bits=2), FrequentPattern(0.8, 0.5), Dictionary(0)])
def test_profile_validation(bad):
    with pytest.raises(ConfigError):
        profile_lines(bad, 1, 0)


@pytest.mark.parametrize("profile,alg", [(LowDynamicRange(), Algorithm.BDI), (FrequentPattern(), Algorithm.FPC),
                                         (Dictionary(), Algorithm.CPACK)])
def test_each_profile_suits_its_algorithm(profile, alg):
    lines = profile_lines(profile, 200, 1)
    compressed = sum(codec.compress(bytes(row), alg).compressed for row in lines)
    assert compressed == 200


def test_random_profile_is_incompressible():
    lines = profile_lines(Random(), 200, 1)
    for alg in (Algorithm.BDI, Algorithm.FPC, Algorithm.CPACK):
        assert sum(codec.compress(bytes(row), alg).compressed for row in lines) == 0


def test_profile_lines_are_deterministic():
    a = profile_lines(Dictionary(), 50, 9, 64)
    assert a.shape == (50, 64) and a.dtype == np.uint8
    assert np.array_equal(a, profile_lines(Dictionary(), 50, 9, 64))
    assert not np.array_equal(a, profile_lines(Dictionary(), 50, 10, 64))


@pytest.mark.parametrize("kind", list(KernelKind))
def test_generate_shapes(kind):
    spec = SyntheticKernelSpec(kind, warps=4, elements=1024)
    wl = generate(spec, 0)
    assert wl.warps == 4
    loads = [i for p in wl.programs for i in p if i.op == "LD"]
    assert len(loads) == 1024 * 4 // 128 // (spec.stride_lines if kind == KernelKind.STRIDED_READ else 1)
    assert all(i.addr % 128 == 0 for i in loads)
    assert wl.name.startswith(kind.value)
    again = generate(spec, 0)
    assert again.memory == wl.memory and again.programs == wl.programs


def test_reduction_stores_the_partial_sums():
    spec = SyntheticKernelSpec(KernelKind.REDUCTION, warps=2, elements=256, data_profile=Dictionary())
    wl = generate(spec, 3)
    words = np.frombuffer(wl.memory[:1024], dtype="<u4").reshape(8, 32)
    for w, prog in enumerate(wl.programs):
        st_ = prog[-1]
        assert st_.op == "ST" and st_.addr == 1024 + 4 * w
        assert int.from_bytes(st_.data, "little") == int(words[w::2].sum()) & 0xFFFFFFFF


def test_spec_validation_collects_errors():
    errs = SyntheticKernelSpec(warps=0, elements=0, unroll=9).validate()
    assert len(errs) == 3
    assert SyntheticKernelSpec(elements=1 << 24).validate(memory_size=1 << 20)


def test_trace_roundtrip(tmp_path):
    recs = [TraceRecord(0, "LD", 0x100, 4), TraceRecord(1, "ST", 0x204, 8), TraceRecord(0, "ALU", 0, 1)]
    path = tmp_path / "t.trace"
    write_trace(recs, path)
    assert parse_trace(path) == recs
    wl = trace_program(recs)
    assert [len(p) for p in wl.programs] == [2, 1]
    assert wl.programs[0][1].srcs == (wl.programs[0][0].dst,)
    assert trace_program(recs, seed=1).programs[1][0].data != wl.programs[1][0].data


@pytest.mark.parametrize("text,line", [
    ("0 LD 0 4", 1),
    ("#cabatrace v1\n0 LD 0", 2),
    ("#cabatrace v1\n0 JMP 0 4", 2),
    ("#cabatrace v1\n0 LD zz 4", 2),
    ("#cabatrace v1\n0 LD 0 0", 2),
    ("#cabatrace v2", 1),
])
def test_trace_parse_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_trace(text)
    assert exc.value.line == line


def test_trace_line_crossing():
    with pytest.raises(ParseError):
        trace_program([TraceRecord(0, "LD", 0x7E, 4)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.sampled_from(["LD", "ST", "ALU"]),
                          st.integers(0, 1000), st.sampled_from([1, 2, 4, 8])), max_size=40))
def test_trace_text_roundtrip(items):
    recs = [TraceRecord(w, op, (a * 8) % 4096, s) for w, op, a, s in items]
    text = "#cabatrace v1\n" + "\n".join(f"{r.warp_id:x} {r.op} {r.addr:x} {r.size:x}" for r in recs)
    assert parse_trace(text) == recs
