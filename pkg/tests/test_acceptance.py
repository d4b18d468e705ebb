"""Acceptance suite: one test per criterion, each recording a PASS/FAIL verdict."""

import random
import time
from collections import Counter

import pytest
from click.testing import CliRunner

from cabasim import codec, isa
from cabasim.cli import main, run
from cabasim.codec import Algorithm
from cabasim.config import load
from cabasim.memhier import MdCache, MemConfig
from cabasim.simt import simt_compress_image, simt_decompress
from cabasim.sm import SM
from cabasim.workload import (Dictionary, FrequentPattern, KernelKind, LowDynamicRange, Random,
                              SyntheticKernelSpec, generate, profile_lines, profile_text)

from acceptance_report import record
from checked_sm import CheckedSM
from memdriver import Driver
from oracles import LruCacheOracle, fig4_line, ref_bdi_image, ref_cpack_image, ref_fpc_image
from scenarios import SCENARIOS

START = time.monotonic()
ALGS = (Algorithm.BDI, Algorithm.FPC, Algorithm.CPACK)
PROFILES = (LowDynamicRange(), FrequentPattern(), Dictionary(), Random())
REF = {Algorithm.BDI: ref_bdi_image, Algorithm.FPC: ref_fpc_image, Algorithm.CPACK: ref_cpack_image}


def _verdict(number, title):
    """Context manager recording the criterion verdict, also when the body raises."""
    class _Ctx:
        ok = False
        detail = ""

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            ok = self.ok and exc_type is None
            detail = self.detail
            if exc_type is not None and exc_type is not AssertionError:
                detail = f"{exc_type.__name__}: {exc}"[:160]
            record(number, title, ok, detail)
            return False

    return _Ctx()


# ------------------------------------------------------------------ 1

def test_c01_fig4_vector():
    with _verdict(1, "64-byte base+delta vector compresses to 17 B, 1 burst") as v:
        t = time.monotonic()
        c = codec.bdi_compress(fig4_line())
        elapsed = time.monotonic() - t
        v.detail = f"{c.encoding}, {c.total_size} B, {c.bursts()} burst, {elapsed * 1e3:.2f} ms"
        v.ok = (c.encoding, c.total_size, c.bursts()) == ("B8D1", 17, 1) and elapsed < 1.0
        v.ok = v.ok and codec.decompress(c) == fig4_line()
        assert v.ok, v.detail


# ------------------------------------------------------------------ 2

def test_c02_roundtrip_suite():
    with _verdict(2, "roundtrip 1e5 lines x 4 profiles x 3 algorithms") as v:
        t = time.monotonic()
        failures = 0
        compressed = Counter()
        for k, profile in enumerate(PROFILES):
            raw = profile_lines(profile, 100_000, 1000 + k).tobytes()
            for alg in ALGS:
                comp, dec = codec.compress, codec.decompress
                for i in range(0, len(raw), 128):
                    x = raw[i:i + 128]
                    c = comp(x, alg)
                    compressed[alg] += c.compressed
                    if dec(c) != x:
                        failures += 1
        elapsed = time.monotonic() - t
        v.detail = f"{failures} failures, {elapsed:.1f} s"
        v.ok = failures == 0 and elapsed < 30
        assert v.ok, v.detail
        assert all(compressed[a] > 0 for a in ALGS)


# ------------------------------------------------------------------ 3

def _bdi_candidate(rng):
    x, y = rng.choice([(8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1)])
    base = rng.getrandbits(8 * x)
    half = 1 << (8 * y - 2)
    words = []
    for i in range(128 // x):
        if i and rng.random() < 0.25:
            words.append(rng.randrange(half))
        else:  # deltas in [0, half) keep every difference from word 0 in range
            words.append((base + rng.randrange(half)) % (1 << (8 * x)))
    return b"".join(w.to_bytes(x, "little") for w in words)


def _cpack_candidate(rng):
    k = rng.randrange(5)
    dictionary = []
    while len(dictionary) < k:
        d = rng.randrange(256, 1 << 32)
        if all(d >> 8 != e >> 8 for e in dictionary):
            dictionary.append(d)
    mm = rng.random() < 0.5
    words = []
    for _ in range(32):
        u = rng.random()
        if dictionary and u < 0.6:
            d = rng.choice(dictionary)
            words.append(d if not mm or rng.random() < 0.7 else (d & ~0xFF) | rng.randrange(256))
        elif mm and u < 0.8:
            words.append(rng.randrange(256))
        else:
            words.append(0)
    return b"".join(w.to_bytes(4, "little") for w in words)


def _fpc_candidate(rng):
    return bytes(profile_lines(FrequentPattern(rng.random() * 0.6, rng.random() * 0.4), 1,
                               rng.getrandbits(32))[0])


def _lines_per_encoding(per_encoding, seed=0):
    """``per_encoding`` compressible lines for every encoding of every algorithm."""
    rng = random.Random(seed)
    want = {(a, e) for a in ALGS for e in codec.encodings(a)}
    found = {key: [] for key in want}
    for key in ((Algorithm.BDI, "ZEROS"), (Algorithm.CPACK, "DICT0")):
        found[key] = [bytes(128)] * per_encoding  # the only line with this encoding
    found[(Algorithm.BDI, "REPEATED")] = [rng.randbytes(8) * 16 for _ in range(per_encoding)]
    makers = {Algorithm.BDI: _bdi_candidate, Algorithm.FPC: _fpc_candidate, Algorithm.CPACK: _cpack_candidate}
    for _ in range(200 * per_encoding):
        if all(len(v) >= per_encoding for v in found.values()):
            break
        alg = rng.choice(ALGS)
        line = makers[alg](rng)
        c = codec.compress(line, alg)
        if c.compressed and len(found[(alg, c.encoding)]) < per_encoding:
            found[(alg, c.encoding)].append(line)
    return found


def test_c03_oracle_equivalence():
    with _verdict(3, "SIMT decompress == scalar codec, 1e3 lines per encoding") as v:
        t = time.monotonic()
        lib = isa.build_library(128)
        found = _lines_per_encoding(1000)
        short = [f"{a.value}/{e}" for (a, e), ls in found.items() if len(ls) < 1000]
        mismatches = 0
        for (alg, enc), lines in found.items():
            for line in lines:
                c = codec.compress(line, alg)
                assert c.encoding == enc
                if simt_decompress(lib, c) != codec.decompress(c):
                    mismatches += 1
        elapsed = time.monotonic() - t
        v.detail = f"{len(found)} encodings, {mismatches} mismatches, {elapsed:.1f} s"
        if short:
            v.detail += f", too few lines for {short}"
        v.ok = not short and mismatches == 0 and elapsed < 60
        assert v.ok, v.detail


# ------------------------------------------------------------------ 4

def test_c04_compression_selection():
    with _verdict(4, "SIMT compressors pick the scalar encoding, 1e4 lines per algorithm") as v:
        lib = isa.build_library(128)
        rng = random.Random(4)
        makers = [_bdi_candidate, _cpack_candidate, _fpc_candidate, lambda r: r.randbytes(128)]
        mismatches = 0
        seen = Counter()
        for alg in ALGS:
            for i in range(10_000):
                line = makers[i % len(makers)](rng)
                img = simt_compress_image(lib, alg, line)
                ref = REF[alg](line)
                if img != ref:
                    mismatches += 1
                seen[(alg, codec.decode_tag(img)[1] if img else "RAW")] += 1
        v.detail = f"{mismatches} mismatches, {len(seen)} distinct (algorithm, encoding) outcomes"
        v.ok = mismatches == 0
        assert v.ok, v.detail


# ------------------------------------------------------------------ 5

def test_c05_scheduler_invariants():
    with _verdict(5, "scheduler priority and blocked-parent invariants") as v:
        mem = MemConfig(memory_size=1 << 20)
        errors, runs, high, low = [], 0, 0, 0
        workloads = [s(seed) for s in SCENARIOS for seed in (0, 1)]
        for kind in KernelKind:
            for profile in (LowDynamicRange(), Dictionary()):
                spec = SyntheticKernelSpec(kind, warps=8, elements=2048, data_profile=profile)
                workloads.append(generate(spec, 7, 128, mem.memory_size))
        for wl in workloads:
            for alg in ("BDI", "FPC", "CPACK", "BESTOFALL"):
                sm = CheckedSM(wl, alg, mem=mem)
                sm.run_checked()
                runs += 1
                high += sm.high_issued
                low += sm.low_issued
                errors += sm.errors
                if sm.mem.dump(len(sm.ref)) != bytes(sm.ref):
                    errors.append(f"{wl.name}/{alg}: final memory differs")
        v.detail = f"{runs} runs, {high} high / {low} low assist issues, {len(errors)} violations"
        v.ok = not errors and high > 0 and low > 0
        assert v.ok, errors[:5]


# ------------------------------------------------------------------ 6 and 8 share runs

MATRIX_RUNS = []


def _config(kind, profile, alg, bw, **extra):
    cfg = load(None, [f"algorithm={alg}", f"bandwidth_scale={bw}", f"workload.kind={kind.value}"])
    cfg.workload = SyntheticKernelSpec(kind, data_profile=profile)
    for k, val in extra.items():
        setattr(cfg, k, val)
    return cfg


def test_c06_zero_interference():
    with _verdict(6, "NONE with assist structures == build without them, full matrix") as v:
        diffs = []
        n = 0
        for kind in KernelKind:
            for profile in PROFILES:
                for bw in (0.5, 1.0, 2.0):
                    with_caba, _ = run(_config(kind, profile, "NONE", bw))
                    without, _ = run(_config(kind, profile, "NONE", bw, caba=False))
                    MATRIX_RUNS.extend([with_caba, without])
                    n += 1
                    if with_caba != without:
                        diffs.append(f"{kind.value}/{profile_text(profile)} x{bw:g}")
        v.detail = f"{n} configurations, {len(diffs)} differ"
        v.ok = not diffs
        assert v.ok, diffs


# ------------------------------------------------------------------ 7

def test_c07_memory_integrity():
    with _verdict(7, "1e5-op random load/store/kill run matches flat memory") as v:
        cfg = MemConfig(memory_size=1 << 20, l1_size=4 << 10, l2_size=16 << 10, mshrs=8)
        rng = random.Random(77)
        image = b"".join(rng.randbytes(128) if rng.random() < 0.2 else
                         b"".join(rng.randrange(-50, 50).to_bytes(4, "little", signed=True) for _ in range(32))
                         for _ in range(256))

        def values(k):
            if rng.random() < 0.3:
                return rng.randbytes(k)
            return b"".join(rng.randrange(-50, 50).to_bytes(4, "little", signed=True) for _ in range(k // 4))

        d = Driver(cfg, image, Algorithm.BDI, seed=7, reject=0.1, kill=0.05)
        d.random_ops(100_000, 256, values=values)
        st = d.mem.stats
        same = d.consistent(256 * 128)
        v.detail = (f"{d.loads_checked} loads checked, {len(d.mismatches)} wrong, {d.kills} kills, "
                    f"{st['store_retries']} partial-store retries, final image {'equal' if same else 'DIFFERS'}")
        v.ok = same and not d.mismatches and d.kills > 0 and st["store_retries"] > 0
        v.ok = v.ok and d.mem.check_metadata() == []
        assert v.ok, v.detail


# ------------------------------------------------------------------ 8

def test_c08_bandwidth_identity():
    with _verdict(8, "DRAM busy cycles identity and MD cache vs brute-force oracle") as v:
        runs = list(MATRIX_RUNS)
        for kind in KernelKind:
            for profile, alg in ((LowDynamicRange(), "BDI"), (Dictionary(), "CPACK"),
                                 (FrequentPattern(), "FPC"), (Random(), "BDI")):
                cfg = _config(kind, profile, alg, 1.0)
                if alg == "FPC":
                    cfg.workload = SyntheticKernelSpec(kind, elements=4096, data_profile=profile)
                runs.append(run(cfg)[0])
        bad = [m.name for m in runs
               if m.dram_busy_cycles != (m.dram_data_bursts + m.dram_md_bursts) * m.cycles_per_burst]

        # replay the lookups of a real run through the oracle
        wl = generate(SyntheticKernelSpec(KernelKind.STRIDED_READ, elements=65536,
                                          data_profile=LowDynamicRange()), 0)
        sm = SM(wl, "BDI", mem=MemConfig(md_cache_size=1 << 10))
        lookups = []
        access = sm.mem.md_cache.access

        def logged(line):
            lookups.append(line)
            return access(line)

        sm.mem.md_cache.access = logged
        sm.run()
        md = sm.mem.md_cache
        oracle = LruCacheOracle(sets=(1 << 10) // 64 // 4, ways=4)
        for line in lookups:
            oracle.access(line // 256)
        run_match = (md.hits, md.misses) == (oracle.hits, oracle.misses)

        # and 1e4 random lookups with locality
        rng = random.Random(8)
        md2 = MdCache()
        oracle2 = LruCacheOracle(sets=(8 << 10) // 64 // 4, ways=4)
        disagree = 0
        for _ in range(10_000):
            line = rng.randrange(1 << 20) if rng.random() < 0.3 else rng.randrange(1 << 14)
            disagree += md2.access(line) != oracle2.access(line // 256)
        v.detail = (f"{len(runs)} runs, {len(bad)} identity failures; run replay {len(lookups)} lookups "
                    f"{md.misses} misses {'match' if run_match else 'DIFFER'}; random 1e4 {disagree} disagree")
        v.ok = not bad and run_match and disagree == 0 and len(lookups) > 0
        assert v.ok, v.detail


# ------------------------------------------------------------------ 9

def test_c09_directional_effects():
    with _verdict(9, "BDI cuts bursts and utilisation, keeps IPC; IPC non-decreasing in bandwidth") as v:
        res = {}
        for alg in ("NONE", "BDI"):
            for bw in (0.5, 1.0, 2.0):
                res[(alg, bw)] = run(_config(KernelKind.STREAM_COPY, LowDynamicRange(), alg, bw))[0]
        none, bdi = res[("NONE", 1.0)], res[("BDI", 1.0)]
        checks = {
            "fewer bursts": bdi.dram_data_bursts + bdi.dram_md_bursts < none.dram_data_bursts + none.dram_md_bursts,
            "lower utilisation": bdi.bandwidth_utilization < none.bandwidth_utilization,
            "IPC not reduced": bdi.ipc >= none.ipc,
        }
        for alg in ("NONE", "BDI"):
            ipcs = [res[(alg, bw)].ipc for bw in (0.5, 1.0, 2.0)]
            checks[f"{alg} IPC monotone"] = all(a <= b for a, b in zip(ipcs, ipcs[1:]))
        ipc_text = "; ".join(f"{alg} IPC " + "/".join(f"{res[(alg, bw)].ipc:.4f}" for bw in (0.5, 1.0, 2.0))
                             for alg in ("NONE", "BDI"))
        failed = [k for k, ok in checks.items() if not ok]
        v.detail = ipc_text + (f"; failed: {', '.join(failed)}" if failed else "")
        v.ok = not failed
        assert v.ok, v.detail


# ------------------------------------------------------------------ 10

def test_c10_determinism_and_runtime(tmp_path):
    with _verdict(10, "byte-identical CSV on rerun; suite under 10 minutes") as v:
        runner = CliRunner()
        small = ["-s", "workload.elements=4096"]
        same = []
        for args in (["simulate", "-a", "BDI"], ["simulate", "-a", "CPACK", "-s", "workload.kind=Reduction",
                                                 "-s", "workload.data_profile=Dictionary(3)"],
                     ["simulate", "-a", "FPC", "-b", "0.5", "-s", "workload.data_profile=FrequentPattern(0.5, 0.3)"],
                     ["sweep", "-a", "NONE", "-a", "BDI", "-a", "BESTOFALL", "-s", "workload.warps=8"]):
            outs = []
            for k in range(2):
                path = tmp_path / f"out{len(same)}_{k}.csv"
                r = runner.invoke(main, args + small + ["-o", str(path)])
                assert r.exit_code == 0, r.output
                outs.append(path.read_bytes())
            same.append(outs[0] == outs[1])
        elapsed = time.monotonic() - START
        v.detail = f"{sum(same)}/{len(same)} configs identical, acceptance suite {elapsed:.0f} s"
        v.ok = all(same) and elapsed < 600
        assert v.ok, v.detail


@pytest.fixture(autouse=True, scope="module")
def _reset_matrix():
    MATRIX_RUNS.clear()
    yield
