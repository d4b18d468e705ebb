"""Small hand-written workloads that stress specific scheduler paths."""

import random

from cabasim.workload import ParentInstr, Workload


def small_ints(rng, n):
    return b"".join(rng.randrange(-60, 60).to_bytes(4, "little", signed=True) for _ in range(n // 4))


def scenario_fill_then_use(seed=0):
    """Every warp loads compressible lines and immediately consumes them."""
    rng = random.Random(seed)
    memory = b"".join(small_ints(rng, 128) for _ in range(64))
    progs = []
    for w in range(8):
        p = []
        for k in range(8):
            line = (w * 8 + k) % 64
            p += [ParentInstr("LD", dst=1 + k % 4, addr=line * 128 + 4 * (k % 32), size=4),
                  ParentInstr("ALU", dst=7, srcs=(1 + k % 4,))]
        progs.append(p)
    return Workload(memory, progs, 128, "fill_then_use")


def scenario_stores_and_compute(seed=0):
    """Full-line stores (low-priority compression) competing with ALU-only warps."""
    rng = random.Random(seed)
    progs = []
    for w in range(6):
        if w % 2:
            progs.append([ParentInstr("ALU", dst=2, srcs=(2,)) for _ in range(40)])
        else:
            progs.append([ParentInstr("ST", addr=(w * 10 + k) * 128, size=128, data=small_ints(rng, 128))
                          for k in range(10)])
    return Workload(bytes(128 * 64), progs, 128, "stores_and_compute")


def scenario_partial_over_compressed(seed=0):
    """Read-modify-write of words inside compressed lines (optimistic store retry)."""
    rng = random.Random(seed)
    memory = b"".join(small_ints(rng, 128) for _ in range(16))
    progs = []
    for w in range(4):
        p = []
        for k in range(4):
            line = w * 4 + k
            p += [ParentInstr("LD", dst=1, addr=line * 128, size=4),
                  ParentInstr("ST", addr=line * 128 + 64, size=4, srcs=(1,)),
                  ParentInstr("LD", dst=2, addr=line * 128 + 64, size=4),
                  ParentInstr("ALU", dst=7, srcs=(2,))]
        progs.append(p)
    return Workload(memory, progs, 128, "partial_over_compressed")


def scenario_shared_lines(seed=0):
    """Many warps hitting the same few lines: MSHR merging and uniqueness rejections."""
    rng = random.Random(seed)
    memory = b"".join(small_ints(rng, 128) for _ in range(4))
    progs = [[ParentInstr("LD", dst=1 + k % 3, addr=(k % 4) * 128 + 4 * w, size=4) for k in range(12)]
             + [ParentInstr("ALU", dst=7, srcs=(1,))] for w in range(8)]
    return Workload(memory, progs, 128, "shared_lines")


SCENARIOS = [scenario_fill_then_use, scenario_stores_and_compute, scenario_partial_over_compressed,
             scenario_shared_lines]
