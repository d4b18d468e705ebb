"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Keys are either top-level (``algorithm``, ``bandwidth_scale``, ``seed`` ...)
or dotted into a section: ``pipeline.<field>``, ``mem.<field>`` and
``workload.<field>``. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .codec import Algorithm
from .errors import ConfigError
from .memhier import MemConfig
from .sm import PipelineConfig
from .workload import (KernelKind, SyntheticKernelSpec, Workload, generate, parse_profile,
                       parse_trace, profile_text, trace_program)

ALGORITHMS = ("NONE", "BDI", "FPC", "CPACK", "BESTOFALL")
BANDWIDTH_SCALES = {0.5: 4, 1.0: 2, 2.0: 1}  # scale -> DRAM cycles per 32 B burst
OUTPUT_ENV = "CABASIM_OUTPUT_DIR"

_TOP = ("algorithm", "bandwidth_scale", "uncompressed_l2", "seed", "output", "trace", "caba", "name")


@dataclass
class RunConfig:
    algorithm: str = "BDI"
    bandwidth_scale: float = 1.0
    uncompressed_l2: bool = False
    seed: int = 0
    output: str = ""
    trace: str = ""
    caba: bool = True
    name: str = ""
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    mem: MemConfig = field(default_factory=MemConfig)
    workload: SyntheticKernelSpec = field(default_factory=SyntheticKernelSpec)

    def validate(self) -> list[str]:
        errs = []
        if self.algorithm not in ALGORITHMS:
            errs.append(f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHMS)}")
        if self.bandwidth_scale not in BANDWIDTH_SCALES:
            errs.append(f"bandwidth_scale {self.bandwidth_scale:g} not one of "
                        f"{', '.join(f'{s:g}' for s in BANDWIDTH_SCALES)}")
        errs += [f"pipeline: {e}" for e in self.pipeline.validate()]
        errs += [f"mem: {e}" for e in self.mem.validate()]
        if self.trace:
            if not Path(self.trace).is_file():
                errs.append(f"trace file {self.trace!r} not found")
        else:
            errs += [f"workload: {e}" for e in self.workload.validate(
                self.mem.memory_size, self.mem.line_size, self.pipeline.regs_per_thread)]
            if self.workload.warps > self.pipeline.warps_per_sm:
                errs.append(f"workload: {self.workload.warps} warps exceed warps_per_sm={self.pipeline.warps_per_sm}")
        return errs

    def check(self) -> None:
        errs = self.validate()
        if errs:
            raise ConfigError(errs)

    def mem_config(self) -> MemConfig:
        """Memory config with the bandwidth scale and L2 variant applied."""
        return dataclasses.replace(self.mem, cycles_per_burst=BANDWIDTH_SCALES[self.bandwidth_scale],
                                   uncompressed_l2=self.uncompressed_l2)

    def build_workload(self) -> Workload:
        L = self.mem.line_size
        if self.trace:
            return trace_program(parse_trace(self.trace), L, b"", self.seed, self.pipeline.regs_per_thread)
        return generate(self.workload, self.seed, L, self.mem.memory_size, self.pipeline.regs_per_thread)

    def run_name(self) -> str:
        if self.name:
            return self.name
        if self.trace:
            return Path(self.trace).stem
        return f"{KernelKind(self.workload.kind).value}/{profile_text(self.workload.data_profile)}"

    def output_path(self, default_name: str) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name

    def to_text(self) -> str:
        out = [f"{k} = {_show(getattr(self, k))}" for k in _TOP]
        for section in ("pipeline", "mem", "workload"):
            obj = getattr(self, section)
            for f in fields(obj):
                v = getattr(obj, f.name)
                if f.name == "data_profile":
                    v = profile_text(v)
                out.append(f"{section}.{f.name} = {_show(v)}")
        return "\n".join(out) + "\n"


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    return getattr(v, "value", v) if not isinstance(v, float) else f"{v:g}"


def _coerce(raw: str, current, key: str):
    text = raw.strip()
    if isinstance(current, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(current, KernelKind):
        try:
            return KernelKind(text)
        except ValueError:
            raise ValueError(f"{key}: unknown kernel {text!r}; valid: "
                             f"{', '.join(k.value for k in KernelKind)}") from None
    if isinstance(current, int) or (current is None and key.endswith("capacity")):
        if current is None and text.lower() == "none":
            return None
        try:
            return int(text, 0)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {text!r}") from None
    return text


def apply(cfg: RunConfig, items) -> RunConfig:
    """Apply ``(key, value)`` string pairs; every bad key or value is reported together."""
    errs = []
    for key, raw in items:
        key = key.strip()
        section, _, name = key.rpartition(".")
        try:
            if not section:
                if key not in _TOP:
                    raise ValueError(f"unknown key {key!r}")
                val = _coerce(raw, getattr(cfg, key), key)
                if key == "algorithm":
                    val = val.upper()
                setattr(cfg, key, val)
            elif section in ("pipeline", "mem", "workload"):
                obj = getattr(cfg, section)
                if name not in {f.name for f in fields(obj)}:
                    raise ValueError(f"unknown key {key!r}")
                if name == "data_profile":
                    val = parse_profile(raw)
                else:
                    val = _coerce(raw, getattr(obj, name), key)
                setattr(cfg, section, dataclasses.replace(obj, **{name: val}))
            else:
                raise ValueError(f"unknown section in {key!r}")
        except ConfigError as exc:
            errs += exc.errors
        except ValueError as exc:
            errs.append(str(exc))
    if errs:
        raise ConfigError(errs)
    return cfg


def parse_text(text: str) -> list[tuple[str, str]]:
    items = []
    errs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            errs.append(f"line {lineno}: expected 'key = value'")
            continue
        items.append((key.strip(), val.strip()))
    if errs:
        raise ConfigError(errs)
    return items


def load(path=None, overrides=()) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (``"key=value"`` strings)."""
    cfg = RunConfig()
    items = []
    if path is not None:
        try:
            items += parse_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    errs = []
    for ov in overrides:
        key, sep, val = ov.partition("=")
        if not sep:
            errs.append(f"override {ov!r} is not key=value")
        else:
            items.append((key, val))
    try:
        apply(cfg, items)
    except ConfigError as exc:
        errs += exc.errors
    errs += cfg.validate()
    if errs:
        raise ConfigError(errs)
    return cfg


def algorithm_of(name: str):
    return name if name == "BESTOFALL" else Algorithm(name)
