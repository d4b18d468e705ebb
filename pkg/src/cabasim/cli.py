"""Command-line driver: ``cabasim simulate | compress | sweep``."""

from __future__ import annotations

import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor

import click

from . import codec
from .config import ALGORITHMS, BANDWIDTH_SCALES, OUTPUT_ENV, RunConfig, load
from .errors import CabaError, ConfigError, ParseError
from .metrics import RunMetrics, csv_text, summary
from .sm import SM


def run(cfg: RunConfig, trace=None) -> tuple[RunMetrics, SM]:
    """Validate ``cfg``, simulate it and return the metrics with the finished SM."""
    cfg.check()
    wl = cfg.build_workload()
    sm = SM(wl, cfg.algorithm, cfg.pipeline, cfg.mem_config(), caba=cfg.caba, trace=trace)
    while sm.step():
        pass
    return sm.finalize(cfg.run_name(), cfg.bandwidth_scale, cfg.seed), sm


def _run_metrics(cfg: RunConfig) -> RunMetrics:
    return run(cfg)[0]


def _fail(exc: CabaError) -> None:
    if isinstance(exc, ConfigError):
        for e in exc.errors:
            click.echo(f"error: {e}", err=True)
    else:
        click.echo(f"error: {exc}", err=True)
    sys.exit(2 if isinstance(exc, (ConfigError, ParseError)) else 1)


def _load(config, overrides) -> RunConfig:
    try:
        return load(config, overrides)
    except ConfigError as exc:
        _fail(exc)


class _Upper(click.Choice):
    """Case-insensitive choice that reports and returns the canonical upper-case names."""

    def convert(self, value, param, ctx):
        text = str(value).upper()
        if text not in self.choices:
            self.fail(f"unknown algorithm {value!r}; valid values: {', '.join(self.choices)}", param, ctx)
        return text


_ALG = _Upper(ALGORITHMS)
_BW = click.Choice([f"{s:g}" for s in BANDWIDTH_SCALES])


@click.group()
@click.version_option(package_name="cabasim")
def main() -> None:
    """Cycle-level SM simulator with assist-warp cache-line compression."""


@main.command()
@click.argument("config", required=False, type=click.Path(dir_okay=False))
@click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config key.")
@click.option("-a", "--algorithm", type=_ALG, help="Compression algorithm.")
@click.option("-b", "--bandwidth", type=_BW, help="Memory bandwidth scale.")
@click.option("--seed", type=int)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Replay a trace file.")
@click.option("--no-caba", is_flag=True, help="Build the SM without assist-warp structures.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help=f"CSV path (default: ${OUTPUT_ENV}/run.csv).")
@click.option("--trace-cycles", type=click.Path(dir_okay=False), help="Write a per-cycle issue log.")
def simulate(config, overrides, algorithm, bandwidth, seed, trace_path, no_caba, output, trace_cycles):
    """Run one configuration and write its metrics as CSV."""
    extra = list(overrides)
    if algorithm:
        extra.append(f"algorithm={algorithm.upper()}")
    if bandwidth:
        extra.append(f"bandwidth_scale={bandwidth}")
    if seed is not None:
        extra.append(f"seed={seed}")
    if trace_path:
        extra.append(f"trace={trace_path}")
    if no_caba:
        extra.append("caba=false")
    if output:
        extra.append(f"output={output}")
    cfg = _load(config, extra)
    log = open(trace_cycles, "w") if trace_cycles else None
    try:
        m, _ = run(cfg, trace=log)
    except CabaError as exc:
        _fail(exc)
    finally:
        if log is not None:
            log.close()
    path = cfg.output_path("run.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text([m]))
    click.echo(summary(m))
    click.echo(f"csv            {path}")


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("-a", "--algorithm", "algorithms", type=_ALG, multiple=True,
              help="Algorithm to report (repeatable; default all).")
@click.option("--line-size", type=click.Choice([str(s) for s in codec.LINE_SIZES]), default="128")
@click.option("--burst-size", type=int, default=codec.DEFAULT_BURST)
def compress(path, algorithms, line_size, burst_size):
    """Report burst counts and compression ratio of a binary file."""
    algs = [a.upper() for a in algorithms] or [a for a in ALGORITHMS if a != "NONE"]
    algs = [a if a == "BESTOFALL" else codec.Algorithm(a) for a in algs]
    try:
        rows = codec.compress_file(path, algs, int(line_size), burst_size)
    except CabaError as exc:
        _fail(exc)
    click.echo(f"{'algorithm':<10} {'lines':>8} {'raw':>8} {'bursts':>8} {'ratio':>8}")
    for r in rows:
        click.echo(f"{r['algorithm']:<10} {r['lines']:>8} {r['raw_bursts']:>8} "
                   f"{r['compressed_bursts']:>8} {r['ratio']:>8.4f}")


@main.command()
@click.argument("config", required=False, type=click.Path(dir_okay=False))
@click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("-a", "--algorithm", "algorithms", type=_ALG, multiple=True,
              help="Algorithms to sweep (default NONE BDI FPC CPACK).")
@click.option("-b", "--bandwidth", "bandwidths", type=_BW, multiple=True,
              help="Bandwidth scales to sweep (default all).")
@click.option("-j", "--jobs", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help=f"CSV path (default: ${OUTPUT_ENV}/sweep.csv).")
def sweep(config, overrides, algorithms, bandwidths, jobs, output):
    """Run the bandwidth x algorithm grid into one CSV."""
    base = _load(config, list(overrides) + ([f"output={output}"] if output else []))
    algs = [a.upper() for a in algorithms] or ["NONE", "BDI", "FPC", "CPACK"]
    scales = [float(b) for b in bandwidths] or sorted(BANDWIDTH_SCALES)
    grid = [dataclasses.replace(base, algorithm=a, bandwidth_scale=s) for s in scales for a in algs]
    errs = [f"{c.algorithm} x{c.bandwidth_scale:g}: {e}" for c in grid for e in c.validate()]
    if errs:
        _fail(ConfigError(errs))
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_run_metrics, grid))  # map keeps grid order
        else:
            rows = [_run_metrics(c) for c in grid]
    except CabaError as exc:
        _fail(exc)
    path = base.output_path("sweep.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(rows))
    for m in rows:
        click.echo(f"{m.algorithm:<10} x{m.bandwidth_scale:<4g} IPC {m.ipc:.4f}  "
                   f"bw {m.bandwidth_utilization:.4f}  ratio {m.compression_ratio:.4f}")
    click.echo(f"csv {path}")
