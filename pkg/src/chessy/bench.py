"""Overhead characterization: sweeps, TempoNet-shaped workloads, link-cost models.

Overhead is protocol cost divided by the pure-FPGA (baseline) duration of the
same workload. In ``modeled`` mode the protocol cost is
``sum(per_access_ms + per_byte_us * bytes / 1000)`` over the accesses; in
``measured`` mode it is the host wall-clock spent servicing each access over
a loopback debugger link.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import socket
import threading
from dataclasses import dataclass, field
from fractions import Fraction

from .adapter import AccessEntry, SessionConfig, SessionReport, run_session
from .core import ClockSpec, MAX_TRANSFER, SimTime
from .errors import DegenerateBaseline, EncodingBounds
from .kernel import ARM_BASE, EMG_BASE, REGFILE_BASE, load_address_map, parse_address_map
from .script import Compute, Loop, Read, WorkloadScript, Write
from .target import TargetEmulator, run_baseline

log = logging.getLogger(__name__)

TEMPONET_CYCLES = {"tns": 14_000_000, "tnb": 28_000_000}
EMG_WINDOW_BYTES = 8
ARM_COMMAND_BYTES = 2
STATUS_BYTES = 4

SWEEP_COLUMNS = ["size_bytes", "compute_cycles", "iterations", "n_acc", "baseline_us", "cost_ms", "overhead_pct"]


@dataclass(frozen=True)
class LinkModel:
    mode: str = "modeled"
    per_access_ms: Fraction = Fraction(80)
    per_byte_us: Fraction = Fraction(2, 5)

    def __post_init__(self):
        if self.mode not in ("modeled", "measured"):
            raise ValueError(f"unknown link mode {self.mode!r}")
        object.__setattr__(self, "per_access_ms", Fraction(self.per_access_ms))
        object.__setattr__(self, "per_byte_us", Fraction(self.per_byte_us))
        if self.per_access_ms < 0 or self.per_byte_us < 0:
            raise ValueError("link costs must be non-negative")

    def access_cost_ms(self, size_bytes: int) -> Fraction:
        return self.per_access_ms + self.per_byte_us * size_bytes / 1000


def generate_workload(size_bytes: int, compute_cycles: int, iterations: int, seed: int = 0,
                      target: int = REGFILE_BASE) -> WorkloadScript:
    """Periodic read-compute-write loop against the register file."""
    if not 1 <= size_bytes <= MAX_TRANSFER:
        raise EncodingBounds(f"transfer of {size_bytes} bytes outside [1, {MAX_TRANSFER}]")
    body = (Read(target, size_bytes), Compute(compute_cycles), Write(target, size_bytes, seed))
    return WorkloadScript((Loop(iterations, body),))


def temponet_profile(variant: str, accesses_per_iter: int = 3, iterations: int = 20,
                     compute_cycles: int | None = None) -> WorkloadScript:
    """EMG window read, inference compute, arm command, plus status-register reads."""
    variant = variant.lower()
    if variant not in TEMPONET_CYCLES:
        raise ValueError(f"unknown TempoNet variant {variant!r}, expected tns or tnb")
    if accesses_per_iter < 2:
        raise ValueError("a TempoNet iteration needs at least the EMG read and the arm write")
    cycles = TEMPONET_CYCLES[variant] if compute_cycles is None else compute_cycles
    body = [Read(EMG_BASE, EMG_WINDOW_BYTES)]
    body += [Read(REGFILE_BASE, STATUS_BYTES)] * (accesses_per_iter - 2)
    body += [Compute(cycles), Write(ARM_BASE, ARM_COMMAND_BYTES, seed=7)]
    return WorkloadScript((Loop(iterations, tuple(body)),))


def compute_overhead(baseline_us: SimTime, sizes: list[int], link: LinkModel,
                     wall_ms: list[float] | None = None) -> tuple[float, float]:
    """Return ``(protocol_cost_ms, overhead_pct)``.

    ``sizes`` lists the payload size of every access; measured mode takes the
    per-access wall-clock costs from ``wall_ms`` instead.
    """
    if not sizes:
        return 0.0, 0.0
    if baseline_us <= 0:
        raise DegenerateBaseline("baseline duration is zero; overhead is undefined")
    if link.mode == "modeled":
        cost = sum((link.access_cost_ms(s) for s in sizes), Fraction(0))
        return float(cost), float(cost * 1000 * 100 / baseline_us)
    if wall_ms is None or len(wall_ms) != len(sizes):
        raise ValueError("measured mode needs one wall-clock cost per access")
    cost = sum(wall_ms)
    return cost, 100.0 * cost * 1000 / baseline_us


def _self_hosted_session(script: WorkloadScript, clock: ClockSpec, map_text: str | None,
                         open_bus: bool = False) -> SessionReport:
    """Run target and adapter in one process over a loopback TCP connection."""
    emu = TargetEmulator(script, clock)
    listener = socket.create_server(("127.0.0.1", 0))
    host, port = listener.getsockname()[:2]

    def accept():
        conn, _ = listener.accept()
        listener.close()
        emu.serve_connection(conn)

    server = threading.Thread(target=accept, name="chessy-target", daemon=True)
    server.start()
    amap = load_address_map(None) if map_text is None else parse_address_map(map_text)
    cfg = SessionConfig(host=host, port=port, clock=clock, address_map=amap, open_bus=open_bus)
    try:
        return run_session(cfg)
    finally:
        server.join(timeout=10)


def evaluate(script: WorkloadScript, clock: ClockSpec, link: LinkModel, map_text: str | None = None,
             open_bus: bool = False, self_hosted: bool = False) -> SessionReport:
    """Baseline plus protocol cost for one workload.

    Modeled mode needs only the access pattern, which by default comes from
    the in-process baseline run; ``self_hosted`` (implied by measured mode)
    drives a real loopback session instead.
    """
    amap = load_address_map(None) if map_text is None else parse_address_map(map_text)
    base = run_baseline(script, clock, amap, open_bus=open_bus)
    if link.mode == "measured" or self_hosted:
        report = _self_hosted_session(script, clock, map_text, open_bus)
        wall = [a.wall_ms for a in report.accesses] if link.mode == "measured" else None
    else:
        report = SessionReport(
            accesses=[AccessEntry(r, d, 0.0, r.size_bytes) for r, d in zip(base.records, base.delays)],
            trace=base.trace,
            final_state=base.final_state,
            exit_code=0,
        )
        wall = None
    report.baseline_us = base.duration_us
    sizes = [a.bytes_moved for a in report.accesses]
    report.protocol_cost_ms, report.overhead_pct = compute_overhead(base.duration_us, sizes, link, wall)
    return report


@dataclass
class SweepConfig:
    sizes: list[int] = field(default_factory=lambda: [4, 64, 1024, 8192])
    compute_cycles: list[int] = field(default_factory=lambda: [0, 100_000, 1_000_000, 10_000_000])
    iterations: int = 10
    clock: ClockSpec = field(default_factory=ClockSpec)
    link: LinkModel = field(default_factory=LinkModel)
    seed: int = 0
    map_text: str | None = None
    self_hosted: bool = False

    def __post_init__(self):
        if not self.sizes or not self.compute_cycles:
            raise ValueError("sweep needs at least one size and one compute setting")
        if self.iterations < 1:
            raise ValueError("sweep needs at least one iteration")


def sweep_rows(cfg: SweepConfig) -> list[dict]:
    rows = []
    for cycles in cfg.compute_cycles:
        for size in cfg.sizes:
            script = generate_workload(size, cycles, cfg.iterations, cfg.seed)
            rep = evaluate(script, cfg.clock, cfg.link, cfg.map_text, self_hosted=cfg.self_hosted)
            rows.append({
                "size_bytes": size,
                "compute_cycles": cycles,
                "iterations": cfg.iterations,
                "n_acc": rep.n_accesses,
                "baseline_us": rep.baseline_us,
                "cost_ms": rep.protocol_cost_ms,
                "overhead_pct": rep.overhead_pct,
            })
            log.info("size=%d cycles=%d overhead=%.3f%%", size, cycles, rep.overhead_pct)
    return rows


def rows_to_csv(rows: list[dict], columns: list[str] = SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def run_sweep(cfg: SweepConfig) -> str:
    return rows_to_csv(sweep_rows(cfg))


def plot_data(rows: list[dict], temponet: dict[str, float] | None = None) -> str:
    """Grouped series shaped like the overhead bar chart: one series per compute setting."""
    series: dict[int, dict] = {}
    for row in rows:
        s = series.setdefault(row["compute_cycles"], {"compute_cycles": row["compute_cycles"], "size_bytes": [], "overhead_pct": []})
        s["size_bytes"].append(row["size_bytes"])
        s["overhead_pct"].append(round(row["overhead_pct"], 6))
    out = {"series": list(series.values())}
    if temponet:
        out["temponet"] = {k.upper(): round(v, 6) for k, v in temponet.items()}
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def relative_spread(values: list[float]) -> float:
    """``(max - min) / max``: size-to-size variation relative to the largest overhead."""
    hi = max(values)
    return 0.0 if hi == 0 else (hi - min(values)) / hi


TEMPONET_COLUMNS = ["variant", "iterations", "accesses_per_iter", "n_acc", "baseline_us", "cost_ms", "overhead_pct"]


def temponet_rows(variants: list[str], iterations: int, link: LinkModel, clock: ClockSpec = ClockSpec(),
                  accesses_per_iter: int = 3, map_text: str | None = None, self_hosted: bool = False) -> list[dict]:
    rows = []
    for variant in variants:
        script = temponet_profile(variant, accesses_per_iter, iterations)
        rep = evaluate(script, clock, link, map_text, self_hosted=self_hosted)
        rows.append({
            "variant": variant.upper(),
            "iterations": iterations,
            "accesses_per_iter": accesses_per_iter,
            "n_acc": rep.n_accesses,
            "baseline_us": rep.baseline_us,
            "cost_ms": rep.protocol_cost_ms,
            "overhead_pct": rep.overhead_pct,
        })
    return rows
