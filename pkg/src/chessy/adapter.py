"""Host-side adapter: services target accesses against the peripheral kernel.

For each breakpoint hit on ``chessy_access`` the adapter reads the mailbox,
fetches write payloads, brings the kernel up to the request timestamp,
dispatches, writes read data back, sets ``mtime`` to
``timestamp_us + simulated_delay`` and resumes the target.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .core import MAILBOX_SIZE, ClockSpec, SimTime, TransactionRecord, VpRequest, decode_transaction
from .errors import TimeRegression, UnknownStopReply
from .kernel import AddressMap, SimKernel, load_address_map
from .rsp import RspClient
from .target import Access, DEFAULT_SYMBOLS

log = logging.getLogger(__name__)


@dataclass
class SessionConfig:
    host: str = "127.0.0.1"
    port: int = 3333
    symbols: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SYMBOLS))
    address_map: AddressMap | None = None
    clock: ClockSpec = field(default_factory=ClockSpec)
    open_bus: bool = False
    link_timeout: float | None = 10.0
    # pure-FPGA duration of the workload, if known; enables overhead figures
    baseline_us: SimTime | None = None

    def __post_init__(self):
        if self.address_map is None:
            self.address_map = load_address_map(None)
        needed = ("chessy_access", "chessy_mailbox", "mtime")
        missing = [n for n in needed if n not in self.symbols]
        if missing:
            raise ValueError(f"symbol table lacks {', '.join(missing)}")
        addrs = [self.symbols[n] for n in needed]
        if len(set(addrs)) != len(addrs):
            raise ValueError("chessy_access, mailbox and mtime addresses must be distinct")

    @property
    def trap_addr(self) -> int:
        return self.symbols["chessy_access"]

    @property
    def mailbox_addr(self) -> int:
        return self.symbols["chessy_mailbox"]

    @property
    def mtime_addr(self) -> int:
        return self.symbols["mtime"]


@dataclass(frozen=True)
class AccessEntry:
    record: TransactionRecord
    delay_us: SimTime
    wall_ms: float
    bytes_moved: int

    @property
    def resume_time(self) -> SimTime:
        return self.record.timestamp_us + self.delay_us


@dataclass
class SessionReport:
    accesses: list[AccessEntry] = field(default_factory=list)
    trace: list[Access] = field(default_factory=list)
    final_state: tuple = ()
    exit_code: int | None = None
    baseline_us: SimTime | None = None
    protocol_cost_ms: float = 0.0
    overhead_pct: float | None = None

    @property
    def n_accesses(self) -> int:
        return len(self.accesses)

    @property
    def total_bytes(self) -> int:
        return sum(a.bytes_moved for a in self.accesses)

    def trace_csv(self) -> str:
        lines = ["idx,is_read,addr,size,timestamp_us,delay_us,wall_ms"]
        for i, a in enumerate(self.accesses):
            r = a.record
            lines.append(f"{i},{int(r.is_read)},{r.addr:#x},{r.size_bytes},{r.timestamp_us},{a.delay_us},{a.wall_ms:.3f}")
        return "\n".join(lines) + "\n"


class Adapter:
    """Owns the kernel and the debugger link for one session."""

    def __init__(self, client: RspClient, cfg: SessionConfig):
        self.client = client
        self.cfg = cfg
        self.kernel = SimKernel(cfg.address_map, open_bus=cfg.open_bus)
        self.trace: list[Access] = []

    def service_one(self) -> AccessEntry:
        """Service the access the target is halted on, leaving it ready to resume."""
        started = time.perf_counter()
        client, kernel = self.client, self.kernel
        record = decode_transaction(client.read_mem(self.cfg.mailbox_addr, MAILBOX_SIZE))
        payload = b"" if record.is_read else client.read_mem(record.data_ptr, record.size_bytes)
        if record.timestamp_us < kernel.now:
            raise TimeRegression(
                f"target timestamp {record.timestamp_us} us is behind simulation time {kernel.now} us"
            )
        kernel.advance_to(record.timestamp_us)
        resp = kernel.dispatch(
            VpRequest(record.is_read, record.addr, record.size_bytes, record.timestamp_us, payload)
        )
        if record.is_read:
            client.write_mem(record.data_ptr, resp.payload)
            self.trace.append(Access("read", record.addr, resp.payload))
        else:
            self.trace.append(Access("write", record.addr, payload))
        resume_at = record.timestamp_us + resp.simulated_delay
        assert kernel.now == resume_at
        client.write_mem(self.cfg.mtime_addr, resume_at.to_bytes(8, "little"))
        wall_ms = (time.perf_counter() - started) * 1e3
        return AccessEntry(record, resp.simulated_delay, wall_ms, record.size_bytes)

    def run(self) -> SessionReport:
        client = self.client
        report = SessionReport(baseline_us=self.cfg.baseline_us)
        client.set_breakpoint(self.cfg.trap_addr)
        stop = client.resume()
        while not stop.exited:
            if stop.value != 5:
                raise UnknownStopReply(f"target stopped with signal {stop.value}, expected SIGTRAP")
            entry = self.service_one()
            report.accesses.append(entry)
            log.debug("serviced %s", entry)
            stop = client.resume()
        report.exit_code = stop.value
        report.trace = self.trace
        report.final_state = self.cfg.address_map.snapshot()
        report.protocol_cost_ms = sum(a.wall_ms for a in report.accesses)
        if report.baseline_us:
            report.overhead_pct = 100.0 * report.protocol_cost_ms * 1e3 / report.baseline_us
        return report


def run_session(cfg: SessionConfig, client: RspClient | None = None) -> SessionReport:
    """Connect to the target (unless ``client`` is given) and run to exit."""
    own = client is None
    if own:
        client = RspClient.connect(cfg.host, cfg.port, timeout=cfg.link_timeout)
    try:
        return Adapter(client, cfg).run()
    finally:
        if own:
            client.close()
