"""The emulated target ("virtual FPGA").

A workload script runs against a sparse byte-addressable memory holding a
memory-mapped ``mtime`` counter. Every Read/Write step fills the transaction
mailbox and, when a breakpoint sits on ``chessy_access``, halts with a
``T05`` stop reply so that a debugger-side host can service it. While halted
``mtime`` does not move; only the host's ``M`` packets change memory.
"""

from __future__ import annotations

import binascii
import logging
import socket
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

from .core import (
    ClockSpec,
    SimTime,
    TransactionRecord,
    VpRequest,
    check_u64,
    cycles_to_micros,
    encode_transaction,
    pattern_bytes,
)
from .kernel import AddressMap, SimKernel
from .rsp import PacketStream
from .errors import LinkError
from .script import Compute, Read, WorkloadScript

log = logging.getLogger(__name__)

CHESSY_ACCESS = 0x0000_1000
MAILBOX_ADDR = 0x8000_0000
DATA_BUFFER_ADDR = 0x8000_0100
MTIME_ADDR = 0x0200_BFF8
TEXT_END = 0x2000  # [0, TEXT_END) is read-only code
MAX_MEM_PACKET = 0x4000

DEFAULT_SYMBOLS = {
    "chessy_access": CHESSY_ACCESS,
    "chessy_mailbox": MAILBOX_ADDR,
    "chessy_buffer": DATA_BUFFER_ADDR,
    "mtime": MTIME_ADDR,
}


def format_symbols(symbols: dict[str, int]) -> str:
    return "".join(f"{name} {addr:#010x}\n" for name, addr in symbols.items())


def parse_symbols(text: str) -> dict[str, int]:
    symbols = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"symbol file line {lineno}: expected 'name address'")
        symbols[parts[0]] = int(parts[1], 0)
    return symbols


def load_symbols(path: str | Path | None) -> dict[str, int]:
    symbols = dict(DEFAULT_SYMBOLS)
    if path is not None:
        symbols.update(parse_symbols(Path(path).read_text()))
    return symbols


class Access(NamedTuple):
    """One entry of a functional trace: what the workload read or wrote."""

    op: str  # "read" | "write"
    addr: int
    data: bytes


class SparseMemory:
    PAGE = 4096

    def __init__(self):
        self.pages: dict[int, bytearray] = {}

    def read(self, addr: int, size: int) -> bytes:
        out = bytearray()
        while size:
            page, off = divmod(addr, self.PAGE)
            n = min(size, self.PAGE - off)
            buf = self.pages.get(page)
            out += buf[off:off + n] if buf is not None else bytes(n)
            addr += n
            size -= n
        return bytes(out)

    def write(self, addr: int, data: bytes) -> None:
        pos = 0
        while pos < len(data):
            page, off = divmod(addr + pos, self.PAGE)
            n = min(len(data) - pos, self.PAGE - off)
            buf = self.pages.setdefault(page, bytearray(self.PAGE))
            buf[off:off + n] = data[pos:pos + n]
            pos += n

    def digest(self) -> int:
        return hash(tuple(sorted((k, bytes(v)) for k, v in self.pages.items())))


class TargetEmulator:
    """Script interpreter plus the debugger stub that controls it."""

    def __init__(self, script: WorkloadScript, clock: ClockSpec = ClockSpec(), symbols: dict[str, int] | None = None):
        self.script = script
        self.clock = clock
        self.symbols = dict(DEFAULT_SYMBOLS if symbols is None else symbols)
        self.memory = SparseMemory()
        self.breakpoints: set[int] = set()
        self.trace: list[Access] = []
        # mtime seen by the workload right after each trapped access resumes
        self.resume_log: list[SimTime] = []
        self.records: list[TransactionRecord] = []
        self.finished = False
        self._runner = self._execute()
        self.mtime = 0

    @property
    def mtime(self) -> SimTime:
        return int.from_bytes(self.memory.read(self.symbols["mtime"], 8), "little")

    @mtime.setter
    def mtime(self, value: SimTime) -> None:
        self.memory.write(self.symbols["mtime"], check_u64(value, "mtime").to_bytes(8, "little"))

    @property
    def trap_addr(self) -> int:
        return self.symbols["chessy_access"]

    def _execute(self):
        mailbox = self.symbols["chessy_mailbox"]
        buffer = self.symbols["chessy_buffer"]
        for step in self.script.flatten():
            if isinstance(step, Compute):
                self.mtime = self.mtime + cycles_to_micros(step.cycles, self.clock)
                continue
            is_read = isinstance(step, Read)
            record = TransactionRecord(is_read, step.addr, buffer, step.size_bytes, self.mtime)
            self.records.append(record)
            self.memory.write(mailbox, encode_transaction(record))
            if not is_read:
                payload = pattern_bytes(step.seed, step.size_bytes)
                self.memory.write(buffer, payload)
            if self.trap_addr in self.breakpoints:
                yield record
                self.resume_log.append(self.mtime)
            elif is_read:
                # nobody services the access: open-bus zeros
                self.memory.write(buffer, bytes(step.size_bytes))
            if is_read:
                self.trace.append(Access("read", step.addr, self.memory.read(buffer, step.size_bytes)))
            else:
                self.trace.append(Access("write", step.addr, payload))
        self.finished = True

    def step(self) -> TransactionRecord | None:
        """Run until the next trapped access (returned) or the end of the script (None)."""
        if self.finished:
            return None
        try:
            return next(self._runner)
        except StopIteration:
            return None

    def run_standalone(self) -> SimTime:
        """Run to completion with no debugger; returns the final mtime."""
        while self.step() is not None:
            pass
        return self.mtime

    # debugger stub

    def _stop_payload(self) -> bytes:
        return b"W00" if self.finished else b"S05"

    def handle_packet(self, pkt: bytes) -> bytes | None:
        """Reply to one debugger packet. ``None`` asks the server to hang up."""
        cmd = pkt[:1]
        if cmd == b"M":
            head, _, data_hex = pkt[1:].partition(b":")
            addr, length = (int(x, 16) for x in head.split(b","))
            data = binascii.unhexlify(data_hex)
            if len(data) != length or length > MAX_MEM_PACKET or addr + length > 1 << 64:
                return b"E01"
            if addr < TEXT_END:
                return b"E02"
            self.memory.write(addr, data)
            return b"OK"
        args = pkt[1:].decode("ascii", "replace")
        if cmd == b"?":
            return self._stop_payload()
        if cmd == b"m":
            addr, length = (int(x, 16) for x in args.split(","))
            if length > MAX_MEM_PACKET or addr + length > 1 << 64:
                return b"E01"
            return binascii.hexlify(self.memory.read(addr, length))
        if cmd in (b"Z", b"z"):
            kind, addr, _ = args.split(",")
            if kind != "0":
                return b""
            addr = int(addr, 16)
            if addr not in self.symbols.values() or addr >= TEXT_END:
                return b"E16"
            (self.breakpoints.add if cmd == b"Z" else self.breakpoints.discard)(addr)
            return b"OK"
        if cmd == b"c":
            return b"T05" if self.step() is not None else b"W00"
        if cmd in (b"k", b"D"):
            return None
        return b""

    def serve_connection(self, sock: socket.socket) -> int:
        """Speak to one debugger until the script exits or the link drops."""
        if sock.family in (socket.AF_INET, socket.AF_INET6):
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        stream = PacketStream(sock)
        try:
            while True:
                pkt = stream.read_packet()
                if pkt == b"\x03":
                    continue
                try:
                    reply = self.handle_packet(pkt)
                except (ValueError, binascii.Error):
                    log.warning("protocol violation %r, closing connection", pkt[:40])
                    return 1
                if reply is None:
                    return 0
                stream.write_packet(reply)
                if self.finished and reply.startswith(b"W"):
                    return 0
        except LinkError as exc:
            log.info("debugger link closed: %s", exc)
            return 1
        finally:
            sock.close()


def serve(
    script: WorkloadScript,
    clock: ClockSpec = ClockSpec(),
    host: str = "127.0.0.1",
    port: int = 3333,
    symbols: dict[str, int] | None = None,
    on_listening: Callable[[tuple[str, int]], None] | None = None,
) -> int:
    """Listen, accept exactly one debugger, run the script under its control.

    The listening socket is closed once a client is accepted, so any further
    connection attempt is refused.
    """
    emu = TargetEmulator(script, clock, symbols)
    listener = socket.create_server((host, port))
    try:
        if on_listening is not None:
            on_listening(listener.getsockname()[:2])
        log.info("target listening on %s:%d", *listener.getsockname()[:2])
        conn, peer = listener.accept()
    finally:
        listener.close()
    log.info("debugger attached from %s:%d", *peer[:2])
    return emu.serve_connection(conn)


@dataclass
class BaselineReport:
    duration_us: SimTime
    trace: list[Access]
    records: list[TransactionRecord] = field(default_factory=list)
    delays: list[SimTime] = field(default_factory=list)
    final_state: tuple = ()

    @property
    def total_bytes(self) -> int:
        return sum(r.size_bytes for r in self.records)


def run_baseline(
    script: WorkloadScript,
    clock: ClockSpec,
    address_map: AddressMap,
    open_bus: bool = False,
    symbols: dict[str, int] | None = None,
) -> BaselineReport:
    """Execute ``script`` with every peripheral serviced in-process.

    This is the pure-FPGA reference: no debugger, no halts, time advanced only
    by compute and by each device's simulated delay.
    """
    buffer = (symbols or DEFAULT_SYMBOLS)["chessy_buffer"]
    kernel = SimKernel(address_map, open_bus=open_bus)
    report = BaselineReport(0, [])
    t = 0
    for step in script.flatten():
        if isinstance(step, Compute):
            t = check_u64(t + cycles_to_micros(step.cycles, clock), "baseline time")
            continue
        is_read = isinstance(step, Read)
        payload = b"" if is_read else pattern_bytes(step.seed, step.size_bytes)
        kernel.advance_to(t)
        resp = kernel.dispatch(VpRequest(is_read, step.addr, step.size_bytes, t, payload))
        report.records.append(TransactionRecord(is_read, step.addr, buffer, step.size_bytes, t))
        report.delays.append(resp.simulated_delay)
        report.trace.append(Access("read" if is_read else "write", step.addr, resp.payload if is_read else payload))
        t += resp.simulated_delay
        assert kernel.now == t
    report.duration_us = t
    report.final_state = address_map.snapshot()
    return report
