import socket
import threading

import pytest

from chessy.adapter import SessionConfig, run_session
from chessy.core import ClockSpec
from chessy.kernel import parse_address_map, DEFAULT_MAP
from chessy.rsp import RspClient
from chessy.target import TargetEmulator


class Session:
    """Target emulator on one end of a socketpair, adapter on the other."""

    def __init__(self, script, map_text=DEFAULT_MAP, clock=ClockSpec(), open_bus=False, emulator_cls=TargetEmulator):
        self.emu = emulator_cls(script, clock)
        self.cfg = SessionConfig(address_map=parse_address_map(map_text), clock=clock, open_bus=open_bus, link_timeout=5.0)
        a, b = socket.socketpair()
        self.client = RspClient(a, timeout=5.0)
        self.thread = threading.Thread(target=self.emu.serve_connection, args=(b,), daemon=True)
        self.thread.start()

    def run(self):
        try:
            return run_session(self.cfg, client=self.client)
        finally:
            self.client.close()
            self.thread.join(timeout=5)


@pytest.fixture
def session():
    return Session


@pytest.fixture
def attached():
    """A halted emulator and a raw client talking to it."""
    opened = []

    def make(script, clock=ClockSpec(), emulator_cls=TargetEmulator):
        emu = emulator_cls(script, clock)
        a, b = socket.socketpair()
        client = RspClient(a, timeout=5.0)
        t = threading.Thread(target=emu.serve_connection, args=(b,), daemon=True)
        t.start()
        opened.append((client, t))
        return emu, client

    yield make
    for client, t in opened:
        client.close()
        t.join(timeout=5)


CRITERIA_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def check(label: str, ok: bool, detail: str) -> None:
        CRITERIA_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
