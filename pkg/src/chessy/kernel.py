"""Loosely-timed discrete-event kernel with address-mapped dispatch."""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .core import SimTime, U64_MAX, VpRequest, VpResponse
from .errors import BusError
from .peripherals import DEVICE_KINDS, Peripheral

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mapping:
    base: int
    length: int
    device: Peripheral
    name: str = ""

    @property
    def end(self) -> int:
        return self.base + self.length


class AddressMap:
    """Sorted, non-overlapping list of device windows."""

    def __init__(self, mappings=()):
        self._maps: list[Mapping] = []
        for m in mappings:
            self.add(m.base, m.length, m.device, m.name)

    def add(self, base: int, length: int, device: Peripheral, name: str = "") -> Mapping:
        if length <= 0:
            raise ValueError(f"mapping at {base:#x} has non-positive length")
        new = Mapping(base, length, device, name or f"{device.kind}@{base:#x}")
        for m in self._maps:
            if base < m.end and m.base < new.end:
                raise ValueError(f"mapping {new.name} overlaps {m.name}")
        self._maps.append(new)
        self._maps.sort(key=lambda m: m.base)
        return new

    def resolve(self, addr: int) -> Mapping | None:
        for m in self._maps:
            if m.base <= addr < m.end:
                return m
        return None

    def __iter__(self):
        return iter(self._maps)

    def __len__(self):
        return len(self._maps)

    def device(self, kind: str) -> Peripheral:
        """First mapped device of the given kind."""
        for m in self._maps:
            if m.device.kind == kind:
                return m.device
        raise KeyError(kind)

    def snapshot(self):
        return tuple((m.base, m.device.snapshot()) for m in self._maps)


class SimKernel:
    """Global simulated time, an event queue, and the peripheral bus.

    Time only moves forward: ``advance_to`` with a past time is a no-op.
    Events due at the same time fire in scheduling order.
    """

    def __init__(self, address_map: AddressMap | None = None, open_bus: bool = False):
        self.now: SimTime = 0
        self.address_map = address_map if address_map is not None else AddressMap()
        self.open_bus = open_bus
        self._queue: list[tuple[SimTime, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def schedule(self, delta: SimTime, action: Callable[[], None]) -> SimTime:
        if delta < 0:
            raise ValueError("cannot schedule into the past")
        due = self.now + delta
        if due > U64_MAX:
            raise OverflowError(f"event due time {due} exceeds 64-bit microseconds")
        heapq.heappush(self._queue, (due, next(self._seq), action))
        return due

    def pending(self) -> int:
        return len(self._queue)

    def advance_to(self, t: SimTime) -> None:
        while self._queue and self._queue[0][0] <= t:
            due, _, action = heapq.heappop(self._queue)
            self.now = max(self.now, due)
            action()
        self.now = max(self.now, t)

    def dispatch(self, req: VpRequest) -> VpResponse:
        mapping = self.address_map.resolve(req.addr)
        if mapping is None or req.addr + req.size_bytes > mapping.end:
            if not self.open_bus:
                raise BusError(req.addr)
            log.debug("open-bus access at %#x", req.addr)
            return VpResponse(bytes(req.size_bytes) if req.is_read else b"", 0)
        local = replace(req, addr=req.addr - mapping.base)
        resp = mapping.device.handle(local, self.now)
        if req.is_read and len(resp.payload) != req.size_bytes:
            raise AssertionError(f"{mapping.name} returned {len(resp.payload)} bytes for a {req.size_bytes}-byte read")
        self.advance_to(self.now + resp.simulated_delay)
        return resp


# address-map file: "BASE LENGTH KIND [key=value ...]"

_PARAM_ALIASES = {
    "emg": {"period_us": "sample_period_us", "epoch_us": "epoch"},
    "arm": {"latency_us": "actuation_latency_us"},
    "regfile": {},
}

DEFAULT_MAP = """\
# base        length   kind     params
0x60000000    0x1000   emg      period_us=1000 sample_bytes=2 seed=1
0x60010000    0x1000   arm      latency_us=100
0x60020000    0x10000  regfile  read_latency_us=10 write_latency_us=10
"""

EMG_BASE = 0x6000_0000
ARM_BASE = 0x6001_0000
REGFILE_BASE = 0x6002_0000


def parse_address_map(text: str) -> AddressMap:
    amap = AddressMap()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 3:
            raise ValueError(f"address map line {lineno}: expected BASE LENGTH KIND [PARAMS...]")
        base, length, kind = int(fields[0], 16), int(fields[1], 16), fields[2]
        if kind not in DEVICE_KINDS:
            raise ValueError(f"address map line {lineno}: unknown device kind {kind!r}")
        kwargs = {}
        for param in fields[3:]:
            key, sep, value = param.partition("=")
            if not sep:
                raise ValueError(f"address map line {lineno}: parameter {param!r} is not key=value")
            key = _PARAM_ALIASES[kind].get(key, key)
            kwargs[key] = int(value, 0)
        if kind == "regfile":
            kwargs.setdefault("size", length)
        try:
            device = DEVICE_KINDS[kind](**kwargs)
        except TypeError as exc:
            raise ValueError(f"address map line {lineno}: {exc}") from None
        amap.add(base, length, device)
    return amap


def load_address_map(path: str | Path | None) -> AddressMap:
    if path is None:
        return parse_address_map(DEFAULT_MAP)
    return parse_address_map(Path(path).read_text())
