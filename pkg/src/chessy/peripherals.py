"""Latency-annotated MMIO device models.

Every device receives requests whose ``addr`` is already an offset into the
device window; the kernel does the translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import SimTime, VpRequest, VpResponse, mix64
from .errors import BusError, MalformedRequest


class Peripheral:
    kind = "device"

    def handle(self, req: VpRequest, now: SimTime) -> VpResponse:
        raise NotImplementedError

    def snapshot(self):
        """Hashable view of the device state, used for oracle comparisons."""
        raise NotImplementedError


class RegisterFile(Peripheral):
    kind = "regfile"

    def __init__(self, size: int, read_latency_us: SimTime = 10, write_latency_us: SimTime = 10):
        if size <= 0:
            raise ValueError("register file size must be positive")
        self.size = size
        self.read_latency_us = read_latency_us
        self.write_latency_us = write_latency_us
        self.store = bytearray(size)

    def handle(self, req, now):
        end = req.addr + req.size_bytes
        if req.addr < 0 or end > self.size:
            raise BusError(req.addr, f"access [{req.addr:#x}, {end:#x}) beyond register file of {self.size:#x} bytes")
        if req.is_read:
            return VpResponse(bytes(self.store[req.addr:end]), self.read_latency_us)
        self.store[req.addr:end] = req.payload
        return VpResponse(b"", self.write_latency_us)

    def snapshot(self):
        return ("regfile", bytes(self.store))


class EmgSensor(Peripheral):
    """Streaming sensor: sample ``k`` exists from ``epoch + k * period`` on.

    Reads are blocking: the response delay covers the wait until the last
    requested sample is available.
    """

    kind = "emg"

    def __init__(self, sample_period_us: SimTime = 1000, sample_bytes: int = 2, seed: int = 0, epoch: SimTime = 0):
        if sample_period_us < 0 or sample_bytes <= 0:
            raise ValueError("invalid EMG sensor configuration")
        self.sample_period_us = sample_period_us
        self.sample_bytes = sample_bytes
        self.seed = seed
        self.epoch = epoch
        self.consumed = 0

    def sample(self, k: int) -> bytes:
        value = mix64(self.seed, k) & ((1 << (8 * self.sample_bytes)) - 1)
        return value.to_bytes(self.sample_bytes, "little")

    def available_at(self, k: int) -> SimTime:
        return self.epoch + k * self.sample_period_us

    def handle(self, req, now):
        if not req.is_read:
            raise BusError(req.addr, "EMG sensor is read-only")
        if req.size_bytes % self.sample_bytes:
            raise MalformedRequest(
                f"read of {req.size_bytes} bytes is not a multiple of the {self.sample_bytes}-byte sample"
            )
        n = req.size_bytes // self.sample_bytes
        first = self.consumed
        self.consumed += n
        payload = b"".join(self.sample(k) for k in range(first, first + n))
        ready = self.available_at(first + n - 1)
        return VpResponse(payload, max(0, ready - now))

    def snapshot(self):
        return ("emg", self.consumed)


@dataclass
class RobotArm(Peripheral):
    actuation_latency_us: SimTime = 100
    last_command: bytes = b""
    command_log: list[tuple[SimTime, bytes]] = field(default_factory=list)

    kind = "arm"

    def handle(self, req, now):
        if req.is_read:
            raise BusError(req.addr, "robot arm command port is write-only")
        self.last_command = bytes(req.payload)
        self.command_log.append((now + self.actuation_latency_us, self.last_command))
        return VpResponse(b"", self.actuation_latency_us)

    def snapshot(self):
        return ("arm", tuple(self.command_log))

    def log_csv(self) -> str:
        lines = ["time_us,hex_payload"]
        lines += [f"{t},{payload.hex()}" for t, payload in self.command_log]
        return "\n".join(lines) + "\n"


DEVICE_KINDS: dict[str, type[Peripheral]] = {
    "regfile": RegisterFile,
    "emg": EmgSensor,
    "arm": RobotArm,
}
