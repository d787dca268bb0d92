"""Time base, clock conversion and the target mailbox codec.

Simulated time is a plain ``int`` count of microseconds (``SimTime``); the
target's ``mtime`` ticks at 1 MHz so ``timestamp_us`` needs no conversion.

Mailbox layout (40 bytes, little-endian, five unsigned 64-bit words)::

    offset  field
    0       is_read       (0 = write, 1 = read)
    8       addr          target-bus address of the peripheral
    16      data_ptr      target-memory address of the payload buffer
    24      size_bytes    1 .. 65536
    32      timestamp_us  mtime value when the request was issued
"""

from __future__ import annotations

import struct
from functools import lru_cache
from dataclasses import dataclass

from .errors import EncodingBounds, MalformedMailbox

SimTime = int

U64_MAX = (1 << 64) - 1
MAX_TRANSFER = 65536
MAILBOX_SIZE = 40

_MAILBOX = struct.Struct("<5Q")
assert _MAILBOX.size == MAILBOX_SIZE


def check_u64(value: int, what: str = "value") -> int:
    if not 0 <= value <= U64_MAX:
        raise OverflowError(f"{what} {value} does not fit in 64 bits")
    return value


@dataclass(frozen=True)
class ClockSpec:
    fpga_clock_hz: int = 50_000_000
    timer_hz: int = 1_000_000

    def __post_init__(self):
        if self.fpga_clock_hz <= 0 or self.timer_hz <= 0:
            raise ValueError("clock rates must be strictly positive")


def cycles_to_micros(cycles: int, clock: ClockSpec) -> SimTime:
    """Convert core cycles to whole microseconds, rounding down."""
    if cycles < 0:
        raise ValueError("cycle count must be non-negative")
    # python ints are unbounded; only the result needs the 64-bit check
    return check_u64(cycles * 1_000_000 // clock.fpga_clock_hz, "duration")


def micros_to_ticks(micros: SimTime, clock: ClockSpec) -> int:
    return check_u64(micros * clock.timer_hz // 1_000_000, "tick count")


@dataclass(frozen=True)
class TransactionRecord:
    is_read: bool
    addr: int
    data_ptr: int
    size_bytes: int
    timestamp_us: SimTime


def _check_size(size: int, exc: type[Exception]) -> None:
    if not 1 <= size <= MAX_TRANSFER:
        raise exc(f"size_bytes {size} outside [1, {MAX_TRANSFER}]")


def encode_transaction(record: TransactionRecord) -> bytes:
    _check_size(record.size_bytes, EncodingBounds)
    for name in ("addr", "data_ptr", "timestamp_us"):
        value = getattr(record, name)
        if not 0 <= value <= U64_MAX:
            raise EncodingBounds(f"{name} {value} does not fit in 64 bits")
    return _MAILBOX.pack(
        1 if record.is_read else 0,
        record.addr,
        record.data_ptr,
        record.size_bytes,
        record.timestamp_us,
    )


def decode_transaction(raw: bytes) -> TransactionRecord:
    if len(raw) != MAILBOX_SIZE:
        raise MalformedMailbox(f"mailbox must be {MAILBOX_SIZE} bytes, got {len(raw)}")
    is_read, addr, data_ptr, size, ts = _MAILBOX.unpack(raw)
    if is_read not in (0, 1):
        raise MalformedMailbox(f"is_read field is {is_read}, expected 0 or 1")
    _check_size(size, MalformedMailbox)
    return TransactionRecord(bool(is_read), addr, data_ptr, size, ts)


@dataclass(frozen=True)
class VpRequest:
    """A decoded access as seen by the peripheral simulation."""

    is_read: bool
    addr: int
    size_bytes: int
    timestamp: SimTime
    payload: bytes = b""

    def __post_init__(self):
        if self.is_read and self.payload:
            raise ValueError("read requests carry no payload")
        if not self.is_read and len(self.payload) != self.size_bytes:
            raise ValueError(
                f"write payload is {len(self.payload)} bytes, size_bytes is {self.size_bytes}"
            )


@dataclass(frozen=True)
class VpResponse:
    payload: bytes = b""
    simulated_delay: SimTime = 0


def mix64(seed: int, index: int) -> int:
    """splitmix64 finalizer over ``seed`` and ``index``.

    Used for EMG samples and write-step payloads so that data streams are a
    pure function of ``(seed, index)``.
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & U64_MAX
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64_MAX
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64_MAX
    return z ^ (z >> 31)


@lru_cache(maxsize=256)
def pattern_bytes(seed: int, size: int) -> bytes:
    return bytes(mix64(seed, i) & 0xFF for i in range(size))
