"""GDB Remote Serial Protocol subset: packet codec and a blocking client.

Only the commands the adapter needs are spoken: ``?``, ``m``, ``M``,
``Z0``/``z0`` and ``c``. The link always runs in ack mode and rejects
run-length encoded packets.
"""

from __future__ import annotations

import binascii
import logging
import socket
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChecksumMismatch,
    FramingError,
    LinkClosed,
    LinkTimeout,
    TargetError,
    UnknownStopReply,
)

log = logging.getLogger(__name__)

CHUNK = 4096
_SPECIAL = frozenset(b"$#}*")


def checksum(payload: bytes) -> int:
    if len(payload) < 512:
        return sum(payload) & 0xFF
    # builtin sum() boxes every byte; numpy keeps large memory packets cheap
    return int(np.add.reduce(np.frombuffer(payload, np.uint8), dtype=np.uint64)) & 0xFF


def escape(raw: bytes) -> bytes:
    # substring tests run at memchr speed; most payloads are plain hex
    if b"$" not in raw and b"#" not in raw and b"}" not in raw and b"*" not in raw:
        return bytes(raw)
    out = bytearray()
    for b in raw:
        if b in _SPECIAL:
            out += bytes((0x7D, b ^ 0x20))
        else:
            out.append(b)
    return bytes(out)


def unescape(data: bytes) -> bytes:
    if b"}" not in data and b"*" not in data:
        return bytes(data)
    out = bytearray()
    it = iter(data)
    for b in it:
        if b == 0x7D:
            try:
                out.append(next(it) ^ 0x20)
            except StopIteration:
                raise FramingError("dangling escape byte at end of payload") from None
        elif b == 0x2A:
            raise FramingError("run-length encoded packets are not supported")
        else:
            out.append(b)
    return bytes(out)


def frame(payload: bytes | str) -> bytes:
    """Wrap an already-escaped payload as ``$payload#cs``."""
    if isinstance(payload, str):
        payload = payload.encode("ascii")
    return b"$" + payload + b"#" + b"%02x" % checksum(payload)


def encode_packet(raw: bytes | str) -> bytes:
    if isinstance(raw, str):
        raw = raw.encode("latin-1")
    return frame(escape(raw))


def parse(wire: bytes | str) -> bytes:
    """Validate one framed packet and return its unescaped payload.

    The caller is responsible for answering ``+`` on success and ``-`` on
    :class:`ChecksumMismatch`.
    """
    if isinstance(wire, str):
        wire = wire.encode("latin-1")
    if not wire.startswith(b"$"):
        raise FramingError("packet does not start with '$'")
    hash_at = wire.find(b"#")
    if hash_at < 0 or len(wire) != hash_at + 3:
        raise FramingError("packet is missing '#' and two checksum digits, or has a stray '#'")
    body, cs_text = wire[1:hash_at], wire[hash_at + 1:]
    if b"$" in body:
        raise FramingError("unescaped '$' inside payload")
    try:
        received = int(cs_text, 16)
    except ValueError:
        raise FramingError(f"checksum {cs_text!r} is not hex") from None
    expected = checksum(body)
    if expected != received:
        raise ChecksumMismatch(expected, received)
    return unescape(body)


class PacketStream:
    """Reads framed packets and acks from a socket, and writes packets with ack handling."""

    def __init__(self, sock: socket.socket, retries: int = 3):
        self.sock = sock
        self.retries = retries
        self._buf = bytearray()

    def _fill(self) -> None:
        try:
            chunk = self.sock.recv(65536)
        except socket.timeout:
            raise LinkTimeout("timed out waiting for the peer") from None
        except OSError as exc:
            raise LinkClosed(str(exc)) from exc
        if not chunk:
            raise LinkClosed("peer closed the connection")
        self._buf += chunk

    def _send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except socket.timeout:
            raise LinkTimeout("timed out sending to the peer") from None
        except OSError as exc:
            raise LinkClosed(str(exc)) from exc

    def read_ack(self) -> bool:
        while True:
            while not self._buf:
                self._fill()
            c = self._buf.pop(0)
            if c == ord("+"):
                return True
            if c == ord("-"):
                return False
            # stray bytes between packets are ignored, as gdb does
            log.debug("ignoring byte %r while waiting for ack", bytes((c,)))

    def read_packet(self) -> bytes:
        """Next valid packet payload; acks it, nacks corrupt ones.

        A bare ``0x03`` (interrupt request) is returned as ``b"\\x03"``.
        """
        while True:
            while self._buf and self._buf[0] != 0x24:
                if self._buf.pop(0) == 0x03:
                    return b"\x03"
            end = self._buf.find(b"#")
            if end < 0 or len(self._buf) < end + 3:
                self._fill()
                continue
            wire = bytes(self._buf[: end + 3])
            del self._buf[: end + 3]
            try:
                payload = parse(wire)
            except (ChecksumMismatch, FramingError) as exc:
                log.warning("%s; requesting retransmission", exc)
                self._send(b"-")
                continue
            self._send(b"+")
            return payload

    def write_packet(self, payload: bytes | str) -> None:
        wire = encode_packet(payload)
        for _ in range(self.retries + 1):
            self._send(wire)
            if self.read_ack():
                return
        raise LinkTimeout(f"peer rejected packet {self.retries + 1} times")


@dataclass(frozen=True)
class StopReply:
    kind: str  # "breakpoint" or "exited"
    value: int

    @classmethod
    def parse(cls, payload: bytes) -> "StopReply":
        text = payload.decode("latin-1")
        try:
            if text[:1] in ("S", "T") and len(text) >= 3:
                return cls("breakpoint", int(text[1:3], 16))
            if text[:1] == "W" and len(text) >= 2:
                return cls("exited", int(text[1:].split(";", 1)[0], 16))
        except ValueError:
            pass
        raise UnknownStopReply(f"unrecognized stop reply {text!r}")

    @property
    def exited(self) -> bool:
        return self.kind == "exited"


def _error_code(reply: bytes) -> int | None:
    if len(reply) == 3 and reply[:1] == b"E":
        try:
            return int(reply[1:], 16)
        except ValueError:
            return None
    return None


class RspClient:
    """Blocking debugger client; one outstanding request at a time."""

    def __init__(self, sock: socket.socket, timeout: float | None = 10.0):
        sock.settimeout(timeout)
        if sock.family in (socket.AF_INET, socket.AF_INET6):
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock
        self.stream = PacketStream(sock)
        self.packets_sent = 0

    @classmethod
    def connect(cls, host: str, port: int, timeout: float | None = 10.0) -> "RspClient":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except socket.timeout:
            raise LinkTimeout(f"connecting to {host}:{port} timed out") from None
        except OSError as exc:
            raise LinkClosed(f"cannot connect to {host}:{port}: {exc}") from exc
        return cls(sock, timeout)

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, payload: bytes | str) -> bytes:
        self.stream.write_packet(payload)
        self.packets_sent += 1
        return self.stream.read_packet()

    def _expect_ok(self, reply: bytes) -> None:
        code = _error_code(reply)
        if code is not None:
            raise TargetError(code)
        if reply != b"OK":
            raise FramingError(f"expected OK, got {reply!r}")

    def halt_reason(self) -> StopReply:
        return StopReply.parse(self.request("?"))

    def read_mem(self, addr: int, length: int) -> bytes:
        out = bytearray()
        while len(out) < length:
            n = min(CHUNK, length - len(out))
            reply = self.request(f"m{addr + len(out):x},{n:x}")
            code = _error_code(reply)
            if code is not None:
                raise TargetError(code)
            try:
                data = binascii.unhexlify(reply)
            except (ValueError, binascii.Error):
                raise FramingError(f"memory reply is not hex: {reply[:32]!r}") from None
            if not data:
                raise TargetError(0xFF)
            out += data
        return bytes(out)

    def write_mem(self, addr: int, data: bytes) -> None:
        for off in range(0, len(data), CHUNK):
            chunk = data[off:off + CHUNK]
            self._expect_ok(self.request(b"M%x,%x:%s" % (addr + off, len(chunk), binascii.hexlify(chunk))))

    def set_breakpoint(self, addr: int, kind: int = 4) -> None:
        self._expect_ok(self.request(f"Z0,{addr:x},{kind:x}"))

    def clear_breakpoint(self, addr: int, kind: int = 4) -> None:
        self._expect_ok(self.request(f"z0,{addr:x},{kind:x}"))

    def resume(self) -> StopReply:
        return StopReply.parse(self.request("c"))
