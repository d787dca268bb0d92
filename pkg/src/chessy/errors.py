"""Exception hierarchy shared by every layer of the co-emulation stack."""


class ChessyError(Exception):
    """Base class for all errors raised by this package."""


class EncodingBounds(ChessyError, ValueError):
    pass


class MalformedMailbox(ChessyError, ValueError):
    """The 40-byte transaction record read from the target is invalid."""


class MalformedRequest(ChessyError, ValueError):
    pass


class BusError(ChessyError):
    def __init__(self, addr: int, reason: str = "no device mapped"):
        super().__init__(f"bus error at {addr:#x}: {reason}")
        self.addr = addr


class TimeRegression(ChessyError):
    """Target timestamp is older than the kernel clock."""


class DegenerateBaseline(ChessyError, ValueError):
    pass


# link-level errors


class LinkError(ChessyError):
    pass


class FramingError(LinkError):
    pass


class ChecksumMismatch(LinkError):
    def __init__(self, expected: int, received: int):
        super().__init__(f"checksum mismatch: computed {expected:02x}, packet says {received:02x}")
        self.expected = expected
        self.received = received


class LinkTimeout(LinkError):
    pass


class LinkClosed(LinkError):
    pass


class TargetError(LinkError):
    def __init__(self, code: int):
        super().__init__(f"target replied E{code:02x}")
        self.code = code


class UnknownStopReply(LinkError):
    pass
