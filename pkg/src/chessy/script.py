"""Workload scripts executed by the emulated target.

Text format, one step per line::

    compute 14000000
    read 0x60000000 8
    write 0x60010000 2 seed=7
    loop 100
      ...
    end
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

from .core import MAX_TRANSFER
from .errors import EncodingBounds


@dataclass(frozen=True)
class Compute:
    cycles: int


@dataclass(frozen=True)
class Read:
    addr: int
    size_bytes: int


@dataclass(frozen=True)
class Write:
    addr: int
    size_bytes: int
    seed: int = 0


@dataclass(frozen=True)
class Loop:
    count: int
    body: tuple["Step", ...]


Step = Union[Compute, Read, Write, Loop]


@dataclass(frozen=True)
class WorkloadScript:
    steps: tuple[Step, ...] = ()

    def __post_init__(self):
        _validate(self.steps)

    def flatten(self) -> Iterator[Step]:
        """Yield Compute/Read/Write steps in execution order, unrolling loops lazily."""
        return _walk(self.steps)

    def n_accesses(self) -> int:
        return _count(self.steps)

    def to_text(self) -> str:
        lines: list[str] = []
        _emit(self.steps, lines, 0)
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def parse(cls, text: str) -> "WorkloadScript":
        stack: list[list] = [[]]
        counts: list[int] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            op, *args = line.split()
            op = op.lower()
            try:
                if op == "compute" and len(args) == 1:
                    stack[-1].append(Compute(parse_count(args[0])))
                elif op == "read" and len(args) == 2:
                    stack[-1].append(Read(int(args[0], 0), int(args[1], 0)))
                elif op == "write" and len(args) in (2, 3):
                    seed = 0
                    if len(args) == 3:
                        key, _, value = args[2].partition("=")
                        if key != "seed":
                            raise ValueError(f"unknown write option {args[2]!r}")
                        seed = int(value, 0)
                    stack[-1].append(Write(int(args[0], 0), int(args[1], 0), seed))
                elif op == "loop" and len(args) == 1:
                    counts.append(int(args[0], 0))
                    stack.append([])
                elif op == "end" and not args:
                    if len(stack) == 1:
                        raise ValueError("'end' without matching 'loop'")
                    body = stack.pop()
                    stack[-1].append(Loop(counts.pop(), tuple(body)))
                else:
                    raise ValueError(f"cannot parse {line!r}")
            except EncodingBounds:
                raise
            except ValueError as exc:
                raise ValueError(f"script line {lineno}: {exc}") from None
        if len(stack) != 1:
            raise ValueError("script ends inside an unterminated 'loop'")
        return cls(tuple(stack[0]))

    @classmethod
    def load(cls, path: str | Path) -> "WorkloadScript":
        return cls.parse(Path(path).read_text())


def parse_count(text: str) -> int:
    """Parse an integer count, accepting ``14000000``, ``0x10`` or ``1.4e7``."""
    try:
        return int(text, 0)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"{text!r} is not a whole number") from None
        return int(value)


def _validate(steps) -> None:
    for step in steps:
        if isinstance(step, Compute):
            if step.cycles < 0:
                raise ValueError("compute cycles must be non-negative")
        elif isinstance(step, (Read, Write)):
            if not 1 <= step.size_bytes <= MAX_TRANSFER:
                raise EncodingBounds(f"transfer of {step.size_bytes} bytes outside [1, {MAX_TRANSFER}]")
        elif isinstance(step, Loop):
            if step.count < 0:
                raise ValueError("loop count must be non-negative")
            _validate(step.body)
        else:
            raise TypeError(f"not a workload step: {step!r}")


def _walk(steps) -> Iterator[Step]:
    for step in steps:
        if isinstance(step, Loop):
            for _ in range(step.count):
                yield from _walk(step.body)
        else:
            yield step


def _count(steps) -> int:
    total = 0
    for step in steps:
        if isinstance(step, Loop):
            total += step.count * _count(step.body)
        elif isinstance(step, (Read, Write)):
            total += 1
    return total


def _emit(steps, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    for step in steps:
        if isinstance(step, Compute):
            lines.append(f"{pad}compute {step.cycles}")
        elif isinstance(step, Read):
            lines.append(f"{pad}read {step.addr:#x} {step.size_bytes}")
        elif isinstance(step, Write):
            lines.append(f"{pad}write {step.addr:#x} {step.size_bytes} seed={step.seed}")
        else:
            lines.append(f"{pad}loop {step.count}")
            _emit(step.body, lines, depth + 1)
            lines.append(f"{pad}end")
