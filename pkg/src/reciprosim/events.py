"""Interaction events, the append-only log, and its line format.

A log file is a header line followed by one event per line::

    #reciprosim v1 seed=7 config=8c0f2f3a5b1d9e42
    0,0,MINT,-,0,-,0,-
    0,1,INCOME,-,0,2,-,-

Fields are ``tick,seq,kind,actor,target,amount,token,project`` with ``-``
standing for an absent value.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional

from .errors import AmountOverflow, OrderViolation, ParseError, SchemaViolation

FORMAT_VERSION = 1
MAX_AMOUNT = 2**63 - 1
MAX_U64 = 2**64 - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class Kind(str, enum.Enum):
    GIVE = "GIVE"
    REFUSE = "REFUSE"
    TOKEN_PAY = "TOKEN_PAY"
    TOKEN_REDEEM = "TOKEN_REDEEM"
    INVEST = "INVEST"
    PROJECT_PAYOUT = "PROJECT_PAYOUT"
    PROJECT_FAIL = "PROJECT_FAIL"
    SHOCK = "SHOCK"
    INCOME = "INCOME"
    CONSUME = "CONSUME"
    MINT = "MINT"


# Per kind: presence rule for (actor, target, amount, token, project).
# "R" required, "-" forbidden, "O" optional.
FIELD_MATRIX: dict[Kind, str] = {
    Kind.GIVE: "RRR--",
    Kind.REFUSE: "RR-O-",
    Kind.TOKEN_PAY: "RR-R-",
    Kind.TOKEN_REDEEM: "RR-R-",
    Kind.INVEST: "R-R-R",
    Kind.PROJECT_PAYOUT: "-RR-R",
    Kind.PROJECT_FAIL: "-RR-R",
    Kind.SHOCK: "-RR--",
    Kind.INCOME: "-RR--",
    Kind.CONSUME: "-RR--",
    Kind.MINT: "-R-R-",
}

_FIELD_NAMES = ("actor", "target", "amount", "token", "project")


class Event(NamedTuple):
    """One log record. A tuple so that the hot engine loop can build it cheaply."""

    tick: int
    seq: int
    kind: Kind
    actor: Optional[int] = None
    target: Optional[int] = None
    amount: Optional[int] = None
    token: Optional[int] = None
    project: Optional[int] = None


def check_schema(e: Event) -> None:
    """Raise SchemaViolation unless ``e`` obeys the field matrix for its kind."""
    if not isinstance(e.kind, Kind):
        raise SchemaViolation(f"unknown kind {e.kind!r}")
    for name, v in (("tick", e.tick), ("seq", e.seq)):
        if type(v) is not int or v < 0:
            raise SchemaViolation(f"{name} must be a non-negative integer, got {v!r}")
    for name, v in zip(_FIELD_NAMES, e[3:]):
        # exact type check also rejects bool
        if v is not None and (type(v) is not int or v < 0):
            raise SchemaViolation(f"{name} must be a non-negative integer, got {v!r}")
    _check_matrix(e)


def _check_matrix(e: Event) -> None:
    """Field presence by kind plus the value rules; assumes field types are sound."""
    kind = e.kind
    for name, r, v in zip(_FIELD_NAMES, FIELD_MATRIX[kind], e[3:]):
        if v is None:
            if r == "R":
                raise SchemaViolation(f"{kind.value} requires {name}")
        elif r == "-":
            raise SchemaViolation(f"{kind.value} forbids {name}")
    if e.amount is not None and e.amount > MAX_AMOUNT:
        raise AmountOverflow(f"amount {e.amount} exceeds {MAX_AMOUNT}")
    if kind is Kind.GIVE and e.amount == 0:
        raise SchemaViolation("GIVE amount must be positive")
    if e.actor is not None and e.actor == e.target:
        raise SchemaViolation(f"{kind.value} actor and target coincide")


def serialize_event(e: Event) -> str:
    def f(v: Optional[int]) -> str:
        return "-" if v is None else str(v)

    return (
        f"{e.tick},{e.seq},{e.kind.value},{f(e.actor)},{f(e.target)},"
        f"{f(e.amount)},{f(e.token)},{f(e.project)}\n"
    )


def _parse_int(text: str, line_no: int, name: str, optional: bool) -> Optional[int]:
    if text == "-":
        if optional:
            return None
        raise ParseError(line_no, f"{name} may not be '-'")
    # str.isdigit accepts non-ASCII digits, so check the byte range explicitly
    if not text or any(c < "0" or c > "9" for c in text):
        raise ParseError(line_no, f"{name} is not a non-negative decimal integer: {text!r}")
    if len(text) > 1 and text[0] == "0":
        raise ParseError(line_no, f"{name} has leading zeros: {text!r}")
    return int(text)


_NUM = r"(0|[1-9][0-9]*)"
_OPT = r"(-|0|[1-9][0-9]*)"
_LINE_RE = re.compile(rf"{_NUM},{_NUM},([A-Z_]+),{_OPT},{_OPT},{_OPT},{_OPT},{_OPT}", re.ASCII)
_KINDS = {k.value: k for k in Kind}


def parse_event(line: str, line_no: int = 1) -> Event:
    """Inverse of :func:`serialize_event`. Checks the field matrix too."""
    if line.endswith("\n"):
        line = line[:-1]
    m = _LINE_RE.fullmatch(line)
    if m is not None and m.group(3) in _KINDS:
        g = m.groups()
        e = Event(
            int(g[0]), int(g[1]), _KINDS[g[2]],
            *(None if v == "-" else int(v) for v in g[3:]),
        )
        _check_matrix(e)
        return e
    # slow path: pin down what is wrong for the error message
    parts = line.split(",")
    if len(parts) != 8:
        raise ParseError(line_no, f"expected 8 fields, got {len(parts)}")
    tick = _parse_int(parts[0], line_no, "tick", False)
    seq = _parse_int(parts[1], line_no, "seq", False)
    try:
        kind = Kind(parts[2])
    except ValueError:
        raise ParseError(line_no, f"unknown kind {parts[2]!r}") from None
    vals = [_parse_int(p, line_no, n, True) for p, n in zip(parts[3:], _FIELD_NAMES)]
    e = Event(tick, seq, kind, *vals)
    check_schema(e)
    return e


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class LogHeader:
    seed: int
    digest: int
    version: int = FORMAT_VERSION

    def line(self) -> str:
        return f"#reciprosim v{self.version} seed={self.seed} config={self.digest:016x}\n"

    @classmethod
    def parse(cls, line: str) -> "LogHeader":
        parts = line.rstrip("\n").split(" ")
        if len(parts) != 4 or parts[0] != "#reciprosim" or not parts[1].startswith("v"):
            raise ParseError(1, "malformed header line")
        try:
            version = int(parts[1][1:])
            if not parts[2].startswith("seed=") or not parts[3].startswith("config="):
                raise ValueError
            seed = int(parts[2][5:])
            digest = int(parts[3][7:], 16)
        except ValueError:
            raise ParseError(1, "malformed header line") from None
        if version != FORMAT_VERSION:
            raise ParseError(1, f"unsupported log version {version}")
        if not 0 <= seed <= MAX_U64:
            raise ParseError(1, "seed out of u64 range")
        return cls(seed=seed, digest=digest, version=version)


@dataclass
class EventLog:
    header: LogHeader
    events: list[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def append(self, e: Event) -> "EventLog":
        return append_event(self, e)

    def to_text(self) -> str:
        return self.header.line() + "".join(serialize_event(e) for e in self.events)

    def write(self, path: str | Path) -> None:
        # newline="" keeps "\n" on every platform
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(self.to_text())


def append_event(log: EventLog, e: Event, validate: bool = True) -> EventLog:
    """Append ``e`` in place after checking ordering and (unless told not to) schema."""
    if validate:
        check_schema(e)
    if log.events:
        last = log.events[-1]
        if e.tick < last.tick:
            raise OrderViolation(f"tick {e.tick} after tick {last.tick}")
        if e.tick == last.tick and e.seq != last.seq + 1:
            raise OrderViolation(
                f"seq {e.seq} at tick {e.tick} does not follow seq {last.seq}"
            )
        if e.tick > last.tick and e.seq != 0:
            raise OrderViolation(f"first event of tick {e.tick} must have seq 0")
    elif e.seq != 0:
        raise OrderViolation("first event of a tick must have seq 0")
    log.events.append(e)
    return log


def parse_log(text: str) -> EventLog:
    lines = text.split("\n")
    if not lines or not lines[0]:
        raise ParseError(1, "missing header")
    if lines[-1] == "":
        lines.pop()
    else:
        raise ParseError(len(lines), "missing final newline")
    log = EventLog(LogHeader.parse(lines[0]))
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            raise ParseError(i, "blank line")
        append_event(log, parse_event(line, i), validate=False)
    return log


def read_log(path: str | Path) -> EventLog:
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_log(fh.read())


def log_from_events(events: Iterable[Event], seed: int = 0, digest: int = 0) -> EventLog:
    """Build a log from events, mostly for tests and hand-made fixtures."""
    log = EventLog(LogHeader(seed=seed, digest=digest))
    for e in events:
        append_event(log, e)
    return log
