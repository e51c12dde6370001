"""Line-oriented trace format: greppable, diffable, replayable.

Record kinds::

    STATE <pid> <seq> begin=<c0,c1,...> end=<c0,c1,...|open> truth=<0|1> vars=<k=v;k=v>
    SEND <src> <dst> <msgid> vc=<c0,c1,...>
    RECV <dst> <src> <msgid> vc=<c0,c1,...>
    NOTIFY <groupId> cut=<i0,...> simTime=<ms>
    LIFECYCLE <groupId> <event>

Process ids in STATE/SEND/RECV lines are global across groups; replay maps
them back through the registration order.  Collector termination appears as
a LIFECYCLE event ``terminated:<pid>:<seq>``.
"""

from dataclasses import dataclass
from typing import Optional, Union

from .core import Scalar, VectorClock
from .specxml import format_scalar, parse_scalar


class TraceFormatError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        where = f" (line {lineno})" if lineno is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class StateLine:
    pid: int
    seq: int
    begin: VectorClock
    end: Optional[VectorClock]
    truth: bool
    values: dict[str, Scalar]


@dataclass(frozen=True)
class SendLine:
    src: int
    dst: int
    msgid: str
    vc: VectorClock


@dataclass(frozen=True)
class RecvLine:
    dst: int
    src: int
    msgid: str
    vc: VectorClock


@dataclass(frozen=True)
class NotifyLine:
    group_id: int
    cut: tuple[int, ...]
    sim_time: float


@dataclass(frozen=True)
class LifecycleLine:
    group_id: int
    event: str


TraceRecord = Union[StateLine, SendLine, RecvLine, NotifyLine, LifecycleLine]


def _fmt_clock(vc) -> str:
    return ",".join(map(str, vc))


def _parse_clock(text: str, lineno: int) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise TraceFormatError(f"bad clock {text!r}", lineno) from None


def _fmt_vars(values: dict[str, Scalar]) -> str:
    return ";".join(f"{k}={format_scalar(v)}" for k, v in values.items())


def _parse_vars(text: str, lineno: int) -> dict[str, Scalar]:
    out: dict[str, Scalar] = {}
    if not text:
        return out
    for part in text.split(";"):
        if "=" not in part:
            raise TraceFormatError(f"bad variable binding {part!r}", lineno)
        k, v = part.split("=", 1)
        out[k] = parse_scalar(v)
    return out


def to_line(rec: TraceRecord) -> str:
    if isinstance(rec, StateLine):
        end = _fmt_clock(rec.end) if rec.end is not None else "open"
        return (
            f"STATE {rec.pid} {rec.seq} begin={_fmt_clock(rec.begin)} end={end} "
            f"truth={int(rec.truth)} vars={_fmt_vars(rec.values)}"
        )
    if isinstance(rec, SendLine):
        return f"SEND {rec.src} {rec.dst} {rec.msgid} vc={_fmt_clock(rec.vc)}"
    if isinstance(rec, RecvLine):
        return f"RECV {rec.dst} {rec.src} {rec.msgid} vc={_fmt_clock(rec.vc)}"
    if isinstance(rec, NotifyLine):
        return (
            f"NOTIFY {rec.group_id} cut={_fmt_clock(rec.cut)} simTime={repr(rec.sim_time)}"
        )
    if isinstance(rec, LifecycleLine):
        return f"LIFECYCLE {rec.group_id} {rec.event}"
    raise TypeError(f"not a trace record: {rec!r}")


def _field(token: str, name: str, lineno: int) -> str:
    prefix = name + "="
    if not token.startswith(prefix):
        raise TraceFormatError(f"expected {name}=..., got {token!r}", lineno)
    return token[len(prefix):]


def parse_line(line: str, lineno: int = 0) -> TraceRecord:
    parts = line.rstrip("\n").split(" ")
    kind = parts[0]
    try:
        if kind == "STATE":
            if len(parts) != 7:
                raise TraceFormatError("STATE needs 6 fields", lineno)
            end_text = _field(parts[4], "end", lineno)
            truth_text = _field(parts[5], "truth", lineno)
            if truth_text not in ("0", "1"):
                raise TraceFormatError(f"bad truth {truth_text!r}", lineno)
            return StateLine(
                pid=int(parts[1]),
                seq=int(parts[2]),
                begin=_parse_clock(_field(parts[3], "begin", lineno), lineno),
                end=None if end_text == "open" else _parse_clock(end_text, lineno),
                truth=truth_text == "1",
                values=_parse_vars(_field(parts[6], "vars", lineno), lineno),
            )
        if kind in ("SEND", "RECV"):
            if len(parts) != 5:
                raise TraceFormatError(f"{kind} needs 4 fields", lineno)
            vc = _parse_clock(_field(parts[4], "vc", lineno), lineno)
            if kind == "SEND":
                return SendLine(src=int(parts[1]), dst=int(parts[2]), msgid=parts[3], vc=vc)
            return RecvLine(dst=int(parts[1]), src=int(parts[2]), msgid=parts[3], vc=vc)
        if kind == "NOTIFY":
            if len(parts) != 4:
                raise TraceFormatError("NOTIFY needs 3 fields", lineno)
            return NotifyLine(
                group_id=int(parts[1]),
                cut=_parse_clock(_field(parts[2], "cut", lineno), lineno),
                sim_time=float(_field(parts[3], "simTime", lineno)),
            )
        if kind == "LIFECYCLE":
            if len(parts) != 3:
                raise TraceFormatError("LIFECYCLE needs 2 fields", lineno)
            return LifecycleLine(group_id=int(parts[1]), event=parts[2])
    except TraceFormatError:
        raise
    except ValueError as exc:
        raise TraceFormatError(f"malformed record: {exc}", lineno) from None
    raise TraceFormatError(f"unknown record kind {kind!r}", lineno)


def write_trace(records: list[TraceRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(to_line(rec))
            fh.write("\n")


def read_trace(path: str) -> list[TraceRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                records.append(parse_line(line, lineno))
    return records


def render_trace(records: list[TraceRecord]) -> str:
    return "".join(to_line(rec) + "\n" for rec in records)
