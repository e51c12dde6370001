"""Event-Condition-Action layer of a collecting process.

Raw sensor samples update the local variable map; an edge-triggered filter
turns them into events only when a subscribed local predicate flips truth
value (relational subscriptions stream every sample, optionally downsampled
by a change threshold).  Every event ticks the vector clock, closes the
current state interval and opens the next one, so causal boundaries always
coincide with state boundaries.
"""

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import (
    CausalMessage,
    EventKind,
    LocalState,
    ProcessId,
    Scalar,
    VectorClock,
    vc_merge,
    vc_new,
    vc_tick,
)
from .predicates import LocalPredicate, eval_local
from .streams import StateMsg


class MissingProviderError(KeyError):
    pass


class MisroutedMessageError(ValueError):
    pass


@dataclass(frozen=True)
class ContextProviderConfig:
    context_type: str
    role: str
    sample_period_ms: float
    value_kind: str


def parse_provider_config(document: str) -> ContextProviderConfig:
    root = ET.fromstring(document)
    if root.tag != "contextProvider":
        raise ValueError(f"root element is {root.tag!r}, expected contextProvider")

    def text_of(tag: str) -> str:
        elem = root.find(tag)
        if elem is None or elem.text is None:
            raise ValueError(f"contextProvider misses element {tag!r}")
        return elem.text.strip()

    return ContextProviderConfig(
        context_type=text_of("contextType"),
        role=text_of("role"),
        sample_period_ms=float(text_of("samplePeriodMs")),
        value_kind=text_of("valueKind"),
    )


def serialize_provider_config(cfg: ContextProviderConfig) -> str:
    root = ET.Element("contextProvider")
    ET.SubElement(root, "contextType").text = cfg.context_type
    ET.SubElement(root, "role").text = cfg.role
    ET.SubElement(root, "samplePeriodMs").text = format(cfg.sample_period_ms, "g")
    ET.SubElement(root, "valueKind").text = cfg.value_kind
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


class EventFilter:
    """Edge trigger for one subscribed local predicate."""

    def __init__(self, condition: Optional[LocalPredicate]):
        self.condition = condition
        self.last_truth: Optional[bool] = None
        self.last_values: dict[str, Scalar] = {}

    def update(self, values: dict[str, Scalar]) -> bool:
        """Re-evaluate against fresh values; True when the truth value flips."""
        self.last_values = dict(values)
        if self.condition is None:
            return False
        truth = eval_local(self.condition, values)
        toggled = self.last_truth is not None and truth != self.last_truth
        self.last_truth = truth
        return toggled


class CollectingProcess:
    """One instrumented process: filters samples, keeps the clock, emits states."""

    def __init__(
        self,
        pid: ProcessId,
        group_size: int,
        context_type: str,
        initial_values: dict[str, Scalar],
        conditions: list[LocalPredicate] | None = None,
        passthrough: list[str] | None = None,
        passthrough_threshold: float = 0.0,
        sink: Callable[[StateMsg], None] | None = None,
    ):
        self.pid = pid
        self.context_type = context_type
        self.clock: VectorClock = vc_new(group_size)
        self.values: dict[str, Scalar] = dict(initial_values)
        self.filters = [EventFilter(c) for c in (conditions or [])]
        self.passthrough = set(passthrough or [])
        self.passthrough_threshold = passthrough_threshold
        self._last_streamed: dict[str, Scalar] = {}
        self.sink = sink or (lambda msg: None)
        self.seq = 0
        self.current: Optional[LocalState] = None
        self.terminated = False
        for f in self.filters:
            f.update(self.values)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> LocalState:
        """Emit the seq-0 open header so checkers have a complete initial cut."""
        assert self.current is None, "process already started"
        self.current = LocalState(
            owner=self.pid,
            seq=0,
            begin=self.clock,
            end=None,
            values=dict(self.values),
            truth=self._truth(),
        )
        self.sink(StateMsg(self.current))
        return self.current

    def terminate(self) -> LocalState:
        """Close the final state; no further events are accepted."""
        self._require_running()
        self.clock = vc_tick(self.clock, self.pid)
        closed = self.current.with_end(self.clock)
        self.current = None
        self.terminated = True
        self.sink(StateMsg(closed, final=True))
        return closed

    # -- event handling ----------------------------------------------------

    def on_sample(self, var: str, value: Scalar) -> Optional[LocalState]:
        """Feed one sensor reading; returns the closed state when it fires."""
        self._require_running()
        if var not in self.values:
            raise MissingProviderError(
                f"no provider declared variable {var!r} on {self.context_type!r}"
            )
        self.values[var] = value
        toggled = False
        for f in self.filters:
            if f.update(self.values):
                toggled = True
        if var in self.passthrough and self._passthrough_fires(var, value):
            toggled = True
        if not toggled:
            return None
        self._last_streamed[var] = value
        return self._event()

    def on_send(self, dst: ProcessId) -> CausalMessage:
        """Tick, split the current state, and piggyback the clock."""
        self._require_running()
        self._event()
        return CausalMessage(src=self.pid, dst=dst, piggyback=self.clock)

    def on_receive(self, msg: CausalMessage) -> LocalState:
        """Merge the piggybacked clock, tick, and split the current state."""
        self._require_running()
        if msg.dst != self.pid:
            raise MisroutedMessageError(
                f"message for process {msg.dst} delivered to {self.pid}"
            )
        self.clock = vc_merge(self.clock, msg.piggyback)
        return self._event()

    # -- internals ---------------------------------------------------------

    def _require_running(self):
        if self.terminated:
            raise RuntimeError(f"process {self.pid} already terminated")
        if self.current is None:
            raise RuntimeError(f"process {self.pid} not started")

    def _truth(self) -> bool:
        return all(f.last_truth for f in self.filters if f.condition is not None)

    def _passthrough_fires(self, var: str, value: Scalar) -> bool:
        if self.passthrough_threshold <= 0:
            return True
        last = self._last_streamed.get(var)
        if last is None:
            return True
        try:
            return abs(float(value) - float(last)) >= self.passthrough_threshold
        except (TypeError, ValueError):
            return value != last

    def _event(self) -> LocalState:
        """Tick, close the current state, open and announce the next one."""
        self.clock = vc_tick(self.clock, self.pid)
        closed = self.current.with_end(self.clock)
        self.seq += 1
        self.current = LocalState(
            owner=self.pid,
            seq=self.seq,
            begin=self.clock,
            end=None,
            values=dict(self.values),
            truth=self._truth(),
        )
        self.sink(StateMsg(closed))
        self.sink(StateMsg(self.current))
        return closed
