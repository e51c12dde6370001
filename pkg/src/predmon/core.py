"""Causal core: vector clocks, interval local states, and consistency tests.

A monitored computation is a set of collecting processes, each producing a
timeline of local states separated by events.  Every event ticks the owner's
vector clock component, so a state with sequence number k spans the interval
between the owner's k-th and (k+1)-th events and satisfies
``begin[owner] == k`` and ``end[owner] == k + 1``.
"""

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

ProcessId = int
VectorClock = tuple[int, ...]
Scalar = bool | int | float | str


def vc_new(n: int) -> VectorClock:
    """Zero clock for a group of n processes."""
    if n < 1:
        raise ValueError(f"invalid group size: {n}")
    return (0,) * n


def vc_tick(clock: VectorClock, p: ProcessId) -> VectorClock:
    """Advance the component of process p by one."""
    if not 0 <= p < len(clock):
        raise ValueError(f"invalid process index {p} for clock of size {len(clock)}")
    return clock[:p] + (clock[p] + 1,) + clock[p + 1:]


def vc_merge(a: VectorClock, b: VectorClock) -> VectorClock:
    """Componentwise maximum, applied when receiving a piggybacked clock."""
    if len(a) != len(b):
        raise ValueError(f"incompatible clocks: sizes {len(a)} and {len(b)}")
    return tuple(x if x >= y else y for x, y in zip(a, b))


def vc_leq(a: VectorClock, b: VectorClock) -> bool:
    """Componentwise order; characterizes happen-before between events."""
    if len(a) != len(b):
        raise ValueError(f"incompatible clocks: sizes {len(a)} and {len(b)}")
    return all(x <= y for x, y in zip(a, b))


class EventKind(enum.Enum):
    INTERNAL_CHANGE = "internal"
    SEND = "send"
    RECEIVE = "receive"
    TERMINATE = "terminate"


@dataclass(frozen=True, eq=True)
class LocalState:
    """One interval on a process timeline, carrying the context values seen there.

    ``begin`` is the clock right after the event that opened the state; ``end``
    is the clock right after the event that closed it, or None while the state
    is the owner's current one.  ``truth`` caches the conjunction of the local
    predicates subscribed on the owner.
    """

    owner: ProcessId
    seq: int
    begin: VectorClock
    end: Optional[VectorClock]
    values: dict[str, Scalar]
    truth: bool

    @property
    def closed(self) -> bool:
        return self.end is not None

    def with_end(self, end: VectorClock) -> "LocalState":
        return replace(self, end=end)


@dataclass(frozen=True)
class CausalMessage:
    """Coordination message between two collecting processes of one group."""

    src: ProcessId
    dst: ProcessId
    piggyback: VectorClock
    payload: object = None


def state_precedes(s: LocalState, t: LocalState) -> bool:
    """True when the event closing s provably happened before t began.

    Uses only begin clocks: t began knowing more than s.seq events of s's
    owner exactly when s's closing event is in t's causal past.  This is
    equivalent to the end-clock test on closed states and remains sound for
    states whose closing record has not arrived yet.
    """
    return t.begin[s.owner] > s.begin[s.owner]


def states_consistent(s: LocalState, t: LocalState) -> bool:
    """True when the two intervals may belong to one global snapshot.

    Neither state's closing event may happen-before the other's opening
    event.  An open-ended state never happens-before anything.
    """
    if s.owner == t.owner:
        raise ValueError(f"invalid pair: both states owned by process {s.owner}")
    s_before_t = s.end is not None and s.end[s.owner] <= t.begin[s.owner]
    t_before_s = t.end is not None and t.end[t.owner] <= s.begin[t.owner]
    return not s_before_t and not t_before_s


def cut_consistent(states: list[LocalState]) -> bool:
    """Pairwise consistency of one state per process (a candidate snapshot)."""
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            if not states_consistent(states[i], states[j]):
                return False
    return True
