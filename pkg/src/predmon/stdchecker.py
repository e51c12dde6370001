"""Queue-based online detection of Pos over one conjunctive snapshot predicate.

Each process contributes a FIFO queue of the states satisfying its local
conjunct.  Whenever some queue head provably happened-before another head it
can never join a consistent cut with the remaining states, so it is popped.
The first time all heads are pairwise concurrent they form the detected cut,
which is the componentwise least satisfying one.
"""

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .core import LocalState, state_precedes
from .streams import ReorderBuffer, StateMsg


class Outcome(enum.Enum):
    NO_CHANGE = "no-change"
    DETECTED = "detected"


@dataclass
class Detection:
    cut: tuple[int, ...]          # per-process seq indices
    states: tuple[LocalState, ...]
    detail: str = ""


@dataclass
class _Entry:
    state: LocalState


class ConjunctiveChecker:
    """Detector for Pos(single conjunctive letter), fed through a reorder buffer.

    ``mode`` is ``once`` (stop after the first detection) or ``continuous``
    (advance past each detected cut and keep going).  ``ops`` counts queue
    operations (enqueues, dequeues, head comparisons) for the amortized
    work-bound checks.
    """

    def __init__(self, n: int, mode: str = "once"):
        if mode not in ("once", "continuous"):
            raise ValueError(f"unknown mode {mode!r}")
        self.n = n
        self.mode = mode
        self.reorder = ReorderBuffer(n)
        self.queues: list[deque[_Entry]] = [deque() for _ in range(n)]
        self.by_key: dict[tuple[int, int], _Entry] = {}
        self.detected = False
        self.detections: list[Detection] = []
        self.terminated = [False] * n
        self.ops = 0
        self.records_ingested = 0

    # -- ingestion ----------------------------------------------------------

    def ingest(self, msg: StateMsg) -> Outcome:
        outcome = Outcome.NO_CHANGE
        for delivered in self.reorder.push(msg):
            if self._consume(delivered) is Outcome.DETECTED:
                outcome = Outcome.DETECTED
        return outcome

    def _consume(self, msg: StateMsg) -> Outcome:
        self.records_ingested += 1
        state = msg.state
        if msg.final:
            self.terminated[state.owner] = True
        if self.detected and self.mode == "once":
            return Outcome.NO_CHANGE
        fresh: deque[int] = deque()
        if not state.closed:
            if state.truth:
                entry = _Entry(state)
                self.queues[state.owner].append(entry)
                self.by_key[(state.owner, state.seq)] = entry
                self.ops += 1
                if self.queues[state.owner][0] is entry:
                    fresh.append(state.owner)
        else:
            entry = self.by_key.pop((state.owner, state.seq), None)
            if entry is not None:
                entry.state = state
                queue = self.queues[state.owner]
                if queue and queue[0] is entry:
                    fresh.append(state.owner)
        if not fresh:
            return Outcome.NO_CHANGE
        return self._settle(fresh)

    # -- elimination loop ---------------------------------------------------

    def _settle(self, fresh: deque[int]) -> Outcome:
        """Compare fresh heads against the others, popping provably-early ones."""
        outcome = Outcome.NO_CHANGE
        while True:
            while fresh:
                i = fresh.popleft()
                if not self.queues[i]:
                    continue
                head_i = self.queues[i][0].state
                for j in range(self.n):
                    if j == i or not self.queues[j]:
                        continue
                    head_j = self.queues[j][0].state
                    self.ops += 1
                    if state_precedes(head_i, head_j):
                        self._pop(i)
                        if self.queues[i]:
                            fresh.append(i)
                        break
                    if state_precedes(head_j, head_i):
                        self._pop(j)
                        if self.queues[j]:
                            fresh.append(j)
                        fresh.append(i)
                        break
            if not all(self.queues):
                return outcome
            heads = tuple(q[0].state for q in self.queues)
            cut = tuple(s.seq for s in heads)
            self.detections.append(Detection(cut=cut, states=heads))
            self.detected = True
            outcome = Outcome.DETECTED
            if self.mode == "once":
                return outcome
            # Continuous mode: advance past the detected cut and keep looking.
            for i in range(self.n):
                self._pop(i)
                if self.queues[i]:
                    fresh.append(i)
            if not fresh:
                return outcome

    def _pop(self, i: int) -> None:
        entry = self.queues[i].popleft()
        self.by_key.pop((entry.state.owner, entry.state.seq), None)
        self.ops += 1

    # -- diagnostics ---------------------------------------------------------

    def finalize(self) -> None:
        """Assert the streams drained cleanly after all processes terminated."""
        self.reorder.assert_drained()
