"""State stream records and the per-process FIFO reorder buffer.

A collecting process emits two records per state: an open header when the
state begins (no end clock yet) and a closed record when the next event ends
it.  The record closing a process's final state carries ``final=True``.
Checkers must see each process's records in (seq, phase) order; the reorder
buffer restores that order when transport scrambles it.
"""

from dataclasses import dataclass

from .core import LocalState

OPEN, CLOSED = 0, 1


@dataclass(frozen=True)
class StateMsg:
    state: LocalState
    final: bool = False

    @property
    def phase(self) -> int:
        return CLOSED if self.state.closed else OPEN

    @property
    def key(self) -> tuple[int, int]:
        return (self.state.seq, self.phase)


class DuplicateStateError(ValueError):
    pass


class StalledStreamError(RuntimeError):
    pass


class ReorderBuffer:
    """Delivers each process's records in (seq, phase) order."""

    def __init__(self, n: int):
        self._expected: list[tuple[int, int]] = [(0, OPEN)] * n
        self._held: list[dict[tuple[int, int], StateMsg]] = [{} for _ in range(n)]
        self._seen: list[set[tuple[int, int]]] = [set() for _ in range(n)]

    @staticmethod
    def _next_key(key: tuple[int, int]) -> tuple[int, int]:
        seq, phase = key
        return (seq, CLOSED) if phase == OPEN else (seq + 1, OPEN)

    def push(self, msg: StateMsg) -> list[StateMsg]:
        """Accept one record; return all records now deliverable in order."""
        pid = msg.state.owner
        key = msg.key
        if key in self._seen[pid]:
            raise DuplicateStateError(
                f"duplicate state record: process {pid} seq {key[0]} phase {key[1]}"
            )
        self._seen[pid].add(key)
        self._held[pid][key] = msg
        out: list[StateMsg] = []
        while self._expected[pid] in self._held[pid]:
            nxt = self._held[pid].pop(self._expected[pid])
            out.append(nxt)
            self._expected[pid] = self._next_key(self._expected[pid])
        return out

    def pending(self, pid: int) -> int:
        return len(self._held[pid])

    def assert_drained(self) -> None:
        """Diagnose streams stalled on a gap once the run is over."""
        for pid, held in enumerate(self._held):
            if held:
                missing = self._expected[pid]
                raise StalledStreamError(
                    f"stream of process {pid} stalled: waiting for seq {missing[0]} "
                    f"phase {missing[1]} with {len(held)} records held"
                )
