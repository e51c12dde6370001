"""Registration facade: providers, detection groups, lifecycle, notifications.

A detection group binds one parsed specification to its checker and its
collecting processes.  The checker is created before any collector starts and
collectors stop before the checker does, because collectors may still push
records while alive.  Callback dispatch runs on a dedicated thread behind a
bounded queue so a slow application cannot stall detection.
"""

import enum
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import Scalar
from .eca import CollectingProcess, ContextProviderConfig
from .lattice import LatticeChecker
from .predicates import (
    ContextualKind,
    Modality,
    PredicateSpec,
    SnapshotKind,
    extract_local_predicates,
    passthrough_vars,
)
from .specxml import parse_specification
from .stdchecker import ConjunctiveChecker, Detection, Outcome
from .streams import StateMsg

logger = logging.getLogger(__name__)


class AlreadyRegisteredError(ValueError):
    pass


class UnresolvedResourceError(LookupError):
    pass


class NoSuchGroupError(KeyError):
    pass


class GroupStatus(enum.Enum):
    CREATING = "creating"
    RUNNING = "running"
    NOTIFIED = "notified"
    STOPPED = "stopped"


def routes_to_std(spec: PredicateSpec) -> bool:
    """Pos over a single conjunctive letter runs on the space-time diagram;
    everything else needs the snapshot lattice."""
    ctx = spec.contextual
    if ctx.kind is not ContextualKind.SINGLE or ctx.modality is not Modality.POS:
        return False
    letter = next(sp for sp in spec.alphabet if sp.letter == ctx.letter)
    return letter.kind is SnapshotKind.CONJUNCTIVE


@dataclass(frozen=True)
class ProviderHandle:
    device_id: int
    config: ContextProviderConfig
    location: str
    variables: dict[str, Scalar]


@dataclass(frozen=True)
class Notification:
    group_id: int
    verdict: str
    witness_cut: tuple[int, ...]
    detail: str
    sim_time: float
    wall_time: float


class CallbackDispatcher:
    """Single worker thread with a bounded queue; overflow drops the oldest."""

    def __init__(self, capacity: int = 1024):
        self.capacity = capacity
        self._queue: deque = deque()
        self._cv = threading.Condition()
        self._closed = False
        self._busy = 0
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def submit(self, fn: Callable[[], None]) -> None:
        with self._cv:
            if self._closed:
                return
            if len(self._queue) >= self.capacity:
                self._queue.popleft()
                logger.warning("notification queue overflow, dropping oldest")
            self._queue.append(fn)
            self._cv.notify()

    def _run(self) -> None:
        while True:
            with self._cv:
                while not self._queue and not self._closed:
                    self._cv.wait()
                if self._closed and not self._queue:
                    return
                fn = self._queue.popleft()
                self._busy += 1
            try:
                fn()
            except Exception:
                logger.exception("notification callback failed")
            finally:
                with self._cv:
                    self._busy -= 1
                    self._cv.notify_all()

    def drain(self) -> None:
        with self._cv:
            while self._queue or self._busy:
                self._cv.wait(timeout=0.05)

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._cv.notify_all()
        self._worker.join(timeout=2.0)


class SyncDispatcher:
    """Inline dispatch, for deterministic embedding."""

    def submit(self, fn: Callable[[], None]) -> None:
        try:
            fn()
        except Exception:
            logger.exception("notification callback failed")

    def drain(self) -> None:
        pass

    def close(self) -> None:
        pass


class DetectionGroup:
    def __init__(self, group_id: int, spec: PredicateSpec, checker, collectors,
                 global_pids: list[int], callback, mode: str):
        self.group_id = group_id
        self.spec = spec
        self.checker = checker
        self.collectors: dict[str, CollectingProcess] = collectors
        self.global_pids = global_pids
        self.callback = callback
        self.mode = mode
        self.status = GroupStatus.CREATING
        self.notifications: list[Notification] = []
        self._dispatched = 0
        self.ingest_calls = 0
        self.ingest_seconds = 0.0
        self.sim_now = 0.0

    @property
    def active(self) -> bool:
        return self.status in (GroupStatus.RUNNING, GroupStatus.NOTIFIED)

    def collector_by_pid(self, local_pid: int) -> CollectingProcess:
        return self.collectors[self.spec.context_types()[local_pid]]


class Broker:
    """In-process registration and notification hub."""

    def __init__(self, dispatcher=None):
        self.registry: dict[str, ProviderHandle] = {}
        self.groups: dict[int, DetectionGroup] = {}
        self.lifecycle_log: list[tuple[int, str]] = []
        self.lifecycle_listeners: list[Callable[[int, str], None]] = []
        self.notification_listeners: list[Callable[[Notification], None]] = []
        self.state_transport: Optional[Callable[[DetectionGroup, StateMsg], None]] = None
        self.dispatcher = dispatcher if dispatcher is not None else CallbackDispatcher()
        self._next_group = 0
        self._next_device = 0
        self._next_global_pid = 0
        self._lock = threading.RLock()

    # -- providers -----------------------------------------------------------

    def register_provider(
        self,
        cfg: ContextProviderConfig,
        variables: dict[str, Scalar],
        location: str = "",
    ) -> ProviderHandle:
        """Make a context type available; ``variables`` maps each variable the
        device streams to its initial value."""
        with self._lock:
            if cfg.context_type in self.registry:
                raise AlreadyRegisteredError(
                    f"context type {cfg.context_type!r} already registered"
                )
            handle = ProviderHandle(
                device_id=self._next_device,
                config=cfg,
                location=location,
                variables=dict(variables),
            )
            self._next_device += 1
            self.registry[cfg.context_type] = handle
            return handle

    def unregister_provider(self, context_type: str) -> None:
        with self._lock:
            if context_type not in self.registry:
                raise NoSuchGroupError(f"context type {context_type!r} not registered")
            del self.registry[context_type]

    # -- predicate groups ------------------------------------------------------

    @staticmethod
    def _routes_to_std(spec: PredicateSpec) -> bool:
        return routes_to_std(spec)

    def register_predicate(self, document, callback=None, mode: str = "once") -> int:
        """Parse, resolve resources, create the checker then the collectors.

        Fails atomically: on any error no group, checker or collector remains.
        """
        with self._lock:
            spec = document if isinstance(document, PredicateSpec) else parse_specification(document)
            if isinstance(document, PredicateSpec):
                spec.validate()
            cts = spec.context_types()
            missing = [ct for ct in cts if ct not in self.registry]
            if missing:
                raise UnresolvedResourceError(
                    f"no provider registered for context types {missing!r}"
                )
            group_id = self._next_group
            self._next_group += 1
            n = len(cts)

            if self._routes_to_std(spec):
                checker = ConjunctiveChecker(n, mode=mode)
            else:
                checker = LatticeChecker(spec, mode=mode)

            conditions = extract_local_predicates(spec)
            passthrough = passthrough_vars(spec)
            collectors: dict[str, CollectingProcess] = {}
            global_pids: list[int] = []
            group = DetectionGroup(group_id, spec, checker, collectors,
                                   global_pids, callback, mode)
            self._log(group_id, "group-created")
            self._log(group_id, "checker-start")
            for pid, ct in enumerate(cts):
                handle = self.registry[ct]
                collectors[ct] = CollectingProcess(
                    pid=pid,
                    group_size=n,
                    context_type=ct,
                    initial_values=handle.variables,
                    conditions=conditions.get(pid, []),
                    passthrough=passthrough.get(pid, []),
                    sink=lambda msg, g=group: self._forward(g, msg),
                )
                global_pids.append(self._next_global_pid)
                self._next_global_pid += 1
            self.groups[group_id] = group
            # All collectors exist before any of them starts emitting.
            group.status = GroupStatus.RUNNING
            for pid, ct in enumerate(cts):
                collectors[ct].start()
                self._log(group_id, f"collector-start:{global_pids[pid]}")
            return group_id

    def unregister_predicate(self, group_id: int) -> None:
        with self._lock:
            group = self.groups.get(group_id)
            if group is None or group.status is GroupStatus.STOPPED:
                raise NoSuchGroupError(f"no such group: {group_id}")
            for pid, ct in enumerate(group.spec.context_types()):
                self._log(group_id, f"collector-stop:{group.global_pids[pid]}")
            self._log(group_id, "checker-stop")
            group.status = GroupStatus.STOPPED
            self._log(group_id, "group-stopped")

    def group(self, group_id: int) -> DetectionGroup:
        g = self.groups.get(group_id)
        if g is None:
            raise NoSuchGroupError(f"no such group: {group_id}")
        return g

    def active_groups(self) -> list[DetectionGroup]:
        return [g for g in self.groups.values() if g.active]

    # -- state flow ---------------------------------------------------------------

    def _forward(self, group: DetectionGroup, msg: StateMsg) -> None:
        if self.state_transport is not None:
            self.state_transport(group, msg)
        else:
            self.deliver(group, msg)

    def deliver(self, group: DetectionGroup, msg: StateMsg) -> None:
        """Hand one state record to the group's checker; fire notifications."""
        if not group.active:
            return
        t0 = time.perf_counter()
        group.checker.ingest(msg)
        group.ingest_calls += 1
        group.ingest_seconds += time.perf_counter() - t0
        self._flush_detections(group)

    def _flush_detections(self, group: DetectionGroup) -> None:
        fresh = group.checker.detections[group._dispatched:]
        for det in fresh:
            group._dispatched += 1
            notification = Notification(
                group_id=group.group_id,
                verdict="detected",
                witness_cut=det.cut,
                detail=det.detail,
                sim_time=group.sim_now,
                wall_time=time.time(),
            )
            group.notifications.append(notification)
            if group.mode == "once":
                group.status = GroupStatus.NOTIFIED
            for listener in self.notification_listeners:
                listener(notification)
            self.dispatch(notification)

    def dispatch(self, notification: Notification) -> None:
        """Queue the application callback; suppressed once the group stopped."""
        group = self.groups.get(notification.group_id)
        if group is None or group.callback is None:
            return

        def invoke():
            if group.status is GroupStatus.STOPPED:
                return
            group.callback(notification)

        self.dispatcher.submit(invoke)

    # -- logs -------------------------------------------------------------------

    def _log(self, group_id: int, event: str) -> None:
        self.lifecycle_log.append((group_id, event))
        for listener in self.lifecycle_listeners:
            listener(group_id, event)

    def close(self) -> None:
        self.dispatcher.drain()
        self.dispatcher.close()
