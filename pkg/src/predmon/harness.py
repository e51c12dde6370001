"""Deterministic discrete-event simulation of the asynchronous system.

One seeded event loop drives every collecting process through samples,
message exchanges with exponentially distributed delays, and termination at
the horizon.  All randomness flows from SplitMix64 streams split off the
master seed, so a (scenario, seed) pair reproduces its trace byte for byte.
"""

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

from .broker import Broker, DetectionGroup, SyncDispatcher
from .core import Scalar
from .eca import ContextProviderConfig
from .streams import StateMsg
from .tracefmt import (
    LifecycleLine,
    NotifyLine,
    RecvLine,
    SendLine,
    StateLine,
    TraceRecord,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ScenarioError(ValueError):
    pass


class SplitMix64:
    """Tiny portable 64-bit generator; streams split cleanly off one seed."""

    def __init__(self, seed: int):
        self._s = seed & _MASK64

    def next_u64(self) -> int:
        self._s = (self._s + _GOLDEN) & _MASK64
        z = self._s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform in [0, 1) with 53 significant bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n


def substream(seed: int, *salts: int) -> SplitMix64:
    rng = SplitMix64(seed)
    s = rng.next_u64()
    for salt in salts:
        s = SplitMix64(s ^ (salt & _MASK64)).next_u64()
    return SplitMix64(s)


def draw_exponential(rng: SplitMix64, mean: float) -> float:
    """Inverse-transform sample of an exponential with the given mean."""
    if mean <= 0:
        raise ScenarioError(f"invalid config: non-positive mean {mean}")
    return -mean * math.log(1.0 - rng.random())


def draw_activity(
    rng: SplitMix64,
    mean_on: float,
    mean_off: float,
    horizon: float,
    start_on: bool = False,
) -> list[tuple[float, bool]]:
    """Alternating truth schedule: (toggle time, truth from then on) pairs.

    Holding times are exponential with the configured on/off means; the
    schedule starts at time 0 with ``start_on`` and covers the horizon.
    """
    if mean_on <= 0 or mean_off <= 0:
        raise ScenarioError("invalid config: non-positive activity mean")
    schedule = [(0.0, start_on)]
    t, truth = 0.0, start_on
    while True:
        t += draw_exponential(rng, mean_on if truth else mean_off)
        if t >= horizon:
            return schedule
        truth = not truth
        schedule.append((t, truth))


# ---------------------------------------------------------------------------
# Scenario configuration


@dataclass
class VarSpec:
    name: str
    kind: str  # activity | script | constant
    params: dict

    def validate(self):
        if self.kind == "activity":
            if self.params.get("on", 0) <= 0 or self.params.get("off", 0) <= 0:
                raise ScenarioError(f"variable {self.name!r}: activity means must be positive")
        elif self.kind == "script":
            if not self.params.get("steps"):
                raise ScenarioError(f"variable {self.name!r}: script needs steps")
        elif self.kind == "constant":
            if "value" not in self.params:
                raise ScenarioError(f"variable {self.name!r}: constant needs a value")
        else:
            raise ScenarioError(f"variable {self.name!r}: unknown generator {self.kind!r}")


@dataclass
class ProcSpec:
    context_type: str
    variables: list[VarSpec]


@dataclass
class MessageSpec:
    at_ms: float
    src: int
    dst: int


@dataclass
class ScenarioConfig:
    procs: list[ProcSpec]
    sample_period_ms: float = 400.0
    delay_mean_ms: float = 10.0
    state_delay_mean_ms: float = 0.0
    horizon_ms: float = 10_000.0
    seed: int = 1
    heartbeat_period_ms: float = 0.0
    max_samples_per_process: Optional[int] = None
    messages: list[MessageSpec] = field(default_factory=list)

    def validate(self) -> "ScenarioConfig":
        if not self.procs:
            raise ScenarioError("scenario needs at least one process")
        if self.sample_period_ms <= 0 or self.horizon_ms <= 0:
            raise ScenarioError("periods and horizon must be positive")
        if self.delay_mean_ms < 0 or self.state_delay_mean_ms < 0:
            raise ScenarioError("delay means must be non-negative")
        seen = set()
        for proc in self.procs:
            if proc.context_type in seen:
                raise ScenarioError(f"duplicate context type {proc.context_type!r}")
            seen.add(proc.context_type)
            if not proc.variables:
                raise ScenarioError(f"process {proc.context_type!r} declares no variables")
            for var in proc.variables:
                var.validate()
        n = len(self.procs)
        for m in self.messages:
            if not (0 <= m.src < n and 0 <= m.dst < n) or m.src == m.dst:
                raise ScenarioError(f"bad message endpoints {m.src}->{m.dst}")
            if m.at_ms < 0:
                raise ScenarioError("message times must be non-negative")
        return self


def _parse_generator(text: str, name: str) -> VarSpec:
    kind, _, rest = text.partition(":")
    if kind == "constant":
        params = dict(p.split("=", 1) for p in rest.split(",") if p)
        if "value" not in params:
            raise ScenarioError(f"variable {name!r}: constant needs value=")
        return VarSpec(name, "constant", {"value": _parse_value(params["value"])})
    if kind == "activity":
        raw = dict(p.split("=", 1) for p in rest.split(",") if p)
        params = {
            "on": float(raw.get("on", "0")),
            "off": float(raw.get("off", "0")),
            "initial": raw.get("initial", "false") == "true",
        }
        return VarSpec(name, "activity", params)
    if kind == "script":
        steps = []
        for part in rest.split(";"):
            if not part:
                continue
            value, _, at = part.rpartition("@")
            if not value:
                raise ScenarioError(f"variable {name!r}: script step {part!r} needs value@time")
            steps.append((float(at), _parse_value(value)))
        steps.sort(key=lambda s: s[0])
        return VarSpec(name, "script", {"steps": steps})
    raise ScenarioError(f"variable {name!r}: unknown generator kind {kind!r}")


def _parse_value(text: str) -> Scalar:
    from .specxml import parse_scalar

    return parse_scalar(text)


def _format_value(value: Scalar) -> str:
    from .specxml import format_scalar

    return format_scalar(value)


def render_scenario(cfg: ScenarioConfig) -> str:
    """Flat key=value form that parse_scenario maps back to the same config."""
    lines = [
        f"processes={len(cfg.procs)}",
        f"samplePeriodMs={cfg.sample_period_ms:g}",
        f"delayMeanMs={cfg.delay_mean_ms:g}",
        f"stateDelayMeanMs={cfg.state_delay_mean_ms:g}",
        f"horizonMs={cfg.horizon_ms:g}",
        f"seed={cfg.seed}",
        f"heartbeatPeriodMs={cfg.heartbeat_period_ms:g}",
    ]
    if cfg.max_samples_per_process is not None:
        lines.append(f"maxSamplesPerProcess={cfg.max_samples_per_process}")
    for i, proc in enumerate(cfg.procs):
        lines.append(f"contextType.{i}={proc.context_type}")
        for var in proc.variables:
            if var.kind == "constant":
                gen = f"constant:value={_format_value(var.params['value'])}"
            elif var.kind == "activity":
                initial = "true" if var.params.get("initial") else "false"
                gen = (
                    f"activity:on={var.params['on']:g},off={var.params['off']:g},"
                    f"initial={initial}"
                )
            else:
                steps = ";".join(
                    f"{_format_value(v)}@{t:g}" for t, v in var.params["steps"]
                )
                gen = f"script:{steps}"
            lines.append(f"var.{i}.{var.name}={gen}")
    for k, m in enumerate(cfg.messages):
        lines.append(f"message.{k}=at={m.at_ms:g},src={m.src},dst={m.dst}")
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> ScenarioConfig:
    """Flat key=value scenario form; see README for the key list."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()

    try:
        n = int(pairs.pop("processes"))
    except KeyError:
        raise ScenarioError("scenario misses processes=") from None

    procs = []
    for i in range(n):
        ct = pairs.pop(f"contextType.{i}", f"proc{i}")
        variables = []
        prefix = f"var.{i}."
        for key in sorted(k for k in pairs if k.startswith(prefix)):
            variables.append(_parse_generator(pairs.pop(key), key[len(prefix):]))
        procs.append(ProcSpec(context_type=ct, variables=variables))

    messages = []
    for key in sorted(k for k in pairs if k.startswith("message.")):
        raw = dict(p.split("=", 1) for p in pairs.pop(key).split(",") if p)
        messages.append(
            MessageSpec(at_ms=float(raw["at"]), src=int(raw["src"]), dst=int(raw["dst"]))
        )

    cfg = ScenarioConfig(
        procs=procs,
        sample_period_ms=float(pairs.pop("samplePeriodMs", "400")),
        delay_mean_ms=float(pairs.pop("delayMeanMs", "10")),
        state_delay_mean_ms=float(pairs.pop("stateDelayMeanMs", "0")),
        horizon_ms=float(pairs.pop("horizonMs", "10000")),
        seed=int(pairs.pop("seed", "1")),
        heartbeat_period_ms=float(pairs.pop("heartbeatPeriodMs", "0")),
        max_samples_per_process=(
            int(pairs["maxSamplesPerProcess"]) if pairs.pop("maxSamplesPerProcess", None) else None
        ),
        messages=messages,
    )
    if pairs:
        raise ScenarioError(f"unknown scenario keys: {sorted(pairs)!r}")
    return cfg.validate()


# ---------------------------------------------------------------------------
# Value generators


class _Generator:
    def __init__(self, spec: VarSpec, rng: SplitMix64, horizon: float):
        self.name = spec.name
        self.kind = spec.kind
        if spec.kind == "activity":
            self.schedule = draw_activity(
                rng, spec.params["on"], spec.params["off"], horizon,
                start_on=spec.params.get("initial", False),
            )
        elif spec.kind == "script":
            self.schedule = list(spec.params["steps"])
            if not self.schedule or self.schedule[0][0] > 0:
                first = self.schedule[0][1] if self.schedule else None
                if first is None:
                    raise ScenarioError(f"variable {spec.name!r}: empty script")
                self.schedule.insert(0, (0.0, first))
        else:
            self.schedule = [(0.0, spec.params["value"])]
        self._cursor = 0

    @property
    def initial(self) -> Scalar:
        return self.schedule[0][1]

    def value_at(self, t: float) -> Scalar:
        while (
            self._cursor + 1 < len(self.schedule)
            and self.schedule[self._cursor + 1][0] <= t
        ):
            self._cursor += 1
        return self.schedule[self._cursor][1]


# ---------------------------------------------------------------------------
# The event loop


_SAMPLE, _SEND, _DELIVER_MSG, _DELIVER_STATE, _STOP = range(5)


class Simulation:
    """Single-threaded seeded event loop over a broker's detection groups."""

    def __init__(self, cfg: ScenarioConfig, broker: Optional[Broker] = None):
        cfg.validate()
        self.cfg = cfg
        self.now = 0.0
        self.trace: list[TraceRecord] = []
        self._heap: list = []
        self._counter = 0
        self._stopped = False
        self._msg_counter = 0
        self._sample_counts = [0] * len(cfg.procs)
        self._net_rng = substream(cfg.seed, 0xDE1A)
        self._state_rng = substream(cfg.seed, 0x57A7E)
        self._last_state_delivery: dict[tuple[int, int], float] = {}

        self.generators: list[list[_Generator]] = []
        for i, proc in enumerate(cfg.procs):
            gens = [
                _Generator(v, substream(cfg.seed, 0xAC71, i, j), cfg.horizon_ms)
                for j, v in enumerate(proc.variables)
            ]
            self.generators.append(gens)

        self.broker = broker if broker is not None else Broker(dispatcher=SyncDispatcher())
        self.broker.state_transport = self._transport
        self.broker.notification_listeners.append(self._record_notification)
        self.broker.lifecycle_listeners.append(
            lambda gid, event: self.trace.append(LifecycleLine(gid, event))
        )
        self._register_providers()
        self._schedule_scenario_events()

    # -- setup ------------------------------------------------------------------

    def _register_providers(self):
        for proc, gens in zip(self.cfg.procs, self.generators):
            variables = {g.name: g.initial for g in gens}
            kind = _value_kind(gens[0].initial) if gens else "string"
            cfg = ContextProviderConfig(
                context_type=proc.context_type,
                role="simulated-sensor",
                sample_period_ms=self.cfg.sample_period_ms,
                value_kind=kind,
            )
            self.broker.register_provider(cfg, variables=variables)

    def _schedule_scenario_events(self):
        cfg = self.cfg
        t = cfg.sample_period_ms
        while t < cfg.horizon_ms:
            for i in range(len(cfg.procs)):
                self._push(t, _SAMPLE, i)
            t += cfg.sample_period_ms
        if cfg.heartbeat_period_ms > 0 and len(cfg.procs) > 1:
            t = cfg.heartbeat_period_ms
            while t < cfg.horizon_ms:
                for i in range(len(cfg.procs)):
                    self._push(t, _SEND, (i, (i + 1) % len(cfg.procs)))
                t += cfg.heartbeat_period_ms
        for m in cfg.messages:
            if m.at_ms < cfg.horizon_ms:
                self._push(m.at_ms, _SEND, (m.src, m.dst))
        self._push(cfg.horizon_ms, _STOP, None)

    def _push(self, t: float, kind: int, payload) -> None:
        heapq.heappush(self._heap, (t, self._counter, kind, payload))
        self._counter += 1

    # -- transports ----------------------------------------------------------------

    def _transport(self, group: DetectionGroup, msg: StateMsg) -> None:
        """Channel to the checker: random delay, FIFO per collector."""
        delay = (
            draw_exponential(self._state_rng, self.cfg.state_delay_mean_ms)
            if self.cfg.state_delay_mean_ms > 0
            else 0.0
        )
        key = (group.group_id, msg.state.owner)
        at = max(self.now + delay, self._last_state_delivery.get(key, 0.0))
        self._last_state_delivery[key] = at
        self._push(at, _DELIVER_STATE, (group, msg))

    def _record_notification(self, notification) -> None:
        self.trace.append(
            NotifyLine(
                group_id=notification.group_id,
                cut=notification.witness_cut,
                sim_time=notification.sim_time,
            )
        )

    # -- run ----------------------------------------------------------------------

    def run(self) -> list[TraceRecord]:
        while self._heap:
            t, _, kind, payload = heapq.heappop(self._heap)
            self.now = t
            if kind == _SAMPLE:
                self._handle_sample(payload)
            elif kind == _SEND:
                self._handle_send(payload)
            elif kind == _DELIVER_MSG:
                self._handle_deliver_msg(payload)
            elif kind == _DELIVER_STATE:
                self._handle_deliver_state(payload)
            elif kind == _STOP:
                self._handle_stop()
        self.broker.dispatcher.drain()
        return self.trace

    def _groups_with(self, ct: str) -> list[DetectionGroup]:
        return [
            g for g in self.broker.groups.values()
            if g.active and ct in g.collectors and not g.collectors[ct].terminated
        ]

    def _handle_sample(self, proc_idx: int) -> None:
        if self._stopped:
            return
        cap = self.cfg.max_samples_per_process
        if cap is not None and self._sample_counts[proc_idx] >= cap:
            return
        self._sample_counts[proc_idx] += 1
        ct = self.cfg.procs[proc_idx].context_type
        readings = [(g.name, g.value_at(self.now)) for g in self.generators[proc_idx]]
        for group in self._groups_with(ct):
            cp = group.collectors[ct]
            for name, value in readings:
                cp.on_sample(name, value)

    def _handle_send(self, payload) -> None:
        if self._stopped:
            return
        src_idx, dst_idx = payload
        src_ct = self.cfg.procs[src_idx].context_type
        dst_ct = self.cfg.procs[dst_idx].context_type
        delay = draw_exponential(self._net_rng, self.cfg.delay_mean_ms) \
            if self.cfg.delay_mean_ms > 0 else 0.0
        for group in self._groups_with(src_ct):
            if dst_ct not in group.collectors or group.collectors[dst_ct].terminated:
                continue
            pidx = group.spec.process_index()
            cp = group.collectors[src_ct]
            msg = cp.on_send(pidx[dst_ct])
            msgid = f"m{self._msg_counter}"
            self._msg_counter += 1
            self.trace.append(
                SendLine(
                    src=group.global_pids[pidx[src_ct]],
                    dst=group.global_pids[pidx[dst_ct]],
                    msgid=msgid,
                    vc=msg.piggyback,
                )
            )
            self._push(self.now + delay, _DELIVER_MSG, (group, dst_ct, msg, msgid))

    def _handle_deliver_msg(self, payload) -> None:
        group, dst_ct, msg, msgid = payload
        if self._stopped or not group.active:
            return  # in-flight coordination messages are dropped at shutdown
        cp = group.collectors[dst_ct]
        if cp.terminated:
            return
        cp.on_receive(msg)
        self.trace.append(
            RecvLine(
                dst=group.global_pids[msg.dst],
                src=group.global_pids[msg.src],
                msgid=msgid,
                vc=cp.clock,
            )
        )

    def _handle_deliver_state(self, payload) -> None:
        group, msg = payload
        if not group.active:
            return
        group.sim_now = self.now
        state = msg.state
        gpid = group.global_pids[state.owner]
        self.trace.append(
            StateLine(
                pid=gpid,
                seq=state.seq,
                begin=state.begin,
                end=state.end,
                truth=state.truth,
                values=dict(state.values),
            )
        )
        if msg.final:
            self.trace.append(
                LifecycleLine(group.group_id, f"terminated:{gpid}:{state.seq}")
            )
        self.broker.deliver(group, msg)

    def _handle_stop(self) -> None:
        self._stopped = True
        for group in self.broker.groups.values():
            if not group.active:
                continue
            for ct in group.spec.context_types():
                cp = group.collectors[ct]
                if not cp.terminated:
                    cp.terminate()


def _value_kind(value: Scalar) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "decimal"
    return "string"


def run_scenario(cfg: ScenarioConfig, spec_documents: list, callbacks=None,
                 mode: str = "once") -> tuple[list[TraceRecord], Broker]:
    """Register the given specifications and drive them through the scenario."""
    sim = Simulation(cfg)
    callbacks = callbacks or [None] * len(spec_documents)
    for document, callback in zip(spec_documents, callbacks):
        sim.broker.register_predicate(document, callback=callback, mode=mode)
    trace = sim.run()
    return trace, sim.broker
