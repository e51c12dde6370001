"""Canned specifications and scenarios: the plant-safety demos and benches.

The demo properties monitor a fleet of patrol robots: simultaneous leak
detection (conjunctive), aggregate temperature threshold (relational), and
single-file gateway passage (a regular expression over workshop-membership
letters).
"""

import string

from .harness import MessageSpec, ProcSpec, ScenarioConfig, VarSpec
from .predicates import (
    Atom,
    ContextualKind,
    ContextualPredicate,
    LocalPredicate,
    Modality,
    PredicateSpec,
    SnapshotKind,
    SnapshotPredicate,
)
from .regexlang import parse_regex


def leak_spec(n: int = 3, modality: Modality = Modality.POS,
              name: str = "all-robots-detect-leak") -> PredicateSpec:
    """Every robot's leak sensor trips at one consistent instant."""
    conjuncts = tuple(
        LocalPredicate(target=f"leak_R{i + 1}", expr=Atom("leak", "=", True))
        for i in range(n)
    )
    sp = SnapshotPredicate(letter="a", kind=SnapshotKind.CONJUNCTIVE, conjuncts=conjuncts)
    ctx = ContextualPredicate(kind=ContextualKind.SINGLE, modality=modality, letter="a")
    return PredicateSpec(name=name, alphabet=(sp,), contextual=ctx).validate()


def temperature_spec(n: int = 3, threshold: float = 24.0,
                     modality: Modality = Modality.POS,
                     name: str = "aggregate-temperature-high") -> PredicateSpec:
    """Sum of robot temperatures exceeds n times the per-robot threshold."""
    terms = tuple((f"temperature_R{i + 1}", "temp") for i in range(n))
    sp = SnapshotPredicate(
        letter="r", kind=SnapshotKind.RELATIONAL, terms=terms,
        relop=">", bound=n * threshold,
    )
    ctx = ContextualPredicate(kind=ContextualKind.SINGLE, modality=modality, letter="r")
    return PredicateSpec(name=name, alphabet=(sp,), contextual=ctx).validate()


def gateway_spec(k: int = 3, name: str = "gateway-single-file") -> PredicateSpec:
    """Robots leave workshop A through the gateway one by one, in id order.

    Letter j (0..k) says the first j robots are already in workshop B.  The
    required pattern is letter0+ letter1+ ... letterk+, expressed with stars:
    a*ab*b... for the canonical three-robot case.
    """
    if not 1 <= k <= len(string.ascii_lowercase) - 1:
        raise ValueError(f"robot count {k} out of range")
    letters = string.ascii_lowercase[: k + 1]
    alphabet = []
    for j, letter in enumerate(letters):
        conjuncts = tuple(
            LocalPredicate(
                target=f"location_R{i + 1}",
                expr=Atom("loc", "=", "B" if i < j else "A"),
            )
            for i in range(k)
        )
        alphabet.append(
            SnapshotPredicate(letter=letter, kind=SnapshotKind.CONJUNCTIVE,
                              conjuncts=conjuncts)
        )
    pattern = "".join(f"{letter}*{letter}" for letter in letters)
    ctx = ContextualPredicate(
        kind=ContextualKind.REGEX, modality=Modality.DEF, regex=parse_regex(pattern)
    )
    return PredicateSpec(name=name, alphabet=tuple(alphabet), contextual=ctx).validate()


# ---------------------------------------------------------------------------
# Scenarios


def leak_overlap_scenario(seed: int = 42) -> ScenarioConfig:
    """Three message-free robots whose leak windows overlap: detection fires."""
    procs = []
    windows = [(200.0, 1400.0), (400.0, 1600.0), (600.0, 1800.0)]
    for i, (on, off) in enumerate(windows):
        procs.append(
            ProcSpec(
                context_type=f"leak_R{i + 1}",
                variables=[
                    VarSpec(
                        "leak", "script",
                        {"steps": [(0.0, False), (on, True), (off, False)]},
                    )
                ],
            )
        )
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=100.0,
        delay_mean_ms=10.0,
        horizon_ms=2500.0,
        seed=seed,
    ).validate()


def leak_disjoint_scenario(seed: int = 42) -> ScenarioConfig:
    """Leak windows separated by messages: R1's window closes before R2's
    opens in causal order, and likewise R2 before R3, so no snapshot sees
    all three leaks."""
    windows = [(200.0, 500.0), (1200.0, 1500.0), (2200.0, 2500.0)]
    procs = []
    for i, (on, off) in enumerate(windows):
        procs.append(
            ProcSpec(
                context_type=f"leak_R{i + 1}",
                variables=[
                    VarSpec(
                        "leak", "script",
                        {"steps": [(0.0, False), (on, True), (off, False)]},
                    )
                ],
            )
        )
    messages = [
        MessageSpec(at_ms=800.0, src=0, dst=1),
        MessageSpec(at_ms=1800.0, src=1, dst=2),
    ]
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=100.0,
        delay_mean_ms=10.0,
        horizon_ms=3000.0,
        seed=seed,
        messages=messages,
    ).validate()


def gateway_scenario(k: int = 3, correct_order: bool = True,
                     seed: int = 42) -> ScenarioConfig:
    """Robots cross from workshop A to B; each crossing hands off to the
    next robot by message.  With ``correct_order`` False the first two
    robots swap, violating the single-file pattern."""
    move_times = [400.0 + 600.0 * i for i in range(k)]
    order = list(range(k))
    if not correct_order and k >= 2:
        order[0], order[1] = order[1], order[0]
    when = {}
    for slot, robot in enumerate(order):
        when[robot] = move_times[slot]
    procs = []
    for i in range(k):
        procs.append(
            ProcSpec(
                context_type=f"location_R{i + 1}",
                variables=[
                    VarSpec("loc", "script",
                            {"steps": [(0.0, "A"), (when[i], "B")]})
                ],
            )
        )
    # Handoff: each robot messages the next one in crossing order after moving.
    messages = [
        MessageSpec(at_ms=move_times[slot] + 100.0, src=order[slot], dst=order[slot + 1])
        for slot in range(k - 1)
    ]
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=50.0,
        delay_mean_ms=5.0,
        horizon_ms=move_times[-1] + 500.0,
        seed=seed,
        messages=messages,
    ).validate()


def temperature_scenario(temps: list[float], spike: list[float],
                         spike_at_ms: float = 600.0, seed: int = 42) -> ScenarioConfig:
    """Scripted temperatures that jump to the spike values mid-run."""
    procs = []
    for i, (base, high) in enumerate(zip(temps, spike)):
        procs.append(
            ProcSpec(
                context_type=f"temperature_R{i + 1}",
                variables=[
                    VarSpec("temp", "script",
                            {"steps": [(0.0, base), (spike_at_ms, high)]})
                ],
            )
        )
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=100.0,
        delay_mean_ms=5.0,
        horizon_ms=1500.0,
        seed=seed,
    ).validate()


# ---------------------------------------------------------------------------
# Bench builders


def bench_conjunctive_spec(processes: int, index: int) -> PredicateSpec:
    return leak_spec(processes, name=f"leak-{index}")


def bench_conjunctive_scenario(processes: int, seed: int = 1) -> ScenarioConfig:
    """Activity-driven leak flags, heartbeat ring, modest horizon."""
    procs = [
        ProcSpec(
            context_type=f"leak_R{i + 1}",
            variables=[
                VarSpec("leak", "activity", {"on": 60.0, "off": 60.0, "initial": False})
            ],
        )
        for i in range(processes)
    ]
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=4.0,
        delay_mean_ms=0.1,
        horizon_ms=400.0,
        seed=seed,
        heartbeat_period_ms=80.0,
    ).validate()


def bench_regex_spec(processes: int, index: int) -> PredicateSpec:
    spec = gateway_spec(processes)
    return PredicateSpec(
        name=f"gateway-{index}", alphabet=spec.alphabet, contextual=spec.contextual
    )


def bench_regex_scenario(processes: int, seed: int = 1,
                         toggles: int = 4) -> ScenarioConfig:
    """Message-free robots bouncing between workshops: the lattice stays the
    full grid of (toggles+1)^k cuts and grows geometrically with k."""
    horizon = 100.0 * (toggles + 1)
    procs = []
    for i in range(processes):
        steps = [(0.0, "A")]
        for s in range(1, toggles + 1):
            steps.append((100.0 * s + i * 7.0, "B" if s % 2 else "A"))
        procs.append(
            ProcSpec(
                context_type=f"location_R{i + 1}",
                variables=[VarSpec("loc", "script", {"steps": steps})],
            )
        )
    return ScenarioConfig(
        procs=procs,
        sample_period_ms=25.0,
        delay_mean_ms=1.0,
        horizon_ms=horizon,
        seed=seed,
    ).validate()
