"""Brute-force oracles and randomized equivalence suites.

Everything here recomputes answers from first principles: happen-before is
graph reachability over explicit event graphs, snapshots are enumerated
exhaustively, sequence verdicts come from walking every lattice path, regex
membership interprets the syntax tree, and CTL truth is a Kleene fixpoint.
The online checkers must agree with these on randomized computations.
"""

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .core import LocalState
from .eca import CollectingProcess
from .harness import SplitMix64, substream
from .lattice import LatticeChecker
from .predicates import (
    Atom,
    ContextualKind,
    ContextualPredicate,
    CtlAnd,
    CtlAtom,
    CtlExistsNext,
    CtlExistsUntil,
    CtlForallNext,
    CtlForallUntil,
    CtlNode,
    CtlNot,
    CtlTrue,
    LocalPredicate,
    Modality,
    PredicateSpec,
    SnapshotKind,
    SnapshotPredicate,
    eval_snapshot,
    extract_local_predicates,
    label_of,
    passthrough_vars,
)
from .regexlang import (
    Concat,
    Empty,
    Epsilon,
    Letter,
    RegexNode,
    Star,
    Union,
)
from .stdchecker import ConjunctiveChecker
from .streams import StateMsg

Event = tuple[int, int]  # (process, event index >= 1)
Cut = tuple[int, ...]


# ---------------------------------------------------------------------------
# Event graph reachability (the happen-before definition)


class EventGraph:
    """Program-order chains plus send->receive edges; reachability by BFS."""

    def __init__(self, event_counts: list[int], message_edges: list[tuple[Event, Event]]):
        self.event_counts = event_counts
        self.message_edges = message_edges
        self._out: dict[Event, list[Event]] = {}
        for pid, count in enumerate(event_counts):
            for k in range(1, count):
                self._out.setdefault((pid, k), []).append((pid, k + 1))
        for src, dst in message_edges:
            self._out.setdefault(src, []).append(dst)
        self._desc: dict[Event, set[Event]] = {}

    def reaches(self, e: Event, f: Event) -> bool:
        desc = self._desc.get(e)
        if desc is None:
            desc = {e}
            stack = [e]
            while stack:
                cur = stack.pop()
                for nxt in self._out.get(cur, ()):
                    if nxt not in desc:
                        desc.add(nxt)
                        stack.append(nxt)
            self._desc[e] = desc
        return f in desc


def oracle_states_consistent(
    s: LocalState, t: LocalState, graph: EventGraph
) -> bool:
    """Cut validity from the event graph: no ending event reaches the other
    member's beginning event."""

    def before(a: LocalState, b: LocalState) -> bool:
        if a.end is None or b.seq == 0:
            return False
        return graph.reaches((a.owner, a.seq + 1), (b.owner, b.seq))

    return not before(s, t) and not before(t, s)


def oracle_cut_consistent(states: list[LocalState], graph: EventGraph) -> bool:
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            if not oracle_states_consistent(states[i], states[j], graph):
                return False
    return True


def oracle_cut_set(
    per_proc: list[list[LocalState]], graph: EventGraph,
    limits: Optional[list[int]] = None,
) -> set[Cut]:
    """All consistent index vectors, by exhaustive enumeration with pruning."""
    n = len(per_proc)
    if limits is None:
        limits = [len(states) - 1 for states in per_proc]
    if any(limit < 0 for limit in limits):
        return set()
    out: set[Cut] = set()
    cut: list[int] = [0] * n

    def recurse(i: int) -> None:
        if i == n:
            out.add(tuple(cut))
            return
        for m in range(limits[i] + 1):
            ok = True
            for j in range(i):
                if not oracle_states_consistent(
                    per_proc[i][m], per_proc[j][cut[j]], graph
                ):
                    ok = False
                    break
            if ok:
                cut[i] = m
                recurse(i + 1)
        cut[i] = 0

    recurse(0)
    return out


def oracle_min_satisfying_cut(
    per_proc: list[list[LocalState]],
    graph: EventGraph,
    satisfies: Callable[[list[LocalState]], bool],
) -> Optional[Cut]:
    """Componentwise least consistent cut passing the predicate, or None."""
    best: Optional[Cut] = None
    for cut in oracle_cut_set(per_proc, graph):
        states = [per_proc[i][cut[i]] for i in range(len(per_proc))]
        if satisfies(states):
            if best is None:
                best = cut
            else:
                best = tuple(min(a, b) for a, b in zip(best, cut))
    return best


# ---------------------------------------------------------------------------
# Path enumeration over a cut set


def oracle_paths(cut_set: set[Cut], bottom: Cut, top: Cut) -> Iterable[list[Cut]]:
    """Every chain from bottom to top advancing one process by one state."""
    n = len(bottom)
    path = [bottom]

    def recurse(cur: Cut):
        if cur == top:
            yield list(path)
            return
        for i in range(n):
            if cur[i] < top[i]:
                nxt = cur[:i] + (cur[i] + 1,) + cur[i + 1:]
                if nxt in cut_set:
                    path.append(nxt)
                    yield from recurse(nxt)
                    path.pop()

    if bottom in cut_set and top in cut_set:
        yield from recurse(bottom)


def count_paths(cut_set: set[Cut], bottom: Cut, top: Cut) -> int:
    relevant = [c for c in cut_set if all(a <= b for a, b in zip(c, top))]
    relevant.sort(key=lambda c: (sum(c), c))
    counts: dict[Cut, int] = {}
    n = len(bottom)
    for cut in relevant:
        if cut == bottom:
            counts[cut] = 1
            continue
        total = 0
        for i in range(n):
            if cut[i] > 0:
                prev = cut[:i] + (cut[i] - 1,) + cut[i + 1:]
                total += counts.get(prev, 0)
        counts[cut] = total
    return counts.get(top, 0)


# ---------------------------------------------------------------------------
# Regex membership by syntax-tree interpretation


def regex_word_match(node: RegexNode, word: str, _memo=None) -> bool:
    if _memo is None:
        _memo = {}
    key = (id(node), word)
    hit = _memo.get(key)
    if hit is not None:
        return hit
    if isinstance(node, Empty):
        out = False
    elif isinstance(node, Epsilon):
        out = word == ""
    elif isinstance(node, Letter):
        out = word == node.ch
    elif isinstance(node, Union):
        out = regex_word_match(node.left, word, _memo) or regex_word_match(
            node.right, word, _memo
        )
    elif isinstance(node, Concat):
        out = any(
            regex_word_match(node.left, word[:i], _memo)
            and regex_word_match(node.right, word[i:], _memo)
            for i in range(len(word) + 1)
        )
    elif isinstance(node, Star):
        if word == "":
            out = True
        else:
            out = any(
                regex_word_match(node.body, word[:i], _memo)
                and regex_word_match(node, word[i:], _memo)
                for i in range(1, len(word) + 1)
            )
    else:
        raise TypeError(f"not a regex node: {node!r}")
    _memo[key] = out
    return out


# ---------------------------------------------------------------------------
# CTL truth by Kleene fixpoint iteration


def ctl_fixpoint(
    cuts: set[Cut],
    succs: dict[Cut, list[Cut]],
    top: Cut,
    atom_truth: Callable[[Cut, str], bool],
    formula: CtlNode,
) -> set[Cut]:
    """Satisfaction sets computed by naive iteration; top carries a self-loop."""

    def successors(c: Cut) -> list[Cut]:
        return succs[c] + ([c] if c == top else [])

    def sat(f: CtlNode) -> set[Cut]:
        if isinstance(f, CtlTrue):
            return set(cuts)
        if isinstance(f, CtlAtom):
            return {c for c in cuts if atom_truth(c, f.letter)}
        if isinstance(f, CtlAnd):
            return sat(f.left) & sat(f.right)
        if isinstance(f, CtlNot):
            return cuts - sat(f.item)
        if isinstance(f, CtlExistsNext):
            inner = sat(f.item)
            return {c for c in cuts if any(s in inner for s in successors(c))}
        if isinstance(f, CtlForallNext):
            inner = sat(f.item)
            return {c for c in cuts if all(s in inner for s in successors(c))}
        if isinstance(f, (CtlExistsUntil, CtlForallUntil)):
            holds, target = sat(f.left), sat(f.right)
            exists = isinstance(f, CtlExistsUntil)
            out = set(target)
            while True:
                added = False
                for c in cuts - out:
                    if c not in holds:
                        continue
                    around = successors(c)
                    hit = any(s in out for s in around) if exists else (
                        bool(around) and all(s in out for s in around)
                    )
                    if hit:
                        out.add(c)
                        added = True
                if not added:
                    return out
        raise TypeError(f"not a CTL node: {f!r}")

    return sat(formula)


# ---------------------------------------------------------------------------
# Randomized computations driven through the real acquisition layer


@dataclass
class Computation:
    """A finished run: final states, emission records, and the event graph."""

    n: int
    context_types: list[str]
    states: list[list[LocalState]]
    records: list[list[StateMsg]]
    graph: EventGraph
    ops: list[tuple]

    def deliveries(self, rng: SplitMix64) -> list[StateMsg]:
        """A per-process-FIFO-preserving random interleaving of all records."""
        cursors = [0] * self.n
        out: list[StateMsg] = []
        live = [i for i in range(self.n) if self.records[i]]
        while live:
            i = live[rng.randrange(len(live))]
            out.append(self.records[i][cursors[i]])
            cursors[i] += 1
            if cursors[i] == len(self.records[i]):
                live.remove(i)
        return out


def random_ops(rng: SplitMix64, n: int, max_ops_per_proc: int,
               numeric: bool = False, p_send: float = 0.3) -> list[tuple]:
    """Abstract op list; sends carry tags so shrinking can drop pairs."""
    budgets = [rng.randrange(max_ops_per_proc + 1) for _ in range(n)]
    ops: list[tuple] = []
    in_flight: list[tuple[int, int]] = []  # (tag, dst)
    tag = 0
    while True:
        movable = [i for i in range(n) if budgets[i] > 0]
        can_recv = [idx for idx, (t, dst) in enumerate(in_flight) if budgets[dst] > 0]
        if not movable and not can_recv:
            break
        if can_recv and (not movable or rng.random() < 0.4):
            idx = can_recv[rng.randrange(len(can_recv))]
            t, dst = in_flight.pop(idx)
            budgets[dst] -= 1
            ops.append(("recv", t))
            continue
        i = movable[rng.randrange(len(movable))]
        r = rng.random()
        if n > 1 and r < p_send:
            dst = rng.randrange(n - 1)
            if dst >= i:
                dst += 1
            budgets[i] -= 1
            ops.append(("send", i, dst, tag))
            in_flight.append((tag, dst))
            tag += 1
        elif numeric and r < 0.6:
            budgets[i] -= 1
            ops.append(("setv", i, rng.randrange(10)))
        else:
            budgets[i] -= 1
            ops.append(("toggle", i))
    return ops


def execute_ops(
    ops: list[tuple],
    n: int,
    conditions: dict[int, list[LocalPredicate]],
    passthrough: dict[int, list[str]],
    initial_x: Optional[list[bool]] = None,
    numeric: bool = False,
) -> Computation:
    """Replay an op list through real collecting processes."""
    cts = [f"p{i}" for i in range(n)]
    records: list[list[StateMsg]] = [[] for _ in range(n)]
    states: list[dict[int, LocalState]] = [{} for _ in range(n)]

    def make_sink(i: int):
        def sink(msg: StateMsg) -> None:
            records[i].append(msg)
            states[i][msg.state.seq] = msg.state

        return sink

    cps = []
    for i in range(n):
        initial: dict = {"x": initial_x[i] if initial_x else False}
        if numeric:
            initial["v"] = 0
        cps.append(
            CollectingProcess(
                pid=i,
                group_size=n,
                context_type=cts[i],
                initial_values=initial,
                conditions=conditions.get(i, []),
                passthrough=passthrough.get(i, []),
                sink=make_sink(i),
            )
        )
    for cp in cps:
        cp.start()

    pending: dict[int, tuple] = {}
    message_edges: list[tuple[Event, Event]] = []
    for op in ops:
        if op[0] == "toggle":
            i = op[1]
            cps[i].on_sample("x", not cps[i].values["x"])
        elif op[0] == "setv":
            _, i, value = op
            cps[i].on_sample("v", value)
        elif op[0] == "send":
            _, i, dst, tag = op
            msg = cps[i].on_send(dst)
            pending[tag] = (msg, (i, cps[i].seq))
        elif op[0] == "recv":
            tag = op[1]
            if tag not in pending:
                continue  # its send was shrunk away
            msg, send_event = pending.pop(tag)
            cps[msg.dst].on_receive(msg)
            message_edges.append((send_event, (msg.dst, cps[msg.dst].seq)))
        else:
            raise ValueError(f"unknown op {op!r}")
    for cp in cps:
        cp.terminate()

    per_proc = [
        [states[i][k] for k in range(len(states[i]))] for i in range(n)
    ]
    event_counts = [len(p) for p in per_proc]
    return Computation(
        n=n,
        context_types=cts,
        states=per_proc,
        records=records,
        graph=EventGraph(event_counts, message_edges),
        ops=ops,
    )


# ---------------------------------------------------------------------------
# Spec builders over the generated computations


def conjunctive_spec(n: int, want: Optional[list[bool]] = None,
                     modality: Modality = Modality.POS,
                     name: str = "random") -> PredicateSpec:
    want = want or [True] * n
    conjuncts = tuple(
        LocalPredicate(target=f"p{i}", expr=Atom("x", "=", want[i])) for i in range(n)
    )
    sp = SnapshotPredicate(letter="a", kind=SnapshotKind.CONJUNCTIVE, conjuncts=conjuncts)
    ctx = ContextualPredicate(kind=ContextualKind.SINGLE, modality=modality, letter="a")
    return PredicateSpec(name=name, alphabet=(sp,), contextual=ctx).validate()


def random_letter(rng: SplitMix64, letter: str, n: int) -> SnapshotPredicate:
    conjuncts = tuple(
        LocalPredicate(target=f"p{i}", expr=Atom("x", "=", rng.random() < 0.5))
        for i in range(n)
    )
    return SnapshotPredicate(letter=letter, kind=SnapshotKind.CONJUNCTIVE,
                             conjuncts=conjuncts)


def random_regex(rng: SplitMix64, letters: str, depth: int = 3) -> RegexNode:
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.75:
            return Letter(letters[rng.randrange(len(letters))])
        if r < 0.9:
            return Epsilon()
        return Empty()
    r = rng.random()
    if r < 0.35:
        return Union(random_regex(rng, letters, depth - 1),
                     random_regex(rng, letters, depth - 1))
    if r < 0.75:
        return Concat(random_regex(rng, letters, depth - 1),
                      random_regex(rng, letters, depth - 1))
    return Star(random_regex(rng, letters, depth - 1))


def random_ctl(rng: SplitMix64, letters: str, depth: int = 3) -> CtlNode:
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.8:
            return CtlAtom(letters[rng.randrange(len(letters))])
        return CtlTrue()
    r = rng.random()
    sub = lambda: random_ctl(rng, letters, depth - 1)
    if r < 0.2:
        return CtlAnd(sub(), sub())
    if r < 0.35:
        return CtlNot(sub())
    if r < 0.5:
        return CtlExistsNext(sub())
    if r < 0.65:
        return CtlForallNext(sub())
    if r < 0.85:
        return CtlExistsUntil(sub(), sub())
    return CtlForallUntil(sub(), sub())


# ---------------------------------------------------------------------------
# Sequence-verdict oracle replaying the delivery order


def letter_cut_pred(sp: SnapshotPredicate, cts: list[str]):
    def satisfied(states: list[LocalState]) -> bool:
        return eval_snapshot(sp, {cts[i]: states[i] for i in range(len(states))})

    return satisfied


def oracle_sequence_verdict(
    comp: Computation,
    deliveries: list[StateMsg],
    accept_paths: Callable[[set[Cut], Cut, Cut, list[list[LocalState]]], bool],
) -> bool:
    """True when some delivery prefix has a consistent newest-state cut whose
    bottom-to-top paths pass the acceptance test."""
    received = [-1] * comp.n
    for msg in deliveries:
        if msg.state.closed:
            continue
        received[msg.state.owner] = msg.state.seq
        if any(r < 0 for r in received):
            continue
        top = tuple(received)
        members = [comp.states[i][top[i]] for i in range(comp.n)]
        if not oracle_cut_consistent(members, comp.graph):
            continue
        cut_set = oracle_cut_set(comp.states, comp.graph, limits=list(top))
        if accept_paths(cut_set, (0,) * comp.n, top, comp.states):
            return True
    return False


def def_paths_acceptor(node_pred: Callable[[list[LocalState]], bool]):
    def accept(cut_set, bottom, top, per_proc):
        for path in oracle_paths(cut_set, bottom, top):
            if not any(
                node_pred([per_proc[i][c[i]] for i in range(len(c))]) for c in path
            ):
                return False
        return True

    return accept


def regex_paths_acceptor(spec: PredicateSpec, body: RegexNode, universal: bool):
    cts = list(spec.context_types())

    def accept(cut_set, bottom, top, per_proc):
        words = []
        for path in oracle_paths(cut_set, bottom, top):
            word = "".join(
                label_of(spec.alphabet,
                         {cts[i]: per_proc[i][c[i]] for i in range(len(c))})
                for c in path
            )
            words.append(word)
        if not words:
            return False
        matches = [regex_word_match(body, w) for w in words]
        return all(matches) if universal else any(matches)

    return accept


# ---------------------------------------------------------------------------
# Suites


@dataclass
class Mismatch:
    message: str
    comp: Optional[Computation] = None
    deliveries: Optional[list[StateMsg]] = None
    still_fails: Optional[Callable[[list[tuple]], bool]] = None


@dataclass
class SuiteResult:
    name: str
    instances: int
    mismatches: list[Mismatch] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.mismatches


def _feed(checker, deliveries: list[StateMsg]):
    for msg in deliveries:
        checker.ingest(msg)
    checker.finalize()
    return checker


def _conjunctive_case(case: int, seed: int, max_procs: int, max_ops: int,
                      ops: Optional[list[tuple]] = None):
    """One conjunctive-equivalence instance; ``ops`` overrides the random plan."""
    rng = substream(seed, 0xC0, case)
    n = 1 + rng.randrange(max_procs)
    spec = conjunctive_spec(n)
    conditions = extract_local_predicates(spec)
    initial_x = [rng.random() < 0.3 for _ in range(n)]
    if ops is None:
        ops = random_ops(rng, n, max_ops)
    comp = execute_ops(ops, n, conditions, {}, initial_x=initial_x)
    deliveries = comp.deliveries(substream(seed, 0xC1, case))
    checker = _feed(ConjunctiveChecker(n, mode="once"), deliveries)
    expected = oracle_min_satisfying_cut(
        comp.states, comp.graph, lambda states: all(s.truth for s in states)
    )
    got = checker.detections[0].cut if checker.detections else None
    return comp, deliveries, got, expected


def suite_conjunctive(count: int = 100, seed: int = 7,
                      max_procs: int = 4, max_ops: int = 6) -> SuiteResult:
    """Pos(conjunctive) queue detection versus exhaustive enumeration."""
    t0 = time.perf_counter()
    result = SuiteResult("conjunctive", count)
    for case in range(count):
        comp, deliveries, got, expected = _conjunctive_case(case, seed, max_procs, max_ops)
        if got != expected:
            def still_fails(ops, _case=case):
                _, _, g, e = _conjunctive_case(_case, seed, max_procs, max_ops, ops=ops)
                return g != e

            result.mismatches.append(Mismatch(
                message=f"case {case} (seed {seed}): checker {got}, oracle {expected}",
                comp=comp, deliveries=deliveries, still_fails=still_fails,
            ))
    result.elapsed = time.perf_counter() - t0
    return result


def suite_lattice_nodes(count: int = 60, seed: int = 11,
                        max_procs: int = 4, max_ops: int = 5,
                        pair_samples: int = 20) -> SuiteResult:
    """Lattice node sets versus enumeration; meet/join closure on node pairs."""
    t0 = time.perf_counter()
    result = SuiteResult("lattice-nodes", count)
    for case in range(count):
        rng = substream(seed, 0x1A, case)
        n = 1 + rng.randrange(max_procs)
        spec = conjunctive_spec(n)
        conditions = extract_local_predicates(spec)
        ops = random_ops(rng, n, max_ops)
        comp = execute_ops(ops, n, conditions, {})
        deliveries = comp.deliveries(substream(seed, 0x1B, case))
        checker = _feed(LatticeChecker(spec, mode="once"), deliveries)
        got = set(checker.lat.nodes.keys())
        expected = oracle_cut_set(comp.states, comp.graph)
        if got != expected:
            result.mismatches.append(
                f"case {case} (seed {seed}): node sets differ "
                f"(+{sorted(got - expected)[:4]} -{sorted(expected - got)[:4]})"
            )
            continue
        nodes = sorted(got)
        for _ in range(pair_samples):
            a = nodes[rng.randrange(len(nodes))]
            b = nodes[rng.randrange(len(nodes))]
            meet = tuple(min(x, y) for x, y in zip(a, b))
            join = tuple(max(x, y) for x, y in zip(a, b))
            if meet not in got or join not in got:
                result.mismatches.append(
                    f"case {case} (seed {seed}): meet/join of {a},{b} missing"
                )
                break
    result.elapsed = time.perf_counter() - t0
    return result


_PATH_CAP = 30_000


def _bounded_computation(rng: SplitMix64, n: int, max_ops: int,
                         conditions, passthrough) -> Optional[Computation]:
    """Regenerate until the full lattice's path count stays enumerable."""
    for _ in range(8):
        ops = random_ops(rng, n, max_ops)
        comp = execute_ops(ops, n, conditions, passthrough)
        cut_set = oracle_cut_set(comp.states, comp.graph)
        top = tuple(len(p) - 1 for p in comp.states)
        if top in cut_set and count_paths(cut_set, (0,) * n, top) <= _PATH_CAP:
            return comp
        max_ops = max(1, max_ops - 1)
    return None


def suite_def_conjunctive(count: int = 60, seed: int = 13,
                          max_procs: int = 3, max_ops: int = 4) -> SuiteResult:
    """Def(conjunctive) on the lattice versus path enumeration."""
    t0 = time.perf_counter()
    result = SuiteResult("def-conjunctive", count)
    for case in range(count):
        rng = substream(seed, 0xDEF, case)
        n = 1 + rng.randrange(max_procs)
        want = [rng.random() < 0.5 for _ in range(n)]
        spec = conjunctive_spec(n, want=want, modality=Modality.DEF)
        conditions = extract_local_predicates(spec)
        comp = _bounded_computation(rng, n, max_ops, conditions, {})
        if comp is None:
            continue
        deliveries = comp.deliveries(substream(seed, 0xDEF + 1, case))
        checker = _feed(LatticeChecker(spec, mode="once"), deliveries)
        acceptor = def_paths_acceptor(
            letter_cut_pred(spec.alphabet[0], comp.context_types)
        )
        expected = oracle_sequence_verdict(comp, deliveries, acceptor)
        if checker.detected != expected:
            result.mismatches.append(
                f"case {case} (seed {seed}): checker {checker.detected}, "
                f"oracle {expected}"
            )
    result.elapsed = time.perf_counter() - t0
    return result


def suite_regex(count: int = 60, seed: int = 17,
                max_procs: int = 3, max_ops: int = 4) -> SuiteResult:
    """Pos/Def regular-expression verdicts versus path-word enumeration."""
    t0 = time.perf_counter()
    result = SuiteResult("regex", count)
    for case in range(count):
        rng = substream(seed, 0x9E, case)
        n = 1 + rng.randrange(max_procs)
        letters = "ab"
        alphabet = tuple(random_letter(rng, ch, n) for ch in letters)
        body = random_regex(rng, letters)
        for modality in (Modality.POS, Modality.DEF):
            ctx = ContextualPredicate(kind=ContextualKind.REGEX,
                                      modality=modality, regex=body)
            spec = PredicateSpec(name=f"re{case}", alphabet=alphabet,
                                 contextual=ctx).validate()
            conditions = extract_local_predicates(spec)
            comp = _bounded_computation(substream(seed, 0x9F, case), n, max_ops,
                                        conditions, {})
            if comp is None:
                continue
            deliveries = comp.deliveries(substream(seed, 0xA0, case))
            checker = _feed(LatticeChecker(spec, mode="once"), deliveries)
            acceptor = regex_paths_acceptor(spec, body,
                                            universal=modality is Modality.DEF)
            expected = oracle_sequence_verdict(comp, deliveries, acceptor)
            if checker.detected != expected:
                result.mismatches.append(
                    f"case {case} ({modality.value}, seed {seed}): "
                    f"checker {checker.detected}, oracle {expected}"
                )
    result.elapsed = time.perf_counter() - t0
    return result


def suite_ctl(count: int = 40, seed: int = 19,
              max_procs: int = 3, max_ops: int = 3) -> SuiteResult:
    """CTL truth at bottom versus fixpoint iteration on the final lattice."""
    t0 = time.perf_counter()
    result = SuiteResult("ctl", count)
    for case in range(count):
        rng = substream(seed, 0xC7, case)
        n = 1 + rng.randrange(max_procs)
        letters = "ab"
        alphabet = tuple(random_letter(rng, ch, n) for ch in letters)
        formula = random_ctl(rng, letters)
        ctx = ContextualPredicate(kind=ContextualKind.CTL, modality=None, ctl=formula)
        spec = PredicateSpec(name=f"ctl{case}", alphabet=alphabet,
                             contextual=ctx).validate()
        conditions = extract_local_predicates(spec)
        ops = random_ops(rng, n, max_ops)
        comp = execute_ops(ops, n, conditions, {})
        deliveries = comp.deliveries(substream(seed, 0xC8, case))
        checker = _feed(LatticeChecker(spec, mode="once"), deliveries)

        cut_set = oracle_cut_set(comp.states, comp.graph)
        top = tuple(len(p) - 1 for p in comp.states)
        succs: dict[Cut, list[Cut]] = {c: [] for c in cut_set}
        for c in cut_set:
            for i in range(n):
                nxt = c[:i] + (c[i] + 1,) + c[i + 1:]
                if nxt in cut_set:
                    succs[c].append(nxt)
        by_letter = {sp.letter: sp for sp in alphabet}

        def atom_truth(cut: Cut, letter: str) -> bool:
            states = {comp.context_types[i]: comp.states[i][cut[i]] for i in range(n)}
            return eval_snapshot(by_letter[letter], states)

        sat = ctl_fixpoint(cut_set, succs, top, atom_truth, formula)
        expected = (0,) * n in sat
        if checker.detected != expected:
            result.mismatches.append(
                f"case {case} (seed {seed}): checker {checker.detected}, "
                f"oracle {expected}"
            )
    result.elapsed = time.perf_counter() - t0
    return result


def run_all_suites(scale: float = 1.0, seed: int = 7) -> list[SuiteResult]:
    size = lambda base: max(3, int(base * scale))
    return [
        suite_conjunctive(size(100), seed),
        suite_lattice_nodes(size(60), seed + 1),
        suite_def_conjunctive(size(60), seed + 2),
        suite_regex(size(40), seed + 3),
        suite_ctl(size(30), seed + 4),
    ]


# ---------------------------------------------------------------------------
# Counterexample shrinking (used by the validate command)


def shrink_ops(
    ops: list[tuple],
    still_failing: Callable[[list[tuple]], bool],
) -> list[tuple]:
    """Greedy op removal from the end; send removal drops its receive too."""
    current = list(ops)
    changed = True
    while changed:
        changed = False
        for idx in range(len(current) - 1, -1, -1):
            candidate = current[:idx] + current[idx + 1:]
            op = current[idx]
            if op[0] == "send":
                candidate = [
                    o for o in candidate if not (o[0] == "recv" and o[1] == op[3])
                ]
            if still_failing(candidate):
                current = candidate
                changed = True
                break
    return current
