"""Incremental lattice of consistent global snapshots and its detectors.

Nodes are cut vectors of per-process state sequence numbers; an edge advances
exactly one process by one state.  A cut is consistent exactly when the
componentwise maximum of its members' begin clocks equals the cut itself,
which depends only on begin clocks and therefore never changes as closing
records arrive.  Detector annotations are pure functions of a node's label
and its predecessors' annotations, so nodes are annotated once, in creation
order.
"""

from dataclasses import dataclass
from typing import Callable, Optional

from .core import LocalState
from .predicates import (
    ContextualKind,
    CtlAnd,
    CtlAtom,
    CtlExistsNext,
    CtlExistsUntil,
    CtlForallNext,
    CtlForallUntil,
    CtlNode,
    CtlNot,
    CtlTrue,
    Modality,
    PredicateSpec,
    SnapshotPredicate,
    eval_snapshot,
    label_of,
)
from .regexlang import Nfa
from .stdchecker import Detection, Outcome
from .streams import ReorderBuffer, StateMsg

Cut = tuple[int, ...]


class NotFinalizedError(RuntimeError):
    pass


class PruneRejectedError(RuntimeError):
    pass


class LatticeNode:
    __slots__ = ("cut", "level", "label", "preds", "succs", "ann")

    def __init__(self, cut: Cut, label: str):
        self.cut = cut
        self.level = sum(cut)
        self.label = label
        self.preds: list["LatticeNode"] = []
        self.succs: list["LatticeNode"] = []
        self.ann: object = None

    def __repr__(self):
        return f"LatticeNode({self.cut}, label={self.label!r})"


class Lattice:
    """Grows the set of consistent cuts as state records arrive in FIFO order."""

    def __init__(self, n: int, labeler: Callable[[list[LocalState]], str]):
        self.n = n
        self.labeler = labeler
        self.states: list[dict[int, LocalState]] = [{} for _ in range(n)]
        self.newest: list[int] = [-1] * n
        self.final_seq: list[Optional[int]] = [None] * n
        self.nodes: dict[Cut, LatticeNode] = {}
        self.bottom: Optional[LatticeNode] = None
        self.frontier: set[Cut] = set()
        self.nodes_created = 0
        self.nodes_pruned = 0

    # -- state bookkeeping ---------------------------------------------------

    def state_at(self, pid: int, seq: int) -> LocalState:
        return self.states[pid][seq]

    def cut_states(self, cut: Cut) -> list[LocalState]:
        return [self.states[i][cut[i]] for i in range(self.n)]

    def update_state(self, state: LocalState) -> None:
        """Replace the stored open state by its closed version; no new cuts."""
        if state.seq not in self.states[state.owner]:
            raise ValueError(
                f"closing record for unknown state ({state.owner},{state.seq})"
            )
        self.states[state.owner][state.seq] = state

    def mark_final(self, pid: int, seq: int) -> None:
        self.final_seq[pid] = seq

    def is_finalized(self) -> bool:
        return all(f is not None for f in self.final_seq)

    def retained_states(self) -> int:
        return sum(len(d) for d in self.states)

    # -- expansion -------------------------------------------------------------

    def add_state(self, state: LocalState) -> list[LatticeNode]:
        """Create every consistent cut that includes the newly received state.

        Returns the new nodes in level order; their predecessors always exist
        by the time they are created.
        """
        p, k = state.owner, state.seq
        if k != self.newest[p] + 1:
            raise ValueError(
                f"state ({p},{k}) arrived out of order, expected seq {self.newest[p] + 1}"
            )
        self.states[p][k] = state
        self.newest[p] = k
        if any(m < 0 for m in self.newest):
            return []

        ranges: list[tuple[int, int, int]] = []
        for j in range(self.n):
            if j == p:
                continue
            lo = state.begin[j]
            hi = self.newest[j]
            while hi >= lo and self.states[j][hi].begin[p] > k:
                hi -= 1
            if hi < lo:
                return []
            ranges.append((j, lo, hi))

        cut = [0] * self.n
        cut[p] = k
        chosen: list[tuple[int, int]] = [(p, k)]
        found: list[Cut] = []

        def recurse(idx: int) -> None:
            if idx == len(ranges):
                found.append(tuple(cut))
                return
            j, lo, hi = ranges[idx]
            for m in range(lo, hi + 1):
                t = self.states[j][m]
                ok = True
                for i, ci in chosen:
                    if t.begin[i] > ci or self.states[i][ci].begin[j] > m:
                        ok = False
                        break
                if ok:
                    cut[j] = m
                    chosen.append((j, m))
                    recurse(idx + 1)
                    chosen.pop()

        recurse(0)
        found.sort(key=lambda c: (sum(c), c))
        created: list[LatticeNode] = []
        for c in found:
            if c in self.nodes:
                raise ValueError(f"cut {c} created twice (duplicate delivery?)")
            node = LatticeNode(c, self.labeler(self.cut_states(c)))
            self.nodes[c] = node
            self.nodes_created += 1
            for i in range(self.n):
                if c[i] > 0:
                    pc = c[:i] + (c[i] - 1,) + c[i + 1:]
                    pred = self.nodes.get(pc)
                    if pred is not None:
                        node.preds.append(pred)
                        pred.succs.append(node)
                        self.frontier.discard(pc)
            self.frontier.add(c)
            if node.level == 0:
                self.bottom = node
            created.append(node)
        return created

    # -- frontier ---------------------------------------------------------------

    def complete_cut(self) -> Optional[Cut]:
        """The cut of every process's newest state, when it is consistent."""
        if any(m < 0 for m in self.newest):
            return None
        v = tuple(self.newest)
        return v if v in self.nodes else None

    # -- maintenance --------------------------------------------------------------

    def prune_below(self, cut: Cut, veto: bool = False) -> int:
        """Drop nodes strictly below ``cut`` whose every path to the frontier
        passes through ``cut``.  Rejected when a detector needs the whole
        lattice or when a dropped node could still gain a successor."""
        if veto:
            raise PruneRejectedError("active detector needs the whole lattice")
        if cut not in self.nodes:
            raise ValueError(f"prune target {cut} is not a node")
        below = [
            n for c, n in self.nodes.items()
            if c != cut and all(c[i] <= cut[i] for i in range(self.n))
        ]
        if not below:
            return 0

        # A node is kept when some path reaches the frontier without touching
        # the prune cut.  Successors sit one level up, so a descending-level
        # sweep sees them first.
        escapes: set[Cut] = set()
        for node in sorted(self.nodes.values(), key=lambda n: -n.level):
            if node.cut == cut:
                continue
            if not node.succs:
                escapes.add(node.cut)
                continue
            if any(s.cut != cut and s.cut in escapes for s in node.succs):
                escapes.add(node.cut)

        doomed = [n for n in below if n.cut not in escapes]
        for node in doomed:
            for i in range(self.n):
                nxt = node.cut[i] + 1
                if nxt > self.newest[i] and self.final_seq[i] is None:
                    raise PruneRejectedError(
                        f"node {node.cut} may still gain a successor on process {i}"
                    )
        doomed_cuts = {n.cut for n in doomed}
        for node in doomed:
            del self.nodes[node.cut]
            self.nodes_pruned += 1
            for succ in node.succs:
                if succ.cut not in doomed_cuts:
                    succ.preds.remove(node)
            for pred in node.preds:
                if pred.cut not in doomed_cuts:
                    pred.succs.remove(node)
        if self.bottom is not None and self.bottom.cut in doomed_cuts:
            self.bottom = None
        return len(doomed)

    def dump(self) -> str:
        """Line dump of the finalized lattice, level order then cut order."""
        if not self.is_finalized():
            raise NotFinalizedError("lattice dump requires a finalized computation")
        lines = []
        ordered = sorted(self.nodes.values(), key=lambda n: (n.level, n.cut))
        for node in ordered:
            c = ",".join(map(str, node.cut))
            lines.append(f"NODE {c} level={node.level} label={node.label}")
        for node in ordered:
            src = ",".join(map(str, node.cut))
            for succ in sorted(node.succs, key=lambda n: n.cut):
                dst = ",".join(map(str, succ.cut))
                lines.append(f"EDGE {src} -> {dst}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CTL evaluation on the finalized lattice


def eval_ctl(
    lat: Lattice,
    formula: CtlNode,
    atom_holds: Callable[[LatticeNode, str], bool],
) -> bool:
    """Truth of the formula at the bottom snapshot.

    The finalized lattice is read as a transition system whose single maximal
    node carries a self-loop, the usual embedding of terminated computations
    into infinite-path semantics.
    """
    if not lat.is_finalized():
        raise NotFinalizedError("CTL evaluation requires a finalized computation")
    if lat.bottom is None:
        raise ValueError("lattice has no bottom node")
    top_cut = tuple(lat.newest)
    desc = sorted(lat.nodes.values(), key=lambda n: (-n.level, n.cut))
    all_cuts = set(lat.nodes.keys())
    memo: dict[CtlNode, set[Cut]] = {}

    def successors(node: LatticeNode) -> list[LatticeNode]:
        return [node] if node.cut == top_cut else node.succs

    def sat(f: CtlNode) -> set[Cut]:
        if f in memo:
            return memo[f]
        if isinstance(f, CtlTrue):
            out = set(all_cuts)
        elif isinstance(f, CtlAtom):
            out = {n.cut for n in lat.nodes.values() if atom_holds(n, f.letter)}
        elif isinstance(f, CtlAnd):
            out = sat(f.left) & sat(f.right)
        elif isinstance(f, CtlNot):
            out = all_cuts - sat(f.item)
        elif isinstance(f, CtlExistsNext):
            inner = sat(f.item)
            out = {
                n.cut for n in lat.nodes.values()
                if any(s.cut in inner for s in successors(n))
            }
        elif isinstance(f, CtlForallNext):
            inner = sat(f.item)
            out = {
                n.cut for n in lat.nodes.values()
                if all(s.cut in inner for s in successors(n))
            }
        elif isinstance(f, (CtlExistsUntil, CtlForallUntil)):
            holds = sat(f.left)
            target = sat(f.right)
            out = set()
            exists = isinstance(f, CtlExistsUntil)
            for node in desc:
                c = node.cut
                if c in target:
                    out.add(c)
                    continue
                if c not in holds or c == top_cut:
                    # At the top the only run stutters forever, so the until
                    # reduces to its right operand there.
                    continue
                if exists:
                    if any(s.cut in out for s in node.succs):
                        out.add(c)
                else:
                    if node.succs and all(s.cut in out for s in node.succs):
                        out.add(c)
        else:
            raise TypeError(f"not a CTL node: {f!r}")
        memo[f] = out
        return out

    return lat.bottom.cut in sat(formula)


# ---------------------------------------------------------------------------
# Detectors over the lattice


class PosLetterDetector:
    """Pos over one snapshot letter: fires on the first satisfying node."""

    needs_whole_lattice = False

    def __init__(self, sp: SnapshotPredicate, cut_mapper):
        self.sp = sp
        self.cut_mapper = cut_mapper

    def annotate(self, lat: Lattice, nodes: list[LatticeNode]) -> list[Detection]:
        out = []
        for node in nodes:
            if eval_snapshot(self.sp, self.cut_mapper(lat.cut_states(node.cut))):
                out.append(Detection(cut=node.cut, states=tuple(lat.cut_states(node.cut))))
        return out

    def at_complete_frontier(self, lat: Lattice, top: LatticeNode) -> list[Detection]:
        return []

    def at_finalized(self, lat: Lattice) -> list[Detection]:
        return []


class DefLetterDetector:
    """Def over one snapshot letter: every observed path must cross a
    satisfying node; decided whenever the newest states form one cut."""

    needs_whole_lattice = False

    def __init__(self, sp: SnapshotPredicate, cut_mapper):
        self.sp = sp
        self.cut_mapper = cut_mapper

    def annotate(self, lat: Lattice, nodes: list[LatticeNode]) -> list[Detection]:
        for node in nodes:
            holds = eval_snapshot(self.sp, self.cut_mapper(lat.cut_states(node.cut)))
            if holds:
                node.ann = True
            elif node.level == 0:
                node.ann = False
            else:
                node.ann = all(p.ann for p in node.preds)
        return []

    def at_complete_frontier(self, lat: Lattice, top: LatticeNode) -> list[Detection]:
        if top.ann:
            return [Detection(cut=top.cut, states=tuple(lat.cut_states(top.cut)))]
        return []

    def at_finalized(self, lat: Lattice) -> list[Detection]:
        return []


class RegexDetector:
    """Pos/Def of a regular expression over path words.

    Every node stores the set of deterministic powerset states reached by the
    words of the paths ending there, one entry per path equivalence class,
    each with a backpointer for witness reconstruction.  Verdicts are issued
    only at complete frontiers, where the word of a path is not a strict
    prefix of every continuation.
    """

    needs_whole_lattice = False

    def __init__(self, nfa: Nfa, modality: Modality):
        self.nfa = nfa
        self.modality = modality
        self._step_cache: dict[tuple[frozenset, str], frozenset] = {}

    def _step(self, dfa_state: frozenset, letter: str) -> frozenset:
        key = (dfa_state, letter)
        hit = self._step_cache.get(key)
        if hit is None:
            hit = self.nfa.step(dfa_state, letter)
            self._step_cache[key] = hit
        return hit

    def annotate(self, lat: Lattice, nodes: list[LatticeNode]) -> list[Detection]:
        for node in nodes:
            ann: dict[frozenset, Optional[tuple[Cut, frozenset]]] = {}
            if node.level == 0:
                start = frozenset([self.nfa.initial])
                ann[self._step(start, node.label)] = None
            else:
                for pred in node.preds:
                    for s in pred.ann:
                        s2 = self._step(s, node.label)
                        if s2 not in ann:
                            ann[s2] = (pred.cut, s)
            node.ann = ann
        return []

    def _accepting(self, dfa_state: frozenset) -> bool:
        return bool(dfa_state & self.nfa.accepting)

    def _witness_word(self, lat: Lattice, top: LatticeNode) -> str:
        chosen = next((s for s in top.ann if self._accepting(s)), None)
        if chosen is None:
            return ""
        letters = []
        node, s = top, chosen
        while True:
            letters.append(node.label)
            back = node.ann.get(s)
            if back is None:
                break
            pred_cut, prev = back
            pred = lat.nodes.get(pred_cut)
            if pred is None:  # pruned away; give up on the word
                return ""
            node, s = pred, prev
        return "".join(reversed(letters))

    def at_complete_frontier(self, lat: Lattice, top: LatticeNode) -> list[Detection]:
        ann: dict = top.ann
        if self.modality is Modality.POS:
            if any(self._accepting(s) for s in ann):
                word = self._witness_word(lat, top)
                return [Detection(cut=top.cut, states=tuple(lat.cut_states(top.cut)),
                                  detail=word)]
        else:
            if ann and all(self._accepting(s) for s in ann):
                return [Detection(cut=top.cut, states=tuple(lat.cut_states(top.cut)))]
        return []

    def at_finalized(self, lat: Lattice) -> list[Detection]:
        return []


class CtlDetector:
    """CTL formula decided on the branching structure once the run finalizes."""

    needs_whole_lattice = True

    def __init__(self, formula: CtlNode, atom_holds):
        self.formula = formula
        self.atom_holds = atom_holds

    def annotate(self, lat: Lattice, nodes: list[LatticeNode]) -> list[Detection]:
        return []

    def at_complete_frontier(self, lat: Lattice, top: LatticeNode) -> list[Detection]:
        return []

    def at_finalized(self, lat: Lattice) -> list[Detection]:
        if eval_ctl(lat, self.formula, self.atom_holds):
            assert lat.bottom is not None
            return [Detection(cut=lat.bottom.cut, states=tuple(lat.cut_states(lat.bottom.cut)),
                              detail="ctl")]
        return []


# ---------------------------------------------------------------------------
# The checker binding a spec to a lattice


class LatticeChecker:
    """Maintains the lattice for one registered predicate and runs its detector."""

    def __init__(self, spec: PredicateSpec, mode: str = "once"):
        if mode not in ("once", "continuous"):
            raise ValueError(f"unknown mode {mode!r}")
        self.spec = spec
        self.mode = mode
        self.cts = spec.context_types()
        self.n = len(self.cts)
        self.reorder = ReorderBuffer(self.n)
        self.lat = Lattice(self.n, labeler=self._label)
        self.detector = self._make_detector()
        self.detected = False
        self.detections: list[Detection] = []
        self.records_ingested = 0
        self.finalized = False

    # -- spec plumbing -------------------------------------------------------

    def _cut_by_ct(self, states: list[LocalState]) -> dict[str, LocalState]:
        return {ct: states[i] for i, ct in enumerate(self.cts)}

    def _label(self, states: list[LocalState]) -> str:
        return label_of(self.spec.alphabet, self._cut_by_ct(states))

    def _letter_pred(self, letter: str) -> SnapshotPredicate:
        for sp in self.spec.alphabet:
            if sp.letter == letter:
                return sp
        raise KeyError(f"unknown-symbol: letter {letter!r}")

    def _make_detector(self):
        ctx = self.spec.contextual
        if ctx.kind is ContextualKind.SINGLE:
            sp = self._letter_pred(ctx.letter)
            if ctx.modality is Modality.POS:
                return PosLetterDetector(sp, self._cut_by_ct)
            return DefLetterDetector(sp, self._cut_by_ct)
        if ctx.kind is ContextualKind.REGEX:
            from .predicates import compile_contextual_nfa

            return RegexDetector(compile_contextual_nfa(self.spec), ctx.modality)
        assert ctx.ctl is not None

        def atom_holds(node: LatticeNode, letter: str) -> bool:
            sp = self._letter_pred(letter)
            return eval_snapshot(sp, self._cut_by_ct(self.lat.cut_states(node.cut)))

        return CtlDetector(ctx.ctl, atom_holds)

    # -- ingestion -------------------------------------------------------------

    def ingest(self, msg: StateMsg) -> Outcome:
        outcome = Outcome.NO_CHANGE
        for delivered in self.reorder.push(msg):
            if self._consume(delivered) is Outcome.DETECTED:
                outcome = Outcome.DETECTED
        return outcome

    def _consume(self, msg: StateMsg) -> Outcome:
        self.records_ingested += 1
        state = msg.state
        hits: list[Detection] = []
        if state.closed:
            self.lat.update_state(state)
            if msg.final:
                self.lat.mark_final(state.owner, state.seq)
                if self.lat.is_finalized():
                    self.finalized = True
                    if self._armed():
                        hits += self.detector.at_finalized(self.lat)
        else:
            new_nodes = self.lat.add_state(state)
            if new_nodes and self._armed():
                hits += self.detector.annotate(self.lat, new_nodes)
                top_cut = self.lat.complete_cut()
                if top_cut is not None:
                    hits += self.detector.at_complete_frontier(
                        self.lat, self.lat.nodes[top_cut]
                    )
            elif new_nodes:
                self.detector.annotate(self.lat, new_nodes)
        if not hits:
            return Outcome.NO_CHANGE
        if self.mode == "once":
            hits = hits[:1]
        self.detections.extend(hits)
        self.detected = True
        return Outcome.DETECTED

    def _armed(self) -> bool:
        return not (self.detected and self.mode == "once")

    def prune_below(self, cut: Cut) -> int:
        return self.lat.prune_below(cut, veto=self.detector.needs_whole_lattice)

    def finalize(self) -> None:
        self.reorder.assert_drained()
