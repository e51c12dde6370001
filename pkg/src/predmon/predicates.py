"""Predicate model: local boolean expressions, snapshot letters, contextual bodies.

A registered property names an alphabet of snapshot predicates (conjunctive
or relational), each decomposed into per-process parts, plus one contextual
predicate over that alphabet: a single letter, a regular expression, or a
CTL formula evaluated on the branching structure of the snapshot lattice.
"""

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .core import LocalState, Scalar
from .regexlang import RegexNode, compile_regex, regex_letters

SINK_LETTER = "⊥"

ATOM_RELOPS = ("<", "<=", ">", ">=", "=", "!=")
RELATIONAL_RELOPS = ("<", "<=", ">", ">=", "=")


class MissingContextError(KeyError):
    pass


class IncompleteCutError(ValueError):
    pass


class Modality(enum.Enum):
    POS = "pos"
    DEF = "def"


# ---------------------------------------------------------------------------
# Boolean expressions over one process's variables


class BoolExpr:
    pass


@dataclass(frozen=True)
class Atom(BoolExpr):
    var: str
    relop: str
    const: Scalar


@dataclass(frozen=True)
class And(BoolExpr):
    items: tuple[BoolExpr, ...]


@dataclass(frozen=True)
class Or(BoolExpr):
    items: tuple[BoolExpr, ...]


@dataclass(frozen=True)
class Not(BoolExpr):
    item: BoolExpr


def _is_number(v: Scalar) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _atom_holds(atom: Atom, value: Scalar) -> bool:
    c = atom.const
    if atom.relop in ("=", "!="):
        if _is_number(value) and _is_number(c):
            eq = float(value) == float(c)
        else:
            eq = type(value) is type(c) and value == c
        return eq if atom.relop == "=" else not eq
    # Ordering comparisons are defined on numbers and on string pairs;
    # any other combination is simply false, keeping evaluation total.
    if _is_number(value) and _is_number(c):
        pass
    elif isinstance(value, str) and isinstance(c, str):
        pass
    else:
        return False
    if atom.relop == "<":
        return value < c
    if atom.relop == "<=":
        return value <= c
    if atom.relop == ">":
        return value > c
    if atom.relop == ">=":
        return value >= c
    raise ValueError(f"unknown relop: {atom.relop!r}")


def eval_expr(expr: BoolExpr, values: Mapping[str, Scalar]) -> bool:
    if isinstance(expr, Atom):
        if expr.var not in values:
            raise MissingContextError(f"missing context variable: {expr.var!r}")
        return _atom_holds(expr, values[expr.var])
    if isinstance(expr, And):
        return all(eval_expr(e, values) for e in expr.items)
    if isinstance(expr, Or):
        return any(eval_expr(e, values) for e in expr.items)
    if isinstance(expr, Not):
        return not eval_expr(expr.item, values)
    raise TypeError(f"not a boolean expression: {expr!r}")


def expr_vars(expr: BoolExpr) -> set[str]:
    if isinstance(expr, Atom):
        return {expr.var}
    if isinstance(expr, (And, Or)):
        out: set[str] = set()
        for e in expr.items:
            out |= expr_vars(e)
        return out
    if isinstance(expr, Not):
        return expr_vars(expr.item)
    raise TypeError(f"not a boolean expression: {expr!r}")


@dataclass(frozen=True)
class LocalPredicate:
    """A boolean expression over the variables of one collecting process."""

    target: str  # context type, e.g. "leak_R1"
    expr: BoolExpr


def eval_local(pred: LocalPredicate, values: Mapping[str, Scalar]) -> bool:
    return eval_expr(pred.expr, values)


# ---------------------------------------------------------------------------
# Snapshot predicates (the alphabet)


class SnapshotKind(enum.Enum):
    CONJUNCTIVE = "conjunctive"
    RELATIONAL = "relational"


@dataclass(frozen=True)
class SnapshotPredicate:
    letter: str
    kind: SnapshotKind
    conjuncts: tuple[LocalPredicate, ...] = ()
    terms: tuple[tuple[str, str], ...] = ()  # (context type, variable)
    relop: str = ""
    bound: float = 0.0

    def context_types(self) -> tuple[str, ...]:
        if self.kind is SnapshotKind.CONJUNCTIVE:
            return tuple(c.target for c in self.conjuncts)
        return tuple(ct for ct, _ in self.terms)


def eval_snapshot(sp: SnapshotPredicate, cut: Mapping[str, LocalState]) -> bool:
    """Evaluate one alphabet letter on a cut keyed by context type."""
    for ct in sp.context_types():
        if ct not in cut:
            raise IncompleteCutError(f"incomplete cut: missing state for {ct!r}")
    if sp.kind is SnapshotKind.CONJUNCTIVE:
        return all(eval_local(c, cut[c.target].values) for c in sp.conjuncts)
    total = 0.0
    for ct, var in sp.terms:
        state = cut[ct]
        if var not in state.values:
            raise MissingContextError(f"missing context variable: {var!r} on {ct!r}")
        v = state.values[var]
        if not _is_number(v):
            raise TypeError(f"non-numeric value for {var!r} on {ct!r}: {v!r}")
        total += float(v)
    if sp.relop == "<":
        return total < sp.bound
    if sp.relop == "<=":
        return total <= sp.bound
    if sp.relop == ">":
        return total > sp.bound
    if sp.relop == ">=":
        return total >= sp.bound
    if sp.relop == "=":
        return total == sp.bound
    raise ValueError(f"unknown relational relop: {sp.relop!r}")


def label_of(alphabet: tuple[SnapshotPredicate, ...], cut: Mapping[str, LocalState]) -> str:
    """The unique letter holding on the cut, or the sink letter otherwise."""
    found = None
    for sp in alphabet:
        if eval_snapshot(sp, cut):
            if found is not None:
                return SINK_LETTER
            found = sp.letter
    return found if found is not None else SINK_LETTER


# ---------------------------------------------------------------------------
# CTL formulas over alphabet letters


class CtlNode:
    pass


@dataclass(frozen=True)
class CtlTrue(CtlNode):
    pass


@dataclass(frozen=True)
class CtlAtom(CtlNode):
    letter: str


@dataclass(frozen=True)
class CtlAnd(CtlNode):
    left: CtlNode
    right: CtlNode


@dataclass(frozen=True)
class CtlNot(CtlNode):
    item: CtlNode


@dataclass(frozen=True)
class CtlExistsNext(CtlNode):
    item: CtlNode


@dataclass(frozen=True)
class CtlForallNext(CtlNode):
    item: CtlNode


@dataclass(frozen=True)
class CtlExistsUntil(CtlNode):
    left: CtlNode
    right: CtlNode


@dataclass(frozen=True)
class CtlForallUntil(CtlNode):
    left: CtlNode
    right: CtlNode


def ctl_letters(node: CtlNode) -> set[str]:
    if isinstance(node, CtlAtom):
        return {node.letter}
    if isinstance(node, (CtlTrue,)):
        return set()
    if isinstance(node, (CtlNot, CtlExistsNext, CtlForallNext)):
        return ctl_letters(node.item)
    if isinstance(node, (CtlAnd, CtlExistsUntil, CtlForallUntil)):
        return ctl_letters(node.left) | ctl_letters(node.right)
    raise TypeError(f"not a CTL node: {node!r}")


# ---------------------------------------------------------------------------
# The registered specification


class ContextualKind(enum.Enum):
    SINGLE = "single"
    REGEX = "regular-expression"
    CTL = "ctl"


@dataclass(frozen=True)
class ContextualPredicate:
    kind: ContextualKind
    modality: Optional[Modality] = None  # None for CTL bodies
    letter: str = ""
    regex: Optional[RegexNode] = None
    ctl: Optional[CtlNode] = None

    def letters_used(self) -> set[str]:
        if self.kind is ContextualKind.SINGLE:
            return {self.letter}
        if self.kind is ContextualKind.REGEX:
            assert self.regex is not None
            return regex_letters(self.regex)
        assert self.ctl is not None
        return ctl_letters(self.ctl)


@dataclass(frozen=True)
class PredicateSpec:
    name: str
    alphabet: tuple[SnapshotPredicate, ...]
    contextual: ContextualPredicate

    def validate(self) -> "PredicateSpec":
        letters = [sp.letter for sp in self.alphabet]
        seen: set[str] = set()
        for letter in letters:
            if len(letter) != 1 or letter == SINK_LETTER:
                raise ValueError(f"invalid letter: {letter!r}")
            if letter in seen:
                raise ValueError(f"duplicate-symbol: letter {letter!r} declared twice")
            seen.add(letter)
        for sp in self.alphabet:
            cts = sp.context_types()
            if sp.kind is SnapshotKind.CONJUNCTIVE and len(set(cts)) != len(cts):
                raise ValueError(
                    f"letter {sp.letter!r} has several conjuncts for one process"
                )
            if sp.kind is SnapshotKind.RELATIONAL and sp.relop not in RELATIONAL_RELOPS:
                raise ValueError(f"unsupported relational relop: {sp.relop!r}")
        used = self.contextual.letters_used()
        unknown = used - seen
        if unknown:
            raise ValueError(f"unknown-symbol: {sorted(unknown)!r} not declared")
        if self.contextual.kind is not ContextualKind.CTL and self.contextual.modality is None:
            raise ValueError("missing modality")
        if not self.context_types():
            raise ValueError("specification involves no collecting process")
        return self

    def context_types(self) -> tuple[str, ...]:
        """Participating context types, sorted; index order defines process ids."""
        out: set[str] = set()
        for sp in self.alphabet:
            out |= set(sp.context_types())
        return tuple(sorted(out))

    def process_index(self) -> dict[str, int]:
        return {ct: i for i, ct in enumerate(self.context_types())}


def extract_local_predicates(spec: PredicateSpec) -> dict[int, list[LocalPredicate]]:
    """Route every conjunct to the process id that must evaluate it."""
    pidx = spec.process_index()
    out: dict[int, list[LocalPredicate]] = {i: [] for i in pidx.values()}
    for sp in spec.alphabet:
        if sp.kind is SnapshotKind.CONJUNCTIVE:
            for conj in sp.conjuncts:
                out[pidx[conj.target]].append(conj)
    return out


def passthrough_vars(spec: PredicateSpec) -> dict[int, list[str]]:
    """Variables that relational letters stream unfiltered, per process id."""
    pidx = spec.process_index()
    out: dict[int, list[str]] = {i: [] for i in pidx.values()}
    for sp in spec.alphabet:
        if sp.kind is SnapshotKind.RELATIONAL:
            for ct, var in sp.terms:
                pid = pidx[ct]
                if var not in out[pid]:
                    out[pid].append(var)
    return out


def compile_contextual_nfa(spec: PredicateSpec):
    """NFA for a regular-expression contextual body."""
    assert spec.contextual.kind is ContextualKind.REGEX
    assert spec.contextual.regex is not None
    return compile_regex(spec.contextual.regex)
