"""Regular expressions over single-character snapshot letters.

Grammar: union ``+``, concatenation (juxtaposition or ``·``), Kleene star
``*``, parentheses, the empty language ``∅`` and the empty word ``ε``.
Compilation goes through a Thompson automaton whose epsilon transitions are
then eliminated, yielding the epsilon-free NFA consumed by the detectors.
"""

from dataclasses import dataclass


class RegexNode:
    pass


@dataclass(frozen=True)
class Empty(RegexNode):
    pass


@dataclass(frozen=True)
class Epsilon(RegexNode):
    pass


@dataclass(frozen=True)
class Letter(RegexNode):
    ch: str


@dataclass(frozen=True)
class Union(RegexNode):
    left: RegexNode
    right: RegexNode


@dataclass(frozen=True)
class Concat(RegexNode):
    left: RegexNode
    right: RegexNode


@dataclass(frozen=True)
class Star(RegexNode):
    body: RegexNode


EMPTY_SYMBOL = "∅"
EPSILON_SYMBOL = "ε"
CONCAT_SYMBOL = "·"
_RESERVED = set("+*()") | {EMPTY_SYMBOL, EPSILON_SYMBOL, CONCAT_SYMBOL}


class RegexSyntaxError(ValueError):
    pass


def parse_regex(text: str) -> RegexNode:
    """Recursive-descent parse of the textual regex form."""
    tokens = [c for c in text if not c.isspace()]
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        c = tokens[pos]
        pos += 1
        return c

    def parse_union():
        node = parse_concat()
        while peek() == "+":
            take()
            node = Union(node, parse_concat())
        return node

    def parse_concat():
        node = parse_postfix()
        while True:
            c = peek()
            if c == CONCAT_SYMBOL:
                take()
                node = Concat(node, parse_postfix())
            elif c is not None and c not in ("+", ")"):
                node = Concat(node, parse_postfix())
            else:
                return node

    def parse_postfix():
        node = parse_atom()
        while peek() == "*":
            take()
            node = Star(node)
        return node

    def parse_atom():
        c = peek()
        if c is None:
            raise RegexSyntaxError("unexpected end of regular expression")
        if c == "(":
            take()
            node = parse_union()
            if peek() != ")":
                raise RegexSyntaxError("missing closing parenthesis")
            take()
            return node
        if c == EMPTY_SYMBOL:
            take()
            return Empty()
        if c == EPSILON_SYMBOL:
            take()
            return Epsilon()
        if c in _RESERVED:
            raise RegexSyntaxError(f"unexpected {c!r} in regular expression")
        return Letter(take())

    if not tokens:
        return Epsilon()
    node = parse_union()
    if pos != len(tokens):
        raise RegexSyntaxError(f"trailing input at position {pos}: {tokens[pos:]!r}")
    return node


def regex_letters(node: RegexNode) -> set[str]:
    if isinstance(node, Letter):
        return {node.ch}
    if isinstance(node, (Union, Concat)):
        return regex_letters(node.left) | regex_letters(node.right)
    if isinstance(node, Star):
        return regex_letters(node.body)
    return set()


def format_regex(node: RegexNode) -> str:
    """Textual form that parse_regex maps back to an equivalent tree."""
    if isinstance(node, Empty):
        return EMPTY_SYMBOL
    if isinstance(node, Epsilon):
        return EPSILON_SYMBOL
    if isinstance(node, Letter):
        return node.ch
    if isinstance(node, Union):
        return f"({format_regex(node.left)}+{format_regex(node.right)})"
    if isinstance(node, Concat):
        return f"({format_regex(node.left)}{CONCAT_SYMBOL}{format_regex(node.right)})"
    if isinstance(node, Star):
        return f"({format_regex(node.body)})*"
    raise TypeError(f"not a regex node: {node!r}")


@dataclass(frozen=True)
class Nfa:
    """Epsilon-free automaton with a single initial state."""

    states: frozenset[int]
    initial: int
    accepting: frozenset[int]
    transitions: dict[tuple[int, str], frozenset[int]]
    alphabet: frozenset[str]

    def step(self, current: frozenset[int], letter: str) -> frozenset[int]:
        out: set[int] = set()
        for q in current:
            out |= self.transitions.get((q, letter), frozenset())
        return frozenset(out)

    def accepts(self, word: str) -> bool:
        current = frozenset([self.initial])
        for letter in word:
            current = self.step(current, letter)
            if not current:
                return False
        return bool(current & self.accepting)


def _thompson(node: RegexNode, fresh: list[int], eps: dict[int, set[int]],
              moves: dict[tuple[int, str], set[int]]) -> tuple[int, int]:
    """Returns (entry, exit) fragment states; mutates the transition tables."""

    def new_state() -> int:
        fresh[0] += 1
        return fresh[0] - 1

    a, b = new_state(), new_state()
    if isinstance(node, Empty):
        pass
    elif isinstance(node, Epsilon):
        eps.setdefault(a, set()).add(b)
    elif isinstance(node, Letter):
        moves.setdefault((a, node.ch), set()).add(b)
    elif isinstance(node, Union):
        for sub in (node.left, node.right):
            s, t = _thompson(sub, fresh, eps, moves)
            eps.setdefault(a, set()).add(s)
            eps.setdefault(t, set()).add(b)
    elif isinstance(node, Concat):
        s1, t1 = _thompson(node.left, fresh, eps, moves)
        s2, t2 = _thompson(node.right, fresh, eps, moves)
        eps.setdefault(a, set()).add(s1)
        eps.setdefault(t1, set()).add(s2)
        eps.setdefault(t2, set()).add(b)
    elif isinstance(node, Star):
        s, t = _thompson(node.body, fresh, eps, moves)
        eps.setdefault(a, set()).update((s, b))
        eps.setdefault(t, set()).update((s, b))
    else:
        raise TypeError(f"not a regex node: {node!r}")
    return a, b


def compile_regex(node: RegexNode) -> Nfa:
    """Thompson construction followed by epsilon elimination and pruning."""
    fresh = [0]
    eps: dict[int, set[int]] = {}
    moves: dict[tuple[int, str], set[int]] = {}
    start, final = _thompson(node, fresh, eps, moves)

    closures: dict[int, frozenset[int]] = {}

    def closure(q: int) -> frozenset[int]:
        if q in closures:
            return closures[q]
        seen = {q}
        stack = [q]
        while stack:
            cur = stack.pop()
            for nxt in eps.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        closures[q] = frozenset(seen)
        return closures[q]

    alphabet = frozenset(ch for (_, ch) in moves)
    transitions: dict[tuple[int, str], set[int]] = {}
    for q in range(fresh[0]):
        for ch in alphabet:
            targets: set[int] = set()
            for mid in closure(q):
                for dst in moves.get((mid, ch), ()):
                    targets |= closure(dst)
            if targets:
                transitions[(q, ch)] = targets

    accepting = {q for q in range(fresh[0]) if final in closure(q)}

    # Keep only states reachable from the initial state.
    reachable = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for ch in alphabet:
            for dst in transitions.get((cur, ch), ()):
                if dst not in reachable:
                    reachable.add(dst)
                    stack.append(dst)

    pruned = {
        (q, ch): frozenset(t & reachable)
        for (q, ch), t in transitions.items()
        if q in reachable and t & reachable
    }
    return Nfa(
        states=frozenset(reachable),
        initial=start,
        accepting=frozenset(accepting & reachable),
        transitions=pruned,
        alphabet=alphabet,
    )
