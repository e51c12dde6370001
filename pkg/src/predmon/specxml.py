"""XML wire format for registered specifications and provider configurations.

Layout of a specification document::

    <specification name="phi1" modality="pos">
      <snapshotPredicates>
        <snapshotPredicate letter="a" type="conjunctive">
          <localPredicate contextType="leak_R1">
            <atom var="leak" relop="=" const="true"/>
          </localPredicate>
          ...
        </snapshotPredicate>
        <snapshotPredicate letter="r" type="relational" relop="&gt;" bound="72">
          <term contextType="temperature_R1" var="temp"/>
          ...
        </snapshotPredicate>
      </snapshotPredicates>
      <contextualPredicate type="single">a</contextualPredicate>
    </specification>

The contextual body is text for ``single`` (one letter) and
``regular-expression`` bodies, and an element tree
(true|atom|and|not|exists-next|forall-next|exists-until|forall-until)
for ``ctl`` bodies, in which case the modality attribute is omitted.
"""

import re
import xml.etree.ElementTree as ET
from typing import Optional

from .core import Scalar
from .predicates import (
    And,
    Atom,
    BoolExpr,
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
    Not,
    Or,
    PredicateSpec,
    SnapshotKind,
    SnapshotPredicate,
    ATOM_RELOPS,
)
from .regexlang import RegexSyntaxError, format_regex, parse_regex

_INT_RE = re.compile(r"[+-]?\d+$")
_FLOAT_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


class SpecError(ValueError):
    """Schema violation, annotated with the offending element path."""

    def __init__(self, reason: str, message: str, path: str = "", line: Optional[int] = None):
        self.reason = reason
        self.path = path
        self.line = line
        where = f" at {path}" if path else ""
        where += f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}: {message}{where}")


def parse_scalar(text: str) -> Scalar:
    if text == "true":
        return True
    if text == "false":
        return False
    if _INT_RE.match(text):
        return int(text)
    if _FLOAT_RE.match(text):
        return float(text)
    return text


def format_scalar(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_expr(elem: ET.Element, path: str) -> BoolExpr:
    tag = elem.tag
    here = f"{path}/{tag}"
    if tag == "atom":
        var = elem.get("var")
        relop = elem.get("relop")
        const = elem.get("const")
        if var is None or relop is None or const is None:
            raise SpecError("parse-error", "atom needs var, relop and const", here)
        if relop not in ATOM_RELOPS:
            raise SpecError("parse-error", f"unknown relop {relop!r}", here)
        return Atom(var=var, relop=relop, const=parse_scalar(const))
    children = list(elem)
    if tag == "and":
        if len(children) < 2:
            raise SpecError("parse-error", "and needs at least two children", here)
        return And(tuple(_parse_expr(c, here) for c in children))
    if tag == "or":
        if len(children) < 2:
            raise SpecError("parse-error", "or needs at least two children", here)
        return Or(tuple(_parse_expr(c, here) for c in children))
    if tag == "not":
        if len(children) != 1:
            raise SpecError("parse-error", "not needs exactly one child", here)
        return Not(_parse_expr(children[0], here))
    raise SpecError("parse-error", f"unknown expression element {tag!r}", here)


def _parse_snapshot(elem: ET.Element, path: str) -> SnapshotPredicate:
    letter = elem.get("letter")
    kind = elem.get("type")
    if letter is None:
        raise SpecError("parse-error", "snapshotPredicate needs a letter", path)
    here = f"{path}[letter={letter}]"
    if kind == "conjunctive":
        conjuncts = []
        for child in elem:
            if child.tag != "localPredicate":
                raise SpecError("parse-error", f"unexpected element {child.tag!r}", here)
            ct = child.get("contextType")
            if ct is None:
                raise SpecError("parse-error", "localPredicate needs contextType", here)
            exprs = list(child)
            if len(exprs) != 1:
                raise SpecError("parse-error", "localPredicate needs one expression", here)
            conjuncts.append(LocalPredicate(target=ct, expr=_parse_expr(exprs[0], here)))
        if not conjuncts:
            raise SpecError("parse-error", "conjunctive letter without conjuncts", here)
        return SnapshotPredicate(
            letter=letter, kind=SnapshotKind.CONJUNCTIVE, conjuncts=tuple(conjuncts)
        )
    if kind == "relational":
        relop = elem.get("relop")
        bound = elem.get("bound")
        if relop is None or bound is None:
            raise SpecError("parse-error", "relational letter needs relop and bound", here)
        terms = []
        for child in elem:
            if child.tag != "term":
                raise SpecError("parse-error", f"unexpected element {child.tag!r}", here)
            ct, var = child.get("contextType"), child.get("var")
            if ct is None or var is None:
                raise SpecError("parse-error", "term needs contextType and var", here)
            terms.append((ct, var))
        if not terms:
            raise SpecError("parse-error", "relational letter without terms", here)
        try:
            bound_value = float(bound)
        except ValueError:
            raise SpecError("parse-error", f"bound {bound!r} is not a number", here) from None
        return SnapshotPredicate(
            letter=letter,
            kind=SnapshotKind.RELATIONAL,
            terms=tuple(terms),
            relop=relop,
            bound=bound_value,
        )
    raise SpecError(
        "unsupported-predicate-type", f"snapshot predicate type {kind!r}", here
    )


def _parse_ctl(elem: ET.Element, path: str) -> CtlNode:
    tag = elem.tag
    here = f"{path}/{tag}"
    children = list(elem)

    def only(n: int) -> list[ET.Element]:
        if len(children) != n:
            raise SpecError("parse-error", f"{tag} needs {n} children", here)
        return children

    if tag == "true":
        only(0)
        return CtlTrue()
    if tag == "atom":
        letter = elem.get("letter")
        if letter is None:
            raise SpecError("parse-error", "atom needs a letter", here)
        return CtlAtom(letter)
    if tag == "and":
        a, b = only(2)
        return CtlAnd(_parse_ctl(a, here), _parse_ctl(b, here))
    if tag == "not":
        (a,) = only(1)
        return CtlNot(_parse_ctl(a, here))
    if tag == "exists-next":
        (a,) = only(1)
        return CtlExistsNext(_parse_ctl(a, here))
    if tag == "forall-next":
        (a,) = only(1)
        return CtlForallNext(_parse_ctl(a, here))
    if tag == "exists-until":
        a, b = only(2)
        return CtlExistsUntil(_parse_ctl(a, here), _parse_ctl(b, here))
    if tag == "forall-until":
        a, b = only(2)
        return CtlForallUntil(_parse_ctl(a, here), _parse_ctl(b, here))
    raise SpecError("parse-error", f"unknown CTL element {tag!r}", here)


def parse_specification(document: str) -> PredicateSpec:
    """Parse and validate a specification document."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line = exc.position[0] if exc.position else None
        raise SpecError("parse-error", f"malformed XML: {exc.msg}", line=line) from None
    if root.tag != "specification":
        raise SpecError("parse-error", f"root element is {root.tag!r}", root.tag)
    name = root.get("name")
    if not name:
        raise SpecError("parse-error", "specification needs a name", "specification")

    modality: Optional[Modality] = None
    raw_modality = root.get("modality")
    if raw_modality is not None:
        try:
            modality = Modality(raw_modality)
        except ValueError:
            raise SpecError(
                "parse-error", f"unknown modality {raw_modality!r}", "specification"
            ) from None

    snaps_elem = root.find("snapshotPredicates")
    if snaps_elem is None:
        raise SpecError("parse-error", "missing snapshotPredicates", "specification")
    alphabet = []
    seen: set[str] = set()
    for child in snaps_elem:
        if child.tag != "snapshotPredicate":
            raise SpecError(
                "parse-error", f"unexpected element {child.tag!r}",
                "specification/snapshotPredicates",
            )
        sp = _parse_snapshot(child, "specification/snapshotPredicates/snapshotPredicate")
        if sp.letter in seen:
            raise SpecError(
                "duplicate-symbol", f"letter {sp.letter!r} declared twice",
                "specification/snapshotPredicates",
            )
        seen.add(sp.letter)
        alphabet.append(sp)
    if not alphabet:
        raise SpecError("parse-error", "empty alphabet", "specification/snapshotPredicates")

    ctx_elem = root.find("contextualPredicate")
    if ctx_elem is None:
        raise SpecError("parse-error", "missing contextualPredicate", "specification")
    ctx_path = "specification/contextualPredicate"
    ctx_type = ctx_elem.get("type")
    if ctx_type == "single":
        letter = (ctx_elem.text or "").strip()
        if modality is None:
            raise SpecError("parse-error", "single predicate needs a modality", ctx_path)
        contextual = ContextualPredicate(
            kind=ContextualKind.SINGLE, modality=modality, letter=letter
        )
    elif ctx_type == "regular-expression":
        text = (ctx_elem.text or "").strip()
        if modality is None:
            raise SpecError("parse-error", "regex predicate needs a modality", ctx_path)
        try:
            regex = parse_regex(text)
        except RegexSyntaxError as exc:
            raise SpecError("parse-error", str(exc), ctx_path) from None
        contextual = ContextualPredicate(
            kind=ContextualKind.REGEX, modality=modality, regex=regex
        )
    elif ctx_type == "ctl":
        children = list(ctx_elem)
        if len(children) != 1:
            raise SpecError("parse-error", "ctl body needs one root element", ctx_path)
        contextual = ContextualPredicate(
            kind=ContextualKind.CTL, modality=None, ctl=_parse_ctl(children[0], ctx_path)
        )
    else:
        raise SpecError(
            "unsupported-predicate-type", f"contextual predicate type {ctx_type!r}", ctx_path
        )

    spec = PredicateSpec(name=name, alphabet=tuple(alphabet), contextual=contextual)
    try:
        return spec.validate()
    except ValueError as exc:
        msg = str(exc)
        reason = msg.split(":", 1)[0] if msg.startswith(("unknown-symbol", "duplicate-symbol")) else "parse-error"
        raise SpecError(reason, msg, "specification") from None


# ---------------------------------------------------------------------------
# Serialization (round-trip partner of parse_specification)


def _expr_to_elem(expr: BoolExpr) -> ET.Element:
    if isinstance(expr, Atom):
        return ET.Element(
            "atom", var=expr.var, relop=expr.relop, const=format_scalar(expr.const)
        )
    if isinstance(expr, (And, Or)):
        elem = ET.Element("and" if isinstance(expr, And) else "or")
        elem.extend(_expr_to_elem(e) for e in expr.items)
        return elem
    if isinstance(expr, Not):
        elem = ET.Element("not")
        elem.append(_expr_to_elem(expr.item))
        return elem
    raise TypeError(f"not a boolean expression: {expr!r}")


def _ctl_to_elem(node: CtlNode) -> ET.Element:
    if isinstance(node, CtlTrue):
        return ET.Element("true")
    if isinstance(node, CtlAtom):
        return ET.Element("atom", letter=node.letter)
    pairs = {
        CtlAnd: "and",
        CtlExistsUntil: "exists-until",
        CtlForallUntil: "forall-until",
    }
    singles = {
        CtlNot: "not",
        CtlExistsNext: "exists-next",
        CtlForallNext: "forall-next",
    }
    for cls, tag in pairs.items():
        if isinstance(node, cls):
            elem = ET.Element(tag)
            elem.append(_ctl_to_elem(node.left))
            elem.append(_ctl_to_elem(node.right))
            return elem
    for cls, tag in singles.items():
        if isinstance(node, cls):
            elem = ET.Element(tag)
            elem.append(_ctl_to_elem(node.item))
            return elem
    raise TypeError(f"not a CTL node: {node!r}")


def serialize_specification(spec: PredicateSpec) -> str:
    root = ET.Element("specification", name=spec.name)
    if spec.contextual.modality is not None:
        root.set("modality", spec.contextual.modality.value)
    snaps = ET.SubElement(root, "snapshotPredicates")
    for sp in spec.alphabet:
        elem = ET.SubElement(
            snaps, "snapshotPredicate", letter=sp.letter, type=sp.kind.value
        )
        if sp.kind is SnapshotKind.CONJUNCTIVE:
            for conj in sp.conjuncts:
                lp = ET.SubElement(elem, "localPredicate", contextType=conj.target)
                lp.append(_expr_to_elem(conj.expr))
        else:
            elem.set("relop", sp.relop)
            elem.set("bound", format_scalar(sp.bound))
            for ct, var in sp.terms:
                ET.SubElement(elem, "term", contextType=ct, var=var)
    ctx = ET.SubElement(root, "contextualPredicate", type=spec.contextual.kind.value)
    if spec.contextual.kind is ContextualKind.SINGLE:
        ctx.text = spec.contextual.letter
    elif spec.contextual.kind is ContextualKind.REGEX:
        assert spec.contextual.regex is not None
        ctx.text = format_regex(spec.contextual.regex)
    else:
        assert spec.contextual.ctl is not None
        ctx.append(_ctl_to_elem(spec.contextual.ctl))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")
