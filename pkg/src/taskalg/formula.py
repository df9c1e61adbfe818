"""Boolean task formulas over propositions.

Concrete syntax: identifiers ``[A-Za-z_][A-Za-z0-9_]*``, unary ``!`` (alias
``~``), infix ``&`` and ``|``, parentheses.  Precedence ``!`` > ``&`` > ``|``,
binary operators left-associative.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from enum import Enum

from .errors import ConflictingLiteralsWarning, ParseError, SemanticallyEmptyWarning
from .mdp import LabeledMdp, LabelSet, Region


class Formula:
    """Base class for formula AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


class Semantics(Enum):
    MINIMUM_VIOLATION = "min-violation"
    PRIORITIZED_SAFETY = "prioritized-safety"


_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[!~&|()]|\s+|.")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        if tok.isspace():
            pos = m.end()
            continue
        if len(tok) == 1 and tok not in "!~&|()" and not tok.isidentifier():
            if tok == "-" and tokens and tokens[-1][0] == "not":
                raise ParseError("'not-' names are not accepted; negation is '!'", tokens[-1][1])
            raise ParseError(f"unknown token {tok!r}", m.start())
        tokens.append((tok, m.start()))
        pos = m.end()
    return tokens


def parse(text: str) -> Formula:
    """Parse formula text into an AST.

    Raises :class:`ParseError` with a byte offset on bad input.  ``not-``
    prefixed identifiers are rejected; negation is spelled ``!``.
    """
    if not text or text.isspace():
        raise ParseError("empty formula", 0)
    tokens = _tokenize(text)
    idx = 0

    def peek() -> tuple[str, int] | None:
        return tokens[idx] if idx < len(tokens) else None

    def take() -> tuple[str, int]:
        nonlocal idx
        if idx >= len(tokens):
            raise ParseError("unexpected end of input", len(text))
        tok = tokens[idx]
        idx += 1
        return tok

    def atom() -> Formula:
        tok, off = take()
        if tok in ("!", "~"):
            return Not(atom())
        if tok == "(":
            node = disjunction()
            nxt = peek()
            if nxt is None or nxt[0] != ")":
                raise ParseError("unclosed parenthesis", off)
            take()
            return node
        if tok.isidentifier():
            return Prop(tok)
        raise ParseError(f"unexpected token {tok!r}", off)

    def conjunction() -> Formula:
        node = atom()
        while (nxt := peek()) is not None and nxt[0] == "&":
            take()
            node = And(node, atom())
        return node

    def disjunction() -> Formula:
        node = conjunction()
        while (nxt := peek()) is not None and nxt[0] == "|":
            take()
            node = Or(node, conjunction())
        return node

    result = disjunction()
    if (extra := peek()) is not None:
        raise ParseError(f"trailing input {extra[0]!r}", extra[1])
    return result


def render(f: Formula) -> str:
    """Canonical text for a formula; ``parse(render(f))`` is structurally ``f``."""

    def go(node: Formula, parent_prec: int) -> str:
        if isinstance(node, Prop):
            return node.name
        if isinstance(node, Not):
            return "!" + go(node.child, 3)
        if isinstance(node, And):
            text = f"{go(node.left, 2)} & {go(node.right, 3)}"
            return f"({text})" if parent_prec > 2 else text
        if isinstance(node, Or):
            text = f"{go(node.left, 1)} | {go(node.right, 2)}"
            return f"({text})" if parent_prec > 1 else text
        raise TypeError(f"not a formula node: {node!r}")

    return go(f, 0)


def to_nnf(f: Formula) -> Formula:
    """Push negation down to literals, eliminating double negation."""
    if isinstance(f, Prop):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Not):
        child = f.child
        if isinstance(child, Prop):
            return f
        if isinstance(child, Not):
            return to_nnf(child.child)
        if isinstance(child, And):
            return Or(to_nnf(Not(child.left)), to_nnf(Not(child.right)))
        if isinstance(child, Or):
            return And(to_nnf(Not(child.left)), to_nnf(Not(child.right)))
    raise TypeError(f"not a formula node: {f!r}")


def evaluate(f: Formula, label: LabelSet) -> bool:
    """Truth of ``f`` on a label set: a proposition holds iff it is in the set."""
    if isinstance(f, Prop):
        return f.name in label
    if isinstance(f, Not):
        return not evaluate(f.child, label)
    if isinstance(f, And):
        return evaluate(f.left, label) and evaluate(f.right, label)
    if isinstance(f, Or):
        return evaluate(f.left, label) or evaluate(f.right, label)
    raise TypeError(f"not a formula node: {f!r}")


def props_of(f: Formula) -> frozenset[str]:
    if isinstance(f, Prop):
        return frozenset((f.name,))
    if isinstance(f, Not):
        return props_of(f.child)
    if isinstance(f, (And, Or)):
        return props_of(f.left) | props_of(f.right)
    raise TypeError(f"not a formula node: {f!r}")


def negated_props(f: Formula) -> frozenset[str]:
    """Propositions appearing under a negation in the NNF of ``f``."""
    nnf = to_nnf(f)

    def go(node: Formula) -> frozenset[str]:
        if isinstance(node, Prop):
            return frozenset()
        if isinstance(node, Not):
            assert isinstance(node.child, Prop)
            return frozenset((node.child.name,))
        return go(node.left) | go(node.right)

    return go(nnf)


def partition_goals(
    f: Formula, mdp: LabeledMdp
) -> tuple[set[Region], set[Region]]:
    """Split regions into those whose label satisfies ``f`` and the rest.

    Emits :class:`SemanticallyEmptyWarning` when no region satisfies ``f``.
    """
    unknown = props_of(f) - set(mdp.propositions)
    if unknown:
        raise ValueError(f"formula uses unknown propositions: {sorted(unknown)}")
    satisfying = {g for g in mdp.regions if evaluate(f, g.label)}
    rest = set(mdp.regions) - satisfying
    if not satisfying:
        warnings.warn(
            f"no region satisfies {render(f)!r}", SemanticallyEmptyWarning, stacklevel=2
        )
    return satisfying, rest


@dataclass(frozen=True)
class TaskSpec:
    """A formula paired with the safety semantics to enforce on rollouts.

    Under prioritized safety the formula is stored in NNF and ``avoid`` holds
    every proposition that appears negated: emitting any of them is a safety
    violation.  Under minimum violation negation is handled analytically and
    ``avoid`` is empty.
    """

    formula: Formula
    semantics: Semantics
    avoid: frozenset[str]

    @classmethod
    def build(cls, formula: Formula | str, semantics: Semantics) -> "TaskSpec":
        if isinstance(formula, str):
            formula = parse(formula)
        if semantics is Semantics.PRIORITIZED_SAFETY:
            formula = to_nnf(formula)
            avoid = negated_props(formula)
            _warn_conflicting_conjuncts(formula)
        else:
            avoid = frozenset()
        return cls(formula=formula, semantics=semantics, avoid=avoid)


def _warn_conflicting_conjuncts(nnf: Formula) -> None:
    # A conjunct that both requires and forbids p can never be satisfied by
    # one label set; worth a warning, not an error.
    def literals(node: Formula) -> tuple[frozenset[str], frozenset[str]] | None:
        if isinstance(node, Prop):
            return frozenset((node.name,)), frozenset()
        if isinstance(node, Not):
            return frozenset(), frozenset((node.child.name,))
        if isinstance(node, And):
            l1, l2 = literals(node.left), literals(node.right)
            if l1 is None or l2 is None:
                return None
            return l1[0] | l2[0], l1[1] | l2[1]
        return None

    def walk(node: Formula) -> None:
        lits = literals(node)
        if lits is not None:
            clash = lits[0] & lits[1]
            if clash:
                warnings.warn(
                    f"conjunct requires and forbids {sorted(clash)}",
                    ConflictingLiteralsWarning,
                    stacklevel=4,
                )
            return
        if isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)

    walk(nnf)
