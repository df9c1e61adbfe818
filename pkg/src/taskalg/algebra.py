"""Zero-shot Boolean composition of trained tables.

Conjunction and disjunction are entrywise min and max.  Negation under
minimum-violation semantics is the reflection through the two boundary
tables; under prioritized safety it is a lookup of a separately learned
negated task (keys ``not-A`` or, for a pre-trained bundle, ``not-A,B``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolatedWarning,
    IncompatibleTables,
    MissingTask,
    NegationUnavailable,
)
from .formula import And, Formula, Not, Or, Prop, Semantics, TaskSpec
from .mdp import LabeledMdp
from .penalty import (
    BoundarySpec,
    NegatedSpec,
    PenaltyConfig,
    PositiveSpec,
    SafetyExtendedSpec,
)
from .planner import ExtendedQ, value_iterate

KEY_UPPER = "U"
KEY_EMPTY = "EMPTY"


def negated_key(props) -> str:
    return "not-" + ",".join(sorted(props))


def _check_compatible(*tables: ExtendedQ) -> None:
    first = tables[0]
    for t in tables[1:]:
        if t.values.shape != first.values.shape:
            raise IncompatibleTables(
                f"shape {t.values.shape} vs {first.values.shape}"
            )
        if t.fingerprint != first.fingerprint:
            raise IncompatibleTables("tables come from different environments")
        if t.config != first.config:
            raise IncompatibleTables("tables use different penalty configs")


def _composed(values: np.ndarray, like: ExtendedQ, descriptor: str, provenance: dict) -> ExtendedQ:
    return ExtendedQ(
        values=values,
        config=like.config,
        fingerprint=like.fingerprint,
        descriptor=descriptor,
        grid=like.grid,
        spec=None,
        converged=like.converged,
        residual=like.residual,
        provenance=provenance,
    )


def _prov(table: ExtendedQ) -> dict:
    return table.provenance or {"op": "task", "key": table.descriptor}


def neg(q: ExtendedQ, q_upper: ExtendedQ, q_empty: ExtendedQ) -> ExtendedQ:
    """Entrywise ``(upper + empty) - q``; an involution up to rounding."""
    _check_compatible(q, q_upper, q_empty)
    values = (q_upper.values + q_empty.values) - q.values
    return _composed(values, q, f"neg({q.descriptor})", {"op": "neg", "arg": _prov(q)})


def conj(q1: ExtendedQ, q2: ExtendedQ) -> ExtendedQ:
    _check_compatible(q1, q2)
    values = np.minimum(q1.values, q2.values)
    return _composed(
        values,
        q1,
        f"({q1.descriptor} & {q2.descriptor})",
        {"op": "conj", "args": [_prov(q1), _prov(q2)]},
    )


def disj(q1: ExtendedQ, q2: ExtendedQ) -> ExtendedQ:
    _check_compatible(q1, q2)
    values = np.maximum(q1.values, q2.values)
    return _composed(
        values,
        q1,
        f"({q1.descriptor} | {q2.descriptor})",
        {"op": "disj", "args": [_prov(q1), _prov(q2)]},
    )


@dataclass
class TaskLibrary:
    """Trained tables sharing one environment and penalty config.

    Keys: proposition names for positive tasks, ``not-p`` (or ``not-p,q`` for
    a bundle trained as one task) for negated ones, and ``U`` / ``EMPTY`` for
    the boundary tables.
    """

    config: PenaltyConfig
    fingerprint: str
    tables: dict[str, ExtendedQ] = field(default_factory=dict)

    def add(self, key: str, table: ExtendedQ) -> None:
        if table.fingerprint != self.fingerprint:
            raise IncompatibleTables(f"table {key!r} trained on a different environment")
        if table.config != self.config:
            raise IncompatibleTables(f"table {key!r} uses a different penalty config")
        if self.tables:
            _check_compatible(next(iter(self.tables.values())), table)
        self.tables[key] = table

    def __contains__(self, key: str) -> bool:
        return key in self.tables

    def __getitem__(self, key: str) -> ExtendedQ:
        if key not in self.tables:
            raise MissingTask(key)
        return self.tables[key]

    @classmethod
    def train(
        cls,
        mdp: LabeledMdp,
        config: PenaltyConfig,
        positive: tuple[str, ...] | list[str] = (),
        negated: tuple[str, ...] | list[str] = (),
        negated_bundles: tuple[frozenset[str], ...] = (),
        boundaries: bool = True,
        tol: float = 1e-9,
    ) -> "TaskLibrary":
        lib = cls(config=config, fingerprint=mdp.fingerprint())
        for p in positive:
            spec = PositiveSpec(config=config, formula=Prop(p))
            lib.add(p, value_iterate(mdp, spec, tol=tol))
        for p in negated:
            spec = NegatedSpec(config=config, avoid=frozenset((p,)))
            lib.add(negated_key((p,)), value_iterate(mdp, spec, tol=tol))
        for bundle in negated_bundles:
            spec = NegatedSpec(config=config, avoid=frozenset(bundle))
            lib.add(negated_key(bundle), value_iterate(mdp, spec, tol=tol))
        if boundaries:
            lib.add(KEY_UPPER, value_iterate(mdp, BoundarySpec(config=config, upper=True), tol=tol))
            lib.add(KEY_EMPTY, value_iterate(mdp, BoundarySpec(config=config, upper=False), tol=tol))
        return lib


def compile_formula(task: TaskSpec, lib: TaskLibrary) -> ExtendedQ:
    """Fold a task formula into one composed table.

    Minimum violation: conjunction/disjunction/negation are the table
    operators; the boundary tables must be present.  Prioritized safety: the
    formula must be in NNF and every negated literal resolves to a learned
    table, preferring a ``not-p,q`` bundle when an entire conjunct group was
    trained together.

    Emits :class:`AssumptionViolatedWarning` when two or more independently
    learned negated tables end up combined without safety-extended slices;
    the composition still proceeds.
    """
    negated_used: list[ExtendedQ] = []

    def fold(f: Formula) -> ExtendedQ:
        if isinstance(f, Prop):
            return lib[f.name]
        if isinstance(f, Not):
            if task.semantics is Semantics.MINIMUM_VIOLATION:
                return neg(fold(f.child), lib[KEY_UPPER], lib[KEY_EMPTY])
            if not isinstance(f.child, Prop):
                raise NegationUnavailable(
                    "prioritized safety needs the formula in negation normal form"
                )
            table = lib[negated_key((f.child.name,))]
            negated_used.append(table)
            return table
        if isinstance(f, And):
            if task.semantics is Semantics.PRIORITIZED_SAFETY:
                return _fold_conjunct_chain(f)
            return conj(fold(f.left), fold(f.right))
        if isinstance(f, Or):
            return disj(fold(f.left), fold(f.right))
        raise TypeError(f"not a formula node: {f!r}")

    def _fold_conjunct_chain(f: And) -> ExtendedQ:
        # Use a pre-trained bundle when this chain's negated literals were
        # learned together as one task.
        conjuncts: list[Formula] = []
        stack = [f]
        while stack:
            node = stack.pop()
            if isinstance(node, And):
                stack.append(node.right)
                stack.append(node.left)
            else:
                conjuncts.append(node)
        neg_props = [
            c.child.name
            for c in conjuncts
            if isinstance(c, Not) and isinstance(c.child, Prop)
        ]
        parts: list[ExtendedQ] = []
        bundle_emitted = False
        bundle = negated_key(neg_props) if len(neg_props) >= 2 else None
        for c in conjuncts:
            if (
                bundle is not None
                and bundle in lib
                and isinstance(c, Not)
                and isinstance(c.child, Prop)
            ):
                if not bundle_emitted:
                    table = lib[bundle]
                    negated_used.append(table)
                    parts.append(table)
                    bundle_emitted = True
                continue
            parts.append(fold(c))
        out = parts[0]
        for p in parts[1:]:
            out = conj(out, p)
        return out

    result = fold(task.formula)
    distinct = {id(t) for t in negated_used}
    if len(distinct) > 1 and not all(
        isinstance(t.spec, SafetyExtendedSpec) for t in negated_used
    ):
        warnings.warn(
            "composition combines multiple independently learned negated tasks; "
            "rollouts may chatter",
            AssumptionViolatedWarning,
            stacklevel=2,
        )
    return result


@dataclass
class PolicyOracle:
    """Per-goal greedy policy plus its evaluated value, one pair per goal.

    Abstracts a trained policy/value pair; here realized from tables, so the
    evaluated value is exactly the table entry at the chosen action.
    """

    actions: np.ndarray  # (cell, region)
    values: np.ndarray  # (cell, region)
    mdp: LabeledMdp = field(repr=False)
    fingerprint: str = ""
    descriptor: str = ""

    @classmethod
    def from_table(cls, table: ExtendedQ, mdp: LabeledMdp) -> "PolicyOracle":
        actions = table.values.argmax(axis=2)
        values = table.values.max(axis=2)
        return cls(
            actions=actions,
            values=values,
            mdp=mdp,
            fingerprint=table.fingerprint,
            descriptor=table.descriptor,
        )

    def action(self, cell) -> int:
        """Overall action: the selected pair of the best goal.

        Ties between goals resolve toward the pair whose action comes first
        in the fixed order, then the lowest region id, mirroring the
        tie-breaking of greedy table extraction.
        """
        s = self.mdp.cell_index(cell)
        best = None
        for g in range(self.values.shape[1]):
            cand = (-self.values[s, g], int(self.actions[s, g]), g)
            if best is None or cand < best:
                best = cand
        return best[1]


def _check_oracles(o1: PolicyOracle, o2: PolicyOracle) -> None:
    if o1.values.shape != o2.values.shape or o1.fingerprint != o2.fingerprint:
        raise IncompatibleTables("policy oracles disagree on environment or goals")


def policy_select_conj(o1: PolicyOracle, o2: PolicyOracle) -> PolicyOracle:
    """Pick, per (cell, goal), the policy whose own value is lower; keep that
    value.  Equal values select the first policy."""
    _check_oracles(o1, o2)
    take1 = o1.values <= o2.values
    return PolicyOracle(
        actions=np.where(take1, o1.actions, o2.actions),
        values=np.where(take1, o1.values, o2.values),
        mdp=o1.mdp,
        fingerprint=o1.fingerprint,
        descriptor=f"({o1.descriptor} & {o2.descriptor})",
    )


def policy_select_disj(o1: PolicyOracle, o2: PolicyOracle) -> PolicyOracle:
    """As conjunction but selecting the higher value per (cell, goal)."""
    _check_oracles(o1, o2)
    take1 = o1.values >= o2.values
    return PolicyOracle(
        actions=np.where(take1, o1.actions, o2.actions),
        values=np.where(take1, o1.values, o2.values),
        mdp=o1.mdp,
        fingerprint=o1.fingerprint,
        descriptor=f"({o1.descriptor} | {o2.descriptor})",
    )
