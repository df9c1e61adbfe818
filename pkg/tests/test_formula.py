from itertools import chain, combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskalg.errors import (
    ConflictingLiteralsWarning,
    ParseError,
    SemanticallyEmptyWarning,
)
from taskalg.formula import (
    And,
    Not,
    Or,
    Prop,
    Semantics,
    TaskSpec,
    evaluate,
    negated_props,
    parse,
    partition_goals,
    render,
    to_nnf,
)

from conftest import region_by_label

PROPS = ("A", "B", "C", "D")


def formulas(props=PROPS, depth=3):
    leaf = st.sampled_from([Prop(p) for p in props])
    return st.recursive(
        leaf,
        lambda sub: st.one_of(
            st.builds(Not, sub), st.builds(And, sub, sub), st.builds(Or, sub, sub)
        ),
        max_leaves=2**depth,
    )


def all_labelsets(props=PROPS):
    return [
        frozenset(c) for c in chain.from_iterable(
            combinations(props, k) for k in range(len(props) + 1)
        )
    ]


class TestParse:
    def test_negation_binds_tightest(self):
        assert parse("!A & C") == And(Not(Prop("A")), Prop("C"))

    def test_and_binds_tighter_than_or(self):
        assert parse("A | B & C") == Or(Prop("A"), And(Prop("B"), Prop("C")))

    def test_parenthesized_negation(self):
        assert parse("!(A | B)") == Not(Or(Prop("A"), Prop("B")))

    def test_tilde_alias(self):
        assert parse("~A") == Not(Prop("A"))

    def test_left_associativity(self):
        assert parse("A & B & C") == And(And(Prop("A"), Prop("B")), Prop("C"))

    @pytest.mark.parametrize(
        "text", ["", "   ", "A &", "& A", "(A | B", "A B", "A @ B", "!A!", "not-A"]
    )
    def test_bad_input_raises(self, text):
        with pytest.raises(ParseError):
            parse(text)

    def test_error_carries_offset(self):
        with pytest.raises(ParseError) as exc:
            parse("A & @")
        assert exc.value.offset == 4

    def test_not_prefix_rejected_with_hint(self):
        with pytest.raises(ParseError, match="negation is '!'"):
            parse("not-A & C")

    @settings(max_examples=150, deadline=None)
    @given(f=formulas())
    def test_render_parse_round_trip(self, f):
        assert parse(render(f)) == f


class TestNnf:
    def test_de_morgan_or(self):
        assert to_nnf(Not(Or(Prop("A"), Prop("B")))) == And(Not(Prop("A")), Not(Prop("B")))

    def test_double_negation(self):
        assert to_nnf(Not(Not(Prop("A")))) == Prop("A")

    def test_nested_de_morgan(self):
        f = Not(And(Prop("A"), Or(Prop("B"), Prop("C"))))
        expected = Or(Not(Prop("A")), And(Not(Prop("B")), Not(Prop("C"))))
        assert to_nnf(f) == expected
        for labels in all_labelsets(("A", "B", "C")):
            assert evaluate(f, labels) == evaluate(expected, labels)

    @settings(max_examples=200, deadline=None)
    @given(f=formulas())
    def test_nnf_preserves_truth(self, f):
        g = to_nnf(f)
        for labels in all_labelsets():
            assert evaluate(f, labels) == evaluate(g, labels)

    @settings(max_examples=100, deadline=None)
    @given(f=formulas())
    def test_nnf_negations_only_on_literals(self, f):
        def check(node):
            if isinstance(node, Not):
                assert isinstance(node.child, Prop)
            elif isinstance(node, (And, Or)):
                check(node.left)
                check(node.right)

        check(to_nnf(f))


class TestEvaluate:
    @pytest.mark.parametrize(
        "text,labels,expected",
        [
            ("!A & C", {"C"}, True),
            ("!A & C", {"A", "B", "C"}, False),
            ("A | B", set(), False),
            ("A & B", {"A", "B"}, True),
        ],
    )
    def test_cases(self, text, labels, expected):
        assert evaluate(parse(text), frozenset(labels)) is expected


class TestPartition:
    def test_single_prop(self, world):
        sat, rest = partition_goals(parse("C"), world)
        assert sat == {region_by_label(world, {"A", "B", "C"}), region_by_label(world, {"C"})}
        assert len(sat) + len(rest) == world.n_regions

    def test_conjunction_with_negation(self, world):
        sat, _ = partition_goals(parse("!A & C"), world)
        assert sat == {region_by_label(world, {"C"})}

    def test_contradiction_warns(self, world):
        with pytest.warns(SemanticallyEmptyWarning):
            sat, rest = partition_goals(parse("A & !A"), world)
        assert sat == set() and len(rest) == world.n_regions

    def test_unknown_prop_rejected(self, world):
        with pytest.raises(ValueError):
            partition_goals(parse("Z"), world)

    def test_consistent_with_evaluate(self, world):
        f = parse("(A | B) & !C")
        sat, rest = partition_goals(f, world)
        for region in sat:
            assert evaluate(f, region.label)
        for region in rest:
            assert not evaluate(f, region.label)


class TestTaskSpec:
    def test_min_violation_has_empty_avoid(self):
        spec = TaskSpec.build("!A & C", Semantics.MINIMUM_VIOLATION)
        assert spec.avoid == frozenset()

    def test_prioritized_safety_collects_negated_literals(self):
        spec = TaskSpec.build("!(A | B) & C", Semantics.PRIORITIZED_SAFETY)
        assert spec.avoid == {"A", "B"}
        assert negated_props(spec.formula) == {"A", "B"}

    def test_prioritized_safety_stores_nnf(self):
        spec = TaskSpec.build("!(A | B)", Semantics.PRIORITIZED_SAFETY)
        assert spec.formula == And(Not(Prop("A")), Not(Prop("B")))

    def test_conflicting_conjunct_flagged(self):
        with pytest.warns(ConflictingLiteralsWarning):
            TaskSpec.build("A & !A", Semantics.PRIORITIZED_SAFETY)
