"""Penalty ladder and per-transition reward functions.

The ladder is geometric in the multiplier ``c_p``:

    step               r_step            (negative, e.g. -0.1)
    bad pass through   c_p   * r_step
    worst pass through c_p^2 * r_step
    bad termination    c_p^2 * r_step    (same tier as worst pass through)
    worst termination  c_p^3 * r_step
    never-terminate    c_p^4 * r_step    (value floor)

``c_p`` is derived from the environment: the smallest integer at least as
large as every constrained shortest-path length between region pairs, so one
heavier penalty always outweighs any allowed detour of lighter ones.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import EnvironmentDisconnected, InvalidEnvironment
from .formula import Formula, evaluate
from .mdp import EMPTY, Cell, LabeledMdp, LabelSet

INFINITE = math.inf


@dataclass(frozen=True)
class PenaltyConfig:
    """Reward constants plus the derived penalty tiers.

    ``extra_term_tier`` moves bad termination onto its own tier (one ``c_p``
    heavier than a worst pass-through), pushing worst termination and the
    never-terminate floor up accordingly.  Off by default.
    """

    c_p: int
    r_step: float = -0.1
    r_goal: float = 2.0
    extra_term_tier: bool = False

    def __post_init__(self):
        if self.r_step >= 0:
            raise ValueError(f"r_step must be negative, got {self.r_step}")
        if self.r_goal <= 0:
            raise ValueError(f"r_goal must be positive, got {self.r_goal}")
        if self.c_p < 1:
            raise ValueError(f"c_p must be at least 1, got {self.c_p}")

    @property
    def r_badstep(self) -> float:
        return self.c_p * self.r_step

    @property
    def r_worststep(self) -> float:
        return self.c_p**2 * self.r_step

    @property
    def r_badterm(self) -> float:
        return self.c_p**3 * self.r_step if self.extra_term_tier else self.c_p**2 * self.r_step

    @property
    def r_worstterm(self) -> float:
        return self.c_p * self.r_badterm

    @property
    def r_neverterm_floor(self) -> float:
        return self.c_p * self.r_worstterm


@dataclass(frozen=True)
class RewardSpec:
    """Base class for task reward definitions; subclasses pick the case table."""

    config: PenaltyConfig


@dataclass(frozen=True)
class PositiveSpec(RewardSpec):
    """Reach a region whose label satisfies the formula.

    Entering any labeled region other than the conditioning goal is a bad
    pass-through; terminating at the goal earns ``r_goal`` when the label
    satisfies the formula and a bad termination otherwise.
    """

    formula: Formula = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.formula is None:
            raise ValueError("PositiveSpec requires a formula")


@dataclass(frozen=True)
class NegatedSpec(RewardSpec):
    """Terminate anywhere whose label avoids every listed proposition.

    Emitting an avoided proposition is a worst pass-through; the goal test at
    termination is inverted relative to a positive task.
    """

    avoid: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.avoid:
            raise ValueError("NegatedSpec requires at least one proposition")


@dataclass(frozen=True)
class BoundarySpec(RewardSpec):
    """Positive-task rewards with the satisfaction test forced.

    ``upper=True`` makes every termination at the goal succeed; ``upper=False``
    makes every one a bad termination.  Pass-through penalties are unchanged.
    """

    upper: bool = True


@dataclass(frozen=True)
class SafetyExtendedSpec(RewardSpec):
    """A base task with designated regions whose pass-through is forgiven.

    Entering a region in ``g_ok`` that would be a bad pass-through costs a
    plain step instead.  Worst pass-throughs are never lightened.
    """

    base: RewardSpec = None  # type: ignore[assignment]
    g_ok: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.base is None:
            raise ValueError("SafetyExtendedSpec requires a base spec")
        if isinstance(self.base, SafetyExtendedSpec):
            raise ValueError("safety extension cannot be nested")


def reward(
    spec: RewardSpec,
    mdp: LabeledMdp,
    s: Cell,
    a: int,
    g: int | None,
    s_next: Cell,
    emitted: LabelSet,
    done: bool,
) -> float:
    """Reward for one transition under ``spec``, conditioned on goal region ``g``.

    Exactly one case of the task's table fires.  Satisfaction at termination
    is tested against the terminal region's label.  ``g=None`` grades every
    labeled entry and termination as off-goal (used when scoring a walk that
    never terminated).
    """
    cfg = spec.config
    if done:
        term = mdp.region_of[s]
        if g is None or term != g:
            return cfg.r_worstterm
        label = mdp.regions[term].label
        return cfg.r_goal if _goal_satisfied(spec, label) else cfg.r_badterm

    if isinstance(spec, SafetyExtendedSpec):
        base = spec.base
        if isinstance(base, NegatedSpec) and emitted & base.avoid:
            return cfg.r_worststep
        if emitted:
            r2 = mdp.region_of[s_next]
            if r2 != g and r2 not in spec.g_ok:
                return cfg.r_badstep
        return cfg.r_step

    if isinstance(spec, NegatedSpec) and emitted & spec.avoid:
        return cfg.r_worststep
    if emitted and mdp.region_of[s_next] != g:
        return cfg.r_badstep
    return cfg.r_step


def _goal_satisfied(spec: RewardSpec, label: LabelSet) -> bool:
    if isinstance(spec, PositiveSpec):
        return evaluate(spec.formula, label)
    if isinstance(spec, NegatedSpec):
        return not (label & spec.avoid)
    if isinstance(spec, BoundarySpec):
        return spec.upper
    if isinstance(spec, SafetyExtendedSpec):
        return _goal_satisfied(spec.base, label)
    raise TypeError(f"unknown reward spec: {spec!r}")


def reward_positive(spec: PositiveSpec, mdp, s, a, g, s_next, emitted, done) -> float:
    assert isinstance(spec, PositiveSpec)
    return reward(spec, mdp, s, a, g, s_next, emitted, done)


def reward_negated(spec: NegatedSpec, mdp, s, a, g, s_next, emitted, done) -> float:
    assert isinstance(spec, NegatedSpec)
    return reward(spec, mdp, s, a, g, s_next, emitted, done)


def reward_boundary(spec: BoundarySpec, mdp, s, a, g, s_next, emitted, done) -> float:
    assert isinstance(spec, BoundarySpec)
    return reward(spec, mdp, s, a, g, s_next, emitted, done)


def reward_safety_extended(
    spec: SafetyExtendedSpec, mdp, s, a, g, s_next, emitted, done
) -> float:
    assert isinstance(spec, SafetyExtendedSpec)
    return reward(spec, mdp, s, a, g, s_next, emitted, done)


def _violates(label: LabelSet, prop: str, negated: bool) -> bool:
    # Positive literal: label mentions the proposition.  Negated literal:
    # label omits it.  Only non-empty emissions are graded.
    return (prop not in label) if negated else (prop in label)


def avoid_path_len(
    mdp: LabeledMdp, g1: int, g2: int, prop: str, negated: bool = False
) -> float:
    """Longest-of-shortest constrained path length between two regions.

    For every cell pair ``(s1 in g1, s2 in g2)`` take the path minimizing
    (number of violating entries, steps) lexicographically, where an entry
    violates when its emission is non-empty and matches the literal; return
    the maximum step count over pairs, or ``INFINITE`` when some pair is
    unreachable.
    """
    r1, r2 = mdp.regions[g1], mdp.regions[g2]
    worst = 0.0
    for s1 in sorted(r1.cells):
        dist = _lex_dijkstra(mdp, s1, prop, negated)
        for s2 in sorted(r2.cells):
            d = dist.get(s2)
            if d is None:
                return INFINITE
            worst = max(worst, float(d[1]))
    return worst


def _lex_dijkstra(
    mdp: LabeledMdp, source: Cell, prop: str, negated: bool
) -> dict[Cell, tuple[int, int]]:
    """Per-cell lexicographic (violations, steps) distances from ``source``."""
    dist: dict[Cell, tuple[int, int]] = {source: (0, 0)}
    heap: list[tuple[int, int, int, int]] = [(0, 0, source[0], source[1])]
    while heap:
        v, steps, x, y = heapq.heappop(heap)
        cell = (x, y)
        if dist.get(cell) != (v, steps):
            continue
        l_here = mdp.label(cell)
        for nx, ny in ((x, y + 1), (x, y - 1), (x - 1, y), (x + 1, y)):
            nb = (nx, ny)
            if not mdp.in_bounds(nb):
                continue
            l_next = mdp.label(nb)
            emitted = l_next if l_next != l_here else EMPTY
            dv = 1 if emitted and _violates(emitted, prop, negated) else 0
            cand = (v + dv, steps + 1)
            if nb not in dist or cand < dist[nb]:
                dist[nb] = cand
                heapq.heappush(heap, (cand[0], cand[1], nx, ny))
    return dist


@dataclass(frozen=True)
class PenaltyDerivation:
    c_p: int
    g1: int
    g2: int
    literal: str
    length: int


def derive_penalty_multiplier(mdp: LabeledMdp) -> PenaltyDerivation:
    """Smallest integer dominating all finite constrained path lengths.

    Scans every ordered region pair and both polarities of every proposition;
    infinite entries are skipped.  Raises :class:`EnvironmentDisconnected`
    when every entry is infinite and :class:`InvalidEnvironment` when there
    are no regions at all.
    """
    if not mdp.regions:
        raise InvalidEnvironment("environment has no labeled regions")
    best = None
    for g1 in range(mdp.n_regions):
        for g2 in range(mdp.n_regions):
            for prop in mdp.propositions:
                for negated in (False, True):
                    length = avoid_path_len(mdp, g1, g2, prop, negated)
                    if length is INFINITE or math.isinf(length):
                        continue
                    lit = ("!" + prop) if negated else prop
                    cand = (int(length), g1, g2, lit)
                    if best is None or cand > best:
                        best = cand
    if best is None:
        raise EnvironmentDisconnected("no region pair is connected")
    length, g1, g2, lit = best
    return PenaltyDerivation(c_p=max(length, 1), g1=g1, g2=g2, literal=lit, length=length)


def penalty_multiplier(mdp: LabeledMdp) -> int:
    return derive_penalty_multiplier(mdp).c_p
