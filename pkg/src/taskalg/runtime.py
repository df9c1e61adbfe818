"""Greedy rollouts, path classification and reward accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .formula import Semantics, TaskSpec, evaluate
from .mdp import (
    ACTIONS,
    Cell,
    Execution,
    LabeledMdp,
    LabelSet,
    PathStats,
    project,
    project_nonempty,
    step,
)
from .oracle import min_violation_path
from .penalty import NegatedSpec, RewardSpec, SafetyExtendedSpec, reward


class PathClass(Enum):
    PURE = "Pure"
    MINIMUM_VIOLATION = "MinimumViolation"
    PRIORITIZED_SAFETY = "PrioritizedSafety"
    SAFETY_ONLY = "SafetyOnly"
    VIOLATING = "Violating"
    NON_TERMINATING = "NonTerminating"


@dataclass
class TrajectoryReport:
    """Everything observable about one greedy rollout.

    ``chatter`` is set when a cell repeats before termination, which under a
    deterministic policy proves an infinite loop.  ``path_class`` and
    ``total_reward`` are filled in by :func:`classify` and :func:`score`.
    """

    execution: Execution
    actions: list[int]
    projection: list[LabelSet]
    nonempty_projection: list[LabelSet]
    chatter: bool = False
    truncated: bool = False
    stats: PathStats | None = None
    total_reward: float | None = None
    path_class: PathClass | None = None
    oracle_degraded: bool = False

    @property
    def start(self) -> Cell:
        return self.execution.steps[0][0]

    @property
    def terminated(self) -> bool:
        return self.execution.terminated


def rollout(
    mdp: LabeledMdp,
    policy,
    s0: Cell,
    max_steps: int | None = None,
) -> TrajectoryReport:
    """Follow ``policy`` greedily from ``s0`` until done, a repeated cell, or
    ``max_steps`` transitions.

    ``policy`` is anything with an ``action(cell) -> int`` method, or a bare
    callable.  A repeated cell under a deterministic policy is an infinite
    loop, so the walk stops there with ``chatter=True``.  The default budget
    is generous; loops are caught by the revisit check long before it binds.
    """
    if max_steps is None:
        max_steps = 4 * mdp.n_cells
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    act = policy.action if hasattr(policy, "action") else policy

    steps: list[tuple[Cell, LabelSet]] = [(s0, frozenset())]
    actions: list[int] = []
    visited = {s0}
    s = s0
    terminated = False
    terminal_region = None
    chatter = False
    truncated = False
    for _ in range(max_steps):
        a = int(act(s))
        s2, emitted, done = step(mdp, s, a)
        steps.append((s2, emitted))
        actions.append(a)
        if done:
            terminated = True
            terminal_region = mdp.region_of[s2]
            break
        if s2 in visited:
            chatter = True
            break
        visited.add(s2)
        s = s2
    else:
        truncated = True

    execution = Execution(steps=steps, terminated=terminated, terminal_region=terminal_region)
    return TrajectoryReport(
        execution=execution,
        actions=actions,
        projection=project(execution),
        nonempty_projection=project_nonempty(execution),
        chatter=chatter,
        truncated=truncated,
    )


def satisfied(report: TrajectoryReport, task: TaskSpec, mdp: LabeledMdp) -> bool:
    """Terminated in a region whose label satisfies the task formula.

    Matches last-nonempty-emission satisfaction whenever the walk emitted
    anything, and extends it to walks that stayed inside their start region.
    """
    if not report.terminated:
        return False
    label = mdp.regions[report.execution.terminal_region].label
    return evaluate(task.formula, label)


def classify(
    report: TrajectoryReport,
    task: TaskSpec,
    mdp: LabeledMdp,
    node_budget: int | None = None,
) -> TrajectoryReport:
    """Assign a path class by comparing against oracle minima.

    Pure covers satisfying walks with at most one emission (a walk that
    terminates inside its start region emits nothing).  Satisfying walks that
    match the oracle minimum emission count are MinimumViolation, or
    PrioritizedSafety when an avoid set is being enforced; satisfying but
    non-minimal avoid-clean walks are SafetyOnly.  Any emitted avoided
    proposition, or an unsatisfying termination, is Violating.
    """
    emissions = report.nonempty_projection
    if task.avoid and any(e & task.avoid for e in emissions):
        report.path_class = PathClass.VIOLATING
        return report
    if not report.terminated:
        report.path_class = PathClass.NON_TERMINATING
        return report
    if not satisfied(report, task, mdp):
        report.path_class = PathClass.VIOLATING
        return report
    if len(emissions) <= 1:
        report.path_class = PathClass.PURE
        return report

    from .errors import OracleTimeout

    try:
        result = min_violation_path(
            mdp, report.start, task.formula, avoid=task.avoid, node_budget=node_budget
        )
    except OracleTimeout:
        report.oracle_degraded = True
        report.path_class = (
            PathClass.SAFETY_ONLY if task.avoid else PathClass.MINIMUM_VIOLATION
        )
        return report

    assert result.feasible, "rollout satisfied the task but the oracle found no path"
    minimal = len(emissions) == result.min_emissions
    if task.avoid:
        report.path_class = (
            PathClass.PRIORITIZED_SAFETY if minimal else PathClass.SAFETY_ONLY
        )
    else:
        report.path_class = (
            PathClass.MINIMUM_VIOLATION if minimal else PathClass.SAFETY_ONLY
        )
    return report


def path_stats(
    report: TrajectoryReport,
    spec: RewardSpec,
    mdp: LabeledMdp,
    goal: int | None = None,
) -> PathStats:
    """Tier counts for every non-terminal transition plus the termination kind.

    Derived from emission semantics, not from reward values, so it is an
    independent check on the transition-by-transition sum.
    """
    if goal is None:
        goal = report.execution.terminal_region
    stats = PathStats()
    steps = report.execution.steps
    n_transitions = len(steps) - 1
    terminal_at = n_transitions - 1 if report.terminated else None
    for i in range(n_transitions):
        if i == terminal_at:
            continue
        cell, emitted = steps[i + 1]
        if not emitted:
            stats.l_unlabeled += 1
            continue
        base = spec.base if isinstance(spec, SafetyExtendedSpec) else spec
        if isinstance(base, NegatedSpec) and emitted & base.avoid:
            stats.l_worst_pass_through += 1
        elif mdp.region_of[cell] == goal:
            stats.l_unlabeled += 1
        elif isinstance(spec, SafetyExtendedSpec) and mdp.region_of[cell] in spec.g_ok:
            stats.l_unlabeled += 1
        else:
            stats.l_bad_label += 1
    if not report.terminated:
        stats.termination = "neverTerm"
    else:
        term = report.execution.terminal_region
        if goal is None or term != goal:
            stats.termination = "worstTerm"
        else:
            label = mdp.regions[term].label
            from .penalty import _goal_satisfied

            stats.termination = "goal" if _goal_satisfied(spec, label) else "badTerm"
    return stats


def closed_form_return(stats: PathStats, spec: RewardSpec) -> float:
    """Total return from tier counts and the termination indicator alone."""
    cfg = spec.config
    term = {
        "goal": cfg.r_goal,
        "badTerm": cfg.r_badterm,
        "worstTerm": cfg.r_worstterm,
        "neverTerm": cfg.r_neverterm_floor,
    }[stats.termination]
    return (
        term
        + cfg.r_step * stats.l_unlabeled
        + cfg.r_badstep * stats.l_bad_label
        + cfg.r_worststep * stats.l_worst_pass_through
    )


def score(
    report: TrajectoryReport,
    spec: RewardSpec,
    mdp: LabeledMdp,
    goal: int | None = None,
    check_tol: float = 1e-9,
) -> float:
    """Sum per-transition rewards and cross-check the closed form.

    ``goal`` defaults to the walk's own terminal region.  Walks that never
    terminated are charged the never-terminate floor on top of their prefix,
    matching the closed form's indicator.  A closed-form mismatch beyond
    ``check_tol`` raises, since the two derivations must agree.
    """
    if goal is None:
        goal = report.execution.terminal_region
    steps = report.execution.steps
    total = 0.0
    n_transitions = len(steps) - 1
    terminal_at = n_transitions - 1 if report.terminated else None
    for i in range(n_transitions):
        s, _ = steps[i]
        s2, emitted = steps[i + 1]
        a = report.actions[i]
        done = i == terminal_at
        total += reward(spec, mdp, s, a, goal, s2, emitted, done)
    if not report.terminated:
        total += spec.config.r_neverterm_floor

    stats = path_stats(report, spec, mdp, goal=goal)
    closed = closed_form_return(stats, spec)
    if abs(total - closed) > check_tol:
        raise RuntimeError(
            f"closed-form return {closed} disagrees with transition sum {total}"
        )
    report.stats = stats
    report.total_reward = total
    return total


def transcript(
    report: TrajectoryReport,
    mdp: LabeledMdp,
    spec: RewardSpec | None = None,
    goal: int | None = None,
) -> list[str]:
    """Human-readable walk: one line per transition."""
    if goal is None:
        goal = report.execution.terminal_region
    lines = []
    steps = report.execution.steps
    n_transitions = len(steps) - 1
    terminal_at = n_transitions - 1 if report.terminated else None
    start = steps[0][0]
    lines.append(f"start {start}")
    for i in range(n_transitions):
        s, _ = steps[i]
        s2, emitted = steps[i + 1]
        a = report.actions[i]
        done = i == terminal_at
        shown = "{" + ",".join(sorted(emitted)) + "}" if emitted else "-"
        line = f"{s} {ACTIONS[a]:>5} -> {s2} emit={shown}"
        if spec is not None:
            r = reward(spec, mdp, s, a, goal, s2, emitted, done)
            line += f" r={r:+.4g}"
        if done:
            line += " done"
        lines.append(line)
    flags = []
    if report.chatter:
        flags.append("chatter")
    if report.truncated:
        flags.append("step budget exhausted")
    if report.path_class is not None:
        flags.append(f"class={report.path_class.value}")
    if flags:
        lines.append("; ".join(flags))
    return lines
