"""Brute-force ground truth used to validate the planner and classify walks.

Everything here is deliberately simple: lexicographic Dijkstra for minimum
violation queries, Bellman-Ford relaxation for constrained path lengths, and
exhaustive simple-path enumeration for optimal returns.  These are the
independent code paths the dynamic-programming results are checked against.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import ExplosionGuard, OracleTimeout
from .formula import Formula, evaluate
from .mdp import EMPTY, STAY, Cell, Execution, LabeledMdp, LabelSet, project_nonempty
from .penalty import RewardSpec, reward


@dataclass
class OracleResult:
    """Outcome of a minimum-violation query.

    ``min_violations`` counts non-satisfying non-empty emissions along the
    witness; ``min_steps`` counts transitions including the terminal stay.
    """

    feasible: bool
    min_violations: int | None = None
    min_steps: int | None = None
    witness: Execution | None = None

    @property
    def min_emissions(self) -> int | None:
        """Non-empty emission count of the witness (violations plus the
        final satisfying emission, when the walk had to enter its goal)."""
        if not self.feasible:
            return None
        return len(project_nonempty(self.witness))


def min_violation_path(
    mdp: LabeledMdp,
    s0: Cell,
    formula: Formula,
    avoid: frozenset[str] = frozenset(),
    node_budget: int | None = None,
) -> OracleResult:
    """Cheapest satisfying walk from ``s0`` under lexicographic cost
    (non-satisfying emissions, steps).

    A transition emitting any proposition in ``avoid`` is forbidden outright.
    Termination is only by staying inside a region whose label satisfies the
    formula.  Ties resolve toward fewer steps, then row-major cell order, so
    witnesses are deterministic.
    """
    dist: dict[Cell, tuple[int, int]] = {s0: (0, 0)}
    prev: dict[Cell, tuple[Cell, LabelSet]] = {}
    heap = [(0, 0, mdp.cell_index(s0), s0)]
    popped = 0

    best_goal: tuple[int, int, int, Cell] | None = None
    while heap:
        v, steps, order, cell = heapq.heappop(heap)
        if dist.get(cell) != (v, steps):
            continue
        popped += 1
        if node_budget is not None and popped > node_budget:
            raise OracleTimeout(f"exceeded node budget of {node_budget}")
        rid = mdp.region_of.get(cell)
        if rid is not None and evaluate(formula, mdp.regions[rid].label):
            cand = (v, steps + 1, mdp.cell_index(cell), cell)
            if best_goal is None or cand < best_goal:
                best_goal = cand
        l_here = mdp.label(cell)
        x, y = cell
        for nb in ((x, y + 1), (x, y - 1), (x - 1, y), (x + 1, y)):
            if not mdp.in_bounds(nb):
                continue
            l_next = mdp.label(nb)
            emitted = l_next if l_next != l_here else EMPTY
            if emitted & avoid:
                continue
            dv = 1 if emitted and not evaluate(formula, emitted) else 0
            cand2 = (v + dv, steps + 1)
            if nb not in dist or cand2 < dist[nb]:
                dist[nb] = cand2
                prev[nb] = (cell, emitted)
                heapq.heappush(heap, (cand2[0], cand2[1], mdp.cell_index(nb), nb))

    if best_goal is None:
        return OracleResult(feasible=False)
    viol, steps, _, goal_cell = best_goal
    witness = _reconstruct(mdp, s0, goal_cell, prev)
    return OracleResult(
        feasible=True, min_violations=viol, min_steps=steps, witness=witness
    )


def safe_min_violation_path(
    mdp: LabeledMdp,
    s0: Cell,
    formula: Formula,
    avoid: frozenset[str],
    node_budget: int | None = None,
) -> OracleResult:
    """Minimum-violation query over walks that never emit an avoided
    proposition.  ``avoid=frozenset()`` degenerates to the plain query."""
    return min_violation_path(mdp, s0, formula, avoid=avoid, node_budget=node_budget)


def _reconstruct(
    mdp: LabeledMdp,
    s0: Cell,
    goal_cell: Cell,
    prev: dict[Cell, tuple[Cell, LabelSet]],
) -> Execution:
    chain: list[tuple[Cell, LabelSet]] = []
    cell = goal_cell
    while cell != s0:
        parent, emitted = prev[cell]
        chain.append((cell, emitted))
        cell = parent
    chain.append((s0, EMPTY))
    chain.reverse()
    chain.append((goal_cell, EMPTY))  # the terminal stay
    return Execution(
        steps=chain, terminated=True, terminal_region=mdp.region_of[goal_cell]
    )


def optimal_return(
    mdp: LabeledMdp,
    spec: RewardSpec,
    s0: Cell,
    g: int,
    step_bound: int,
    node_cap: int = 2_000_000,
) -> float:
    """Best total reward over exhaustively enumerated terminating walks.

    Enumerates simple paths from ``s0`` (revisits and absorbed no-ops only
    ever lose reward, so they are skipped), terminating by stay inside any
    region, all rewarded under ``spec`` conditioned on goal ``g``.  Returns
    the never-terminate floor when no walk terminates within ``step_bound``.
    """
    if step_bound < 1:
        raise ValueError("step_bound must be at least 1")
    floor = spec.config.r_neverterm_floor
    best = floor
    nodes = 0
    visited = {s0}

    def dfs(cell: Cell, acc: float, depth: int) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise ExplosionGuard(f"enumeration exceeded {node_cap} nodes")
        if depth >= step_bound:
            return
        if cell in mdp.region_of:
            r = reward(spec, mdp, cell, STAY, g, cell, EMPTY, True)
            best = max(best, acc + r)
        # Every further transition loses reward and no termination pays more
        # than r_goal, so this branch is exhausted.
        if acc + spec.config.r_goal <= best:
            return
        x, y = cell
        l_here = mdp.label(cell)
        for a, nb in ((0, (x, y + 1)), (1, (x, y - 1)), (2, (x - 1, y)), (3, (x + 1, y))):
            if not mdp.in_bounds(nb) or nb in visited:
                continue
            l_next = mdp.label(nb)
            emitted = l_next if l_next != l_here else EMPTY
            r = reward(spec, mdp, cell, a, g, nb, emitted, False)
            visited.add(nb)
            dfs(nb, acc + r, depth + 1)
            visited.remove(nb)

    dfs(s0, 0.0, 0)
    return best


def constrained_path_length(
    mdp: LabeledMdp, s1: Cell, s2: Cell, prop: str, negated: bool = False
) -> float:
    """Steps of the lexicographically cheapest (violating entries, steps)
    walk between two cells, by plain Bellman-Ford relaxation.

    Independent of the heap-based search used to derive the penalty
    multiplier; the two must agree.
    """
    big = (math.inf, math.inf)
    dist: dict[Cell, tuple[float, float]] = {c: big for c in mdp.cells()}
    dist[s1] = (0, 0)
    edges = []
    for cell in mdp.cells():
        x, y = cell
        l_here = mdp.label(cell)
        for nb in ((x, y + 1), (x, y - 1), (x - 1, y), (x + 1, y)):
            if not mdp.in_bounds(nb):
                continue
            l_next = mdp.label(nb)
            emitted = l_next if l_next != l_here else EMPTY
            if negated:
                bad = bool(emitted) and prop not in emitted
            else:
                bad = bool(emitted) and prop in emitted
            edges.append((cell, nb, 1 if bad else 0))
    changed = True
    while changed:
        changed = False
        for u, v, dv in edges:
            base = dist[u]
            if math.isinf(base[1]):
                continue
            cand = (base[0] + dv, base[1] + 1)
            if cand < dist[v]:
                dist[v] = cand
                changed = True
    return dist[s2][1]


def avoid_path_len_bruteforce(
    mdp: LabeledMdp, g1: int, g2: int, prop: str, negated: bool = False
) -> float:
    """Relaxation-based twin of the penalty module's region-pair length."""
    worst = 0.0
    for s1 in sorted(mdp.regions[g1].cells):
        for s2 in sorted(mdp.regions[g2].cells):
            length = constrained_path_length(mdp, s1, s2, prop, negated)
            if math.isinf(length):
                return math.inf
            worst = max(worst, length)
    return worst
