"""Exact value iteration for goal-conditioned Q-tables.

Backups are undiscounted and synchronous (each sweep reads a frozen snapshot
of the previous one), with all values clamped from below at the
never-terminate floor ``c_p^4 * r_step``.  On a deterministic grid this
converges from the floor upward in at most one sweep per step of the longest
optimal walk, after which the residual is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import IncompatibleTables, InvalidEnvironment, SubsetExplosion
from .mdp import ACTIONS, LabeledMdp, step
from .penalty import (
    BoundarySpec,
    PenaltyConfig,
    RewardSpec,
    SafetyExtendedSpec,
    reward,
)


@dataclass
class ExtendedQ:
    """Dense table over (cell, goal region, action).

    ``spec`` is present for trained tables and ``None`` for composed ones;
    ``descriptor`` is a short human-readable task name and ``provenance`` an
    operator tree for composed tables.
    """

    values: np.ndarray = field(repr=False)
    config: PenaltyConfig
    fingerprint: str
    descriptor: str
    grid: tuple[int, int] = (0, 0)
    spec: RewardSpec | None = None
    converged: bool = True
    residual: float = 0.0
    sweeps: int = 0
    provenance: dict | None = None

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def n_regions(self) -> int:
        return self.values.shape[1]

    @property
    def n_actions(self) -> int:
        return self.values.shape[2]

    def state_values(self) -> np.ndarray:
        """Per (cell, goal) value: max over actions."""
        return self.values.max(axis=2)


@dataclass
class SafetyExtendedQ:
    """Stack of tables, one slice per allowed pass-through subset.

    ``subsets[k]`` names the regions whose pass-through slice ``k`` forgives;
    the empty subset's slice equals the plain table of the base task.
    """

    values: np.ndarray = field(repr=False)  # (cell, region, subset, action)
    subsets: list[frozenset[int]]
    base: RewardSpec
    config: PenaltyConfig
    fingerprint: str
    descriptor: str
    grid: tuple[int, int] = (0, 0)

    def slice(self, g_ok: frozenset[int] | set[int]) -> ExtendedQ:
        g_ok = frozenset(g_ok)
        idx = self.subsets.index(g_ok)
        return ExtendedQ(
            values=self.values[:, :, idx, :].copy(),
            config=self.config,
            fingerprint=self.fingerprint,
            descriptor=f"{self.descriptor}|ok={sorted(g_ok)}",
            grid=self.grid,
            spec=SafetyExtendedSpec(config=self.config, base=self.base, g_ok=g_ok),
        )


@dataclass
class Policy:
    """Greedy actions extracted from a table.

    ``per_goal[s, g]`` is the greedy action conditioned on goal ``g``;
    ``per_cell[s]`` maximizes over goals as well.  Ties resolve to the
    earliest action in the fixed order, then the lowest region id.
    """

    per_goal: np.ndarray
    per_cell: np.ndarray
    chosen_goal: np.ndarray
    mdp: LabeledMdp = field(repr=False)

    def action(self, cell) -> int:
        return int(self.per_cell[self.mdp.cell_index(cell)])

    def goal_action(self, cell, g: int) -> int:
        return int(self.per_goal[self.mdp.cell_index(cell), g])


def _transition_arrays(mdp: LabeledMdp):
    n_s, n_a = mdp.n_cells, mdp.n_actions
    nxt = np.zeros((n_s, n_a), dtype=np.int64)
    done = np.zeros((n_s, n_a), dtype=bool)
    cells = mdp.cells()
    for s_idx, cell in enumerate(cells):
        for a in range(n_a):
            s2, _, d = step(mdp, cell, a)
            nxt[s_idx, a] = mdp.cell_index(s2)
            done[s_idx, a] = d
    return cells, nxt, done


def _reward_array(mdp: LabeledMdp, spec: RewardSpec) -> np.ndarray:
    n_s, n_g, n_a = mdp.n_cells, mdp.n_regions, mdp.n_actions
    r = np.zeros((n_s, n_g, n_a))
    for s_idx, cell in enumerate(mdp.cells()):
        for a in range(n_a):
            s2, emitted, d = step(mdp, cell, a)
            for g in range(n_g):
                r[s_idx, g, a] = reward(spec, mdp, cell, a, g, s2, emitted, d)
    return r


def value_iterate(
    mdp: LabeledMdp,
    spec: RewardSpec,
    tol: float = 1e-9,
    max_sweeps: int | None = None,
) -> ExtendedQ:
    """Solve the table for ``spec`` to a fixed point.

    Returns the table with ``converged=False`` (never raising) when the
    residual still exceeds ``tol`` after ``max_sweeps`` sweeps; the default
    budget is ``n_cells * n_regions * c_p``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mdp.n_regions == 0:
        raise InvalidEnvironment("cannot train on an environment with no regions")
    cfg = spec.config
    if max_sweeps is None:
        # Convergence needs roughly one sweep per step of the longest optimal
        # walk; the floor keeps tiny worlds from under-budgeting.
        max_sweeps = max(mdp.n_cells * mdp.n_regions * cfg.c_p, 2 * mdp.n_cells + 4)

    _, nxt, done = _transition_arrays(mdp)
    r = _reward_array(mdp, spec)
    floor = cfg.r_neverterm_floor

    q = np.full(r.shape, floor)
    residual = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        v = q.max(axis=2)  # (s, g)
        cont = v[nxt, :].transpose(0, 2, 1)  # (s, a, g) -> (s, g, a)
        q_new = np.maximum(floor, r + np.where(done[:, None, :], 0.0, cont))
        residual = float(np.max(np.abs(q_new - q)))
        q = q_new
        sweeps += 1
        if residual <= tol:
            break

    return ExtendedQ(
        values=q,
        config=cfg,
        fingerprint=mdp.fingerprint(),
        descriptor=_describe(spec),
        grid=(mdp.width, mdp.height),
        spec=spec,
        converged=residual <= tol,
        residual=residual,
        sweeps=sweeps,
    )


def _describe(spec: RewardSpec) -> str:
    from .formula import render
    from .penalty import NegatedSpec, PositiveSpec

    if isinstance(spec, PositiveSpec):
        return render(spec.formula)
    if isinstance(spec, NegatedSpec):
        return "not-" + ",".join(sorted(spec.avoid))
    if isinstance(spec, BoundarySpec):
        return "U" if spec.upper else "EMPTY"
    if isinstance(spec, SafetyExtendedSpec):
        return f"{_describe(spec.base)}|ok={sorted(spec.g_ok)}"
    return spec.__class__.__name__


def boundary_tables(
    mdp: LabeledMdp,
    config: PenaltyConfig,
    tol: float = 1e-9,
    max_sweeps: int | None = None,
) -> tuple[ExtendedQ, ExtendedQ]:
    """The everywhere-succeed and everywhere-fail tables anchoring negation."""
    upper = value_iterate(mdp, BoundarySpec(config=config, upper=True), tol, max_sweeps)
    lower = value_iterate(mdp, BoundarySpec(config=config, upper=False), tol, max_sweeps)
    return upper, lower


def value_iterate_safety(
    mdp: LabeledMdp,
    base: RewardSpec,
    k: int,
    tol: float = 1e-9,
    max_sweeps: int | None = None,
    subset_cap: int = 1024,
    allow_explosion: bool = False,
) -> SafetyExtendedQ:
    """One converged slice per pass-through subset of at most ``k`` regions.

    Subsets are enumerated in (size, sorted ids) order, the empty set first.
    Raises :class:`SubsetExplosion` when the enumeration would exceed
    ``subset_cap`` slices and ``allow_explosion`` is not set.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if isinstance(base, SafetyExtendedSpec):
        raise ValueError("base spec is already safety extended")
    ids = range(mdp.n_regions)
    subsets: list[frozenset[int]] = []
    for size in range(min(k, mdp.n_regions) + 1):
        subsets.extend(frozenset(c) for c in combinations(ids, size))
    if len(subsets) > subset_cap and not allow_explosion:
        raise SubsetExplosion(
            f"{len(subsets)} subsets exceed cap {subset_cap}; raise the cap explicitly"
        )

    slices = []
    for g_ok in subsets:
        spec = SafetyExtendedSpec(config=base.config, base=base, g_ok=g_ok)
        slices.append(value_iterate(mdp, spec, tol, max_sweeps).values)
    values = np.stack(slices, axis=2)
    return SafetyExtendedQ(
        values=values,
        subsets=subsets,
        base=base,
        config=base.config,
        fingerprint=mdp.fingerprint(),
        descriptor=_describe(base) + f"|k={k}",
        grid=(mdp.width, mdp.height),
    )


def extract_policy(table: ExtendedQ, mdp: LabeledMdp) -> Policy:
    """Greedy policy with the documented tie-breaking.

    Per cell the action score is the max over goals; ``np.argmax`` takes the
    first maximizer, which is exactly the fixed action order and, within an
    action, the lowest region id.
    """
    if table.values.shape[0] != mdp.n_cells or table.values.shape[1] != mdp.n_regions:
        raise IncompatibleTables("table shape does not match environment")
    q = table.values
    per_goal = q.argmax(axis=2).astype(np.int64)  # first max = action order
    per_action = q.max(axis=1)  # (s, a)
    per_cell = per_action.argmax(axis=1).astype(np.int64)
    chosen_goal = q[np.arange(q.shape[0]), :, per_cell].argmax(axis=1).astype(np.int64)
    return Policy(per_goal=per_goal, per_cell=per_cell, chosen_goal=chosen_goal, mdp=mdp)


def bellman_residual(table: ExtendedQ, mdp: LabeledMdp) -> float:
    """Sup-norm residual of one extra backup; zero at the exact fixed point."""
    if table.spec is None:
        raise ValueError("residual is only defined for trained tables")
    _, nxt, done = _transition_arrays(mdp)
    r = _reward_array(mdp, table.spec)
    floor = table.config.r_neverterm_floor
    q = table.values
    v = q.max(axis=2)
    cont = v[nxt, :].transpose(0, 2, 1)
    q_new = np.maximum(floor, r + np.where(done[:, None, :], 0.0, cont))
    return float(np.max(np.abs(q_new - q)))


def policy_arrows(policy: Policy) -> list[str]:
    """One glyph per cell, rows top first: moves as arrows, stay as a dot."""
    glyphs = {"up": "↑", "down": "↓", "left": "←", "right": "→", "stay": "●"}
    mdp = policy.mdp
    rows = []
    idx = 0
    for _ in range(mdp.height):
        row = []
        for _ in range(mdp.width):
            row.append(glyphs[ACTIONS[int(policy.per_cell[idx])]])
            idx += 1
        rows.append(" ".join(row))
    return rows
