"""Labeled deterministic grid worlds.

States are cells ``(x, y)`` with ``x`` growing right and ``y`` growing up.
A labeling function maps some cells to non-empty sets of propositions;
maximal 4-connected groups of cells sharing the same label form *regions*.
Walking the grid emits a label only when the label under the agent changes,
so re-entering cells of the same region is silent.

An episode ends only by choosing ``stay`` while inside a region.  ``stay``
anywhere else, and any move that would leave the grid, is an absorbed no-op.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import InvalidEnvironment

Cell = tuple[int, int]
LabelSet = frozenset[str]

EMPTY: LabelSet = frozenset()

# Fixed action order; ties in greedy argmaxes resolve to the earliest entry.
ACTIONS: tuple[str, ...] = ("up", "down", "left", "right", "stay")
ACTION_DELTAS: tuple[Cell, ...] = ((0, 1), (0, -1), (-1, 0), (1, 0), (0, 0))
UP, DOWN, LEFT, RIGHT, STAY = range(5)


@dataclass(frozen=True)
class Region:
    """A maximal 4-connected component of identically labeled cells."""

    id: int
    cells: frozenset[Cell]
    label: LabelSet


@dataclass(frozen=True)
class LabeledMdp:
    width: int
    height: int
    propositions: tuple[str, ...]
    labels: dict[Cell, LabelSet] = field(repr=False)
    regions: tuple[Region, ...] = field(repr=False)
    region_of: dict[Cell, int] = field(repr=False)
    start: Cell | None = None

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def label(self, cell: Cell) -> LabelSet:
        return self.labels.get(cell, EMPTY)

    def cell_index(self, cell: Cell) -> int:
        """Row-major index with the top row (largest y) first."""
        x, y = cell
        return (self.height - 1 - y) * self.width + x

    def cells(self) -> list[Cell]:
        """All cells in index order."""
        out = []
        for y in range(self.height - 1, -1, -1):
            for x in range(self.width):
                out.append((x, y))
        return out

    def move(self, cell: Cell, action: int) -> Cell:
        dx, dy = ACTION_DELTAS[action]
        nxt = (cell[0] + dx, cell[1] + dy)
        return nxt if self.in_bounds(nxt) else cell

    def fingerprint(self) -> str:
        """Stable digest of the grid layout, used for table compatibility checks."""
        doc = {
            "width": self.width,
            "height": self.height,
            "propositions": list(self.propositions),
            "cells": sorted(
                (x, y, sorted(lbl)) for (x, y), lbl in self.labels.items()
            ),
        }
        blob = json.dumps(doc, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Execution:
    """A finite walk: per-step ``(cell, emitted label set)`` pairs.

    The first emitted set is always empty; later entries are non-empty only
    on steps where the label under the agent changed.
    """

    steps: list[tuple[Cell, LabelSet]]
    terminated: bool = False
    terminal_region: int | None = None


@dataclass
class PathStats:
    """Per-tier transition counts plus the termination indicator.

    ``termination`` is one of ``goal``, ``badTerm``, ``worstTerm``,
    ``neverTerm``; the counts cover every non-terminal transition.
    """

    l_unlabeled: int = 0
    l_bad_label: int = 0
    l_worst_pass_through: int = 0
    termination: str = "neverTerm"

    @property
    def l_max(self) -> int:
        return self.l_unlabeled + self.l_bad_label + self.l_worst_pass_through


def build_mdp(
    width: int,
    height: int,
    labels: dict[Cell, set[str] | frozenset[str] | list[str]],
    propositions: list[str] | tuple[str, ...] | None = None,
    start: Cell | None = None,
) -> LabeledMdp:
    """Construct a labeled grid world and derive its regions.

    Region ids are assigned deterministically: regions are sorted by the
    smallest of their cells under (x, top-down row) order, so ids are stable
    across rebuilds of the same layout.

    Raises :class:`InvalidEnvironment` for out-of-bounds cells, explicitly
    empty label sets, undeclared propositions, or a bad start cell.
    """
    if width < 1 or height < 1:
        raise InvalidEnvironment(f"grid must be at least 1x1, got {width}x{height}")

    norm: dict[Cell, LabelSet] = {}
    for cell, lbl in labels.items():
        x, y = cell
        if not (0 <= x < width and 0 <= y < height):
            raise InvalidEnvironment(f"labeled cell {cell} is out of bounds")
        lbl = frozenset(lbl)
        if not lbl:
            raise InvalidEnvironment(f"cell {cell} listed as labeled with an empty set")
        norm[cell] = lbl

    used = set().union(*norm.values()) if norm else set()
    if propositions is None:
        props = tuple(sorted(used))
    else:
        props = tuple(propositions)
        if len(set(props)) != len(props):
            raise InvalidEnvironment("duplicate proposition names")
        undeclared = used - set(props)
        if undeclared:
            raise InvalidEnvironment(
                f"labels use undeclared propositions: {sorted(undeclared)}"
            )

    if start is not None and not (0 <= start[0] < width and 0 <= start[1] < height):
        raise InvalidEnvironment(f"start cell {start} is out of bounds")

    regions = _derive_regions(norm, height)
    region_of = {c: r.id for r in regions for c in r.cells}
    return LabeledMdp(
        width=width,
        height=height,
        propositions=props,
        labels=norm,
        regions=regions,
        region_of=region_of,
        start=start,
    )


def _derive_regions(labels: dict[Cell, LabelSet], height: int) -> tuple[Region, ...]:
    # Flood-fill maximal 4-connected components of equal label.
    components: list[set[Cell]] = []
    seen: set[Cell] = set()
    for cell in labels:
        if cell in seen:
            continue
        lbl = labels[cell]
        comp = {cell}
        frontier = [cell]
        seen.add(cell)
        while frontier:
            cx, cy = frontier.pop()
            for nx, ny in ((cx, cy + 1), (cx, cy - 1), (cx - 1, cy), (cx + 1, cy)):
                nb = (nx, ny)
                if nb in labels and nb not in seen and labels[nb] == lbl:
                    seen.add(nb)
                    comp.add(nb)
                    frontier.append(nb)
        components.append(comp)

    def sort_key(comp: set[Cell]) -> tuple[int, int]:
        return min((x, height - 1 - y) for x, y in comp)

    components.sort(key=sort_key)
    return tuple(
        Region(id=i, cells=frozenset(comp), label=labels[next(iter(comp))])
        for i, comp in enumerate(components)
    )


def step(mdp: LabeledMdp, s: Cell, a: int) -> tuple[Cell, LabelSet, bool]:
    """One deterministic transition.

    Returns ``(next cell, emitted label set, done)``.  The emission is the
    next cell's label when it differs from the current cell's, else empty.
    ``done`` is true only for ``stay`` inside a region.
    """
    if not mdp.in_bounds(s):
        raise InvalidEnvironment(f"state {s} out of bounds")
    s2 = mdp.move(s, a)
    l_prev, l_next = mdp.label(s), mdp.label(s2)
    emitted = l_next if l_next != l_prev else EMPTY
    done = a == STAY and s in mdp.region_of
    return s2, emitted, done


def project(x: Execution) -> list[LabelSet]:
    """The per-step emitted label sets (first entry always empty)."""
    return [emitted for _, emitted in x.steps]


def project_nonempty(x: Execution) -> list[LabelSet]:
    """The subsequence of non-empty emissions."""
    return [emitted for _, emitted in x.steps if emitted]
