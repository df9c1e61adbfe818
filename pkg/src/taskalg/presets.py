"""Ready-made environments for tests, demos and benchmarks."""

from __future__ import annotations

import random

from .mdp import Cell, LabeledMdp, build_mdp


def example_world() -> LabeledMdp:
    """The 5x4 three-proposition bench world used throughout the test suite.

    Six regions: three single-cell A-ish regions down column x=1, a two-cell
    B region at the top of column x=2, the A,B,C cell below it, and a C cell
    at (3, 1).
    """
    labels = {
        (1, 2): {"A"},
        (1, 1): {"A", "B"},
        (1, 0): {"A"},
        (2, 3): {"B"},
        (2, 2): {"B"},
        (2, 1): {"A", "B", "C"},
        (3, 1): {"C"},
    }
    return build_mdp(5, 4, labels, propositions=("A", "B", "C"), start=(0, 0))


# Start cells exercised by the demo walks on example_world().
SW_START: Cell = (0, 0)  # bottom-left corner
NE_START: Cell = (4, 3)  # top-right corner


def split_route_world() -> LabeledMdp:
    """A 7x7 layout where composing two learned negated tasks chatters.

    A fully labeled column separates the start side from a single C goal.
    The short dodges pass a B region (fine for not-A, fatal for not-B) or an
    A region (the mirror); the long way around passes only a D region.  Each
    negated table encodes its own short dodge, so their conjunction with the
    C task hovers near the column instead of committing.  Forgiving the
    north D region (a one-region pass-through subset) makes every component
    encode the long route and the composition terminates safely.
    """
    labels = {
        (3, 6): {"D"},
        (3, 5): {"B"},
        (3, 4): {"B"},
        (3, 3): {"A", "B"},
        (3, 2): {"A"},
        (3, 1): {"A"},
        (3, 0): {"D"},
        (6, 3): {"C"},
    }
    return build_mdp(7, 7, labels, propositions=("A", "B", "C", "D"), start=(0, 3))


# The chattering demonstration start on split_route_world().
STAR: Cell = (0, 3)


def random_world(
    seed: int,
    width: int = 8,
    height: int = 8,
    props: tuple[str, ...] = ("A", "B", "C"),
    min_regions: int = 3,
    max_regions: int = 6,
) -> LabeledMdp:
    """Seeded random layout with every proposition present somewhere.

    Regions are grown as small connected blobs with random non-empty labels;
    same-label blobs that touch merge into one region, so the generator
    resamples until the derived region count lands in range and each
    proposition labels at least one region.
    """
    rng = random.Random(seed)
    for _ in range(1000):
        n_blobs = rng.randint(min_regions, max_regions)
        labels: dict[Cell, frozenset[str]] = {}
        for _ in range(n_blobs):
            lbl = frozenset(rng.sample(props, rng.randint(1, len(props))))
            size = rng.randint(1, 4)
            x0, y0 = rng.randrange(width), rng.randrange(height)
            if (x0, y0) in labels:
                continue
            blob = {(x0, y0)}
            while len(blob) < size:
                bx, by = rng.choice(sorted(blob))
                nb = rng.choice([(bx + 1, by), (bx - 1, by), (bx, by + 1), (bx, by - 1)])
                if 0 <= nb[0] < width and 0 <= nb[1] < height and nb not in labels:
                    blob.add(nb)
                else:
                    break
            for cell in blob:
                labels[cell] = lbl
        if not labels:
            continue
        world = build_mdp(width, height, labels, propositions=props)
        covered = set().union(*(r.label for r in world.regions))
        if min_regions <= world.n_regions <= max_regions and covered == set(props):
            return world
    raise RuntimeError(f"could not generate a world for seed {seed}")
