import pytest

from taskalg.algebra import TaskLibrary
from taskalg.penalty import PenaltyConfig, derive_penalty_multiplier
from taskalg.presets import example_world, random_world

# Derived once from the bench world and frozen as a regression constant.
EXAMPLE_WORLD_CP = 8


@pytest.fixture(scope="session")
def world():
    return example_world()


@pytest.fixture(scope="session")
def cfg(world):
    c_p = derive_penalty_multiplier(world).c_p
    assert c_p == EXAMPLE_WORLD_CP
    return PenaltyConfig(c_p=c_p)


@pytest.fixture(scope="session")
def library(world, cfg):
    return TaskLibrary.train(
        world, cfg, positive=("A", "B", "C"), negated=("A", "B", "C")
    )


def region_by_label(mdp, labels):
    """The unique region carrying exactly this label set."""
    wanted = frozenset(labels)
    matches = [r for r in mdp.regions if r.label == wanted]
    assert len(matches) == 1, f"label {sorted(wanted)} matches {len(matches)} regions"
    return matches[0]


def make_random_worlds(n, **kwargs):
    return [random_world(seed) for seed in range(n)] if not kwargs else [
        random_world(seed, **kwargs) for seed in range(n)
    ]
