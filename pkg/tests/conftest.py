import random

import pytest

from odsurrogate.ingest import PopulationTable
from odsurrogate.network import Level, ODNetwork, PartitionHierarchy
from odsurrogate.pipeline import Inputs
from odsurrogate.synth import SynthConfig, generate_ground_truth, make_survey_bundle

FO, FD, CO = Level.FINE_ORIGIN, Level.FINE_DEST, Level.COARSE


def fine(edges):
    return ODNetwork(FO, FD, edges)


def coarse(edges):
    return ODNetwork(CO, CO, edges)


def mixed(edges):
    return ODNetwork(CO, FD, edges)


@pytest.fixture
def tiny_hierarchy():
    # two SA2s, each with two SA1s and one or two DZNs
    return PartitionHierarchy(
        {"a1": "A", "a2": "A", "b1": "B", "b2": "B"},
        {"ya": "A", "yb1": "B", "yb2": "B"},
    )


def random_hierarchy(rng: random.Random, n_sa2=4, sa1_per=3, dzn_per=2):
    sa1, dzn = {}, {}
    for s in range(n_sa2):
        code = f"S{s}"
        for i in range(rng.randint(1, sa1_per)):
            sa1[f"x{s}_{i}"] = code
        for i in range(rng.randint(1, dzn_per)):
            dzn[f"y{s}_{i}"] = code
    return PartitionHierarchy(sa1, dzn)


def random_fine(rng: random.Random, h: PartitionHierarchy, density=0.4, wmax=40):
    edges = {}
    for o in h.sa1_to_sa2:
        for d in h.dzn_to_sa2:
            if rng.random() < density:
                edges[(o, d)] = rng.randint(1, wmax)
    return fine(edges)


@pytest.fixture(scope="session")
def small_world():
    return generate_ground_truth(SynthConfig(n_sa2=30, seed=11))


@pytest.fixture(scope="session")
def small_bundle(small_world):
    return make_survey_bundle(small_world, 5)


@pytest.fixture(scope="session")
def small_inputs(small_bundle):
    return Inputs.from_bundle(small_bundle)


def pop(counts, level=FO):
    return PopulationTable(counts, level)


# -- desk-scale fixtures shared by the acceptance suite ---------------------------

DESK_WORLD_SEED = 0
DESK_BUNDLE_SEED = 7


@pytest.fixture(scope="session")
def desk_world():
    return generate_ground_truth(SynthConfig(seed=DESK_WORLD_SEED))


@pytest.fixture(scope="session")
def desk_bundle(desk_world):
    return make_survey_bundle(desk_world, DESK_BUNDLE_SEED)


@pytest.fixture(scope="session")
def desk_inputs(desk_bundle):
    return Inputs.from_bundle(desk_bundle)


@pytest.fixture(scope="session")
def desk_runs(desk_inputs):
    """Pipeline results for three master seeds on the desk bundle."""
    from odsurrogate.pipeline import run

    return {seed: run(desk_inputs, seed=seed) for seed in (1, 2, 3)}


# -- acceptance result lines ------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
