import pytest

from ybqubit.atom import AtomSpecies, build_level_scheme
from ybqubit.experiments import resolve


@pytest.fixture(scope="session")
def yb171():
    return build_level_scheme(AtomSpecies.YB171)


@pytest.fixture(scope="session")
def yb174():
    return build_level_scheme(AtomSpecies.YB174)


@pytest.fixture(scope="session")
def branching_cfg():
    return resolve(scenario="branching")
