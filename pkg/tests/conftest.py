import numpy as np
import pytest

from capwalk.green import default_table


@pytest.fixture(scope="session")
def table():
    """The shared R=24 Green table (disk-cached across sessions)."""
    return default_table()


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(key=20240811))
