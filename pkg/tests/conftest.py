import numpy as np
import pytest

from mimcr.catalog import make_catalog


@pytest.fixture
def toy3():
    """v0={p0,p1}, v1={p1,p2}, v2={p2}; p0,p1 type 0, p2 type 1."""
    return make_catalog(
        item_attrs=[{0, 1}, {1, 2}, {2}],
        attr_type_of=[0, 0, 1],
        interactions=[(0, 0), (0, 1), (1, 2)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
