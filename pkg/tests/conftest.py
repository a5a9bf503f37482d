import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cfrelay.design import design_cf, design_df, desk_config  # noqa: E402
from cfrelay.graph import BipartiteGraph, CodeInstance, instantiate_c2  # noqa: E402


@pytest.fixture(scope="session")
def cf_design():
    return design_cf(0.5)


@pytest.fixture(scope="session")
def desk_design():
    return design_cf(0.5, desk_config())


@pytest.fixture(scope="session")
def df_design():
    return design_df(0.5)


def random_check_instance(n: int, k: int, rng, density: float = 0.35) -> CodeInstance:
    """Small C1 instance from a random dense-ish check matrix (every column used)."""
    h = (rng.random((k, n)) < density).astype(np.uint8)
    for c in np.flatnonzero(h.sum(axis=0) == 0):
        h[rng.integers(k), c] = 1
    left, right = np.nonzero(h.T)
    g = BipartiteGraph.from_edges(n, k, left, right)
    return CodeInstance("C1", n, {"qs": g})


@pytest.fixture(scope="session")
def small_c2(desk_design):
    def make(n: int, seed: int):
        d = desk_design
        return instantiate_c2(d.ldgm.dist, d.config.d_b, d.ldpc.v_bd, d.ldpc.v_pd, n, seed)
    return make
