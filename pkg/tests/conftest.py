import numpy as np
import pytest

from pcdual.data import SyntheticSpec, gen_synthetic
from pcdual.diffcore import stream
from pcdual.training import RunConfig


def desk_config(**changes) -> RunConfig:
    """Standard widths, 64 sampled points, centroid counts scaled to match."""
    base = dict(points=64, allow_any_points=True, batch_size=4, epochs=50, n1_levels=(32, 16),
                k_levels=(8, 8), seed=0)
    base.update(changes)
    return RunConfig(**base)


def tiny_run_config(**changes) -> RunConfig:
    base = dict(points=16, allow_any_points=True, batch_size=4, epochs=3, widths="tiny",
                n1_levels=(8, 4), k_levels=(4, 4), seed=0)
    base.update(changes)
    return RunConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synthetic_small():
    return gen_synthetic(SyntheticSpec(4, 4, 48), stream(7, "synthetic"))
