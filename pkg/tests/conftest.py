import numpy as np
import pytest

from qctf.events import GeneratorConfig, generate_event
from qctf.geometry import DetectorGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def benign_event():
    return generate_event(GeneratorConfig(n=20, rng_seed=3), DetectorGeometry())


def true_vector(event, pid):
    hits = dict(event.particle_hits(pid))
    return tuple(hits.get(l, -1) for l in range(event.n_layers))
