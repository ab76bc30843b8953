import numpy as np
import pytest

from enprolab.data import DescriptorSet
from enprolab.synthetic import SynthSpec, generate


@pytest.fixture
def two_class_twenty():
    """2 classes x 10 samples, two tiny histogram groups."""
    rng = np.random.default_rng(0)
    g0 = rng.dirichlet(np.ones(3), size=20)
    g1 = rng.dirichlet(np.ones(4), size=20)
    return DescriptorSet((g0, g1), np.repeat([0, 1], 10), 2)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthSpec(class_count=3, samples_per_class=30, groups=((8, 1.0), (12, 1.0)), seed=3))


@pytest.fixture(scope="session")
def default_synth():
    return generate(SynthSpec())
