import numpy as np
import pytest

from resilient_sse import gen_random_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_system(seed, m=8, n=3):
    return gen_random_system(m, n, np.random.default_rng(seed))
