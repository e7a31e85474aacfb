import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from balayage.instances import random_problem, rng_for
from balayage.markov_core import random_substochastic

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def chain_from_seed(seed, n_min=2, n_max=8):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    return random_substochastic(rng, n)


def problem_from_seed(seed, family=None):
    return random_problem(rng_for(seed, 0, 77), family=family)
