import numpy as np
import pytest

from beliefgraph import (
    LikelihoodModel,
    erdos_renyi_adjacency,
    random_combination_matrix,
    random_likelihoods,
)


@pytest.fixture
def small_setup():
    """A small seeded network and observation model shared by tests."""
    adjacency, _ = erdos_renyi_adjacency(6, 0.5, seed=30)
    combination = random_combination_matrix(adjacency, seed=31)
    model = random_likelihoods(6, 3, 4, seed=32)
    return model, combination


@pytest.fixture
def two_state_model():
    """Two agents, two hypotheses, fully hand-specified tables."""
    tables = [
        np.array([[0.8, 0.2], [0.2, 0.8]]),
        np.array([[0.6, 0.3], [0.4, 0.7]]),
    ]
    return LikelihoodModel(tables, floor=0.05)
