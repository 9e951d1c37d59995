import numpy as np
import pytest

from fastrates import TabularMdp


def deterministic_mdp(rewards, next_state, gamma, initial=None):
    """Tabular MDP whose transition from (s, a) goes to next_state[s][a] surely."""
    r = np.asarray(rewards, float)
    S, A = r.shape
    P = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            P[s, a, next_state[s][a]] = 1.0
    mu = np.full(S, 1.0 / S) if initial is None else np.asarray(initial, float)
    return TabularMdp(r, P, mu, gamma)


@pytest.fixture
def two_state():
    # r = [[1,0],[0,1]], s' = a, gamma = 0.5
    return deterministic_mdp([[1, 0], [0, 1]], [[0, 1], [0, 1]], 0.5)


@pytest.fixture
def single_state():
    return TabularMdp(np.array([[1.0]]), np.ones((1, 1, 1)), np.array([1.0]), 0.9)
