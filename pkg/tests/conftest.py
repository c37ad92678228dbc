import numpy as np
import pytest

from reglater import (FeatureSpec, PayoffSpec, ProcessSpec, build_basis,
                      truncated_feature_law)


@pytest.fixture(scope="session")
def brownian10():
    return ProcessSpec("brownian", horizon=10.0)


@pytest.fixture(scope="session")
def terminal10():
    return FeatureSpec("terminal", eval_time=10.0)


@pytest.fixture(scope="session")
def tanh_payoff():
    return PayoffSpec("tanh")


@pytest.fixture(scope="session")
def w10_law(brownian10, terminal10):
    """Truncated N(0, 10) law of the terminal value plus its domain."""
    return truncated_feature_law(brownian10, terminal10, 1e-4)


@pytest.fixture(scope="session")
def basis_cache(w10_law):
    """Bases on the truncated N(0,10) law, built once per session."""
    dist, _ = w10_law
    cache = {}

    def get(K: int):
        if K not in cache:
            cache[K] = build_basis(dist, K)
        return cache[K]

    return get


def slope_of(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])
