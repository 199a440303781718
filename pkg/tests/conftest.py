import random

import pytest

from sopp.channel import LinkBudget, Topology, hop_probabilities
from sopp.gf_analysis import ThreeHopParams, three_hop_saturation


@pytest.fixture
def default_budget():
    return LinkBudget.from_db(gamma_db=8.0, theta_db=3.0, alpha=3.0)


@pytest.fixture
def sym3(default_budget):
    return hop_probabilities(Topology.symmetric(3), default_budget)


def random_params(rng: random.Random, with_load=True) -> ThreeHopParams:
    """Random valid three-hop parameters with p20 < p10 and p11 <= p10_1."""
    p10 = [rng.uniform(0.05, 1.0) for _ in range(3)]
    p20_1 = rng.uniform(0.0, 0.95) * p10[0]
    p20_2 = rng.uniform(0.0, 0.95) * p10[1]
    p11 = rng.uniform(0.0, 1.0) * p10[0]
    base = ThreeHopParams(p10[0], p10[1], p10[2], p20_1, p20_2, p11)
    if not with_load:
        return base
    tau = three_hop_saturation(base)
    return base.with_(lam=rng.uniform(0.01, 0.99) * tau, C=rng.uniform(0.0, 2.0))


@pytest.fixture
def param_draws():
    rng = random.Random(20240601)
    return [random_params(rng) for _ in range(100)]
