import math

import numba
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sopp.channel import LinkBudget, Topology, hop_probabilities
from sopp.errors import InvalidInputError
from sopp.gf_analysis import two_hop_delay, two_hop_empty_probability, two_hop_saturation
from sopp.simulator import (SimConfig, SimState, _sinr, decide_transmitters, estimate_saturation,
                            gain_matrix, run, run_slot, sinr)

GAMMA = 10 ** 0.8


# ------------------------------------------------------------- transmitters

@pytest.mark.parametrize("occ,proto,slot,d,expected", [
    ((1, 1, 1), "s-opp", 0, 1, {1, 3}),
    ((1, 1, 0), "s-opp", 0, 1, {2}),
    ((1, 0, 0), "s-opp", 0, 1, {1}),
    ((0, 0, 0), "s-opp", 0, 1, set()),
    ((1, 1, 1, 1, 1), "s-opp", 0, 1, {1, 3, 5}),
    ((1, 1, 1), "opp", 0, 1, {1, 2, 3}),
    ((1, 0, 1), "opp", 0, 1, {1, 3}),
    ((1, 1, 1), "mh", 4, 3, {2}),
    ((1, 1, 1), "mh", 3, 3, {1}),
    ((1, 1, 1, 1), "mh", 0, 2, {1, 3}),
    ((1, 1, 1, 1), "mh", 5, 1, {1, 2, 3, 4}),
])
def test_decide_transmitters(occ, proto, slot, d, expected):
    assert decide_transmitters(occ, proto, slot, d) == expected


@given(st.lists(st.integers(0, 3), min_size=2, max_size=6))
def test_s_opp_rule(occ):
    tx = decide_transmitters(occ, "s-opp")
    n = len(occ)
    for i in range(1, n + 1):
        has = occ[i - 1] > 0
        succ_tx = (i + 1) in tx
        assert (i in tx) == (has and (i == n or not succ_tx))


# --------------------------------------------------------------------- SINR

def _cfg(n, **kw):
    return SimConfig(topology=Topology.symmetric(n), slots=10, warmup=0, **kw)


def test_sinr_single_transmitter():
    cfg = _cfg(2)
    h = np.ones((2, 3))
    assert sinr(0, 1, [0], h, cfg) == pytest.approx(GAMMA)


def test_sinr_equal_distance_interferer():
    cfg = _cfg(3)
    h = np.ones((3, 4))
    # source -> relay 1 (1 hop), relay 2 interferes from 1 hop
    val = sinr(0, 1, [0, 2], h, cfg)
    assert val == pytest.approx(GAMMA / (1 + GAMMA))
    assert val == pytest.approx(0.8632, abs=1e-4)
    assert val < cfg.budget.theta


def test_sinr_a2_exclusion():
    cfg = _cfg(4, enforce_A2=True)
    h = np.ones((4, 5))
    # last relay -> destination, with the source (4 hops away) also transmitting
    alone = sinr(3, 4, [3], h, cfg)
    with_far = sinr(3, 4, [3, 0], h, cfg)
    assert with_far == alone
    cfg_full = _cfg(4)
    assert sinr(3, 4, [3, 0], h, cfg_full) < alone


def test_sinr_no_noise():
    cfg = _cfg(2, noise_on=False)
    assert sinr(0, 1, [0], np.ones((2, 3)), cfg) == math.inf


@numba.njit
def _p11_trials(fades, gain, theta):
    tx = np.array([True, False, True])
    ok = 0
    for k in range(fades.shape[0]):
        if _sinr(0, 1, tx, fades[k], gain, True, True) > theta:
            ok += 1
    return ok


def test_p11_empirical(default_budget):
    """Source -> relay 1 under relay-2 interference succeeds w.p. p11."""
    cfg = _cfg(3, enforce_A2=True)
    rng = np.random.default_rng(11)
    n = 1_000_000
    fades = rng.standard_exponential((n, 3, 4))
    hits = _p11_trials(fades, gain_matrix(cfg), cfg.budget.theta)
    p11 = hop_probabilities(cfg.topology, default_budget).p11[0]
    se = math.sqrt(p11 * (1 - p11) / n)
    assert abs(hits / n - p11) < 4 * se


# ---------------------------------------------------------------- run_slot

def test_two_hop_direct_delivery():
    cfg = _cfg(2, lam=0.0)
    st_ = SimState(cfg)
    st_.push(0, -1)                       # arrived at the end of slot -1
    h = np.full((2, 3), 1e-6)
    h[0, 2] = 10.0                        # strong source -> destination link
    delays = st_.step_with(h)
    assert delays == [1]
    assert st_.occupancy == (0, 0)


def test_two_hop_relay_then_destination():
    cfg = _cfg(2, lam=0.0)
    s = SimState(cfg)
    s.push(0, -1)
    h = np.full((2, 3), 1e-6)
    h[0, 1] = 10.0                        # only the relay decodes
    assert s.step_with(h) == []
    assert s.occupancy == (0, 1)
    h = np.full((2, 3), 1e-6)
    h[1, 2] = 10.0
    assert s.step_with(h) == [2]


def test_full_silenced_relay_cannot_receive():
    """N=3, Br=1: relay 1 is full and silenced by relay 2, so the source's packet stays."""
    cfg = _cfg(3, lam=0.0, Br=1)
    s = SimState(cfg)
    s.push(0, -1)
    s.push(1, -1)
    s.push(2, -1)
    h = np.full((3, 4), 1e-6)
    h[0, 1] = 100.0                       # would decode at relay 1
    h[2, 3] = 100.0                       # relay 2 delivers
    assert s.step_with(h) == [1]
    assert s.occupancy == (1, 1, 0)


def test_silenced_relay_with_space_receives():
    cfg = _cfg(3, lam=0.0, Br=2)
    s = SimState(cfg)
    s.push(0, -1)
    s.push(1, -1)
    s.push(2, -1)
    h = np.full((3, 4), 1e-6)
    h[0, 1] = 100.0
    h[2, 3] = 100.0
    s.step_with(h)
    assert s.occupancy == (0, 2, 0)


def test_arrival_appended_at_end_of_slot():
    cfg = _cfg(2, lam=0.5, Bs=2)
    s = SimState(cfg)
    h = np.zeros((2, 3))
    s.step_with(h, arrival_u=0.1)
    assert s.queue(0) == [0]
    s.step_with(h, arrival_u=0.1)
    s.step_with(h, arrival_u=0.1)         # source full: dropped
    assert s.occupancy[0] == 2
    assert int(s.acc[3]) == 1


def test_run_slot_uses_rng():
    cfg = _cfg(3, lam=0.5)
    a, b = SimState(cfg), SimState(cfg)
    ra, rb = np.random.default_rng(5), np.random.default_rng(5)
    for _ in range(10):
        _, da = run_slot(a, ra)
        _, db = run_slot(b, rb)
        assert da == db
    assert a.occupancy == b.occupancy


def test_config_validation():
    with pytest.raises(InvalidInputError):
        SimConfig(protocol="aloha")
    with pytest.raises(InvalidInputError):
        SimConfig(lam=1.5)
    with pytest.raises(InvalidInputError):
        SimConfig(slots=100, warmup=100)
    with pytest.raises(InvalidInputError):
        SimConfig(topology=Topology.symmetric(3), protocol="mh", mh_d=4)
    with pytest.raises(InvalidInputError):
        SimConfig(Br=0)


# --------------------------------------------------------------------- run

def test_zero_load():
    s = run(SimConfig(lam=0.0, slots=20_000, warmup=100))
    assert s.delivered_count == 0 and s.throughput == 0.0


def test_determinism():
    cfg = SimConfig(topology=Topology.symmetric(3), lam=0.25, slots=50_000, warmup=1000, seed=42)
    assert run(cfg) == run(cfg)
    assert run(cfg) != run(cfg.replace(seed=43))


def test_perfect_channel():
    b = LinkBudget(alpha=3.0, theta=0.0, gamma=1.0)
    cfg = SimConfig(budget=b, slots=20_000, warmup=100)
    assert estimate_saturation(cfg) == 1.0
    s = run(cfg.replace(lam=0.7))
    assert s.mean_delay == 1.0


def test_two_hop_matches_closed_form(default_budget):
    probs = hop_probabilities(Topology.symmetric(2), default_budget)
    s = run(SimConfig(lam=0.2, slots=1_000_000, seed=3, enforce_A1=True, enforce_A2=True, Br=1))
    D = two_hop_delay(0.2, probs.p10[0], probs.p20[0])
    assert abs(s.mean_delay - D) < 3 * s.delay_ci
    g00 = two_hop_empty_probability(0.2, probs.p10[0], probs.p20[0])
    assert s.g000 == pytest.approx(g00, abs=0.01)


def test_state_frequencies_ordered():
    s = run(SimConfig(topology=Topology.symmetric(3), lam=0.2, slots=200_000, seed=1))
    assert 0 <= s.g000 <= s.g001 <= 1
    assert s.g000 <= s.g010 <= 1
    assert s.C_estimate >= 0


configs = st.builds(
    lambda n, proto, lam, br, bs, a1, a2, seed, sat: SimConfig(
        topology=Topology.symmetric(n), protocol=proto, mh_d=1 + seed % n, lam=lam, Br=br, Bs=bs,
        enforce_A1=a1, enforce_A2=a2, slots=4000, warmup=200, seed=seed, saturated=sat),
    st.integers(2, 5), st.sampled_from(["s-opp", "opp", "mh"]), st.floats(0.0, 1.0),
    st.integers(1, 4), st.sampled_from([1.0, 3.0, 50.0, math.inf]), st.booleans(), st.booleans(),
    st.integers(0, 10_000), st.booleans())


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(configs)
def test_structural_invariants(cfg):
    s = run(cfg)          # the kernel raises on half-duplex or buffer violations
    if not cfg.saturated:
        assert s.arrivals_accepted == s.delivered_total + s.in_system_end
    assert 0.0 <= s.throughput <= 1.0
    if s.delivered_count:
        assert s.mean_delay >= 1.0
    assert 0.0 <= s.g000 <= s.g001 <= 1.0
    assert all(0.0 <= b <= 1.0 for b in s.busy_probability)


def test_little_law():
    cfg = SimConfig(topology=Topology.symmetric(3), lam=0.2, slots=400_000, seed=9)
    s = run(cfg)
    # packets in flight at the warmup boundary and at the horizon make this approximate
    assert s.little_delay() == pytest.approx(s.mean_delay, abs=max(s.delay_ci, 0.01 * s.mean_delay))


def test_two_hop_saturation_sim(default_budget):
    probs = hop_probabilities(Topology.symmetric(2), default_budget)
    tau = two_hop_saturation(probs.p10[0], probs.p20[0])
    assert estimate_saturation(SimConfig(slots=500_000, seed=2)) == pytest.approx(tau, abs=0.005)
