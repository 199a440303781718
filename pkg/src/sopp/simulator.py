"""Slotted-time Monte Carlo simulation of S-OPP, OPP and MH on a line.

Node ``i`` (0-based, 0 = source) holds a FIFO of packet arrival stamps; node
``N`` is the destination sink.  Each slot:

1. transmitters are chosen from the start-of-slot occupancy;
2. unit-mean exponential fading is drawn for every ordered (node, receiver)
   pair, fresh each slot;
3. transmitters are served from the one nearest the destination down: the
   packet moves to the farthest eligible receiver with SINR > theta that has
   not already accepted a packet this slot;
4. a Bernoulli(lambda) arrival joins the source queue at the end of the slot.

A packet arriving at the end of slot ``t`` has stamp ``t`` and a delivery in
slot ``s`` contributes a delay of ``s - t`` (so delay >= 1).

The per-slot logic lives in one numba kernel that serves both :func:`run`
(blocks of slots) and :func:`run_slot` (a single slot).  Random numbers are
drawn by numpy's PCG64 in fixed-size blocks, so a run is bit-reproducible
from its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numba
import numpy as np
from scipy import stats as _st

from .channel import LinkBudget, Topology
from .errors import InvalidInputError

PROTOCOLS = ("s-opp", "opp", "mh")
_PROTO_CODE = {"s-opp": 0, "opp": 1, "mh": 2}

BLOCK_SLOTS = 1 << 15
N_BATCHES = 20
UNBOUNDED = math.inf


@dataclass(frozen=True)
class SimConfig:
    topology: Topology = field(default_factory=lambda: Topology.symmetric(2))
    budget: LinkBudget = field(default_factory=LinkBudget)
    protocol: str = "s-opp"
    mh_d: int = 1
    lam: float = 0.0
    saturated: bool = False
    Bs: float = UNBOUNDED
    Br: int = 50
    slots: int = 1_000_000
    warmup: int = 10_000
    seed: int = 0
    enforce_A1: bool = False
    enforce_A2: bool = False
    noise_on: bool = True

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise InvalidInputError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.protocol == "mh" and not 1 <= self.mh_d <= self.hops:
            raise InvalidInputError(f"mh_d must lie in [1, {self.hops}], got {self.mh_d}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError(f"lambda must lie in [0, 1], got {self.lam}")
        if not (self.Bs >= 1):
            raise InvalidInputError(f"Bs must be >= 1, got {self.Bs}")
        if int(self.Br) != self.Br or self.Br < 1:
            raise InvalidInputError(f"Br must be an integer >= 1, got {self.Br}")
        if self.slots < 1 or not 0 <= self.warmup < self.slots:
            raise InvalidInputError(f"need 0 <= warmup < slots, got warmup={self.warmup}, slots={self.slots}")

    @property
    def hops(self) -> int:
        return self.topology.hops

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass
class SimStats:
    delivered_count: int
    mean_delay: float
    delay_ci: float
    throughput: float
    busy_probability: Tuple[float, ...]
    g000: float
    g001: float
    g010: float
    dropped_count: int
    mean_in_system: float
    accepted_rate: float
    arrivals_accepted: int
    delivered_total: int
    in_system_end: int

    @property
    def C_estimate(self) -> float:
        """g001/g000 - 1 from the empty-state frequencies."""
        return self.g001 / self.g000 - 1.0 if self.g000 > 0 else math.nan

    def little_delay(self) -> float:
        """Mean delay implied by Little's law from the occupancy average."""
        return self.mean_in_system / self.accepted_rate if self.accepted_rate > 0 else math.nan


# ------------------------------------------------------------------ kernel

@numba.njit(cache=True)
def _decide(occ, proto, slot, mh_d, tx):
    n = occ.shape[0]
    if proto == 0:
        for i in range(n - 1, -1, -1):
            tx[i] = occ[i] > 0 and (i == n - 1 or not tx[i + 1])
    elif proto == 1:
        for i in range(n):
            tx[i] = occ[i] > 0
    else:
        g = slot % mh_d
        for i in range(n):
            tx[i] = occ[i] > 0 and (i % mh_d) == g


@numba.njit(cache=True)
def _sinr(i, r, tx, fade, gain, noise_on, a2):
    sig = gain[i, r] * fade[i, r]
    den = 1.0 if noise_on else 0.0
    for j in range(tx.shape[0]):
        if j == i or not tx[j]:
            continue
        if a2 and abs(j - r) > 2:
            continue
        den += gain[j, r] * fade[j, r]
    if den == 0.0:
        return np.inf
    return sig / den


@numba.njit(cache=True)
def _step_block(t0, nslots, fades, unif, gain, theta, proto, mh_d, lam, saturated,
                a1, a2, noise_on, warmup, slots_total,
                src_buf, src_head, relay_buf, relay_head, count, cap,
                acc_i, batch_sum, batch_cnt, busy, last_delays):
    """Advance ``nslots`` slots starting at slot ``t0``.

    Integer accumulators ``acc_i``: 0 delivered (post-warmup), 1 delivered
    total, 2 arrivals accepted, 3 dropped, 4 g000 hits, 5 g001 hits,
    6 g010 hits, 7 occupancy sum, 8 delay sum (post-warmup), 9 sampled slots,
    10 deliveries in the last slot, 11 accepted (post-warmup).
    """
    n = count.shape[0]
    occ = np.zeros(n, dtype=np.int64)
    tx = np.zeros(n, dtype=np.bool_)
    claimed = np.zeros(n + 1, dtype=np.bool_)
    span = slots_total - warmup
    src_cap = src_buf.shape[0]
    rcap = relay_buf.shape[1]
    for k in range(nslots):
        t = t0 + k
        fade = fades[k]
        for i in range(n):
            occ[i] = count[i]
        if saturated:
            occ[0] = 1
        sampling = t >= warmup
        if sampling:
            acc_i[9] += 1
            tot = 0
            for i in range(n):
                if occ[i] > 0:
                    busy[i] += 1
                tot += count[i]
            acc_i[7] += tot
            q2 = occ[1] if n > 1 else 0
            q3 = occ[2] if n > 2 else 0
            if occ[0] == 0:
                if q2 == 0:
                    acc_i[5] += 1
                    if q3 == 0:
                        acc_i[4] += 1
                if q3 == 0:
                    acc_i[6] += 1
            b = (t - warmup) * 20 // span

        _decide(occ, proto, t, mh_d, tx)
        for r in range(n + 1):
            claimed[r] = False
        acc_i[10] = 0
        for i in range(n - 1, -1, -1):
            if not tx[i]:
                continue
            if proto == 2:
                far = i + 1
            elif a1:
                far = min(n, i + 2)
            else:
                far = n
            chosen = -1
            for r in range(far, i, -1):
                if r < n:
                    if tx[r] or count[r] >= cap[r]:
                        continue
                if claimed[r]:
                    continue
                if _sinr(i, r, tx, fade, gain, noise_on, a2) > theta:
                    chosen = r
                    break
            if chosen < 0:
                continue
            if chosen < n and tx[chosen]:
                raise AssertionError("half-duplex violated")
            claimed[chosen] = True
            # pop head-of-line packet of node i
            if i == 0:
                if saturated:
                    stamp = t - 1
                else:
                    stamp = src_buf[src_head[0]]
                    src_head[0] = (src_head[0] + 1) % src_cap
                    count[0] -= 1
            else:
                stamp = relay_buf[i, relay_head[i]]
                relay_head[i] = (relay_head[i] + 1) % rcap
                count[i] -= 1
            if chosen == n:
                acc_i[1] += 1
                if acc_i[10] < last_delays.shape[0]:
                    last_delays[acc_i[10]] = t - stamp
                acc_i[10] += 1
                if sampling:
                    acc_i[0] += 1
                    acc_i[8] += t - stamp
                    batch_sum[b] += t - stamp
                    batch_cnt[b] += 1
            else:
                if count[chosen] >= cap[chosen]:
                    raise AssertionError("relay buffer overflow")
                relay_buf[chosen, (relay_head[chosen] + count[chosen]) % rcap] = stamp
                count[chosen] += 1

        if lam > 0.0 and unif[k] < lam and not saturated:
            if count[0] < cap[0]:
                src_buf[(src_head[0] + count[0]) % src_cap] = t
                count[0] += 1
                acc_i[2] += 1
                if sampling:
                    acc_i[11] += 1
            else:
                acc_i[3] += 1
    return acc_i[10]


# ------------------------------------------------------------------- state

def gain_matrix(config: SimConfig) -> np.ndarray:
    """gamma * distance**(-alpha) for every (node, receiver) pair, hop units."""
    dist = config.topology.hop_distances()
    n = config.hops
    with np.errstate(divide="ignore"):
        g = config.budget.gamma * dist[:n, :] ** (-config.budget.alpha)
    for i in range(n):
        g[i, i] = 0.0
    return g


class SimState:
    """Mutable queues and accumulators of one simulation run."""

    def __init__(self, config: SimConfig):
        n = config.hops
        self.config = config
        self.t = 0
        if math.isinf(config.Bs):
            src_cap = config.slots + 1
        else:
            src_cap = int(config.Bs)
        self.src_buf = np.zeros(src_cap, dtype=np.int64)
        self.src_head = np.zeros(1, dtype=np.int64)
        self.relay_buf = np.zeros((n, int(config.Br)), dtype=np.int64)
        self.relay_head = np.zeros(n, dtype=np.int64)
        self.count = np.zeros(n, dtype=np.int64)
        self.cap = np.full(n, int(config.Br), dtype=np.int64)
        self.cap[0] = src_cap
        self.acc = np.zeros(12, dtype=np.int64)
        self.batch_sum = np.zeros(N_BATCHES, dtype=np.float64)
        self.batch_cnt = np.zeros(N_BATCHES, dtype=np.int64)
        self.busy = np.zeros(n, dtype=np.int64)
        self.last_delays = np.zeros(n, dtype=np.int64)
        self.gain = gain_matrix(config)

    @property
    def occupancy(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in self.count)

    def queue(self, node: int) -> List[int]:
        """Arrival stamps queued at ``node`` (0-based), head first."""
        c = int(self.count[node])
        if node == 0:
            buf, h = self.src_buf, int(self.src_head[0])
        else:
            buf, h = self.relay_buf[node], int(self.relay_head[node])
        return [int(buf[(h + k) % len(buf)]) for k in range(c)]

    def push(self, node: int, stamp: int) -> None:
        """Place a packet directly in a queue (for constructing test states)."""
        if self.count[node] >= self.cap[node]:
            raise InvalidInputError(f"node {node} is full")
        if node == 0:
            buf, h = self.src_buf, int(self.src_head[0])
        else:
            buf, h = self.relay_buf[node], int(self.relay_head[node])
        buf[(h + int(self.count[node])) % len(buf)] = stamp
        self.count[node] += 1

    def _advance(self, fades, unif):
        c = self.config
        k = fades.shape[0]
        ndel = _step_block(
            self.t, k, fades, unif, self.gain, c.budget.theta, _PROTO_CODE[c.protocol],
            int(c.mh_d), float(c.lam), bool(c.saturated), bool(c.enforce_A1),
            bool(c.enforce_A2), bool(c.noise_on), int(c.warmup), int(c.slots),
            self.src_buf, self.src_head, self.relay_buf, self.relay_head, self.count,
            self.cap, self.acc, self.batch_sum, self.batch_cnt, self.busy, self.last_delays)
        self.t += k
        return ndel


    def step_with(self, fading, arrival_u: float = 1.0) -> List[int]:
        """Advance one slot with explicit fading (N, N+1) and arrival uniform."""
        n = self.config.hops
        fades = np.asarray(fading, dtype=float).reshape(1, n, n + 1)
        ndel = self._advance(fades, np.array([arrival_u], dtype=float))
        return [int(d) for d in self.last_delays[:min(ndel, len(self.last_delays))]]


def _draw(rng: np.random.Generator, k: int, n: int):
    fades = rng.standard_exponential((k, n, n + 1))
    unif = rng.random(k)
    return fades, unif


def decide_transmitters(occupancy: Sequence[int], protocol: str = "s-opp",
                        slot_index: int = 0, mh_d: int = 1) -> set:
    """Transmitting nodes, 1-based (1 = source), for a start-of-slot occupancy."""
    if protocol not in PROTOCOLS:
        raise InvalidInputError(f"unknown protocol {protocol!r}")
    occ = np.asarray(occupancy, dtype=np.int64)
    tx = np.zeros(len(occ), dtype=np.bool_)
    _decide(occ, _PROTO_CODE[protocol], int(slot_index), int(mh_d), tx)
    return {i + 1 for i in np.flatnonzero(tx)}


def sinr(tx: int, rx: int, transmitters, fading, config: SimConfig) -> float:
    """SINR of node ``tx`` at node ``rx`` (both 0-based; N = destination).

    ``fading`` is an (N, N+1) array of power gains h[node, receiver].
    """
    n = config.hops
    mask = np.zeros(n, dtype=np.bool_)
    for j in transmitters:
        mask[j] = True
    if not mask[tx] or rx == tx:
        raise InvalidInputError("tx must be transmitting and distinct from rx")
    return float(_sinr(tx, rx, mask, np.asarray(fading, dtype=float), gain_matrix(config),
                       config.noise_on, config.enforce_A2))


def run_slot(state: SimState, rng: np.random.Generator, config: Optional[SimConfig] = None):
    """Advance one slot; returns (state, delays of packets delivered this slot)."""
    if config is not None and config is not state.config:
        raise InvalidInputError("state was built for a different config")
    fades, unif = _draw(rng, 1, state.config.hops)
    return state, state.step_with(fades[0], float(unif[0]))


def _batch_ci(batch_sum, batch_cnt) -> float:
    ok = batch_cnt > 0
    if ok.sum() < 2:
        return math.nan
    means = batch_sum[ok] / batch_cnt[ok]
    k = len(means)
    return float(_st.t.ppf(0.975, k - 1) * means.std(ddof=1) / math.sqrt(k))


def summarize(state: SimState) -> SimStats:
    acc = state.acc
    sampled = max(int(acc[9]), 1)
    delivered = int(acc[0])
    mean_delay = acc[8] / delivered if delivered else math.nan
    return SimStats(
        delivered_count=delivered,
        mean_delay=float(mean_delay),
        delay_ci=_batch_ci(state.batch_sum, state.batch_cnt),
        throughput=delivered / sampled,
        busy_probability=tuple(float(b) / sampled for b in state.busy),
        g000=float(acc[4]) / sampled,
        g001=float(acc[5]) / sampled,
        g010=float(acc[6]) / sampled,
        dropped_count=int(acc[3]),
        mean_in_system=float(acc[7]) / sampled,
        accepted_rate=float(acc[11]) / sampled,
        arrivals_accepted=int(acc[2]),
        delivered_total=int(acc[1]),
        in_system_end=int(state.count.sum()),
    )


def run(config: SimConfig) -> SimStats:
    """Simulate ``config.slots`` slots; deterministic given ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    state = SimState(config)
    n = config.hops
    remaining = config.slots
    while remaining > 0:
        k = min(BLOCK_SLOTS, remaining)
        fades, unif = _draw(rng, k, n)
        state._advance(fades, unif)
        remaining -= k
    return summarize(state)


def estimate_saturation(config: SimConfig) -> float:
    """Delivery rate with a permanently backlogged source."""
    return run(config.replace(saturated=True)).throughput
