"""Delay sweeps, relay-placement optimisation and protocol-gain comparisons.

Every simulated point is an independent task.  Tasks run through
``concurrent.futures`` when ``workers > 1`` and are merged in submission
order, so tables do not depend on scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy import stats as _st

from . import gf_analysis as gf
from .channel import LinkBudget, Topology, db_to_linear, hop_probabilities
from .errors import InvalidInputError, UnsupportedConfigurationError
from .simulator import SimConfig, SimStats, run

SEED_STRIDE = 1000
VARIANTS = ("full", "no-two-hop", "no-reuse")
METHODS = ("analytic", "simulated")


def replication_seeds(base_seed: int, replications: int) -> List[int]:
    return [base_seed + SEED_STRIDE * k for k in range(replications)]


def _map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _saturated_throughput(cfg: SimConfig) -> float:
    return run(cfg.replace(saturated=True)).throughput


def _mean_ci(values: Sequence[float]) -> Tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), math.nan
    return float(v.mean()), float(_st.t.ppf(0.975, len(v) - 1) * v.std(ddof=1) / math.sqrt(len(v)))


def pooled_delay(stats: Sequence[SimStats]) -> Tuple[float, float]:
    """Delay averaged over delivered packets of all replications, with CI.

    With one replication the batch-means half-width is returned; otherwise a
    t interval over per-replication means.
    """
    total = sum(s.delivered_count for s in stats)
    if total == 0:
        return math.nan, math.nan
    mean = sum(s.mean_delay * s.delivered_count for s in stats if s.delivered_count) / total
    if len(stats) == 1:
        return mean, stats[0].delay_ci
    return mean, _mean_ci([s.mean_delay for s in stats])[1]


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class SweepSpec:
    protocols: Tuple[str, ...]
    lambdas: Tuple[float, ...]
    template: SimConfig
    replications: int = 1
    include_analytic: bool = False

    def __post_init__(self):
        if not self.protocols or not self.lambdas:
            raise InvalidInputError("protocol list and lambda grid must be non-empty")
        for lam in self.lambdas:
            if not 0.0 <= lam < 1.0:
                raise InvalidInputError(f"lambda grid values must lie in [0, 1), got {lam}")
        for p in self.protocols:
            parse_protocol(p)
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    lam: float
    mean_delay: float
    delay_ci: float
    throughput: float
    saturated: bool


def parse_protocol(label: str) -> Tuple[str, Optional[int]]:
    """'s-opp', 'opp', 'mh' (delay-optimal d) or 'mh:<d>'."""
    if label in ("s-opp", "opp", "mh"):
        return label, None
    if label.startswith("mh:"):
        try:
            return "mh", int(label[3:])
        except ValueError:
            pass
    raise InvalidInputError(f"unknown protocol label {label!r}")


def _sim_task(cfg: SimConfig) -> SimStats:
    return run(cfg)


def _analytic_row(cfg: SimConfig, lam: float) -> SweepRow:
    probs = hop_probabilities(cfg.topology, cfg.budget)
    if cfg.hops == 2:
        tau = gf.two_hop_saturation(probs.p10[0], probs.p20[0])
        D = gf.two_hop_delay(lam, probs.p10[0], probs.p20[0])
    elif cfg.hops == 3:
        tau = gf.three_hop_saturation(probs)
        D = gf.three_hop_delay(probs, lam)
    else:
        raise UnsupportedConfigurationError(f"no closed form for N = {cfg.hops}")
    sat = lam >= tau
    return SweepRow("s-opp-analytic", lam, D, 0.0, min(lam, tau), sat)


def delay_sweep(spec: SweepSpec, workers: int = 1) -> List[SweepRow]:
    """One row per (protocol, lambda), protocols in the order given.

    A row is flagged saturated when lambda is at or above that protocol's
    simulated saturation throughput; its delay is then the (horizon
    dependent) mean of delivered packets.
    """
    tmpl = spec.template
    seeds = replication_seeds(tmpl.seed, spec.replications)

    # expand labels into concrete (protocol, d) variants
    variants = []
    for label in spec.protocols:
        name, d = parse_protocol(label)
        if name == "mh":
            ds = [d] if d is not None else list(range(1, tmpl.hops + 1))
        else:
            ds = [1]
        for dd in ds:
            variants.append((label, name, dd))

    tasks = []
    for _, name, d in variants:
        base = tmpl.replace(protocol=name, mh_d=d)
        for s in seeds:
            tasks.append(base.replace(seed=s, saturated=True, lam=0.0))
        for lam in spec.lambdas:
            for s in seeds:
                tasks.append(base.replace(seed=s, lam=lam, saturated=False))
    results = _map(_sim_task, tasks, workers)

    R = len(seeds)
    per = {}
    it = iter(results)
    for label, name, d in variants:
        tau = float(np.mean([next(it).throughput for _ in range(R)]))
        pts = []
        for lam in spec.lambdas:
            st = [next(it) for _ in range(R)]
            D, ci = pooled_delay(st)
            thr = float(np.mean([s.throughput for s in st]))
            pts.append(SweepRow(label, lam, D, ci, thr, lam >= tau))
        per.setdefault(label, []).append(pts)

    rows = []
    for label in spec.protocols:
        cands = per[label]
        for k, lam in enumerate(spec.lambdas):
            options = [c[k] for c in cands]
            # delay-optimal d: prefer non-saturated candidates
            best = min(options, key=lambda r: (r.saturated, r.mean_delay if not math.isnan(r.mean_delay) else math.inf))
            rows.append(best)
    if spec.include_analytic:
        for lam in spec.lambdas:
            rows.append(_analytic_row(tmpl, lam))
    return rows


# --------------------------------------------------------------- placement

@dataclass(frozen=True)
class PlacementResult:
    gamma_db: float
    r1: float
    r2: float
    tau_s: float
    method: str
    variant: str

    def __post_init__(self):
        if not 0.0 < self.r1 < self.r2 < 1.0:
            raise InvalidInputError(f"need 0 < r1 < r2 < 1, got {self.r1}, {self.r2}")


def placement_objective(r1, r2, budget: LinkBudget, variant: str = "full"):
    """Analytic three-hop saturation throughput at relay positions (r1, r2).

    Accepts scalars or broadcastable arrays.
    """
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    a, th, g = budget.alpha, budget.theta, budget.gamma

    def p(dist):
        return np.exp(-((3.0 * dist) ** a) * th / g)

    p10_1, p20_1 = p(r1), p(r2)
    p10_2, p20_2 = p(r2 - r1), p(1.0 - r1)
    p10_3 = p(1.0 - r2)
    p11 = p10_1 / (1.0 + th * (r1 / (r2 - r1)) ** a)
    if variant == "no-two-hop":
        p20_1 = p20_2 = np.zeros_like(p20_1)
    elif variant == "no-reuse":
        p11 = np.zeros_like(p11)
    out = gf.three_hop_saturation_array(p10_1, p10_2, p10_3, p20_1, p20_2, p11)
    return out if out.ndim else float(out)


def position_grid(step: float) -> Tuple[np.ndarray, np.ndarray]:
    """All (r1, r2) on a lattice of spacing ``step`` with 0 < r1 < r2 < 1."""
    k = int(round(1.0 / step))
    if k < 3 or abs(k * step - 1.0) > 1e-9:
        raise InvalidInputError(f"step must divide 1 into at least 3 parts, got {step}")
    idx = np.arange(1, k)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    m = i < j
    return i[m] / k, j[m] / k


def _optimize_analytic(gamma_db: float, budget: LinkBudget, variant: str, step: float) -> PlacementResult:
    b = LinkBudget(alpha=budget.alpha, theta=budget.theta, gamma=db_to_linear(gamma_db))
    r1, r2 = position_grid(step)
    vals = placement_objective(r1, r2, b, variant)
    k = int(np.nanargmax(vals))
    best = (float(r1[k]), float(r2[k]), float(vals[k]))

    lo1, hi1 = max(best[0] - step, 1e-6), best[0] + step
    lo2, hi2 = best[1] - step, min(best[1] + step, 1 - 1e-6)

    def neg(x):
        if not 0.0 < x[0] < x[1] < 1.0:
            return 1.0
        return -placement_objective(x[0], x[1], b, variant)

    res = optimize.minimize(neg, x0=[best[0], best[1]], method="Nelder-Mead",
                            bounds=[(lo1, hi1), (lo2, hi2)],
                            options={"xatol": 1e-7, "fatol": 1e-12})
    if res.success and -res.fun > best[2] and 0 < res.x[0] < res.x[1] < 1:
        best = (float(res.x[0]), float(res.x[1]), float(-res.fun))
    return PlacementResult(gamma_db, best[0], best[1], best[2], "analytic", variant)


def _placement_task(args) -> float:
    cfg, seeds = args
    return float(np.mean([run(cfg.replace(seed=s, saturated=True)).throughput for s in seeds]))


def _optimize_simulated(gamma_db: float, template: SimConfig, step: float, replications: int,
                        workers: int) -> PlacementResult:
    r1, r2 = position_grid(step)
    budget = LinkBudget(alpha=template.budget.alpha, theta=template.budget.theta,
                        gamma=db_to_linear(gamma_db))
    # common random numbers: every grid point reuses the same seeds
    seeds = replication_seeds(template.seed, replications)
    tasks = [(template.replace(topology=Topology.three_hop(a, b), budget=budget, protocol="s-opp"), seeds)
             for a, b in zip(r1, r2)]
    vals = _map(_placement_task, tasks, workers)
    k = int(np.argmax(vals))
    return PlacementResult(gamma_db, float(r1[k]), float(r2[k]), float(vals[k]), "simulated", "full")


def optimize_positions(gamma_grid_db: Iterable[float], method: str = "analytic",
                       variant: str = "full", step: Optional[float] = None,
                       budget: Optional[LinkBudget] = None,
                       template: Optional[SimConfig] = None,
                       replications: int = 5, workers: int = 1) -> List[PlacementResult]:
    """Throughput-optimal relay positions of a three-hop line, per gamma.

    ``analytic`` searches a lattice (default step 0.005) and refines locally;
    ``simulated`` searches a coarser lattice (default 0.05) of saturated
    full-physics simulations with common random numbers across points.
    """
    if method not in METHODS:
        raise InvalidInputError(f"method must be one of {METHODS}")
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}")
    out = []
    if method == "analytic":
        budget = budget or LinkBudget()
        for g in gamma_grid_db:
            out.append(_optimize_analytic(float(g), budget, variant, step or 0.005))
    else:
        if variant != "full":
            raise UnsupportedConfigurationError("simulated placement supports only the full variant")
        template = template or SimConfig(topology=Topology.symmetric(3), slots=100_000, warmup=5_000)
        if template.hops != 3:
            raise UnsupportedConfigurationError("placement optimisation needs N = 3")
        for g in gamma_grid_db:
            out.append(_optimize_simulated(float(g), template, step or 0.05, replications, workers))
    return out


# ------------------------------------------------------------------- gains

@dataclass(frozen=True)
class GainResult:
    hops: int
    gamma_db: float
    tau_a: float
    tau_b: float
    ratio: float
    ci: float
    tau_a_ci: float = math.nan
    tau_b_ci: float = math.nan


def compare_gain(gamma_db: float, hops: int, template: Optional[SimConfig] = None,
                 protocol_a: str = "s-opp", protocol_b: str = "opp",
                 replications: int = 5, workers: int = 1) -> GainResult:
    """Saturation-throughput ratio of ``protocol_a`` to ``protocol_b``.

    Both protocols run on the same seeds; ``ci`` is the t half-width of the
    per-replication ratios.  Protocol labels accept ``mh:<d>``.
    """
    if not 2 <= hops <= 5:
        raise InvalidInputError(f"hops must lie in [2, 5], got {hops}")
    template = template or SimConfig()
    budget = LinkBudget(alpha=template.budget.alpha, theta=template.budget.theta,
                        gamma=db_to_linear(gamma_db))
    base = template.replace(topology=Topology.symmetric(hops), budget=budget, saturated=True)
    seeds = replication_seeds(template.seed, replications)
    tasks = []
    for label in (protocol_a, protocol_b):
        name, d = parse_protocol(label)
        cfg = base.replace(protocol=name, mh_d=d or 1)
        tasks += [cfg.replace(seed=s) for s in seeds]
    thr = _map(_saturated_throughput, tasks, workers)
    a, b = np.array(thr[:replications]), np.array(thr[replications:])
    ta, ta_ci = _mean_ci(a)
    tb, tb_ci = _mean_ci(b)
    _, ci = _mean_ci(a / b)
    return GainResult(hops, float(gamma_db), ta, tb, ta / tb, ci, ta_ci, tb_ci)
