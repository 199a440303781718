"""Per-hop success probabilities for a line network under Rayleigh fading.

Distances are expressed in *hop units*: the source-destination distance is
``N`` so that a symmetric hop has unit length and the average single-hop SNR
is ``gamma``.  For a non-symmetric three-hop line with positions on [0, 1]
this is the ``gamma = 3**alpha * gamma_tot`` convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class LinkBudget:
    """Channel parameters, all linear.

    alpha: path-loss exponent; theta: SINR decoding threshold; gamma: mean
    received SNR over one symmetric hop.
    """

    alpha: float = 3.0
    theta: float = db_to_linear(3.0)
    gamma: float = db_to_linear(8.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be > 0, got {self.alpha}")
        if not self.theta >= 0:
            raise InvalidInputError(f"theta must be >= 0, got {self.theta}")
        if not self.gamma > 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma}")

    @classmethod
    def from_db(cls, gamma_db: float = 8.0, theta_db: float = 3.0, alpha: float = 3.0) -> "LinkBudget":
        return cls(alpha=alpha, theta=db_to_linear(theta_db), gamma=db_to_linear(gamma_db))


@dataclass(frozen=True)
class Topology:
    """Node positions on [0, 1]: source at 0, destination at 1."""

    positions: tuple

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 3:
            raise InvalidInputError(f"need at least 2 hops, got {len(pos) - 1}")
        if pos[0] != 0.0 or pos[-1] != 1.0:
            raise InvalidInputError("positions must start at 0 and end at 1")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise InvalidInputError(f"positions must be strictly increasing: {pos}")

    @property
    def hops(self) -> int:
        return len(self.positions) - 1

    @classmethod
    def symmetric(cls, hops: int) -> "Topology":
        if hops < 2:
            raise InvalidInputError(f"hops must be >= 2, got {hops}")
        return cls(tuple(i / hops for i in range(hops + 1)))

    @classmethod
    def three_hop(cls, r1: float, r2: float) -> "Topology":
        return cls((0.0, r1, r2, 1.0))

    def hop_distances(self) -> np.ndarray:
        """Matrix of |pos_i - pos_j| in hop units (scaled by N)."""
        p = np.asarray(self.positions) * self.hops
        return np.abs(p[:, None] - p[None, :])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        n = self.hops
        return all(abs(p - i / n) <= tol for i, p in enumerate(self.positions))


@dataclass(frozen=True)
class HopProbabilities:
    """Success probabilities indexed by transmitting node (0 = source).

    p10[n]: one hop, no interference.  p20[n]: two hops, no interference
    (last entry is 0).  p11[n]: one hop with an interferer one hop beyond the
    receiver, n = 0..N-3.
    """

    p10: tuple
    p20: tuple
    p11: tuple = field(default=())

    def __post_init__(self):
        for name in ("p10", "p20", "p11"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            for v in vals:
                if not 0.0 <= v <= 1.0:
                    raise InvalidInputError(f"{name} entries must lie in [0, 1], got {v}")
        n = len(self.p10)
        if n < 2 or len(self.p20) != n:
            raise InvalidInputError("p10 and p20 must have the same length N >= 2")
        if len(self.p11) != n - 2:
            raise InvalidInputError(f"p11 must have length N-2 = {n - 2}")
        if self.p20[-1] != 0.0:
            raise InvalidInputError("the last relay cannot perform two-hop transmissions (p20[-1] must be 0)")

    @property
    def hops(self) -> int:
        return len(self.p10)

    @property
    def ps(self) -> tuple:
        return tuple(a + (1.0 - a) * b for a, b in zip(self.p10, self.p20))

    @classmethod
    def symmetric(cls, p10: float, p20: float, p11: float, hops: int = 3) -> "HopProbabilities":
        return cls((p10,) * hops, (p20,) * (hops - 1) + (0.0,), (p11,) * (hops - 2))


def success_no_interference(signal_distance: float, budget: LinkBudget,
                            gamma_abs: Optional[float] = None) -> float:
    """P(SNR > theta) under unit-mean exponential fading.

    ``signal_distance`` is in hop units; ``gamma_abs`` is the mean SNR at unit
    distance (defaults to ``budget.gamma``).
    """
    g = budget.gamma if gamma_abs is None else gamma_abs
    if not signal_distance > 0:
        raise InvalidInputError(f"signal_distance must be > 0, got {signal_distance}")
    if not g > 0:
        raise InvalidInputError(f"gamma_abs must be > 0, got {g}")
    return math.exp(-(signal_distance ** budget.alpha) * budget.theta / g)


def success_with_interference(signal_distance: float, interferer_distance: float,
                              budget: LinkBudget, gamma_abs: Optional[float] = None) -> float:
    """P(SINR > theta) with a single Rayleigh-faded interferer."""
    if not interferer_distance > 0:
        raise InvalidInputError(f"interferer_distance must be > 0, got {interferer_distance}")
    p = success_no_interference(signal_distance, budget, gamma_abs)
    if math.isinf(interferer_distance):
        return p
    return p / (1.0 + budget.theta * (signal_distance / interferer_distance) ** budget.alpha)


def hop_probabilities(topology: Topology, budget: LinkBudget) -> HopProbabilities:
    n = topology.hops
    if n < 2:
        raise InvalidInputError(f"hops must be >= 2, got {n}")
    dist = topology.hop_distances()
    p10 = [success_no_interference(dist[i, i + 1], budget) for i in range(n)]
    p20 = [success_no_interference(dist[i, i + 2], budget) for i in range(n - 1)] + [0.0]
    # transmitter i -> receiver i+1, interferer i+2 -> i+1
    p11 = [success_with_interference(dist[i, i + 1], dist[i + 2, i + 1], budget) for i in range(n - 2)]
    return HopProbabilities(tuple(p10), tuple(p20), tuple(p11))
