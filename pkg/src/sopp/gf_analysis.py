"""Closed-form delay and saturation throughput of the S-OPP tandem queue.

Two hops: exact mean delay and saturation throughput.  Three hops: exact
saturation throughput and the mean delay expressed through four 4x4
determinants ``K`` in the source pgf variable ``x``; the delay additionally
needs the constant ``C = g001/g000 - 1`` which is approximated unless the
caller supplies an estimate.

Determinants are built from :class:`~sopp.rational.RationalFn` entries with
exact rational coefficients, so ``K(1) = 0`` holds exactly and derivatives at
``x = 1`` carry no rounding error until the final conversion to float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .channel import HopProbabilities
from .errors import DegenerateChannelError, InvalidInputError, SingularityError
from .rational import Poly, RationalFn, det

# lambda -> 0 limit of the three-hop delay is evaluated at this rate
SMALL_LAMBDA = 1e-9


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")


# ---------------------------------------------------------------- two hops

def two_hop_saturation(p10: float, p20: float) -> float:
    _check_prob("p10", p10)
    _check_prob("p20", p20)
    ps = p10 + (1.0 - p10) * p20
    return ps / (2.0 - p20)


def two_hop_delay(lam: float, p10: float, p20: float) -> float:
    """Mean end-to-end delay in slots; ``inf`` at or above saturation."""
    _check_prob("p10", p10)
    _check_prob("p20", p20)
    if lam < 0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    ps = p10 + (1.0 - p10) * p20
    if ps == 0.0 or p10 == 0.0:
        raise DegenerateChannelError("two-hop channel never delivers (p_s = 0)")
    q20 = 1.0 - p20
    margin = ps - lam * (1.0 + q20)
    if margin <= 0.0:
        return math.inf
    num = 1.0 - lam * (1.0 - (1.0 - p10) * q20 / p10)
    return num / margin + q20 / ps


def two_hop_empty_probability(lam: float, p10: float, p20: float) -> float:
    """P(source and relay both empty)."""
    ps = p10 + (1.0 - p10) * p20
    return 1.0 - lam * (2.0 - p20) / ps


# -------------------------------------------------------------- three hops

@dataclass(frozen=True)
class ThreeHopParams:
    p10_1: float
    p10_2: float
    p10_3: float
    p20_1: float
    p20_2: float
    p11: float
    lam: float = 0.0
    C: float = 0.0

    def __post_init__(self):
        for name in ("p10_1", "p10_2", "p10_3", "p20_1", "p20_2", "p11"):
            _check_prob(name, getattr(self, name))
        if not 0.0 <= self.lam < 1.0:
            raise InvalidInputError(f"lambda must lie in [0, 1), got {self.lam}")
        if not self.C >= 0.0:
            raise InvalidInputError(f"C must be >= 0, got {self.C}")

    @classmethod
    def from_probabilities(cls, probs: HopProbabilities, lam: float = 0.0, C: float = 0.0):
        if probs.hops != 3:
            raise InvalidInputError(f"expected three-hop probabilities, got N = {probs.hops}")
        return cls(probs.p10[0], probs.p10[1], probs.p10[2], probs.p20[0], probs.p20[1],
                   probs.p11[0], lam, C)

    def with_(self, **kw) -> "ThreeHopParams":
        d = self.__dict__.copy()
        d.update(kw)
        return ThreeHopParams(**d)


@dataclass(frozen=True)
class CoeffFunctions:
    a: RationalFn
    b: RationalFn
    c: RationalFn
    d: RationalFn


def coeff_functions(params: ThreeHopParams, x2: int, x3: int) -> CoeffFunctions:
    """a_{x3}, b_{x2 x3}, c_{x x2 x3}, d_{x x2 x3} as rational functions of x."""
    if x2 not in (0, 1) or x3 not in (0, 1):
        raise InvalidInputError("x2 and x3 must be 0 or 1")
    F = Fraction
    p10_1, p10_2, p10_3 = F(params.p10_1), F(params.p10_2), F(params.p10_3)
    p20_1, p20_2, p11 = F(params.p20_1), F(params.p20_2), F(params.p11)
    x = Poly.x()

    a = p10_3 + (1 - p10_3) * x3
    b = (1 - p10_2) * (1 - p20_2) * x2 + p10_2 * (1 - p20_2) * x3 + p20_2
    # c and d carry a 1/x term; keep them over the denominator x
    c_num = (1 - p10_1) * (1 - p20_1) * x + p10_1 * (1 - p20_1) * x2 + p20_1 * x3
    d_num = (p11 * x2 + (1 - p11) * x) * a
    return CoeffFunctions(RationalFn(a), RationalFn(b), RationalFn(c_num, x), RationalFn(d_num, x))


@dataclass(frozen=True)
class KSet:
    """The determinants K_{x11}, K_{x01}, K_{x10}, K_x as functions of x."""

    K111: RationalFn
    K101: RationalFn
    K110: RationalFn
    K1: RationalFn
    lam: Fraction

    def at_one(self, name: str, order: int = 2) -> list:
        """Exact [K(1), K'(1), K''(1)] for ``name`` in {K111, K101, K110, K1}."""
        return getattr(self, name).derivatives_at(Fraction(1), order)

    def g000(self) -> float:
        k1 = self.at_one("K1", 1)[1]
        k111 = self.at_one("K111", 1)[1]
        if k111 == 0:
            raise SingularityError("K'_111 vanishes at x = 1")
        return float(k1 / k111)


def _k_matrices(params: ThreeHopParams):
    """Entry matrices of K111, K101, K110, K1 (rows x2x3 = 01, 10, 00, 11)."""
    lam = Fraction(params.lam)
    C = Fraction(params.C)
    x = Poly.x()
    f = lam * x + (1 - lam)
    inv_f = RationalFn(1, f)

    cf = {(x2, x3): coeff_functions(params, x2, x3) for x2 in (0, 1) for x3 in (0, 1)}
    a0 = cf[0, 0].a
    b = {k: v.b for k, v in cf.items()}
    c = {k: v.c for k, v in cf.items()}
    d = {k: v.d for k, v in cf.items()}

    # right-hand-side column of the linear system (in units of g000)
    rhs = {
        (0, 1): C * (d[0, 1] - 1) + c[0, 1] - 1,
        (1, 0): C * (d[1, 0] - a0) + c[1, 0] - 1,
        (0, 0): C * (d[0, 0] - a0) + c[0, 0] - 1,
        (1, 1): C * (d[1, 1] - 1) + c[1, 1] - 1,
    }
    zero = RationalFn(0)
    one_minus_invf = 1 - inv_f

    col_g11 = [zero, a0, zero, one_minus_invf]
    col_g10 = [b[0, 1], b[1, 0] - a0 - inv_f, b[0, 0], zero]
    col_g01 = [d[0, 1] - inv_f, d[1, 0] - a0, d[0, 0], d[1, 1] - 1]
    col_g00 = [c[0, 1] - d[0, 1] - b[0, 1],
               c[1, 0] - d[1, 0] + a0 - b[1, 0],
               c[0, 0] - d[0, 0] - b[0, 0] - inv_f,
               c[1, 1] - d[1, 1]]
    # K_x uses col4 + col2 + col3 of the system matrix
    col_sum = [c[0, 1] - inv_f, c[1, 0] - a0 - inv_f, c[0, 0] - inv_f, c[1, 1] - 1]
    col_rhs = [rhs[0, 1], rhs[1, 0], rhs[0, 0], rhs[1, 1]]

    def rows(*cols):
        return [[col[i] for col in cols] for i in range(4)]

    mats = {
        "K111": rows(col_rhs, col_g10, col_g01, col_sum),
        "K101": rows(col_g11, col_g10, col_rhs, col_g00),
        "K110": rows(col_g11, col_rhs, col_g01, col_g00),
        "K1": rows(col_g11, col_g10, col_g01, col_sum),
    }
    return mats, x * f, lam


def build_k_set(params: ThreeHopParams) -> KSet:
    """Expand the four determinants into single rational functions of x.

    Every entry is a polynomial over ``x * f(x)``; rows are scaled by that
    common denominator, the polynomial determinant is expanded by cofactors,
    and the scaling is carried in the denominator ``(x f)^4``.
    """
    mats, common, lam = _k_matrices(params)
    den = common ** 4
    if den(Fraction(1)) == 0:
        raise SingularityError("determinant denominator vanishes at x = 1")
    out = {}
    for name, m in mats.items():
        poly_m = [[entry.over(common) for entry in row] for row in m]
        out[name] = RationalFn(det(poly_m), den)
    return KSet(lam=lam, **out)


def _const_entries(p: ThreeHopParams):
    """Coefficient constants at x = 1 together with c'_111 and d'_111."""
    a0 = p.p10_3
    b01 = p.p10_2 * (1 - p.p20_2) + p.p20_2
    b00 = p.p20_2
    b10 = (1 - p.p10_2) * (1 - p.p20_2) + p.p20_2
    c_base = (1 - p.p10_1) * (1 - p.p20_1)
    c101 = c_base + p.p20_1
    c100 = c_base
    c110 = c_base + p.p10_1 * (1 - p.p20_1)
    d101 = 1 - p.p11
    d100 = (1 - p.p11) * a0
    dp111 = -p.p11
    cp111 = -(p.p10_1 * (1 - p.p20_1) + p.p20_1)
    return a0, b01, b00, b10, c101, c100, c110, d101, d100, dp111, cp111


def _sat_dets(p: ThreeHopParams):
    a0, b01, b00, b10, c101, c100, c110, d101, d100, dp, cp = _const_entries(p)
    top = det([[b01, d101 - 1, c101 - 1],
               [b00, d100, c100 - 1],
               [0.0, -dp, -cp]])
    bottom = det([[b01, d101 - 1, c101 - 1],
                  [b10 - a0 - 1, 0.0, c110 - a0 - 1],
                  [b00, d100, c100 - 1]])
    return a0 * top, bottom


def k1_prime_explicit(params: ThreeHopParams) -> float:
    """dK_x/dx at x = 1 from the 3x3 closed form."""
    num, bottom = _sat_dets(params)
    return num - params.lam * bottom


def k111_prime_explicit(params: ThreeHopParams) -> float:
    """dK_{x11}/dx at x = 1 from the 2x2 closed form."""
    a0, b01, b00, b10, c101, c100, c110, d101, d100, dp, cp = _const_entries(params)
    first = det([[b01, dp * (c101 - 1) - cp * (d101 - 1)],
                 [b00, dp * (c100 - 1) - cp * d100]])
    second = det([[b01, dp * (c101 - 1) - cp * (d101 - 1)],
                  [b10 - a0 - 1, dp * (c110 - a0 - 1)]])
    return a0 * first + a0 * params.C * second


def three_hop_saturation(probs: Union[HopProbabilities, ThreeHopParams]) -> float:
    p = probs if isinstance(probs, ThreeHopParams) else ThreeHopParams.from_probabilities(probs)
    num, bottom = _sat_dets(p)
    if bottom == 0.0:
        raise DegenerateChannelError("saturation throughput denominator vanishes")
    return num / bottom


def three_hop_saturation_array(p10_1, p10_2, p10_3, p20_1, p20_2, p11):
    """Vectorised saturation throughput over broadcastable arrays."""
    p10_1, p10_2, p10_3, p20_1, p20_2, p11 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (p10_1, p10_2, p10_3, p20_1, p20_2, p11)))
    a0 = p10_3
    b01 = p10_2 * (1 - p20_2) + p20_2
    b00 = p20_2
    b10 = (1 - p10_2) * (1 - p20_2) + p20_2
    c_base = (1 - p10_1) * (1 - p20_1)
    c101, c100, c110 = c_base + p20_1, c_base, c_base + p10_1 * (1 - p20_1)
    d101, d100 = 1 - p11, (1 - p11) * a0
    dp, cp = -p11, -(p10_1 * (1 - p20_1) + p20_1)

    def det3(m):
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))

    zero = np.zeros_like(a0)
    top = det3([[b01, d101 - 1, c101 - 1], [b00, d100, c100 - 1], [zero, -dp, -cp]])
    bottom = det3([[b01, d101 - 1, c101 - 1], [b10 - a0 - 1, zero, c110 - a0 - 1],
                   [b00, d100, c100 - 1]])
    with np.errstate(divide="ignore", invalid="ignore"):
        return a0 * top / bottom


def three_hop_saturation_symmetric(p10: float, p20: float, p11: float) -> float:
    for name, v in (("p10", p10), ("p20", p20), ("p11", p11)):
        _check_prob(name, v)
    ps = p10 + (1 - p10) * p20
    u = p10 * (ps ** 2 * p11 + ps ** 2 * p10 * (1 - p11) + p20 ** 2 * p11)
    v = (p10 * (2 - p20) * (ps * p11 + p10 ** 2 * (1 - p20) * (1 - p11))
         + (p10 + p20) * (ps * p10 * (1 - p11) + p20 * p11))
    if v == 0.0:
        raise DegenerateChannelError("symmetric saturation denominator vanishes")
    return u / v


def approx_C(lam: float, p10_1: float, p20_1: float) -> float:
    """Approximation of g001/g000 - 1 obtained by equating g001 and g010."""
    if not 0.0 <= lam < 1.0:
        raise InvalidInputError(f"lambda must lie in [0, 1), got {lam}")
    if not p10_1 + p20_1 > 0:
        raise InvalidInputError("p10_1 + p20_1 must be positive")
    return lam / ((1.0 - lam) * (p10_1 + p20_1))


def three_hop_delay(probs: Union[HopProbabilities, ThreeHopParams], lam: float,
                    C: Optional[float] = None) -> float:
    """Mean end-to-end delay of the three-hop line, in slots.

    ``C=None`` uses :func:`approx_C`; pass a number (e.g. a simulation
    estimate of g001/g000 - 1) to override.  Returns ``inf`` at or above the
    saturation throughput.  ``lam = 0`` is evaluated as the limit, at
    ``SMALL_LAMBDA``.
    """
    base = probs if isinstance(probs, ThreeHopParams) else ThreeHopParams.from_probabilities(probs)
    if lam < 0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    if lam >= three_hop_saturation(base):
        return math.inf
    if lam == 0:
        lam = SMALL_LAMBDA
    if C is None:
        C = approx_C(lam, base.p10_1, base.p20_1)
    ks = build_k_set(base.with_(lam=lam, C=C))
    _, k111p, k111pp = ks.at_one("K111")
    _, k1p, k1pp = ks.at_one("K1")
    k101p = ks.at_one("K101", 1)[1]
    k110p = ks.at_one("K110", 1)[1]
    if k111p == 0 or k1p == 0:
        raise SingularityError("K' vanishes at x = 1")
    L = ks.lam
    D = (2 + (k111pp - 2 * k101p - 2 * k110p) / (2 * k111p) - k1pp / (2 * k1p)) / L
    return float(D)


def three_hop_mean_queues(probs: Union[HopProbabilities, ThreeHopParams], lam: float,
                          C: Optional[float] = None) -> tuple:
    """(source, relay 1, relay 2) mean queue sizes below saturation."""
    base = probs if isinstance(probs, ThreeHopParams) else ThreeHopParams.from_probabilities(probs)
    if C is None:
        C = approx_C(lam, base.p10_1, base.p20_1)
    ks = build_k_set(base.with_(lam=lam, C=C))
    _, k111p, k111pp = ks.at_one("K111")
    _, k1p, k1pp = ks.at_one("K1")
    k101p = ks.at_one("K101", 1)[1]
    k110p = ks.at_one("K110", 1)[1]
    src = k111pp / (2 * k111p) - k1pp / (2 * k1p)
    return float(src), float(1 - k101p / k111p), float(1 - k110p / k111p)
