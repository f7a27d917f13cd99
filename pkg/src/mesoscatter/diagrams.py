"""Generating functions of semiclassical diagram classes and their coefficients.

All series are in the variable ``s`` with ``N`` an exact rational parameter:

* ``F = N (sqrt(1 + 4 s / N^2) - 1) / 2``: rooted trees, Catalan coefficients.
* ``K0 = int_0^s F(t) / t dt``: forests of trees; ``exp(K0)`` generates the
  leading-order first moment.
* ``f^2 = F^2 / s``, ``kappa1 = -log(1 - f^4) / 2``: two-cycle corrections.
* ``K1 = -log(1 + 4 s / N^2) / 4``: Moebius corrections, time-reversal only.
* ``12 N K2 = (1 + 6 s / N^2) (1 + 4 s / N^2)^(-3/2) - 1``.

``<P> / <P_cl> = N^n n! [s^n] exp(G)`` with ``G`` the sum of the included
functions. Fermions replace every single-cycle function ``K(s)`` by
``-K(-s)`` and the two-cycle ``kappa1(s)`` by ``kappa1(-s)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .moments import ResourceLimitError
from .series import PowerSeries, SeriesOrderError
from .wavepackets import WavepacketConfig, q2_kernel

MAX_ORDER = 30
MAX_PAIRWISE_N = 400
MAX_TWO_CONDENSATE_N = 60
MAX_BRUTEFORCE_N = 12

TERMS = ("K0", "kappa1", "K1", "K2")


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise SeriesOrderError(f"truncation order must lie in [0, {MAX_ORDER}], got {order}")


def _u(N, order: int) -> PowerSeries:
    """``1 + 4 s / N^2``."""
    return PowerSeries([1, 4 / Fraction(N) ** 2], order)


def tree_series(N, order: int) -> PowerSeries:
    _check_order(order)
    N = Fraction(N)
    return (_u(N, order).power(Fraction(1, 2)) - 1) * (N / 2)


def tree_series_fixed_point(N, order: int) -> PowerSeries:
    """Same series from iterating ``F = s / N - F^2 / N`` (independent route)."""
    _check_order(order)
    N = Fraction(N)
    s = PowerSeries.variable(order, 1 / N)
    F = PowerSeries.constant(0, order)
    for _ in range(order + 1):
        F = s - F * F * (1 / N)
    return F


def k0_series(N, order: int) -> PowerSeries:
    _check_order(order)
    F = tree_series(N, order + 1)
    return F.shift_down().integrate().truncate(order)


def exp_k0_series(N, order: int) -> PowerSeries:
    return k0_series(N, order).exp()


def geqn_coefficients(N, order: int = 4) -> list[Fraction]:
    """Closed-form polynomials for ``[s^m](exp(K0) - 1)``, ``m = 1..4``."""
    N = Fraction(N)
    table = [
        1 / N,
        (N - 1) / (2 * N**3),
        (N**2 - 3 * N + 4) / (6 * N**5),
        (N**3 - 6 * N**2 + 19 * N - 30) / (24 * N**7),
    ]
    if order > len(table):
        raise SeriesOrderError(f"closed forms are tabulated through s^{len(table)}")
    return table[:order]


def f_squared_series(N, order: int) -> PowerSeries:
    _check_order(order)
    F = tree_series(N, order + 1)
    return (F * F).shift_down()


def kappa1_series(N, order: int) -> PowerSeries:
    f2 = f_squared_series(N, order)
    return (1 - f2 * f2).log() * Fraction(-1, 2)


def k1_series(N, order: int) -> PowerSeries:
    _check_order(order)
    return _u(N, order).log() * Fraction(-1, 4)


def k2_series(N, order: int) -> PowerSeries:
    _check_order(order)
    N = Fraction(N)
    num = PowerSeries([1, 6 / N**2], order)
    return (num * _u(N, order).power(Fraction(-3, 2)) - 1) / (12 * N)


def k2_from_f(N, order: int) -> PowerSeries:
    """``K2`` written through ``f^2``: ``-(f^2 + 3) f^4 / (6 N (f^2 + 1)^3)``."""
    f2 = f_squared_series(N, order)
    return -((f2 + 3) * f2 * f2) / ((f2 + 1) ** 3 * (6 * Fraction(N)))


def exponent_series(N, order: int, beta: int = 2, epsilon: int = 1,
                    include: Iterable[str] = ("K0",)) -> PowerSeries:
    """Sum of the selected diagram functions, with the fermion and beta=1 rules applied."""
    include = set(include)
    unknown = include - set(TERMS)
    if unknown:
        raise ValueError(f"unknown diagram classes {sorted(unknown)}; choose from {TERMS}")
    if beta not in (1, 2) or epsilon not in (1, -1):
        raise ValueError("beta must be 1 or 2 and epsilon +-1")
    G = PowerSeries.constant(0, order)
    builders = {"K0": k0_series, "kappa1": kappa1_series, "K1": k1_series, "K2": k2_series}
    for name in TERMS:
        if name not in include or (name == "K1" and beta == 2):
            continue
        term = builders[name](N, order)
        weight = 2 if (name == "kappa1" and beta == 1) else 1
        if epsilon == -1:
            term = term.scale_argument(-1)
            if name != "kappa1":
                term = -term
        G = G + term * weight
    return G


def ratio_from_series(n: int, N, beta: int = 2, epsilon: int = 1,
                      include: Iterable[str] = ("K0",), order: int | None = None) -> Fraction:
    """``N^n n! [s^n] exp(G)``: the predicted ``<P> / <P_cl>`` for distinct channels."""
    order = n if order is None else order
    if n > order:
        raise SeriesOrderError(f"n={n} exceeds truncation order {order}")
    _check_order(order)
    G = exponent_series(N, order, beta, epsilon, include)
    return Fraction(N) ** n * G.exp().egf_value(n)


def pairwise_exact_coefficient(n: int, N, epsilon: int = 1) -> Fraction:
    """``n! [s^n] exp(s - eps s^2 / 2N)`` as an exact rational."""
    if not 0 <= n <= MAX_PAIRWISE_N:
        raise ValueError(f"n must lie in [0, {MAX_PAIRWISE_N}]")
    x = Fraction(-epsilon, 2) / Fraction(N)
    total = Fraction(0)
    for l in range(n // 2 + 1):
        total += math.factorial(n) // (math.factorial(n - 2 * l) * math.factorial(l)) * x**l
    return total


# --- scaling limits ----------------------------------------------------------

@dataclass(frozen=True)
class ScalingSpec:
    """``N = alpha n^eta`` with imbalance ``x`` between two condensates."""

    alpha: float = 1.0
    eta: float = 2.0
    epsilon: int = 1
    x: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.eta <= 0:
            raise ValueError("alpha and eta must be positive")
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +-1")
        if not -1.0 <= self.x <= 1.0:
            raise ValueError(f"imbalance x must lie in [-1, 1], got {self.x}")

    def channels(self, n: int) -> float:
        return self.alpha * n**self.eta

    def channels_int(self, n: int) -> int:
        return max(1, round(self.channels(n)))


@dataclass(frozen=True)
class BBPLimit:
    regime: str          # "vanishing", "critical" or "saturated"
    value: float         # limit of the ratio raised to the power epsilon
    trusted: bool


def bbp_limit(scaling: ScalingSpec) -> BBPLimit:
    """``n -> inf`` limit of the pairwise ratio under ``N = alpha n^eta``."""
    trusted = scaling.eta > 1
    if scaling.eta < 2:
        return BBPLimit("vanishing", 0.0, trusted)
    if scaling.eta == 2:
        return BBPLimit("critical", math.exp(-1.0 / (2.0 * scaling.alpha)), trusted)
    return BBPLimit("saturated", 1.0, trusted)


def _q2(z: float, wp: WavepacketConfig) -> float:
    return 0.0 if math.isinf(z) else q2_kernel(z, wp)


def exponentiated_hom(z: float, scaling: ScalingSpec, wp: WavepacketConfig) -> float:
    """``exp[-(eps / 4 alpha) ((1 + x^2) Q2(0) + (1 - x^2) Q2(z))]``; ``z = inf`` allowed."""
    if not -1.0 <= scaling.x <= 1.0:
        raise ValueError(f"imbalance x must lie in [-1, 1], got {scaling.x}")
    x2 = scaling.x**2
    expo = (1 + x2) * _q2(0.0, wp) + (1 - x2) * (_q2(z, wp) if x2 < 1 else 0.0)
    return math.exp(-scaling.epsilon / (4.0 * scaling.alpha) * expo)


def split_counts(n: int, n1_fraction: float) -> tuple[int, int]:
    """``(n0, n1)`` with ``n1 = n * fraction`` rounded half up."""
    if not 0.0 <= n1_fraction <= 1.0:
        raise ValueError(f"condensate fraction must lie in [0, 1], got {n1_fraction}")
    n1 = int(math.floor(n * n1_fraction + 0.5))
    return n - n1, n1


def realized_imbalance(n: int, n1_fraction: float) -> float:
    """Imbalance ``x = (n1 - n0) / n`` after rounding the occupation to whole particles."""
    n0, n1 = split_counts(n, n1_fraction)
    return (n1 - n0) / n


def _double_factorial_odd(m: int) -> int:
    """``(2m - 1)!!`` with ``(-1)!! = 1``."""
    out = 1
    for k in range(1, 2 * m, 2):
        out *= k
    return out


def contraction_weight(n0: int, n1: int, l: int, l1: int, k: int) -> int:
    """Number of partial pairings with ``l1`` pairs inside the second group, ``k``
    mixed pairs and ``l - l1 - k`` pairs inside the first."""
    l0 = l - l1 - k
    if min(l0, l1, k) < 0 or 2 * l1 + k > n1 or 2 * l0 + k > n0:
        return 0
    return (math.comb(n1, 2 * l1) * _double_factorial_odd(l1)
            * math.comb(n1 - 2 * l1, k) * math.comb(n0, k) * math.factorial(k)
            * math.comb(n0 - k, 2 * l0) * _double_factorial_odd(l0))


def two_condensate_sum(n0: int, n1: int, N, epsilon: int, q0, q1):
    """Pair-contraction sum for ``n0`` particles at offset 0 and ``n1`` at offset z.

    With rational ``N, q0, q1`` the result is an exact Fraction.
    """
    w = Fraction(-epsilon) / Fraction(N)
    exact = all(isinstance(q, (int, Fraction)) for q in (q0, q1))
    terms = []
    n = n0 + n1
    for l in range(n // 2 + 1):
        for l1 in range(min(l, n1 // 2) + 1):
            for k in range(min(l - l1, n1 - 2 * l1) + 1):
                c = contraction_weight(n0, n1, l, l1, k)
                if c == 0:
                    continue
                if exact:
                    terms.append(c * w**l * Fraction(q0) ** (l - k) * Fraction(q1) ** k)
                else:
                    terms.append(c * float(w**l) * float(q0) ** (l - k) * float(q1) ** k)
    return sum(terms, Fraction(0)) if exact else math.fsum(terms)


def two_condensate_finite_n(n: int, n1_fraction: float, z: float, N, epsilon: int,
                            wp: WavepacketConfig) -> float:
    """Exact finite-``n`` pairwise ratio for two packets separated by ``z``."""
    if not 1 <= n <= MAX_TWO_CONDENSATE_N:
        raise ValueError(f"n must lie in [1, {MAX_TWO_CONDENSATE_N}]")
    n0, n1 = split_counts(n, n1_fraction)
    q0 = _q2(0.0, wp)
    q1 = _q2(z, wp)
    return float(two_condensate_sum(n0, n1, N, epsilon, q0, q1))


def perfect_matchings(items: Sequence[int]):
    """All perfect matchings of an even-length sequence, as tuples of pairs."""
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for m in perfect_matchings(rest[:i] + rest[i + 1:]):
            yield ((first, partner),) + m


def contraction_sum_bruteforce(n: int, delays: Sequence[float], N, epsilon: int,
                               wp: WavepacketConfig) -> float:
    """Explicit sum over even index subsets and their perfect matchings."""
    if n > MAX_BRUTEFORCE_N:
        raise ResourceLimitError(f"explicit enumeration is limited to n <= {MAX_BRUTEFORCE_N}")
    z = tuple(float(d) for d in delays)
    if len(z) != n:
        raise ValueError(f"expected {n} offsets, got {len(z)}")
    cache: dict[float, float] = {}

    def q(dz):
        dz = abs(dz)
        if dz not in cache:
            cache[dz] = _q2(dz, wp)
        return cache[dz]

    w = -epsilon / float(N)
    terms = []
    for size in range(0, n + 1, 2):
        for subset in itertools.combinations(range(n), size):
            for m in perfect_matchings(subset):
                terms.append(w ** (size // 2) * math.prod(q(_diff(z[i], z[j])) for i, j in m))
    return math.fsum(terms)


def _diff(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b) and a == b:
        return 0.0
    return a - b
