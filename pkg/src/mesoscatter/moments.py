"""Closed-form ensemble averages in exact rational arithmetic.

``p_tilde(n, N, beta, eps)`` is the averaged squared amplitude
``<|A~|^2>`` with ``A~ = perm(M)/sqrt(n!)`` (or det) for distinct channels;
the averaged probability is ``<P> = n! p_tilde`` (the a!b! normalization of
the probability cancels the a!b! enhancement of ``<|A~|^2>`` for bosons).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

MAX_WEINGARTEN_ORDER = 8
MAX_SECOND_MOMENT_ORDER = 3


class UnsupportedRegimeError(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    pass


class WeingartenDomainError(ValueError):
    pass


# --- partitions and symmetric-group characters ----------------------------

@dataclass(frozen=True)
class Partition:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p <= 0 for p in parts):
            raise ValueError("partition parts must be positive")
        if list(parts) != sorted(parts, reverse=True):
            raise ValueError(f"partition parts must be weakly decreasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return sum(self.parts)

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)


def _parts(p) -> tuple[int, ...]:
    if isinstance(p, Partition):
        return p.parts
    return Partition(tuple(p)).parts


def partitions(n: int) -> list[tuple[int, ...]]:
    """Partitions of n in reverse lexicographic order, e.g. (3,), (2, 1), (1, 1, 1)."""
    out = []

    def rec(remaining, largest, acc):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for p in range(min(remaining, largest), 0, -1):
            acc.append(p)
            rec(remaining - p, p, acc)
            acc.pop()

    rec(n, n, [])
    return out


def hook_dimension(lam) -> int:
    """Number of standard Young tableaux of shape lam (hook length formula)."""
    lam = _parts(lam)
    n = sum(lam)
    conj = [sum(1 for p in lam if p > j) for j in range(lam[0])] if lam else []
    hooks = 1
    for i, row in enumerate(lam):
        for j in range(row):
            hooks *= (row - j - 1) + (conj[j] - i - 1) + 1
    return math.factorial(n) // hooks


@lru_cache(maxsize=None)
def character(lam: tuple[int, ...], mu: tuple[int, ...]) -> int:
    """Irreducible character chi^lam at cycle type mu (Murnaghan-Nakayama on beta-sets)."""
    if not mu:
        return 1 if not lam else 0
    r, rest = mu[0], mu[1:]
    ell = len(lam)
    beads = [lam[i] + (ell - 1 - i) for i in range(ell)]
    bead_set = set(beads)
    total = 0
    for b in beads:
        t = b - r
        if t < 0 or t in bead_set:
            continue
        between = sum(1 for c in beads if t < c < b)
        new = sorted((t if c == b else c for c in beads), reverse=True)
        shape = tuple(x for x in (new[i] - (ell - 1 - i) for i in range(ell)) if x > 0)
        total += (-1) ** between * character(shape, rest)
    return total


def content_polynomial(lam, N) -> Fraction:
    """``C_lam(N) = prod over cells (i, j) of (N + j - i)``."""
    lam = _parts(lam)
    out = Fraction(1)
    for i, row in enumerate(lam):
        for j in range(row):
            out *= N + j - i
    return out


def cycle_type(perm: Sequence[int]) -> tuple[int, ...]:
    n = len(perm)
    seen = [False] * n
    lengths = []
    for i in range(n):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


def class_size(mu) -> int:
    """Number of permutations of cycle type mu."""
    mu = _parts(mu)
    z = 1
    for length, mult in _multiplicities(mu).items():
        z *= length ** mult * math.factorial(mult)
    return math.factorial(sum(mu)) // z


def _multiplicities(mu):
    out: dict[int, int] = {}
    for p in mu:
        out[p] = out.get(p, 0) + 1
    return out


def partition_sign(mu) -> int:
    return (-1) ** (sum(mu) - len(mu))


# --- Weingarten ------------------------------------------------------------

def weingarten_unitary(p, N) -> Fraction:
    """Unitary Weingarten class coefficient ``V_N(p) = (1/n!) sum_lam f^lam chi^lam(p) / C_lam(N)``."""
    mu = _parts(p)
    n = sum(mu)
    if n > MAX_WEINGARTEN_ORDER:
        raise ResourceLimitError(f"Weingarten order {n} exceeds {MAX_WEINGARTEN_ORDER}")
    return _weingarten(mu, Fraction(N))


@lru_cache(maxsize=None)
def _weingarten(mu: tuple[int, ...], N: Fraction) -> Fraction:
    n = sum(mu)
    if N < n:
        raise WeingartenDomainError(f"V_N requires N >= n in this evaluator (N={N}, n={n})")
    acc = Fraction(0)
    for lam in partitions(n):
        acc += Fraction(hook_dimension(lam) * character(lam, mu)) / content_polynomial(lam, N)
    return acc / math.factorial(n)


def weingarten_signed_sums(n: int, N) -> tuple[Fraction, Fraction]:
    """``(sum_tau V_N(tau), sum_tau sign(tau) V_N(tau))`` over S_n, grouped by cycle type."""
    plus = minus = Fraction(0)
    for mu in partitions(n):
        term = class_size(mu) * weingarten_unitary(mu, N)
        plus += term
        minus += partition_sign(mu) * term
    return plus, minus


def haar_moment(rows: Sequence[int], cols: Sequence[int], rows_c: Sequence[int], cols_c: Sequence[int],
                N) -> Fraction:
    """Exact ``<prod_k U[rows_k, cols_k] conj(U[rows_c_k, cols_c_k])>`` over Haar U(N).

    Sum over bijections sigma, pi with ``rows_k = rows_c_sigma(k)`` and
    ``cols_k = cols_c_pi(k)`` of ``V_N(sigma^-1 pi)``.
    """
    m = len(rows)
    if not (len(cols) == len(rows_c) == len(cols_c) == m):
        raise ValueError("index lists must have equal length")
    sigmas = list(_matchings(rows, rows_c))
    pis = list(_matchings(cols, cols_c))
    total = Fraction(0)
    for s in sigmas:
        s_inv = [0] * m
        for k, v in enumerate(s):
            s_inv[v] = k
        for p in pis:
            total += weingarten_unitary(cycle_type([s_inv[p[k]] for k in range(m)]), N)
    return total


def _matchings(src, dst):
    m = len(src)
    choice = [[j for j in range(m) if dst[j] == src[k]] for k in range(m)]
    out = [0] * m
    used = [False] * m

    def rec(k):
        if k == m:
            yield tuple(out)
            return
        for j in choice[k]:
            if not used[j]:
                used[j] = True
                out[k] = j
                yield from rec(k + 1)
                used[j] = False

    yield from rec(0)


# --- first moments ---------------------------------------------------------

def _rising(N, n, step) -> Fraction:
    out = Fraction(1)
    for l in range(n):
        out *= N + step * l
    return out


def p_tilde(n: int, N, beta: int = 2, epsilon: int = 1) -> Fraction:
    """Gamma-function closed forms of ``<|A~_n|^2>`` for distinct channels."""
    _check_class(beta, epsilon)
    N = Fraction(N)
    if n == 0:
        return Fraction(1)
    if epsilon == -1 and n > N:
        return Fraction(0)
    if beta == 2:
        return 1 / _rising(N, n, epsilon)
    if epsilon == 1:
        return (N + n - 1) / (_rising(N, n, 1) * (N + 2 * n - 1))
    # Gamma(N - n + 2) / Gamma(N + 2)
    return 1 / _rising(N + 1, n, -1)


def sp_weak_localization_ratio(n: int, N, beta: int) -> Fraction:
    """Single-particle loop factor ``(1 - (1 - 2/beta)/N)^-n``."""
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    N = Fraction(N)
    return (1 - (1 - Fraction(2, beta)) / N) ** (-n)


def classical_probability(n: int, N, b_mult: Iterable[int] = ()) -> Fraction:
    """Distinguishable-particle average ``(n!/b!) N^-n``."""
    bf = math.prod(math.factorial(m) for m in b_mult)
    return Fraction(math.factorial(n), bf) / Fraction(N) ** n


def orthogonal_weight(n: int, N, epsilon: int) -> Fraction:
    N = Fraction(N)
    return (N + epsilon * (n - 1)) / (N + n + epsilon * (n - 1))


@dataclass(frozen=True)
class MomentFormulaResult:
    value: Fraction          # <P>, probability normalized by a! b!
    p_tilde: Fraction        # <|A~|^2> for distinct channels
    p_hat: Fraction          # <|A~|^2> with the actual channel multiplicities
    beta: int
    epsilon: int
    n: int
    N: Fraction
    notes: tuple[str, ...] = field(default=())

    def __float__(self):
        return float(self.value)


def first_moment(n: int, N, beta: int = 2, epsilon: int = 1, b_is_singly_occupied: bool = True,
                 a_mult: Sequence[int] = (), b_mult: Sequence[int] = (),
                 channels_disjoint: bool = True) -> MomentFormulaResult:
    """Averaged coincidence probability at zero delays and zero dwell time.

    ``<P> = W n! / prod_l (N + eps l)`` times 1 for bosons and
    ``delta(b singly occupied)`` for fermions, with ``W = 1`` (beta=2) or
    ``(N + eps(n-1)) / (N + n + eps(n-1))`` (beta=1). ``a_mult``/``b_mult``
    list channel multiplicities; repeated channels enhance ``<|A~|^2>`` by
    ``a! b!`` for bosons and kill fermionic amplitudes.
    """
    _check_class(beta, epsilon)
    if n < 1 or N < 1:
        raise ValueError("need n >= 1 and N >= 1")
    if beta == 1 and not channels_disjoint:
        raise UnsupportedRegimeError("beta=1 closed forms require disjoint incoming and outgoing channels")
    a_mult = tuple(a_mult) or (1,) * n
    b_mult = tuple(b_mult) or ((1,) * n if b_is_singly_occupied else ())
    if sum(a_mult) != n or (b_mult and sum(b_mult) != n):
        raise ValueError("multiplicities must sum to n")
    if b_mult and any(m > 1 for m in b_mult):
        b_is_singly_occupied = False
    ab_fact = math.prod(math.factorial(m) for m in a_mult) * math.prod(math.factorial(m) for m in b_mult)
    Nf = Fraction(N)
    pt = p_tilde(n, Nf, beta, epsilon)
    coincident = (not b_is_singly_occupied) or any(m > 1 for m in a_mult)
    if epsilon == -1 and (coincident or n > Nf):
        value = Fraction(0)
        p_hat = Fraction(0)
    else:
        W = Fraction(1) if beta == 2 else orthogonal_weight(n, Nf, epsilon)
        value = W * math.factorial(n) / _rising(Nf, n, epsilon)
        p_hat = ab_fact * pt
    return MomentFormulaResult(value, pt, p_hat, beta, epsilon, n, Nf)


def _check_class(beta, epsilon):
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")


# --- second moments --------------------------------------------------------

def second_moment_exact(n: int, N, epsilon: int = 1) -> Fraction:
    """``L_n = <|A~_n|^4>`` over CUE for distinct channels, by Weingarten sums over S_2n."""
    if n > MAX_SECOND_MOMENT_ORDER:
        raise ResourceLimitError(f"S_2n enumeration limited to n <= {MAX_SECOND_MOMENT_ORDER}")
    if n == 0:
        return Fraction(1)
    perms = list(itertools.permutations(range(n)))
    sign = {p: _perm_sign(p) if epsilon == -1 else 1 for p in perms}
    rows = tuple(range(n)) * 2
    total = Fraction(0)
    cache: dict[tuple, Fraction] = {}
    for P, R, Pc, Rc in itertools.product(perms, repeat=4):
        cols = P + R
        cols_c = Pc + Rc
        # the average depends only on the multiset pattern; canonicalize by relabeling
        key = (cols, cols_c)
        if key not in cache:
            cache[key] = haar_moment(rows, cols, rows, cols_c, N)
        total += sign[P] * sign[R] * sign[Pc] * sign[Rc] * cache[key]
    return total / math.factorial(n) ** 2


def _perm_sign(p) -> int:
    return partition_sign(cycle_type(p))


def second_moment_closed_form(n: int, N, beta: int = 2) -> Fraction:
    """Published closed forms of ``L_n`` for n = 1, 2 (bosons)."""
    N = Fraction(N)
    if n == 1:
        return 2 / (N * (N + 1)) if beta == 2 else 2 / (N * (N + 3))
    if n == 2:
        if beta == 2:
            return (3 * N ** 2 - N + 2) / (N ** 2 * (N ** 2 - 1) * (N + 2) * (N + 3))
        return (3 * N ** 2 + 5 * N - 16) / (N * (N ** 2 - 4) * (N + 1) * (N + 3) * (N + 7))
    raise ValueError("closed forms are available for n = 1, 2 only")


def variance_leading_order(n: int, N) -> tuple[float, float]:
    """Leading large-N ``(variance, second moment) = (n, n + 1) / N^2n``."""
    scale = float(N) ** (-2 * n)
    return n * scale, (n + 1) * scale
