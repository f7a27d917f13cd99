"""Exact many-body amplitudes and probabilities for a fixed scattering matrix.

Channel labels in :class:`ChannelAssignment` are 1-based, ``1 <= c <= N``.
The n x n "transfer" matrix of an assignment is ``M[i, j] = sigma[b_j, a_i]``:
row i is the particle entering in ``a_i``, column j the outgoing slot ``b_j``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import ScatteringMatrix
from .wavepackets import WavepacketConfig, overlap_F

MAX_PERMANENT_ORDER = 30


def _mult_factorial(chans: Sequence[int]) -> int:
    out = 1
    for m in Counter(chans).values():
        out *= math.factorial(m)
    return out


@dataclass(frozen=True)
class ChannelAssignment:
    """Incoming channels ``a``, outgoing channels ``b`` and statistics (+1 bosons, -1 fermions)."""

    a: tuple[int, ...]
    b: tuple[int, ...]
    epsilon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(c) for c in self.a))
        object.__setattr__(self, "b", tuple(int(c) for c in self.b))
        if len(self.a) != len(self.b) or not self.a:
            raise ValueError("a and b must be non-empty and of equal length")
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +1 (bosons) or -1 (fermions)")
        if min(self.a + self.b) < 1:
            raise ValueError("channel labels are 1-based")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def a_mult_factorial(self) -> int:
        return _mult_factorial(self.a)

    @property
    def b_mult_factorial(self) -> int:
        return _mult_factorial(self.b)

    @property
    def has_coincidence(self) -> bool:
        return len(set(self.a)) < self.n or len(set(self.b)) < self.n

    @property
    def b_singly_occupied(self) -> bool:
        return len(set(self.b)) == self.n

    @property
    def disjoint(self) -> bool:
        return not set(self.a) & set(self.b)

    def check(self, N: int) -> None:
        if max(self.a + self.b) > N:
            raise ValueError(f"channel label exceeds N={N}: a={self.a}, b={self.b}")


@dataclass(frozen=True)
class DelayVector:
    z: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(float(x) for x in self.z))

    @property
    def n(self) -> int:
        return len(self.z)

    def differences(self) -> np.ndarray:
        """Matrix of ``z_ij = z_i - z_j`` (antisymmetric by construction)."""
        z = np.asarray(self.z)
        return z[:, None] - z[None, :]


def _as_array(sigma) -> np.ndarray:
    if isinstance(sigma, ScatteringMatrix):
        return sigma.entries
    return np.asarray(sigma, dtype=complex)


def transfer_matrix(sigma, ch: ChannelAssignment) -> np.ndarray:
    s = _as_array(sigma)
    ch.check(s.shape[-1])
    a = np.array(ch.a) - 1
    b = np.array(ch.b) - 1
    # M[..., i, j] = sigma[..., b_j, a_i]
    return np.swapaxes(s[..., b[:, None], a[None, :]], -1, -2)


def permanent(M) -> complex:
    """Permanent by Ryser's formula with Gray-code subset order, O(2^n n)."""
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n > MAX_PERMANENT_ORDER:
        raise ValueError(f"permanent of order {n} exceeds the supported limit {MAX_PERMANENT_ORDER}")
    A = A.astype(complex)
    rowsums = np.zeros(n, dtype=complex)
    in_set = np.zeros(n, dtype=bool)
    total = 0j
    for k in range(1, 2**n):
        j = (k & -k).bit_length() - 1
        if in_set[j]:
            rowsums -= A[:, j]
        else:
            rowsums += A[:, j]
        in_set[j] = not in_set[j]
        sign = -1.0 if bin(k ^ (k >> 1)).count("1") % 2 else 1.0
        total += sign * np.prod(rowsums)
    return complex((-1) ** n * total)


def permanent_batch(Ms: np.ndarray) -> np.ndarray:
    """Ryser permanents of a stack of square matrices, shape (..., n, n) -> (...)."""
    A = np.asarray(Ms, dtype=complex)
    n = A.shape[-1]
    rowsums = np.zeros(A.shape[:-1], dtype=complex)
    in_set = np.zeros(n, dtype=bool)
    total = np.zeros(A.shape[:-2], dtype=complex)
    for k in range(1, 2**n):
        j = (k & -k).bit_length() - 1
        if in_set[j]:
            rowsums -= A[..., :, j]
        else:
            rowsums += A[..., :, j]
        in_set[j] = not in_set[j]
        sign = -1.0 if bin(k ^ (k >> 1)).count("1") % 2 else 1.0
        total += sign * np.prod(rowsums, axis=-1)
    return (-1) ** n * total


def symmetrized_sum(M, epsilon: int) -> complex:
    """``sum_P eps^P prod_i M[i, P(i)]``: permanent for bosons, determinant for fermions."""
    if epsilon == 1:
        return permanent(M)
    return complex(np.linalg.det(np.asarray(M, dtype=complex)))


def symmetrized_sum_batch(Ms: np.ndarray, epsilon: int) -> np.ndarray:
    if epsilon == 1:
        return permanent_batch(Ms)
    return np.linalg.det(np.asarray(Ms, dtype=complex))


def mb_amplitude(sigma, ch: ChannelAssignment) -> complex:
    """Symmetrized amplitude at degenerate energies, normalized by sqrt(n!)."""
    if ch.epsilon == -1 and ch.has_coincidence:
        return 0j
    M = transfer_matrix(sigma, ch)
    return symmetrized_sum(M, ch.epsilon) / math.sqrt(math.factorial(ch.n))


def mb_probability_equal_times(sigma, ch: ChannelAssignment) -> float:
    """``|sum_P eps^P prod sigma|^2 / (a! b!)`` for simultaneous arrival."""
    if ch.epsilon == -1 and ch.has_coincidence:
        return 0.0
    M = transfer_matrix(sigma, ch)
    amp = symmetrized_sum(M, ch.epsilon)
    return float(abs(amp) ** 2 / (ch.a_mult_factorial * ch.b_mult_factorial))


def mb_probability_batch(sigmas: np.ndarray, ch: ChannelAssignment) -> np.ndarray:
    """Vectorized :func:`mb_probability_equal_times` over a stack of matrices."""
    if ch.epsilon == -1 and ch.has_coincidence:
        return np.zeros(np.asarray(sigmas).shape[:-2])
    M = transfer_matrix(sigmas, ch)
    amp = symmetrized_sum_batch(M, ch.epsilon)
    return np.abs(amp) ** 2 / (ch.a_mult_factorial * ch.b_mult_factorial)


def overlap_matrix(delays: DelayVector, wp: WavepacketConfig) -> np.ndarray:
    """``S[i, i'] = F(z_i - z_i')``: energy-integrated overlap of two packets."""
    dz = delays.differences()
    return np.vectorize(lambda z: overlap_F(z, wp))(dz)


def mb_probability_delayed(sigma, ch: ChannelAssignment, delays: DelayVector, wp: WavepacketConfig) -> float:
    """Coincidence probability for packets with offsets ``delays`` and energy-independent sigma.

    The energy integral over output slot j pairs the particle ``P^-1(j)`` of
    the amplitude with ``P'^-1(j)`` of its conjugate, leaving the overlap
    ``F(z_i - z_i')``. Writing ``rho = P'^-1 P``,

        P = 1/(a! b!) sum_rho eps^rho prod_i S[i, rho(i)] perm(M o conj(M[rho, :]))

    where ``o`` is the elementwise product.
    """
    if delays.n != ch.n:
        raise ValueError("delay vector length must equal the particle number")
    if ch.epsilon == -1 and ch.has_coincidence:
        return 0.0
    M = transfer_matrix(sigma, ch)
    S = overlap_matrix(delays, wp)
    n = ch.n
    total = 0j
    for rho in itertools.permutations(range(n)):
        w = np.prod(S[np.arange(n), rho])
        if w == 0.0:
            continue
        sgn = permutation_sign(rho) if ch.epsilon == -1 else 1
        total += sgn * w * permanent(M * M[list(rho), :].conj())
    return float(total.real / (ch.a_mult_factorial * ch.b_mult_factorial))


def distinguishable_probability(sigma, ch: ChannelAssignment) -> float:
    """Fully dephased limit ``1/(a! b!) sum_P prod_i |sigma[b_P(i), a_i]|^2``."""
    M = transfer_matrix(sigma, ch)
    return float(permanent(np.abs(M) ** 2).real / (ch.a_mult_factorial * ch.b_mult_factorial))


def permutation_sign(p: Sequence[int]) -> int:
    p = list(p)
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def outgoing_configurations(N: int, n: int):
    """All ordered outgoing tuples ``b_1 <= ... <= b_n`` (1-based)."""
    return itertools.combinations_with_replacement(range(1, N + 1), n)
