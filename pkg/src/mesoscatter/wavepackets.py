"""Wavepacket overlaps and dwell-time dephasing kernels.

Conventions: hbar = m = 1 is never needed explicitly because every kernel is
written in length units. ``lam = v * tau_d`` is the dwell length.

* ``F(z) = int X(x) X(x - z) dx`` for a real, normalized packet ``X``. The
  Gaussian packet ``X(x) = (2 pi s^2)^(-1/4) exp(-x^2 / 4 s^2)`` has
  ``|X|^2`` of variance ``s^2`` and ``F(z) = exp(-z^2 / 8 s^2)``.
* ``Q2(z) = int F^2(z - v t) exp(-|t|/tau_d) / (2 tau_d) dt``.
* ``Q3(z, z')`` averages ``F(z - u) F(z' - u') F(z - z' - u + u')`` over the
  three-particle common-exit kernel

      K(u, u') = exp(-(3 max(u, u', 0) - u - u') / lam) / (3 lam^2),

  the three-body analogue of the pair kernel ``exp(-|u|/lam) / (2 lam)``
  (which is ``exp(-(2 max(u, 0) - u) / lam)`` normalized). K integrates to
  one, so ``tau_d -> 0`` gives ``F(z) F(z') F(z - z')``, and for
  ``lam >> s`` it gives ``C3 * s^2 * K(z, z')`` with
  ``C3 = s^-2 int int F(z) F(z') F(z - z') dz dz'``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate, special

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
NORM_TOL = 1e-8
LOG2 = math.log(2.0)


class ShapeValidationError(ValueError):
    pass


class QuadratureAccuracyError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True, eq=False)
class TabulatedShape:
    """Piecewise-linear real packet ``X(x)`` on a strictly increasing grid, zero outside."""

    x: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if x.ndim != 1 or x.shape != X.shape or x.size < 2:
            raise ShapeValidationError("tabulated shape needs two equal-length 1D columns with >= 2 points")
        if np.any(np.diff(x) <= 0):
            raise ShapeValidationError("x column must be strictly increasing")
        x.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "X", X)
        norm = self.norm()
        if abs(norm - 1.0) > NORM_TOL:
            raise ShapeValidationError(f"tabulated shape is not normalized: int |X|^2 dx = {norm:.12g}")

    def norm(self) -> float:
        h = np.diff(self.x)
        y0, y1 = self.X[:-1], self.X[1:]
        return float(np.sum(h * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0))

    def __call__(self, x):
        return np.interp(x, self.x, self.X, left=0.0, right=0.0)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def width(self) -> float:
        """Standard deviation of ``|X|^2``."""
        lo, hi = self.support
        xs = np.union1d(self.x, np.linspace(lo, hi, 20001))
        w = self(xs) ** 2
        m1 = np.trapezoid(xs * w, xs)
        m2 = np.trapezoid(xs * xs * w, xs)
        return float(math.sqrt(max(m2 - m1 * m1, 0.0)))

    def overlap(self, z: float) -> float:
        """Exact ``int X(x) X(x - z) dx``: the integrand is piecewise quadratic, so Simpson is exact."""
        lo, hi = self.support
        a, b = max(lo, lo + z), min(hi, hi + z)
        if a >= b:
            return 0.0
        nodes = np.concatenate([self.x, self.x + z])
        nodes = np.unique(np.clip(nodes, a, b))
        l, r = nodes[:-1], nodes[1:]
        m = 0.5 * (l + r)

        def f(t):
            return self(t) * self(t - z)

        return float(np.sum((r - l) / 6.0 * (f(l) + 4.0 * f(m) + f(r))))

    @classmethod
    def from_file(cls, path) -> "TabulatedShape":
        """Two whitespace-separated columns ``x X(x)``; lines starting with '#' are comments."""
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ShapeValidationError(f"{path}: expected two columns, found {data.shape[1]}")
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class WavepacketConfig:
    s: float = 1.0
    k: float = 50.0
    v: float = 1.0
    tau_d: float = 0.0
    shape: str = "gaussian"
    table: Optional[TabulatedShape] = field(default=None, compare=False)
    warn_ks: float = 10.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "tabulated"):
            raise ValueError(f"unknown packet shape {self.shape!r}")
        if self.shape == "tabulated" and self.table is None:
            raise ValueError("tabulated shape requires a table")
        if self.s <= 0 or self.v <= 0:
            raise ValueError("packet width s and velocity v must be positive")
        if self.tau_d < 0:
            raise ValueError("dwell time tau_d must be non-negative")
        if self.k * self.s < self.warn_ks:
            warnings.warn(f"k*s = {self.k * self.s:.3g} is not >> 1; narrow-packet reduction may be inaccurate",
                          stacklevel=3)

    @classmethod
    def tabulated(cls, table: TabulatedShape, **kw) -> "WavepacketConfig":
        kw.setdefault("s", table.width())
        return cls(shape="tabulated", table=table, **kw)

    @property
    def tau_s(self) -> float:
        return self.s / self.v

    @property
    def dwell_length(self) -> float:
        return self.v * self.tau_d

    def with_dwell_ratio(self, ratio: float) -> "WavepacketConfig":
        """Copy with ``tau_d = ratio * tau_s``."""
        return _replace(self, tau_d=ratio * self.tau_s)

    def support_radius(self) -> float:
        """Half-width beyond which F is zero (tabulated) or below exp(-50) (Gaussian)."""
        if self.shape == "gaussian":
            return 20.0 * self.s
        lo, hi = self.table.support
        return hi - lo


def _replace(wp: WavepacketConfig, **kw) -> WavepacketConfig:
    d = dict(s=wp.s, k=wp.k, v=wp.v, tau_d=wp.tau_d, shape=wp.shape, table=wp.table, warn_ks=wp.warn_ks)
    d.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return WavepacketConfig(**d)


def overlap_F(z: float, wp: WavepacketConfig) -> float:
    if wp.shape == "gaussian":
        return math.exp(-z * z / (8.0 * wp.s * wp.s))
    return wp.table.overlap(z)


def overlap_F_squared_integral(wp: WavepacketConfig) -> float:
    """``int F^2(z) dz`` (``2 sqrt(pi) s`` for Gaussian packets)."""
    if wp.shape == "gaussian":
        return 2.0 * math.sqrt(math.pi) * wp.s
    R = wp.support_radius()
    val, _ = integrate.quad(lambda z: overlap_F(z, wp) ** 2, -R, R, limit=200,
                            epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return val


def _log_erfc(w):
    return LOG2 + special.log_ndtr(-math.sqrt(2.0) * w)


def q2_kernel(z: float, wp: WavepacketConfig) -> float:
    """Dwell-time averaged squared overlap ``Q2(z)``; ``tau_d = 0`` returns ``F(z)^2``."""
    if wp.tau_d == 0:
        return overlap_F(z, wp) ** 2
    if wp.shape != "gaussian":
        return q2_kernel_quadrature(z, wp)
    s, lam = wp.s, wp.dwell_length
    r = s / lam
    out = 0.0
    for zz in (z, -z):
        out += math.exp(r * r - zz / lam + _log_erfc(r - zz / (2.0 * s)))
    return math.sqrt(math.pi) * s / (2.0 * lam) * out


def q2_kernel_quadrature(z: float, wp: WavepacketConfig) -> float:
    """``Q2`` by direct 1D quadrature of the convolution in ``u = v t``."""
    if wp.tau_d == 0:
        return overlap_F(z, wp) ** 2
    lam = wp.dwell_length
    R = wp.support_radius()

    def f(u):
        return overlap_F(u, wp) ** 2 * math.exp(-abs(z - u) / lam) / (2.0 * lam)

    pts = [p for p in (z,) if -R < p < R]
    val, err = integrate.quad(f, -R, R, points=pts or None, limit=400,
                              epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL)
    return val


def q2_large_dwell_limit(z: float, wp: WavepacketConfig) -> float:
    """``(int F^2 dz / s) exp(-|z| / v tau_d) / (2 tau_d / tau_s)``, valid for ``tau_d >> tau_s``."""
    if wp.tau_d == 0:
        raise ValueError("large-dwell limit needs tau_d > 0")
    return (overlap_F_squared_integral(wp) / wp.s) * math.exp(-abs(z) / wp.dwell_length) / (
        2.0 * wp.tau_d / wp.tau_s)


def _gaussian_momentum_density(p, s):
    """``|X~(p)|^2`` for the Gaussian packet, with ``int |X~|^2 dp / 2 pi = 1``."""
    return math.sqrt(8.0 * math.pi) * s * np.exp(-2.0 * p * p * s * s)


def q2_energy_integral(z: float, wp: WavepacketConfig, epsrel: float = 1e-10,
                       tol: float = 1e-7, exact_dispersion: bool = False) -> float:
    """``Q2`` from the momentum-space double integral before the time-domain transformation.

    Default (narrow-packet, linearized) form::

        Q2(z) = int dQ dq  cos(q z) / (1 + lam^2 q^2) |X~(Q - q/2)|^2 |X~(Q + q/2)|^2 / (4 pi^2)

    With ``exact_dispersion=True`` the pre-linearization integral over
    ``q1, q2 > 0`` with ``E = v q^2 / 2k`` is evaluated instead; it differs
    from the linearized form by corrections that vanish as ``k s -> inf``.

    Gaussian packets only. Raises :class:`QuadratureAccuracyError` if the
    reported absolute error exceeds ``tol``.
    """
    if wp.shape != "gaussian":
        raise NotImplementedError("momentum-space check is implemented for Gaussian packets")
    s, lam = wp.s, wp.dwell_length
    if exact_dispersion:
        return _q2_energy_exact(z, wp, epsrel, tol)

    def inner(q):
        # Q integrand is even; integrate over Q > 0
        g = lambda Q: (_gaussian_momentum_density(Q - q / 2, s)
                       * _gaussian_momentum_density(Q + q / 2, s))
        v, e = integrate.quad(g, 0.0, 10.0 / s, epsabs=1e-14, epsrel=epsrel, limit=200)
        return 2.0 * v, 2.0 * e

    errs = []

    def outer(q):
        v, e = inner(q)
        errs.append(e)
        return math.cos(q * z) / (1.0 + lam * lam * q * q) * v / (4.0 * math.pi ** 2)

    # q integrand is even in q
    qmax = 14.0 / s
    val, err = integrate.quad(outer, 0.0, qmax, epsabs=1e-14, epsrel=epsrel, limit=400)
    val *= 2.0
    achieved = 2.0 * err + (max(errs) if errs else 0.0)
    if achieved > tol:
        raise QuadratureAccuracyError("energy-integral quadrature did not converge", achieved)
    return val


def _q2_energy_exact(z, wp, epsrel, tol):
    s, k, v, tau = wp.s, wp.k, wp.v, wp.tau_d
    half = 12.0 / s
    lo, hi = max(0.0, k - half), k + half

    def f(q2, q1):
        dE = v * (q1 * q1 - q2 * q2) / (2.0 * k)
        return (math.cos((q2 - q1) * z) / (1.0 + (tau * dE) ** 2)
                * _gaussian_momentum_density(k - q1, s) * _gaussian_momentum_density(k - q2, s)
                / (4.0 * math.pi ** 2))

    val, err = integrate.dblquad(f, lo, hi, lo, hi, epsabs=1e-13, epsrel=epsrel)
    if err > tol:
        raise QuadratureAccuracyError("exact-dispersion quadrature did not converge", err)
    return val


# --- three-body kernel -----------------------------------------------------

def _fff(a, b, wp):
    return overlap_F(a, wp) * overlap_F(b, wp) * overlap_F(a - b, wp)


def three_body_weight(u: float, u2: float, lam: float) -> float:
    """Normalized common-exit kernel ``K(u, u')`` in length units."""
    m = max(u, u2, 0.0)
    return math.exp(-(3.0 * m - u - u2) / lam) / (3.0 * lam * lam)


def _gauss_q3_log_inner(a, zp, upper, s, lam):
    # log of int_{u' <= upper} exp(u'/lam) G(a, z' - u') du'
    c0 = zp - upper - 0.5 * a
    w = (c0 + 2.0 * s * s / lam) / (2.0 * s)
    return (zp / lam - a / (2.0 * lam) - 3.0 * a * a / (16.0 * s * s)
            + math.log(s * math.sqrt(math.pi)) + (s / lam) ** 2 + _log_erfc(w))


def _gauss_q3_sector_max_u(z, zp, s, lam):
    # sector u >= 0, u >= u': weight exp(-(2u - u')/lam)
    def f(u):
        return math.exp(-2.0 * u / lam + _gauss_q3_log_inner(z - u, zp, u, s, lam))

    top = max(z, zp, 0.0) + 40.0 * s + 60.0 * lam
    pts = sorted({p for p in (z, zp) if 0.0 < p < top})
    val, _ = integrate.quad(f, 0.0, top, points=pts or None, limit=400,
                            epsabs=1e-15, epsrel=QUAD_EPSREL)
    return val


def _gauss_q3_sector_max_zero(z, zp, s, lam):
    # sector u <= 0, u' <= 0: weight exp((u + u')/lam)
    def f(u):
        return math.exp(u / lam + _gauss_q3_log_inner(z - u, zp, 0.0, s, lam))

    bottom = min(z, zp, 0.0) - 40.0 * s - 60.0 * lam
    pts = sorted({p for p in (z, zp) if bottom < p < 0.0})
    val, _ = integrate.quad(f, bottom, 0.0, points=pts or None, limit=400,
                            epsabs=1e-15, epsrel=QUAD_EPSREL)
    return val


def q3_kernel(z: float, z_prime: float, wp: WavepacketConfig) -> float:
    """Three-body overlap ``Q3(z, z')`` for relative offsets ``z = z_ij``, ``z' = z_kj``."""
    if wp.tau_d == 0:
        return _fff(z, z_prime, wp)
    if wp.shape != "gaussian":
        return q3_kernel_quadrature(z, z_prime, wp)
    s, lam = wp.s, wp.dwell_length
    total = (_gauss_q3_sector_max_u(z, z_prime, s, lam)
             + _gauss_q3_sector_max_u(z_prime, z, s, lam)
             + _gauss_q3_sector_max_zero(z, z_prime, s, lam))
    return total / (3.0 * lam * lam)


def q3_kernel_quadrature(z: float, z_prime: float, wp: WavepacketConfig,
                         epsabs: float = 1e-10, epsrel: float = 1e-8) -> float:
    """``Q3`` by 2D quadrature over the packet arguments ``a = z - u``, ``b = z' - u'``."""
    if wp.tau_d == 0:
        return _fff(z, z_prime, wp)
    lam = wp.dwell_length
    R = wp.support_radius()

    def f(b, a):
        return _fff(a, b, wp) * three_body_weight(z - a, z_prime - b, lam)

    # split the a-range at the kernel kinks a = z and the b-range at b = z', b = z' - z + a
    a_pts = sorted({-R, R} | ({z} if -R < z < R else set()))
    total = 0.0
    for a0, a1 in zip(a_pts[:-1], a_pts[1:]):
        def inner(a):
            b_pts = sorted({-R, R} | {p for p in (z_prime, z_prime - z + a) if -R < p < R})
            acc = 0.0
            for b0, b1 in zip(b_pts[:-1], b_pts[1:]):
                acc += integrate.quad(f, b0, b1, args=(a,), epsabs=epsabs, epsrel=epsrel, limit=200)[0]
            return acc
        total += integrate.quad(inner, a0, a1, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return total


def c3_constant(wp: WavepacketConfig) -> float:
    """``C3 = s^-2 int int F(z) F(z') F(z - z') dz dz'``; ``8 pi / sqrt(3)`` for Gaussian packets."""
    if wp.shape == "gaussian":
        return 8.0 * math.pi / math.sqrt(3.0)
    R = wp.support_radius()
    val, _ = integrate.dblquad(lambda b, a: _fff(a, b, wp), -R, R, -R, R, epsabs=1e-10, epsrel=1e-9)
    return val / wp.s ** 2


def q3_large_dwell_limit(z: float, z_prime: float, wp: WavepacketConfig) -> float:
    """``C3 exp(-(3 max(z, z', 0) - z - z') / v tau_d) / (3 (tau_d / tau_s)^2)`` for ``tau_d >> tau_s``."""
    if wp.tau_d == 0:
        raise ValueError("large-dwell limit needs tau_d > 0")
    lam = wp.dwell_length
    m = max(z, z_prime, 0.0)
    return c3_constant(wp) * math.exp(-(3.0 * m - z - z_prime) / lam) / (3.0 * (wp.tau_d / wp.tau_s) ** 2)


# --- averaged ratios -------------------------------------------------------

def pairwise_ratio(n: int, N: int, beta: int, epsilon: int, delays, wp: WavepacketConfig) -> float:
    """``<P>/<P_cl>`` truncated to pair correlations: SP factor ``- (eps/N) sum_{i<j} Q2(z_ij)``."""
    from .moments import sp_weak_localization_ratio

    z = _delays_tuple(delays, n)
    pair_sum = sum(q2_kernel(z[i] - z[j], wp) for i in range(n) for j in range(i + 1, n))
    return float(sp_weak_localization_ratio(n, N, beta)) - epsilon / N * pair_sum


def triplet_term(n: int, N: int, epsilon: int, delays, wp: WavepacketConfig) -> float:
    """Three-body correction ``(2 eps / N^2) sum_{i<j<k} Q3(z_ij, z_kj)``; zero for ``n < 3``."""
    if n < 3:
        return 0.0
    z = _delays_tuple(delays, n)
    acc = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                acc += q3_kernel(z[i] - z[j], z[k] - z[j], wp)
    return 2.0 * epsilon / N ** 2 * acc


def _delays_tuple(delays, n):
    z = tuple(getattr(delays, "z", delays))
    if len(z) != n:
        raise ValueError(f"expected {n} offsets, got {len(z)}")
    return z
