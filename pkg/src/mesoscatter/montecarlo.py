"""Monte Carlo moments of many-body probabilities over circular ensembles.

Samples are drawn in fixed-size blocks; block ``b`` uses the stream
``SeedSpec(master_seed, b)``. Each block is reduced to ``(count, mean, M2)``
and the partial accumulators are merged in block order with Chan's update,
so the estimate is bit-identical for any number of worker processes.

Two normalizations of a sample are offered:

* ``"amplitude"``: ``|sum_P eps^P prod sigma|^2 / n!``, i.e. ``|A~|^2``.
  Its average is ``P~`` for distinct channels and ``a! b! P~`` otherwise.
* ``"probability"``: ``|sum_P eps^P prod sigma|^2 / (a! b!)``, the
  coincidence probability. Its average is ``n! P~`` for distinct channels.

Second moments always use the amplitude convention, ``|A~|^4``.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .amplitudes import ChannelAssignment, symmetrized_sum_batch, transfer_matrix
from .ensembles import SeedSpec, ensemble_beta, sample_batch

BLOCK_SIZE = 4096
CONVENTIONS = ("amplitude", "probability")


class ConfigError(ValueError):
    pass


class SinkWriteError(OSError):
    """Raised when a sweep cannot write its output; ``partial`` holds finished rows."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


@dataclass
class Accumulator:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        d = value - self.mean
        self.mean += d / self.count
        self.m2 += d * (value - self.mean)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "Accumulator":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "Accumulator") -> "Accumulator":
        if other.count == 0:
            return Accumulator(self.count, self.mean, self.m2)
        if self.count == 0:
            return Accumulator(other.count, other.mean, other.m2)
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return Accumulator(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else 0.0


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_error: float
    samples: int
    master_seed: int
    elapsed: float = 0.0

    def z_score(self, reference: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.std_error

    def as_row(self) -> dict:
        """Deterministic fields only (wall time excluded)."""
        d = asdict(self)
        d.pop("elapsed")
        return d


def _sample_values(ensemble: str, ch: ChannelAssignment, N: int, seed: SeedSpec, count: int,
                   power: int, convention: str) -> np.ndarray:
    if ch.epsilon == -1 and ch.has_coincidence:
        return np.zeros(count)
    sig = sample_batch(ensemble, N, seed, count)
    amp = symmetrized_sum_batch(transfer_matrix(sig, ch), ch.epsilon)
    if convention == "amplitude":
        norm = math.factorial(ch.n)
    else:
        norm = ch.a_mult_factorial * ch.b_mult_factorial
    return (np.abs(amp) ** 2 / norm) ** (power // 2)


def _run_block(args) -> Accumulator:
    ensemble, ch, N, master, block, count, power, convention = args
    vals = _sample_values(ensemble, ch, N, SeedSpec(master, block), count, power, convention)
    return Accumulator.from_array(vals)


def _block_plan(samples: int, block_size: int) -> list[int]:
    full, rest = divmod(samples, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _estimate(ensemble, ch, N, samples, seed, workers, power, convention, block_size) -> MomentEstimate:
    if samples < 2:
        raise ConfigError(f"need at least 2 samples, got {samples}")
    if convention not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    ensemble_beta(ensemble)
    ch.check(N)
    master = seed.master_seed if isinstance(seed, SeedSpec) else int(seed)
    t0 = time.perf_counter()
    tasks = [(ensemble, ch, N, master, b, c, power, convention)
             for b, c in enumerate(_block_plan(samples, block_size))]
    if workers == 1 or len(tasks) == 1:
        parts = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
    acc = Accumulator()
    for p in parts:
        acc = acc.merge(p)
    return MomentEstimate(acc.mean, acc.std_error, acc.count, master, time.perf_counter() - t0)


def estimate_first_moment(ensemble: str, ch: ChannelAssignment, N: int, samples: int, seed,
                          workers: int = 1, convention: str = "amplitude",
                          block_size: int = BLOCK_SIZE) -> MomentEstimate:
    """Average of ``|A|^2`` in the chosen normalization (see module docstring)."""
    return _estimate(ensemble, ch, N, samples, seed, workers, 2, convention, block_size)


def estimate_second_moment(ensemble: str, ch: ChannelAssignment, N: int, samples: int, seed,
                           workers: int = 1, block_size: int = BLOCK_SIZE) -> MomentEstimate:
    """Average of ``|A~|^4 = |sum_P eps^P prod sigma|^4 / (n!)^2``."""
    return _estimate(ensemble, ch, N, samples, seed, workers, 4, "amplitude", block_size)


def default_samples(n: int) -> int:
    return 200_000 if n <= 3 else 50_000


def sweep(grid: Iterable[Mapping[str, Any]], op: Callable[..., Any],
          out: Callable[[dict], None] | None = None) -> list[dict]:
    """Evaluate ``op(**point)`` on every grid point, in order.

    Each row is the point merged with the result (``as_row()`` for estimates,
    ``{"value": r}`` for scalars, or the dict itself). ``out`` receives each
    row as it is produced.
    """
    points = list(grid)
    if not points:
        raise ConfigError("sweep grid is empty")
    rows: list[dict] = []
    for point in points:
        result = op(**point)
        if isinstance(result, MomentEstimate):
            res = result.as_row()
        elif isinstance(result, Mapping):
            res = dict(result)
        else:
            res = {"value": result}
        row = {**point, **res}
        if out is not None:
            try:
                out(row)
            except OSError as exc:
                raise SinkWriteError(f"could not write row {len(rows)}: {exc}", rows) from exc
        rows.append(row)
    return rows


def product_grid(**axes: Sequence) -> list[dict]:
    """Cartesian product of named axes, last axis fastest."""
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[k] for k in names))]
