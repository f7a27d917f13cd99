"""Circular ensembles of single-particle scattering matrices.

CUE (beta=2) matrices come from the QR decomposition of a complex Ginibre
matrix with the phases of diag(R) moved into Q, which makes Q exactly Haar
distributed. COE (beta=1) matrices are built as U^T U from a CUE sample.

Every random draw is a pure function of a :class:`SeedSpec`. The bit
generator is Philox (counter based) keyed through ``numpy.random.SeedSequence``
so that ``(master_seed, stream_index)`` pairs give independent, reproducible
streams that parallel workers can consume in any order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

UNITARITY_TOL = 1e-10


class InvalidDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "SeedSpec":
        """Seed for sub-stream ``index`` below this one, as a new master seed."""
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, index))
        word = ss.generate_state(1, dtype=np.uint64)[0]
        return SeedSpec(int(word), 0)


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    entries: np.ndarray
    beta: int = 2

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidDimensionError(f"scattering matrix must be square and non-empty, got {a.shape}")
        if self.beta not in (1, 2):
            raise ValueError(f"beta must be 1 or 2, got {self.beta}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def unitarity_error(self) -> float:
        a = self.entries
        return float(np.max(np.abs(a.conj().T @ a - np.eye(self.dim))))

    def symmetry_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))

    def check(self, tol: float = UNITARITY_TOL) -> None:
        if self.unitarity_error() >= tol:
            raise ValueError(f"matrix is not unitary (error {self.unitarity_error():.3e})")
        if self.beta == 1 and self.symmetry_error() >= tol:
            raise ValueError(f"COE matrix is not symmetric (error {self.symmetry_error():.3e})")

    def to_json(self) -> str:
        """Row-major nested list of ``[re, im]`` pairs."""
        rows = [[[z.real, z.imag] for z in row] for row in self.entries.tolist()]
        return json.dumps({"dim": self.dim, "beta": self.beta, "entries": rows})

    @classmethod
    def from_json(cls, text: str) -> "ScatteringMatrix":
        d = json.loads(text)
        a = np.array([[complex(re, im) for re, im in row] for row in d["entries"]])
        return cls(a, d["beta"])


def _check_dim(N: int) -> None:
    if int(N) != N or N < 1:
        raise InvalidDimensionError(f"channel count must be a positive integer, got {N}")


def haar_unitary_batch(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar unitaries of size N as an array of shape (count, N, N)."""
    _check_dim(N)
    g = rng.standard_normal((count, N, N, 2))
    z = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def sample_cue_batch(N: int, seed: SeedSpec, count: int) -> np.ndarray:
    return haar_unitary_batch(N, count, seed.generator())


def sample_coe_batch(N: int, seed: SeedSpec, count: int) -> np.ndarray:
    u = sample_cue_batch(N, seed, count)
    s = np.swapaxes(u, 1, 2) @ u
    # U^T U is symmetric analytically; symmetrize away rounding
    return 0.5 * (s + np.swapaxes(s, 1, 2))


def sample_cue(N: int, seed: SeedSpec) -> ScatteringMatrix:
    return ScatteringMatrix(sample_cue_batch(N, seed, 1)[0], beta=2)


def sample_coe(N: int, seed: SeedSpec) -> ScatteringMatrix:
    return ScatteringMatrix(sample_coe_batch(N, seed, 1)[0], beta=1)


def sample_batch(ensemble: str, N: int, seed: SeedSpec, count: int) -> np.ndarray:
    ensemble = ensemble.upper()
    if ensemble == "CUE":
        return sample_cue_batch(N, seed, count)
    if ensemble == "COE":
        return sample_coe_batch(N, seed, count)
    raise ValueError(f"unknown ensemble {ensemble!r}; expected 'CUE' or 'COE'")


def ensemble_beta(ensemble: str) -> int:
    return {"CUE": 2, "COE": 1}[ensemble.upper()]
