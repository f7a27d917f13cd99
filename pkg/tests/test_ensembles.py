import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesoscatter.ensembles import (InvalidDimensionError, ScatteringMatrix, SeedSpec, sample_batch,
                                   sample_coe, sample_cue)


@pytest.mark.parametrize("N", [1, 2, 5, 12])
def test_cue_is_unitary(N):
    for i in range(5):
        sigma = sample_cue(N, SeedSpec(7, i))
        assert sigma.unitarity_error() < 1e-12
        sigma.check()


@pytest.mark.parametrize("N", [2, 6])
def test_coe_is_symmetric_unitary(N):
    sigma = sample_coe(N, SeedSpec(3))
    assert sigma.beta == 1
    assert sigma.symmetry_error() < 1e-14
    assert sigma.unitarity_error() < 1e-12


def test_same_seed_same_matrices():
    a = sample_batch("CUE", 4, SeedSpec(11, 2), 8)
    b = sample_batch("cue", 4, SeedSpec(11, 2), 8)
    assert np.array_equal(a, b)


def test_streams_differ():
    a = sample_batch("CUE", 4, SeedSpec(11, 0), 2)
    b = sample_batch("CUE", 4, SeedSpec(11, 1), 2)
    assert not np.allclose(a, b)


def test_haar_entry_moments():
    # <|U_11|^2> = 1/N and <|U_11|^4> = 2/(N(N+1)) for CUE
    N = 4
    u = sample_batch("CUE", N, SeedSpec(5), 40000)
    x = np.abs(u[:, 0, 0]) ** 2
    se = x.std() / np.sqrt(x.size)
    assert abs(x.mean() - 1 / N) < 4 * se
    y = x**2
    assert abs(y.mean() - 2 / (N * (N + 1))) < 4 * y.std() / np.sqrt(y.size)


def test_haar_phase_is_uniform():
    u = sample_batch("CUE", 3, SeedSpec(9), 20000)
    # diag(R) phase fix makes the mean of any entry vanish
    assert abs(u[:, 0, 0].mean()) < 0.02


@pytest.mark.parametrize("N", [0, -1, 2.5])
def test_bad_dimension(N):
    with pytest.raises(InvalidDimensionError):
        sample_batch("CUE", N, SeedSpec(1), 1)


def test_bad_ensemble():
    with pytest.raises(ValueError):
        sample_batch("GUE", 3, SeedSpec(1), 1)


def test_non_square_rejected():
    with pytest.raises(InvalidDimensionError):
        ScatteringMatrix(np.zeros((2, 3)))


def test_check_flags_non_unitary():
    with pytest.raises(ValueError):
        ScatteringMatrix(2 * np.eye(2)).check()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32), st.sampled_from([1, 2]))
def test_json_round_trip(N, seed, beta):
    sigma = sample_cue(N, SeedSpec(seed)) if beta == 2 else sample_coe(N, SeedSpec(seed))
    back = ScatteringMatrix.from_json(sigma.to_json())
    assert back.beta == sigma.beta
    assert np.array_equal(back.entries, sigma.entries)


def test_seed_bounds():
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(2**64)


def test_child_seeds_are_distinct_and_stable():
    kids = [SeedSpec(42).child(i).master_seed for i in range(20)]
    assert len(set(kids)) == 20
    assert kids == [SeedSpec(42).child(i).master_seed for i in range(20)]
