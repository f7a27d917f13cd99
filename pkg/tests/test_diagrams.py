import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mesoscatter.diagrams import (ScalingSpec, bbp_limit, contraction_sum_bruteforce, exp_k0_series,
                                  exponentiated_hom, geqn_coefficients, k0_series, k1_series, k2_from_f,
                                  k2_series, kappa1_series, pairwise_exact_coefficient, perfect_matchings,
                                  ratio_from_series, split_counts, tree_series, tree_series_fixed_point,
                                  two_condensate_finite_n, two_condensate_sum)
from mesoscatter.moments import ResourceLimitError, p_tilde
from mesoscatter.series import SeriesOrderError
from mesoscatter.wavepackets import WavepacketConfig, pairwise_ratio, q2_kernel
from oracles import catalan, hermite_ratio

FULL = ("K0", "kappa1", "K1", "K2")


def test_tree_series_catalan():
    F = tree_series(1, 8)
    assert list(F.coefficients[1:]) == [(-1) ** (m - 1) * catalan(m - 1) for m in range(1, 9)]
    assert F[8] == -429


@pytest.mark.parametrize("N", [2, 3, Fraction(7, 2)])
def test_tree_series_two_routes(N):
    assert tree_series(N, 10) == tree_series_fixed_point(N, 10)


def test_tree_series_at_two():
    assert tree_series(2, 3).coefficients == (0, Fraction(1, 2), Fraction(-1, 8), Fraction(1, 16))


@pytest.mark.parametrize("N", [2, 3, 10])
def test_exp_k0_matches_closed_polynomials(N):
    assert list(exp_k0_series(N, 4).coefficients[1:]) == geqn_coefficients(N)


def test_exp_k0_quoted_values():
    assert exp_k0_series(2, 2)[2] == Fraction(1, 16)
    assert exp_k0_series(3, 3)[3] == Fraction(2, 729)
    assert exp_k0_series(10, 4)[4] == Fraction(7, 3000000)


@pytest.mark.parametrize("N", [3, 10])
def test_exp_k0_consistent_to_order_ten(N):
    # exp of the recomputed K0 equals the series obtained by direct ODE recursion G' = G F / s
    K0 = k0_series(N, 10)
    G = K0.exp()
    F_over_s = tree_series(N, 11).shift_down()
    assert G.derivative() == (G * F_over_s).truncate(9)


def test_kappa1_and_k1_coefficients():
    N = Fraction(7)
    k = kappa1_series(N, 5)
    assert [k[m] * N ** (2 * m) for m in range(2, 6)] == [Fraction(1, 2), -2, Fraction(29, 4), -26]
    K1 = k1_series(N, 5)
    assert [K1[m] * N ** (2 * m) for m in range(1, 6)] == [-1, 2, Fraction(-16, 3), 16, Fraction(-256, 5)]


@pytest.mark.parametrize("N", [2, 5, 11])
def test_k2_two_forms_agree(N):
    assert k2_series(N, 8) == k2_from_f(N, 8)


def test_ratio_from_series_orders():
    with pytest.raises(SeriesOrderError):
        ratio_from_series(5, 10, order=4)
    with pytest.raises(ValueError):
        ratio_from_series(2, 10, include=("K3",))


def test_ratio_leading_terms():
    N = Fraction(10**6)
    # bosons and fermions, unitary: 1 -+ n(n-1)/2N
    for n in (2, 3, 4):
        for eps in (1, -1):
            r = ratio_from_series(n, N, 2, eps)
            assert (r - 1) * N == pytest.approx(-eps * n * (n - 1) / 2, rel=1e-4)
    # orthogonal: bosons -n(n+1)/2N, fermions n(n-3)/2N
    for n in (1, 2, 3):
        assert (ratio_from_series(n, N, 1, 1, FULL) - 1) * N == pytest.approx(-n * (n + 1) / 2, abs=1e-4)
        assert (ratio_from_series(n, N, 1, -1, FULL) - 1) * N == pytest.approx(n * (n - 3) / 2, abs=1e-4)


def test_orthogonal_single_particle():
    N = Fraction(9)
    assert ratio_from_series(1, N, 1, 1, FULL) == (N - 1) / N


@pytest.mark.parametrize("eps", [1, -1])
def test_kappa1_improves_unitary_prediction(eps):
    for N in (10, 20):
        for n in range(2, 6):
            exact = N**n * p_tilde(n, N, 2, eps)
            bare = abs(ratio_from_series(n, N, 2, eps) - exact)
            dressed = abs(ratio_from_series(n, N, 2, eps, ("K0", "kappa1")) - exact)
            assert dressed < bare


def test_full_unitary_series_agrees_to_second_order():
    N = Fraction(1000)
    for eps in (1, -1):
        for n in (2, 3):
            exact = N**n * p_tilde(n, N, 2, eps)
            assert abs(ratio_from_series(n, N, 2, eps, FULL) - exact) * N**2 < 1e-3


def test_pairwise_coefficient_small_cases():
    N = Fraction(13)
    for eps in (1, -1):
        assert pairwise_exact_coefficient(2, N, eps) == 1 - eps / N
    assert pairwise_exact_coefficient(4, 8, 1) == Fraction(19, 64)


@settings(max_examples=40)
@given(st.integers(0, 60), st.integers(1, 500), st.sampled_from([1, -1]))
def test_pairwise_coefficient_hermite_oracle(n, N, eps):
    assert float(pairwise_exact_coefficient(n, N, eps)) == pytest.approx(hermite_ratio(n, N, eps), rel=1e-9, abs=1e-12)


def test_pairwise_scaling_convergence():
    assert float(pairwise_exact_coefficient(30, 900)) == pytest.approx(math.exp(-0.5), rel=0.05)
    for alpha in (0.5, 1.0, 2.0):
        lim = math.exp(-1 / (2 * alpha))
        errs = [abs(float(pairwise_exact_coefficient(n, Fraction(alpha) * n * n)) - lim)
                for n in (10, 20, 50, 100, 200)]
        assert all(a > b for a, b in zip(errs, errs[1:]))


def test_bbp_regimes():
    assert bbp_limit(ScalingSpec(1.0, 2.0)).value == pytest.approx(0.60653, abs=1e-5)
    assert bbp_limit(ScalingSpec(0.3, 3.0)).value == 1.0
    assert bbp_limit(ScalingSpec(1.0, 1.5)).value == 0.0
    low = bbp_limit(ScalingSpec(1.0, 0.8))
    assert low.regime == "vanishing" and not low.trusted


def test_exponentiated_hom_values():
    wp = WavepacketConfig()
    assert exponentiated_hom(math.inf, ScalingSpec(), wp) == pytest.approx(math.exp(-0.25))
    assert exponentiated_hom(0.0, ScalingSpec(x=0.3), wp) == pytest.approx(math.exp(-0.5))
    wpd = wp.with_dwell_ratio(2.0)
    one = [exponentiated_hom(z, ScalingSpec(x=1.0), wpd) for z in (0.0, 1.0, math.inf)]
    assert one[0] == one[1] == one[2] == pytest.approx(math.exp(-q2_kernel(0, wpd) / 2))
    with pytest.raises(ValueError):
        ScalingSpec(x=1.5)


def test_split_counts():
    assert split_counts(10, 0.75) == (2, 8)
    assert split_counts(20, 0.75) == (5, 15)
    with pytest.raises(ValueError):
        split_counts(4, -0.1)


def test_two_condensate_edge_cases():
    wp = WavepacketConfig().with_dwell_ratio(0.7)
    z, N = 1.3, 20
    assert two_condensate_finite_n(2, 0.5, z, N, 1, wp) == pytest.approx(
        pairwise_ratio(2, N, 2, 1, (0.0, z), wp), abs=1e-15)
    for n in (3, 8, 15):
        assert two_condensate_sum(n, 0, 50, 1, 1, Fraction(1, 3)) == pairwise_exact_coefficient(n, 50, 1)
        assert two_condensate_sum(0, n, 50, -1, 1, Fraction(1, 3)) == pairwise_exact_coefficient(n, 50, -1)


def test_perfect_matching_counts():
    assert [sum(1 for _ in perfect_matchings(tuple(range(2 * m)))) for m in range(5)] == [1, 1, 3, 15, 105]


def test_bruteforce_equal_delays_is_pairwise_coefficient():
    wp = WavepacketConfig()
    for eps in (1, -1):
        assert contraction_sum_bruteforce(4, [0] * 4, 8, eps, wp) == pytest.approx(
            float(pairwise_exact_coefficient(4, 8, eps)), abs=1e-15)


def test_bruteforce_matches_two_condensate_six():
    wp = WavepacketConfig().with_dwell_ratio(1.0)
    z = 2.2
    assert contraction_sum_bruteforce(6, [0, 0, 0, z, z, z], 11, 1, wp) == pytest.approx(
        two_condensate_finite_n(6, 0.5, z, 11, 1, wp), abs=1e-12)


def test_bruteforce_resource_limit():
    with pytest.raises(ResourceLimitError):
        contraction_sum_bruteforce(13, [0] * 13, 100, 1, WavepacketConfig())
