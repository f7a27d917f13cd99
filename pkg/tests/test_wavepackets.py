import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesoscatter.wavepackets import (ShapeValidationError, TabulatedShape, WavepacketConfig, c3_constant,
                                     overlap_F, overlap_F_squared_integral, q2_energy_integral, q2_kernel,
                                     q2_kernel_quadrature, q2_large_dwell_limit, q3_kernel,
                                     q3_kernel_quadrature, q3_large_dwell_limit, three_body_weight)
from oracles import gaussian_q2_direct


def gaussian_table(s=1.0, points=4001):
    x = np.linspace(-12 * s, 12 * s, points)
    X = (2 * math.pi * s * s) ** -0.25 * np.exp(-x * x / (4 * s * s))
    X = X / math.sqrt(np.sum(np.diff(x) * (X[:-1] ** 2 + X[:-1] * X[1:] + X[1:] ** 2) / 3))
    return TabulatedShape(x, X)


def test_gaussian_overlap_values():
    wp = WavepacketConfig(s=2.0)
    assert overlap_F(0.0, wp) == 1.0
    assert overlap_F(4.0, wp) == pytest.approx(math.exp(-0.5))
    assert overlap_F_squared_integral(wp) == pytest.approx(2 * math.sqrt(math.pi) * 2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-8, 8), st.sampled_from([0.0, 0.1, 1.0, 5.0]))
def test_q2_symmetric_and_bounded(z, ratio):
    wp = WavepacketConfig(s=1.0).with_dwell_ratio(ratio)
    q = q2_kernel(z, wp)
    assert q == pytest.approx(q2_kernel(-z, wp), rel=1e-12, abs=1e-300)
    assert 0.0 <= q <= 1.0 + 1e-12


@pytest.mark.parametrize("ratio", [0.1, 1.0, 5.0])
@pytest.mark.parametrize("z", [0.0, 1.0, 3.0, 10.0])
def test_q2_closed_form_vs_quadrature(z, ratio):
    wp = WavepacketConfig(s=1.0).with_dwell_ratio(ratio)
    assert q2_kernel(z, wp) == pytest.approx(q2_kernel_quadrature(z, wp), rel=1e-9)
    assert q2_kernel(z, wp) == pytest.approx(gaussian_q2_direct(z, 1.0, ratio), rel=1e-6)


def test_q2_zero_dwell_is_overlap_squared():
    wp = WavepacketConfig(s=1.0)
    assert q2_kernel(1.5, wp) == pytest.approx(overlap_F(1.5, wp) ** 2)


def test_q2_decreases_with_dwell_at_zero_offset():
    vals = [q2_kernel(0.0, WavepacketConfig().with_dwell_ratio(r)) for r in (0.0, 0.5, 1, 2, 5, 20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_q2_large_dwell_limit_converges():
    # frozen value at tau_d/tau_s = 5: sqrt(pi)/5 * exp(0.04) erfc(0.2)
    wp = WavepacketConfig().with_dwell_ratio(5.0)
    assert q2_kernel(0.0, wp) == pytest.approx(math.sqrt(math.pi) / 5 * math.exp(0.04) * math.erfc(0.2), rel=1e-12)
    assert q2_kernel(0.0, wp) == pytest.approx(0.28679, abs=1e-5)
    wp = WavepacketConfig().with_dwell_ratio(50.0)
    for z in (0.0, 5.0, 40.0):
        assert q2_kernel(z, wp) == pytest.approx(q2_large_dwell_limit(z, wp), rel=0.03)


@pytest.mark.parametrize("z", [0.0, 2.0])
def test_q2_energy_integral_exact_dispersion(z):
    wp = WavepacketConfig(s=1.0, k=50.0).with_dwell_ratio(1.0)
    exact = q2_energy_integral(z, wp, exact_dispersion=True)
    assert exact == pytest.approx(q2_kernel(z, wp), rel=2e-3)


def test_tabulated_matches_gaussian():
    tab = gaussian_table()
    wp_t = WavepacketConfig.tabulated(tab).with_dwell_ratio(1.0)
    wp_g = WavepacketConfig(s=1.0).with_dwell_ratio(1.0)
    assert wp_t.s == pytest.approx(1.0, rel=1e-4)
    for z in (0.0, 1.0, 2.5):
        assert overlap_F(z, wp_t) == pytest.approx(overlap_F(z, wp_g), abs=1e-5)
        assert q2_kernel(z, wp_t) == pytest.approx(q2_kernel(z, wp_g), abs=1e-5)


def test_tabulated_overlap_is_one_at_zero():
    assert gaussian_table().overlap(0.0) == pytest.approx(1.0, abs=1e-12)


def test_tabulated_validation(tmp_path):
    with pytest.raises(ShapeValidationError):
        TabulatedShape([0, 1, 2], [1, 1, 1])
    with pytest.raises(ShapeValidationError):
        TabulatedShape([0, 2, 1], [0, 1, 0])
    p = tmp_path / "shape.txt"
    tab = gaussian_table(points=801)
    np.savetxt(p, np.column_stack([tab.x, tab.X]), header="x X")
    back = TabulatedShape.from_file(p)
    assert np.allclose(back.X, tab.X)


def test_narrow_packet_warning():
    with pytest.warns(UserWarning):
        WavepacketConfig(s=1.0, k=2.0)


def test_three_body_weight_normalized():
    from scipy import integrate

    lam = 1.3
    val, _ = integrate.dblquad(lambda b, a: three_body_weight(a, b, lam), -40, 40, -40, 40, epsabs=1e-10)
    assert val == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("z,zp", [(0.0, 0.0), (1.0, -0.5), (2.0, 3.0), (-1.5, -2.5)])
def test_q3_fast_path_vs_quadrature(z, zp):
    wp = WavepacketConfig().with_dwell_ratio(2.0)
    assert q3_kernel(z, zp, wp) == pytest.approx(q3_kernel_quadrature(z, zp, wp), rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_q3_swap_symmetry(z, zp):
    wp = WavepacketConfig().with_dwell_ratio(1.0)
    assert q3_kernel(z, zp, wp) == pytest.approx(q3_kernel(zp, z, wp), rel=1e-9)


def test_q3_zero_dwell_is_product():
    wp = WavepacketConfig()
    assert q3_kernel(1.0, 2.0, wp) == pytest.approx(overlap_F(1, wp) * overlap_F(2, wp) * overlap_F(-1, wp))


def test_c3_gaussian():
    from scipy import integrate

    wp = WavepacketConfig()
    val, _ = integrate.dblquad(lambda b, a: overlap_F(a, wp) * overlap_F(b, wp) * overlap_F(a - b, wp),
                               -20, 20, -20, 20, epsabs=1e-10)
    assert c3_constant(wp) == pytest.approx(val, rel=1e-7)


def test_q3_large_dwell_approach():
    # relative error shrinks as tau_d grows
    errs = []
    for r in (5.0, 20.0, 80.0):
        wp = WavepacketConfig().with_dwell_ratio(r)
        errs.append(abs(q3_kernel(0.0, 0.0, wp) / q3_large_dwell_limit(0.0, 0.0, wp) - 1))
    assert errs[0] > errs[1] > errs[2]
