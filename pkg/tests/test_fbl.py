import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblris.fbl import FblParams, dispersion, fbl_rate, fbl_rate_unclamped, ibl_rate, q_func, q_inv

# reference values from 50-digit mpmath evaluation of erfc
QINV_1E5 = 4.2648907939228246
Q_OF_ONE = 0.15865525393145705
FBL_EXAMPLE = 0.46714004247700683


def mp_q(x):
    mpmath.mp.dps = 50
    return float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


def test_q_inv_median():
    assert q_inv(0.5) == 0.0


def test_q_inv_round_trip_at_q1():
    assert q_inv(Q_OF_ONE) == pytest.approx(1.0, abs=1e-12)


def test_q_inv_reference_value():
    assert q_inv(1e-5) == pytest.approx(QINV_1E5, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_q_inv_domain(p):
    with pytest.raises(ValueError):
        q_inv(p)


def test_q_inv_round_trip_against_mpmath():
    for p in np.logspace(-9, math.log10(0.499), 25):
        x = q_inv(p)
        assert abs(mp_q(x) - p) <= 1e-12


@given(st.floats(1e-12, 0.999999))
def test_q_inv_round_trip_property(p):
    assert abs(float(q_func(q_inv(p))) - p) <= 1e-12 * max(1.0, p)


@given(st.floats(1e-9, 0.99), st.floats(1e-9, 0.99))
def test_q_inv_strictly_decreasing(a, b):
    if a < b:
        assert q_inv(a) > q_inv(b) or math.isclose(a, b, rel_tol=1e-15)


def test_dispersion_examples():
    assert dispersion(0.0) == 0.0
    assert dispersion(1.0) == 0.75
    # 1 - 1e-17 rounds to 1.0 in double precision; the limit is reached exactly
    assert dispersion(1e9) >= 1 - 1e-17
    assert dispersion(1e9) <= 1.0


def test_dispersion_rejects_negative():
    with pytest.raises(ValueError):
        dispersion(-1e-3)


def test_dispersion_shape_on_grid():
    g = np.concatenate([[0.0], np.logspace(-6, 6, 400)])
    v = dispersion(g)
    assert np.all(v >= 0) and np.all(v < 1)
    assert np.all(np.diff(v) >= 0)
    lin = np.linspace(0, 50, 501)
    second = np.diff(dispersion(lin), 2)
    assert np.all(second <= 1e-15)


def test_ibl_rate_examples():
    assert ibl_rate(0.0, 1e7) == 0.0
    assert ibl_rate(1.0, 1e7) == pytest.approx(1e7, rel=1e-15)
    assert ibl_rate(3.0, 1.0) == pytest.approx(2.0, rel=1e-15)


def test_fbl_params_omega():
    p = FblParams(100, 1e-5)
    assert abs(p.omega - QINV_1E5 * math.log2(math.e)) <= 1e-9 * p.omega
    assert p.penalty == pytest.approx(p.omega / 10.0)


@pytest.mark.parametrize("kwargs", [dict(blocklength=0), dict(blocklength=10, bler=0.5), dict(blocklength=10, bler=0.0)])
def test_fbl_params_validation(kwargs):
    with pytest.raises(ValueError):
        FblParams(**kwargs)


def test_fbl_rate_examples():
    p = FblParams(100, 1e-5, 1.0)
    assert fbl_rate(0.0, p) == 0.0
    assert fbl_rate(1.0, p) == pytest.approx(FBL_EXAMPLE, abs=1e-12)
    huge = FblParams(1e12, 1e-5, 1.0)
    assert abs(fbl_rate(1.0, huge) - ibl_rate(1.0, 1.0)) < 1e-5


def test_fbl_rate_clamp():
    p = FblParams(1, 1e-5, 1.0)
    assert fbl_rate_unclamped(0.1, p) < 0
    assert fbl_rate(0.1, p) == 0.0


def test_fbl_limit_relative_gap():
    # the relative gap Omega*sqrt(V/eta)/log2(1+g) crosses 1e-5 near g = 0.3216
    p = FblParams(1e12, 1e-5, 1.0)
    g = np.logspace(math.log10(0.33), 4, 50)
    gap = (ibl_rate(g, 1.0) - fbl_rate(g, p)) / ibl_rate(g, 1.0)
    assert np.all(gap < 1e-5)


def test_fbl_limit_relative_gap_at_low_sinr():
    # mpmath: 1.8641703172827679e-05 at g = 0.1, so the 1e-5 bound cannot hold there
    p = FblParams(1e12, 1e-5, 1.0)
    gap = (ibl_rate(0.1, 1.0) - fbl_rate(0.1, p)) / ibl_rate(0.1, 1.0)
    assert gap == pytest.approx(1.8641703172827679e-05, rel=1e-6)


@given(st.floats(0.0, 1e5), st.integers(1, 10**6), st.integers(1, 10**6))
def test_fbl_monotone_in_blocklength_and_below_shannon(gamma, eta_a, eta_b):
    lo, hi = sorted((eta_a, eta_b))
    a, b = FblParams(lo), FblParams(hi)
    assert fbl_rate_unclamped(gamma, a) <= fbl_rate_unclamped(gamma, b) + 1e-12
    assert fbl_rate(gamma, a) <= fbl_rate(gamma, b) + 1e-12
    assert fbl_rate(gamma, b) <= ibl_rate(gamma, 1.0) + 1e-12
