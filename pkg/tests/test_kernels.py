import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermistab.errors import DomainError, SingularPoint
from fermistab.kernels import (
    INV_SQRT2,
    KernelParams,
    big_l,
    big_l_half,
    c_m,
    check_mass,
    ell,
    ell_half_explicit,
    h0,
    o_kernel,
    schur_k,
    schur_k_minus,
    tilde_ell,
)

vec = st.lists(st.floats(-50, 50), min_size=3, max_size=3).map(np.array)
mass = st.floats(0.01, 100)


def test_check_mass_rejects_bad_values():
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(DomainError):
            check_mass(bad)
    assert check_mass(2) == 2.0


def test_h0_value():
    p = np.array([1.0, 0, 0])
    assert h0(p, 2 * p, 3 * p, 4 * p, 5.0) == pytest.approx(1 + 4 + (9 + 16) / 5)


def test_o_kernel_reference_value():
    p = np.array([1.0, 0.0, 0.0])
    assert o_kernel(p, p, KernelParams(1.0)) == pytest.approx(1 / 3, rel=1e-15)
    # a shifts both weights and the constant term
    params = KernelParams(1.0, a=(0.0, 0.0, 1.0), b=0.5)
    q = np.zeros(3)
    expected = ((1 + 0.25) * (1 + 0.25)) ** -0.25 / (params.shift)
    assert o_kernel(q, q, params) == pytest.approx(expected, rel=1e-14)
    assert params.shift == pytest.approx((2 * 3 * 1 + 2 * 0.25) / 4)


def test_o_kernel_singular_weight():
    with pytest.raises(SingularPoint):
        o_kernel(np.array([-1.0, 0, 0]), np.ones(3), KernelParams(1.0, a=(1.0, 0, 0)))


def test_o_kernel_broadcasts():
    rng = np.random.default_rng(0)
    p, q = rng.standard_normal((2, 7, 3))
    out = o_kernel(p, q, KernelParams(0.7, b=0.1))
    assert out.shape == (7,)
    assert np.allclose(out, [o_kernel(a, b, KernelParams(0.7, b=0.1)) for a, b in zip(p, q)])


@given(vec, vec, mass, st.floats(0, 3))
def test_o_kernel_symmetric_positive(p, q, m, b):
    params = KernelParams(m, a=(0.3, -0.2, 0.1), b=b + 1e-3)
    v = o_kernel(p, q, params)
    assert v > 0
    assert v == pytest.approx(o_kernel(q, p, params), rel=1e-13)


def test_c_m_values():
    assert c_m(1.0) == pytest.approx(np.sqrt(3), rel=1e-15)
    # below 1 already at m = 2
    assert c_m(2.0) == pytest.approx(2 * 2 / (3 * np.sqrt(2)))
    assert c_m(2.0) < 1 < c_m(1.8)


@settings(max_examples=200)
@given(vec, vec, vec, mass, st.floats(1e-3, 1e3), st.floats(0, 1))
def test_big_l_nonnegative(P1, P2, q, m, mu, lam):
    v = big_l(P1, P2, q, m, mu, lam)
    scale = np.sqrt(q @ q + m * (P1 @ P1 + P2 @ P2) / (1 + m) ** 2 + m * mu / (1 + m))
    assert v >= -1e-12 * scale


@given(vec, vec, vec, mass, st.floats(1e-3, 1e3))
def test_big_l_half_closed_form(P1, P2, q, m, mu):
    a = big_l(P1, P2, q, m, mu, INV_SQRT2)
    b = big_l_half(P1, P2, m, mu)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_big_l_negative_beyond_golden_ratio():
    # at q = 0, L = sqrt(base) (1 - lam^2/(1+lam)), negative once lam > (1+sqrt 5)/2
    zero = np.zeros(3)
    P = np.array([1.0, 2.0, 0.0])
    assert big_l(P, P, zero, 1.0, 1.0, 2.0) < 0
    assert big_l(P, P, zero, 1.0, 1.0, 1.6) > 0
    base = (2 * 5) / 4 + 0.5
    assert big_l(P, P, zero, 1.0, 1.0, 2.0) == pytest.approx(np.sqrt(base) * (1 - 4 / 3))


@given(vec, vec, vec, mass, st.floats(1e-3, 1e3))
def test_ell_explicit_form(q, P, k, m, mu):
    assert ell(q, P, k, m, mu) == pytest.approx(ell_half_explicit(q, P, k, m, mu), rel=1e-10, abs=1e-12)


@given(vec, vec, vec, mass, st.floats(1e-3, 1e3), st.floats(0, 1))
def test_tilde_ell_nonnegative(q, P, p, m, mu, lam):
    v = tilde_ell(q, P, p, m, mu, lam)
    assert v >= -1e-10 * (1 + np.linalg.norm(q) + np.linalg.norm(P) + np.linalg.norm(p))


@given(vec, vec, mass)
def test_schur_kernels(p, q, m):
    params = KernelParams(m)
    if p @ p + q @ q < 1e-6:
        return
    assert schur_k(p, q, params) > 0
    assert schur_k_minus(p, q, params) == pytest.approx(-schur_k_minus(p, -q, params), rel=1e-13)
    # k = even part + odd part, odd part is minus the k_minus kernel
    even = 0.5 * (schur_k(p, q, params) + schur_k(p, -q, params))
    assert schur_k(p, q, params) == pytest.approx(even - schur_k_minus(p, q, params), rel=1e-10)


def test_kernel_params_validation():
    with pytest.raises(DomainError):
        KernelParams(1.0, b=-1.0)
    with pytest.raises(DomainError):
        KernelParams(1.0, mu=0.0)
    with pytest.raises(DomainError):
        KernelParams(1.0, a=(np.nan, 0, 0))
