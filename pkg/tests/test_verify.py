import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermistab import verify
from fermistab.bounds import lambda_schur_kappa, lambda_upper_limit
from fermistab.quadform_mc import GaussianTrial

# single isotropic term A = B = C = 0, sigma = 1 at m = 1, mu = 1 (Laplace-transform oracle)
SINGLE_ORACLE = {
    "phi0": 2579.7612,
    "phi1": 330.68255,
    "phi2": 330.68255,
    "phi3": -297.89969,
    "weighted_norm": 152.51307,
}


@pytest.mark.parametrize("r", [0.03, 0.5, 1.0, 2.0, 40.0])
@pytest.mark.parametrize("kappa", [0.03, 0.5, 1.0, 2.0, 40.0])
def test_t_integral_identity(r, kappa):
    q, rhs = verify.t_integral_identity(r, kappa)
    assert q.value == pytest.approx(rhs, rel=1e-10)
    assert q.abs_err_est < 1e-10 * rhs


def test_t_integral_rejects_nonpositive():
    with pytest.raises(ValueError):
        verify.t_integral_identity(0.0, 1.0)


def test_lblr_matches_closed_form():
    for m in (0.3, 1.0, 4.0):
        for k in (0.05, 0.7, 6.0):
            ok, cf, q = verify.closed_form_matches_quadrature(m, k)
            assert ok, (m, k, cf, q)


@pytest.mark.parametrize("m,kappa", [(0.5, 0.2), (1.0, 0.183), (1.0, 2.0), (3.0, 0.5)])
def test_lm2_below_lblr(m, kappa):
    lm2, lb = verify.lm2_vs_lblr(m, kappa)
    assert lm2.value <= lb.value


def test_small_kappa_limits_differ():
    # the t <= 1 step is not tight as kappa -> 0: pi/9 versus 4/(3 pi) at m = 1
    lm2 = verify.lm2_quadrature(1.0, 1e-6).value
    lb = verify.lblr_quadrature(1.0, 1e-6).value
    assert lm2 == pytest.approx(np.pi / 9, rel=1e-5)
    assert lb == pytest.approx(lambda_upper_limit(1.0), rel=1e-8)
    assert lb - lm2 > 0.07


@settings(max_examples=300)
@given(st.floats(1e-3, 1e3), st.floats(1e-4, 1e4), st.floats(1e-4, 1e4))
def test_denominator_inequality_property(m, r, kappa):
    assert verify.denominator_inequality(m, r, kappa)


def test_denominator_scan_and_vectorized():
    bad, worst = verify.denominator_scan(100_000, seed=3)
    assert bad == 0 and worst > -1e-12
    m = np.array([0.5, 1.0, 2.0])
    assert verify.denominator_inequality(m, 1.0, 1.0).shape == (3,)


def test_l_nonneg_scan():
    rep = verify.l_nonneg_scan(1.0, 1.0, 50_000, seed=1)
    assert rep.ok and rep.n_samples == 50_000
    assert rep.half_closed_form_dev < 1e-12


def test_l_nonneg_scan_finds_counterexample_for_large_lambda():
    rep = verify.l_nonneg_scan(1.0, 1.0, 50_000, seed=1, lam_range=(1.9, 2.0))
    assert not rep.ok
    assert rep.worst_input[0] > 1.6


def test_gaussian_norm_sq():
    xi = GaussianTrial.single()
    assert verify.gaussian_norm_sq(xi) == pytest.approx(np.pi**4.5, rel=1e-13)
    xi = GaussianTrial.random(np.random.default_rng(4), 3)
    assert verify.gaussian_norm_sq(xi) == pytest.approx(xi.norm_sq(), rel=1e-12)


def test_phi0_oracle_against_radial_quadrature():
    # spherical reduction of the 9-dimensional integral for the centered single term
    m, mu = 1.0, 1.0
    x, w = np.polynomial.legendre.leggauss(60)
    r = 4.0 * (x + 1)
    wr = 4.0 * w * 4 * np.pi * r * r
    u, p, k = np.meshgrid(r, r, r, indexing="ij")
    wt = wr[:, None, None] * wr[None, :, None] * wr[None, None, :]
    dens = np.exp(-(u * u + p * p + k * k))
    integrand = dens * np.sqrt(u * u / (1 + m) + p * p + k * k / m + mu)
    ref = 2 * np.pi**2 * (m / (m + 1)) ** 1.5 * np.sum(wt * integrand)
    got = verify.gaussian_form_oracle("phi0", GaussianTrial.single(), m, mu).value
    assert got == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("which", sorted(SINGLE_ORACLE))
def test_single_term_oracle_values(which):
    got = verify.gaussian_form_oracle(which, GaussianTrial.single(), 1.0, 1.0)
    assert got.value == pytest.approx(SINGLE_ORACLE[which], rel=1e-7)


def test_oracle_t_mu_is_sum():
    xi = GaussianTrial.single(sigma=0.7, A=(0.2, 0, 0))
    parts = [verify.gaussian_form_oracle(w, xi, 1.0, 2.0).value for w in ("phi0", "phi1", "phi2", "phi3")]
    assert verify.gaussian_form_oracle("t_mu", xi, 1.0, 2.0).value == pytest.approx(sum(parts), rel=1e-13)


def test_oracle_scaling_law():
    xi = GaussianTrial.random(np.random.default_rng(7), 2)
    for which in ("phi0", "phi1", "phi3", "weighted_norm"):
        a = verify.gaussian_form_oracle(which, xi, 1.0, 1.0).value
        b = verify.gaussian_form_oracle(which, xi.scaled(2.0), 1.0, 4.0).value
        assert b == pytest.approx(2**10 * a, rel=1e-8)


def test_closed_form_matches_quadrature_continuation_region():
    m, k = 10.0, 5.0
    assert 1 + k * k * (float(verify.c_m(m)) - 1) < 0
    ok, cf, q = verify.closed_form_matches_quadrature(m, k)
    assert ok and cf == lambda_schur_kappa(m, k)


def test_denominator_inequality_at_origin():
    # reduces to 1 >= m(m+2)/(1+m)^2, with margin exactly 1/(1+m)^2
    for m in (0.1, 1.0, 7.0):
        lhs, rhs = verify.denominator_sides(m, 0.0, 0.0)
        assert lhs - rhs == pytest.approx(1 / (1 + m) ** 2, rel=1e-12)
