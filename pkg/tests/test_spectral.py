import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import eval_legendre

from fermistab import spectral
from fermistab.bounds import lambda_bar
from fermistab.errors import DomainError, QuadratureFailure
from fermistab.kernels import KernelParams, o_kernel


def _k_adaptive(l, r, s, m, b):
    params = KernelParams(m, b=b)

    def f(t):
        p = np.array([r, 0.0, 0.0])
        q = np.array([s * t, s * np.sqrt(1 - t * t), 0.0])
        return o_kernel(p, q, params) * eval_legendre(l, t)

    return 2 * np.pi * quad(f, -1, 1, epsabs=1e-15, epsrel=1e-11, limit=200)[0]


def test_legendre_kernel_exact_values():
    k = spectral.legendre_kernel([0, 1], 1.0, 1.0, KernelParams(1.0))
    assert k[0] == pytest.approx(2 * np.pi * np.log(3), rel=1e-14)
    assert k[1] == pytest.approx(2 * np.pi * (2 - 2 * np.log(3)), rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.floats(1e-2, 1e2), st.floats(1e-2, 1e2), st.floats(0.02, 20), st.floats(0, 2))
def test_legendre_kernel_vs_adaptive(l, r, s, m, b):
    got = spectral.legendre_kernel([l], r, s, KernelParams(m, b=b))[0]
    ref = _k_adaptive(l, r, s, m, b)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-10 * abs(_k_adaptive(0, r, s, m, b)))


def test_grid_invariants():
    g = spectral.RadialGrid(n=32, tail_cells=4)
    assert g.n_cells == 40
    assert np.all(np.diff(g.nodes) > 0) and np.all(g.weights > 0)
    x, w, owner = g.quadrature()
    assert np.all(np.diff(x) > 0) and np.all(w > 0)
    assert np.allclose(np.bincount(owner, w), g.widths, rtol=1e-13)
    fine = g.refined()
    assert set(np.round(g.edges, 12)) <= set(np.round(fine.edges, 12))
    with pytest.raises(DomainError):
        spectral.RadialGrid(n=8)
    with pytest.raises(DomainError):
        spectral.RadialGrid(r_min=2.0, r_max=1.0)


def test_partial_wave_matrix_symmetric_and_requires_a_zero():
    g = spectral.RadialGrid(1e-2, 1e2, 40, tail_cells=0)
    M = spectral.partial_wave_matrix(1, KernelParams(1.0, b=0.3), g)
    assert np.allclose(M, M.T, rtol=0, atol=1e-15)
    with pytest.raises(DomainError):
        spectral.partial_wave_matrix(1, KernelParams(1.0, a=(1.0, 0, 0)), g)


def test_even_sectors_nonnegative():
    g = spectral.RadialGrid(n=64, tail_cells=6)
    res = spectral.lambda_lower_spectral(1.0, 0.0, 4, g, error_estimate=False)
    eig = dict(res.per_l_min_eig)
    scale = abs(eig[1])
    assert all(eig[l] > -1e-12 * scale for l in (0, 2, 4))
    assert res.best_l == 1


def test_nested_refinement_monotone():
    prev = None
    for n in (100, 200, 400):
        g = spectral.RadialGrid(n=n, tail_cells=8)
        M = spectral.partial_wave_matrix(1, KernelParams(1.0), g)
        e = np.linalg.eigvalsh(M)[0]
        if prev is not None:
            assert e <= prev
        prev = e


def test_spectral_estimate_is_lower_estimate():
    res = spectral.lambda_lower_spectral(1.0, grid=spectral.RadialGrid(n=64, tail_cells=10))
    bar = lambda_bar(1.0).value
    assert res.lambda_estimate.value < bar
    assert res.lambda_estimate.value == pytest.approx(bar, rel=0.01)
    assert res.lambda_estimate.abs_error > 0
    d = res.to_dict()
    assert d["best_l"] == 1 and d["grid"]["n"] == 64


def test_tails_reduce_truncation_error():
    bar = lambda_bar(2.0).value
    bare = spectral.lambda_lower_spectral(2.0, grid=spectral.RadialGrid(n=100, tail_cells=0), error_estimate=False)
    tail = spectral.lambda_lower_spectral(2.0, grid=spectral.RadialGrid(n=100), error_estimate=False)
    assert bare.lambda_estimate.value < tail.lambda_estimate.value < bar


def test_lambda_lower_spectral_validation():
    with pytest.raises(DomainError):
        spectral.lambda_lower_spectral(0.0)
    with pytest.raises(DomainError):
        spectral.lambda_lower_spectral(1.0, l_max=0)


def test_rayleigh_probe_scale_invariant():
    p = KernelParams(1.0)
    vals = [spectral.rayleigh_probe(p, spectral.RadialTrial.gaussian(1, w)).value for w in (0.3, 1.0, 3.0)]
    assert np.ptp(vals) < 1e-10
    assert vals[0] < lambda_bar(1.0).value


def test_rayleigh_probe_reproduces_embedded_eigenvector():
    g = spectral.RadialGrid(1e-2, 1e2, 60, tail_cells=0)
    res = spectral.lambda_lower_spectral(1.0, grid=g, error_estimate=False)
    trial = spectral.RadialTrial.from_spectral(res)
    probe = spectral.rayleigh_probe(KernelParams(1.0), trial, q=4, n_c=16)
    assert probe.value == pytest.approx(res.lambda_estimate.value, rel=1e-6)


def test_rayleigh_probe_with_shift():
    v = spectral.rayleigh_probe(KernelParams(1.0, a=(0.3, 0.0, 0.4), b=0.2))
    assert 0 < v.value < lambda_bar(1.0).value
    # the probe depends on a only through |a|
    w = spectral.rayleigh_probe(KernelParams(1.0, a=(0.0, 0.5, 0.0), b=0.2))
    assert v.value == pytest.approx(w.value, rel=1e-12)


def test_rayleigh_probe_quadrature_failure():
    with pytest.raises(QuadratureFailure):
        spectral.rayleigh_probe(KernelParams(1.0), spectral.RadialTrial.gaussian(1, 1.0, panels=3), q=3, n_c=4)
