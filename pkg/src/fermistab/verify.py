"""Deterministic quadrature oracles for the identities and inequalities
behind the Schur bound, plus an exact Gaussian oracle for the phi_i forms.

All one-dimensional integrals go through QUADPACK (``scipy.integrate.quad``,
adaptive Gauss-Kronrod); reported error estimates are QUADPACK's own.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bounds import lambda_schur_kappa
from .errors import QuadratureFailure
from .kernels import big_l, big_l_half, c_m, check_mass

QUAD_LIMIT = 10_000


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_err_est: float
    evaluations: int

    def __float__(self):
        return float(self.value)


def _quad(f, a, b, epsabs=1e-14, epsrel=1e-13, points=None):
    kw = {"points": points} if points is not None else {}
    val, err, info = quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT, full_output=1, **kw)[:3]
    return val, err, int(info["neval"])


def _quad_checked(f, a, b, rtol, **kw):
    val, err, nev = _quad(f, a, b, **kw)
    if not np.isfinite(val) or err > rtol * max(abs(val), 1e-300):
        raise QuadratureFailure(f"quadrature error {err:.3g} exceeds {rtol:.1g} relative (value {val:.6g})")
    return QuadResult(val, err, nev)


# -- the t-integral ---------------------------------------------------------


def t_integral_rhs(r, kappa):
    """(1/(2 r^2)) sqrt(r^2 + kappa^2) min{1, r^2/kappa^2}."""
    return np.sqrt(r * r + kappa * kappa) / (2 * r * r) * min(1.0, r * r / (kappa * kappa))


def t_integral_identity(r, kappa):
    """Quadrature of int_0^1 t sqrt(S/(S^2 - 4 kappa^2 r^2 t^2)) dt, S = r^2 + kappa^2.

    Substituting t = 1 - s^2 removes the inverse-square-root endpoint
    singularity at t = 1 when r = kappa.  Returns (QuadResult, closed form).
    """
    if not (r > 0 and kappa > 0):
        raise ValueError("r and kappa must be positive")
    S = r * r + kappa * kappa
    d2 = (r * r - kappa * kappa) ** 2
    c = 4 * kappa * kappa * r * r

    def f(s):
        t = 1 - s * s
        # S^2 - c t^2 rewritten without cancellation
        return t * np.sqrt(S) * 2 * s / np.sqrt(d2 + c * s * s * (2 - s * s))

    kink = abs(r * r - kappa * kappa) / np.sqrt(c)
    pts = [kink] if 0 < kink < 1 else None
    lhs = _quad_checked(f, 0.0, 1.0, 1e-11, epsabs=0.0, epsrel=1e-13, points=pts)
    return lhs, float(t_integral_rhs(r, kappa))


# -- the r-integral and the (t, r) integral --------------------------------


def lblr_integrand(m, kappa):
    c = c_m(m)
    return lambda r: np.sqrt(r * r + kappa * kappa) / (1 + r * r + c * kappa * kappa) ** 2


def lblr_quadrature(m, kappa) -> QuadResult:
    """Prefactor times int_0^inf sqrt(r^2+kappa^2)/[1 + r^2 + c_m kappa^2]^2 dr.

    Defined for every kappa > 0, including where the logarithmic closed form
    needs its analytic continuation.
    """
    m = check_mass(m)
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    pre = 2 / np.pi * (1 + m) ** 2 / (m**1.5 * (m + 2))
    res = _quad_checked(lblr_integrand(m, kappa), 0.0, np.inf, 1e-10, epsabs=0.0, epsrel=1e-13)
    return QuadResult(pre * res.value, pre * res.abs_err_est, res.evaluations)


def lm2_quadrature(m, kappa, epsrel=1e-10) -> QuadResult:
    """Nested quadrature of the (t, r) double integral before t <= 1 is used."""
    m = check_mass(m)
    shift = 2 * (2 + m) / (1 + m) ** 2 * kappa * kappa
    g = 4 / (1 + m) ** 2
    k2 = kappa * kappa
    evals = 0

    def inner(r):
        nonlocal evals
        A = 1 + r * r + shift
        S = r * r + k2
        d2 = (r * r - k2) ** 2
        c = 4 * k2 * r * r

        def f(s):
            t = 1 - s * s
            if c == 0.0:
                ang = 1.0 / np.sqrt(S)
            else:
                ang = np.sqrt(S) / np.sqrt(d2 + c * s * s * (2 - s * s))
            return 2 * s * r * r * t / (A * A - g * r * r * t * t) * ang

        kink = abs(r * r - k2) / np.sqrt(c) if c > 0 else 0.0
        pts = [kink] if 0 < kink < 1 else None
        v, _, n = _quad(f, 0.0, 1.0, epsabs=0.0, epsrel=epsrel * 1e-2, points=pts)
        evals += n
        return v

    pts = [kappa] if kappa > 0 else None
    v1, e1, _ = _quad(inner, 0.0, 2 * max(kappa, 1.0), epsabs=0.0, epsrel=epsrel, points=pts)
    v2, e2, _ = _quad(inner, 2 * max(kappa, 1.0), np.inf, epsabs=0.0, epsrel=epsrel)
    pre = 4 / (np.pi * np.sqrt(m))
    return QuadResult(pre * (v1 + v2), pre * (e1 + e2), evals)


def lm2_vs_lblr(m, kappa):
    """(lm2 value, lblr value); the Schur chain requires lm2 <= lblr."""
    lm2 = lm2_quadrature(m, kappa)
    lb = lblr_quadrature(m, kappa)
    if not (np.isfinite(lm2.value) and np.isfinite(lb.value)):
        raise QuadratureFailure("non-finite lm2/lblr value")
    return lm2, lb


def closed_form_matches_quadrature(m, kappa, rtol=1e-8):
    q = lblr_quadrature(m, kappa).value
    cf = lambda_schur_kappa(m, kappa)
    return abs(cf - q) <= rtol * abs(q), cf, q


# -- pointwise inequalities -------------------------------------------------


def denominator_sides(m, r, kappa):
    m = np.asarray(m, dtype=float)
    r = np.asarray(r, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    k2 = kappa * kappa
    lhs = (1 + r * r + 2 * (2 + m) / (1 + m) ** 2 * k2) ** 2 - 4 * r * r / (1 + m) ** 2
    cm = 2 * np.sqrt(2 + m) / ((1 + m) * np.sqrt(m))
    rhs = m * (m + 2) / (1 + m) ** 2 * (1 + r * r + cm * k2) ** 2
    return lhs, rhs


def denominator_inequality(m, r, kappa, rtol=1e-12):
    """Pointwise check of the denominator bound used after t <= 1 (vectorized)."""
    lhs, rhs = denominator_sides(m, r, kappa)
    return lhs - rhs >= -rtol * np.maximum(np.abs(lhs), np.abs(rhs))


def denominator_scan(n_samples, seed=0, chunk=250_000):
    """Random (m, r, kappa) with log-uniform magnitudes; returns (violations, worst relative margin)."""
    rng = np.random.default_rng(seed)
    bad, worst = 0, np.inf
    left = n_samples
    while left > 0:
        k = min(chunk, left)
        m = 10 ** rng.uniform(-3, 3, k)
        r = 10 ** rng.uniform(-4, 4, k)
        kap = 10 ** rng.uniform(-4, 4, k)
        lhs, rhs = denominator_sides(m, r, kap)
        rel = (lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs))
        bad += int(np.count_nonzero(rel < -1e-12))
        worst = min(worst, float(rel.min()))
        left -= k
    return bad, worst


@dataclass(frozen=True)
class NonnegReport:
    n_samples: int
    min_scaled: float
    violations: int
    worst_input: tuple
    half_closed_form_dev: float

    @property
    def ok(self):
        return self.violations == 0


def l_nonneg_scan(m, mu, n_samples, seed=0, lam_range=(0.0, 1.0), tol=1e-12, chunk=200_000):
    """Random search for negative values of L_lambda.

    Momenta are Gaussian with log-uniform scales so both the q-dominated and
    the base-dominated regimes are visited.  Values are measured against the
    scale ``sqrt(q^2 + base)``.  Also reports the largest deviation of
    L_{1/sqrt 2} from its closed form on the same samples.
    """
    rng = np.random.default_rng(seed)
    lam_lo, lam_hi = lam_range
    worst, worst_in, bad, dev = np.inf, None, 0, 0.0
    left = n_samples
    while left > 0:
        k = min(chunk, left)
        scale = 10 ** rng.uniform(-3, 3, (3, k, 1))
        P1, P2, q = rng.standard_normal((3, k, 3)) * scale
        lam = rng.uniform(lam_lo, lam_hi, k)
        val = big_l(P1, P2, q, m, mu, lam)
        base = m * (np.sum(P1 * P1, -1) + np.sum(P2 * P2, -1)) / (1 + m) ** 2 + m * mu / (1 + m)
        ref = np.sqrt(np.sum(q * q, -1) + base)
        rel = val / ref
        i = int(np.argmin(rel))
        if rel[i] < worst:
            worst, worst_in = float(rel[i]), (float(lam[i]), P1[i].tolist(), P2[i].tolist(), q[i].tolist())
        bad += int(np.count_nonzero(rel < -tol))
        half = big_l(P1, P2, q, m, mu, 1 / np.sqrt(2))
        dev = max(dev, float(np.max(np.abs(half - big_l_half(P1, P2, m, mu)) / ref)))
        left -= k
    return NonnegReport(n_samples, worst, bad, worst_in, dev)


# -- exact Gaussian oracle for the phi_i ------------------------------------
#
# Written independently of the Monte Carlo module: the argument maps are
# parsed from the same textual form as the displayed integrals, and every
# integral is reduced to a one-dimensional Laplace-type integral of a closed
# form Gaussian.  1/(h + mu) = int_0^inf exp(-t (h + mu)) dt and
# sqrt(a) = (1/(2 sqrt pi)) int_0^inf (1 - exp(-t a)) t^{-3/2} dt.

_VARS12 = ("p1", "p2", "k1", "k2")
_VARS9 = ("P", "p", "k")

_FORMS = {
    "phi1": (("p1+k1", "p2", "k2"), ("p2+k1", "p1", "k2"), 1.0),
    "phi2": (("p1+k1", "p2", "k2"), ("p1+k2", "p2", "k1"), 1.0),
    "phi3": (("p1+k1", "p2", "k2"), ("p2+k2", "p1", "k1"), -1.0),
}


def _parse_slot(expr, names):
    v = np.zeros(len(names))
    for tok in re.findall(r"[+-]?[^+-]+", expr.replace(" ", "")):
        sign = -1.0 if tok.startswith("-") else 1.0
        v[names.index(tok.lstrip("+-"))] += sign
    return v


def _gauss_pair_log(slots_x, slots_y, si, sj, cx, cy, H, t):
    """log of int exp(-|X y - cx|^2/(2 si^2) - |Y y - cy|^2/(2 sj^2) - t y.H y) over R^{3d}."""
    X = np.array(slots_x)
    Y = np.array(slots_y)
    d = X.shape[1]
    prec = X.T @ X / si**2 + Y.T @ Y / sj**2 + 2 * t * H
    sign, logdet = np.linalg.slogdet(prec)
    if sign <= 0:
        raise QuadratureFailure("Gaussian form is not positive definite")
    total = 3 * (0.5 * d * np.log(2 * np.pi) - 0.5 * logdet)
    for comp in range(3):
        lin = X.T @ cx[:, comp] / si**2 + Y.T @ cy[:, comp] / sj**2
        const = cx[:, comp] @ cx[:, comp] / si**2 + cy[:, comp] @ cy[:, comp] / sj**2
        total += 0.5 * lin @ np.linalg.solve(prec, lin) - 0.5 * const
    return total


def _terms(xi):
    return [(t.coeff, np.array([t.A, t.B, t.C], dtype=float), t.sigma) for t in xi.terms]


def gaussian_norm_sq(xi):
    """|xi|^2 via the Gaussian pair integral at t = 0."""
    ident = [_parse_slot(s, _VARS9) for s in _VARS9]
    H = np.zeros((3, 3))
    return sum(
        ci * cj * np.exp(_gauss_pair_log(ident, ident, si, sj, Ai, Aj, H, 0.0))
        for ci, Ai, si in _terms(xi)
        for cj, Aj, sj in _terms(xi)
    )


def _laplace_inverse(xi, slots_x, slots_y, H, mu):
    total, err, nev = 0.0, 0.0, 0
    for ci, Ai, si in _terms(xi):
        for cj, Aj, sj in _terms(xi):
            if ci * cj == 0:
                continue
            f = lambda t: np.exp(-t * mu + _gauss_pair_log(slots_x, slots_y, si, sj, Ai, Aj, H, t))  # noqa: E731
            v, e, n = _quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-11)
            total += ci * cj * v
            err += abs(ci * cj) * e
            nev += n
    return total, err, nev


def _sqrt_transform(xi, H, mu):
    """sum_ij c_i c_j int g_ij(y) sqrt(y.H y + mu) dy."""
    ident = [_parse_slot(s, _VARS9) for s in _VARS9]
    total, err, nev = 0.0, 0.0, 0
    for ci, Ai, si in _terms(xi):
        for cj, Aj, sj in _terms(xi):
            if ci * cj == 0:
                continue
            g0 = _gauss_pair_log(ident, ident, si, sj, Ai, Aj, H, 0.0)

            def f(u):
                # t = u^2 keeps the integrand finite at the origin
                t = u * u
                if t == 0.0:
                    return 0.0
                gt = _gauss_pair_log(ident, ident, si, sj, Ai, Aj, H, t) - t * mu
                return 2.0 / (u * u) * np.exp(g0) * (-np.expm1(gt - g0))

            v, e, n = _quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-11)
            total += ci * cj * v / (2 * np.sqrt(np.pi))
            err += abs(ci * cj) * e / (2 * np.sqrt(np.pi))
            nev += n
    return total, err, nev


def gaussian_form_oracle(which, xi, m, mu) -> QuadResult:
    """Deterministic value of phi0..phi3, T_mu or the L_{1/sqrt2}-weighted norm for a Gaussian mixture.

    which: one of 'phi0', 'phi1', 'phi2', 'phi3', 't_mu', 'weighted_norm'.
    """
    m = check_mass(m)
    if which == "t_mu":
        parts = [gaussian_form_oracle(w, xi, m, mu) for w in ("phi0", "phi1", "phi2", "phi3")]
        return QuadResult(
            sum(p.value for p in parts), sum(p.abs_err_est for p in parts), sum(p.evaluations for p in parts)
        )
    if which == "phi0":
        H = np.diag([1 / (1 + m), 1.0, 1 / m])
        v, e, n = _sqrt_transform(xi, H, mu)
        pre = 2 * np.pi**2 * (m / (m + 1)) ** 1.5
        return QuadResult(pre * v, pre * e, n)
    if which == "weighted_norm":
        a = m / (1 + m) ** 2
        # P^2 + (p + k)^2 in the (P, p, k) slots
        H = a * np.array([[1.0, 0, 0], [0, 1, 1], [0, 1, 1]])
        v, e, n = _sqrt_transform(xi, H, m * mu / (1 + m))
        return QuadResult(v / np.sqrt(2), e / np.sqrt(2), n)
    sx, sy, sign = _FORMS[which]
    X = [_parse_slot(s, _VARS12) for s in sx]
    Y = [_parse_slot(s, _VARS12) for s in sy]
    H = np.diag([1.0, 1.0, 1 / m, 1 / m])
    v, e, n = _laplace_inverse(xi, X, Y, H, mu)
    return QuadResult(sign * v, e, n)
