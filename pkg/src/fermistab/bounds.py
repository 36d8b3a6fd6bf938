"""Closed-form bounds on Lambda(m), the kappa optimizer and mass windows."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import bisect

from .errors import DomainError, NoRoot, Unstable
from .kernels import c_m, check_mass

INV_PHI = (math.sqrt(5) - 1) / 2


class BoundKind(str, Enum):
    CLOSED_FORM = "closed_form"
    SCHUR_UPPER = "schur_upper"
    SPECTRAL_LOWER = "spectral_lower"
    QUADRATURE = "quadrature"
    MC = "mc"


class WindowBound(str, Enum):
    """Which estimate of Lambda enters the stability condition."""

    BAR = "bar_lambda"
    SCHUR = "schur_lambda"

    @classmethod
    def parse(cls, value) -> "WindowBound":
        if isinstance(value, cls):
            return value
        aliases = {"bar": cls.BAR, "schur": cls.SCHUR}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown bound kind {value!r}; use 'bar' or 'schur'") from None


@dataclass(frozen=True)
class BoundValue:
    value: float
    kind: BoundKind
    abs_error: float = 0.0

    def __post_init__(self):
        if not self.abs_error >= 0:
            raise ValueError("abs_error must be nonnegative")

    def __float__(self):
        return float(self.value)

    def to_dict(self):
        return {"value": self.value, "kind": self.kind.value, "abs_error": self.abs_error}


@dataclass(frozen=True)
class MassWindow:
    m_low: float
    m_high: float
    bound_kind: WindowBound
    tol: float

    def __post_init__(self):
        if not 0 < self.m_low < 1 < self.m_high:
            raise ValueError(f"degenerate window ({self.m_low}, {self.m_high})")

    def __contains__(self, m):
        return self.m_low < m < self.m_high

    def to_dict(self):
        return {
            "m_low": self.m_low,
            "m_high": self.m_high,
            "bound_kind": self.bound_kind.value,
            "tol": self.tol,
        }


def lambda_bar(m) -> BoundValue:
    """Lambda at a = b = 0, in closed form (arcsin formula)."""
    m = check_mass(m)
    v = 2 / np.pi * (1 + m) ** 2 * (1 / np.sqrt(m) - np.sqrt(2 + m) * np.arcsin(1 / (1 + m)))
    return BoundValue(float(v), BoundKind.CLOSED_FORM)


def _schur_prefactor(m):
    return (1 + m) ** 2 / (np.pi * m**1.5 * (m + 2))


def _atanh_ratio(x, log_term):
    """atanh(sqrt x)/sqrt x continued to x < 0 as atan(sqrt(-x))/sqrt(-x).

    ``log_term`` is atanh(sqrt x) computed without cancellation for x near 1.
    """
    out = np.empty_like(x)
    pos = x > 1e-3
    neg = x < -1e-3
    mid = ~(pos | neg)
    out[pos] = log_term[pos] / np.sqrt(x[pos])
    s = np.sqrt(-x[neg])
    out[neg] = np.arctan(s) / s
    xm = x[mid]
    acc = np.zeros_like(xm)
    for n in range(9, -1, -1):
        acc = acc * xm + 1.0 / (2 * n + 1)
    out[mid] = acc
    return out


def lambda_schur_kappa(m, kappa):
    """Vectorized lambda(m, kappa) as a plain float or array.

    Where 1 + kappa^2 (c_m - 1) <= 0 the logarithm is replaced by its
    analytic continuation, which equals the same r-integral.
    """
    m = check_mass(m)
    k = np.asarray(kappa, dtype=float)
    if np.any(~np.isfinite(k)) or np.any(k <= 0):
        raise DomainError("kappa must be positive and finite")
    c = c_m(m)
    k2 = k * k
    D = 1 + c * k2
    E = 1 + k2 * (c - 1)
    x = np.atleast_1d(E / D)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_term = np.atleast_1d(np.log((np.sqrt(D) + np.sqrt(np.maximum(E, 0.0))) / k))
    g = _atanh_ratio(x, log_term).reshape(np.shape(k))
    val = _schur_prefactor(m) / D * (1 + k2 / D * g)
    return val if np.ndim(val) else float(val)


def lambda_upper_at(m, kappa) -> BoundValue:
    """Schur-test bound lambda(m, kappa) for one kappa > 0."""
    return BoundValue(lambda_schur_kappa(m, kappa), BoundKind.CLOSED_FORM)


def lambda_upper_limit(m) -> float:
    """kappa -> 0+ limit of lambda(m, kappa)."""
    return float(_schur_prefactor(check_mass(m)))


def kappa_scan_range(m):
    c = c_m(m)
    return 1e-4, 100.0 * max(1.0, 1.0 / np.sqrt(c))


def golden_max(f, a, b, tol):
    """Golden-section search for the maximum of a unimodal f on [a, b].

    Returns (x, f(x), half-width of the final bracket, spread of f on it).
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc > fd else (d, fd)
    return x, fx, 0.5 * (b - a), abs(fc - fd)


def _argmax_kappa(m, points=200, rtol=1e-8):
    lo, hi = kappa_scan_range(m)
    u = np.linspace(np.log(lo), np.log(hi), points)
    vals = lambda_schur_kappa(m, np.exp(u))
    i = int(np.argmax(vals))
    limit = lambda_upper_limit(m)
    if i == 0:
        # monotone towards kappa -> 0: the supremum is the limit value
        return 0.0, max(limit, float(vals[0])), abs(limit - float(vals[0]))
    if i == points - 1:
        return float(np.exp(u[i])), float(vals[i]), float(abs(vals[i] - vals[i - 1]))
    f = lambda t: lambda_schur_kappa(m, math.exp(t))  # noqa: E731
    t, ft, _, spread = golden_max(f, u[i - 1], u[i + 1], rtol)
    if limit > ft:
        return 0.0, limit, 0.0
    return math.exp(t), ft, spread


def lambda_upper(m) -> BoundValue:
    """lambda(m) = sup over kappa > 0 of lambda(m, kappa)."""
    _, v, err = _argmax_kappa(check_mass(m))
    return BoundValue(float(v), BoundKind.SCHUR_UPPER, float(err + 4 * np.finfo(float).eps * v))


def lambda_upper_argmax(m) -> float:
    """Maximizing kappa (0.0 when the supremum is the kappa -> 0 limit)."""
    return _argmax_kappa(check_mass(m))[0]


def _lambda_for(kind: WindowBound, m):
    if kind is WindowBound.BAR:
        return lambda_bar(m)
    return lambda_upper(m)


def lambda_sum(m, kind="schur") -> BoundValue:
    """f(m) + f(1/m) for f = lambda_bar or lambda_upper."""
    kind = WindowBound.parse(kind)
    a, b = _lambda_for(kind, m), _lambda_for(kind, 1 / check_mass(m))
    return BoundValue(a.value + b.value, a.kind, a.abs_error + b.abs_error)


def stability_margin(m, kind="schur") -> BoundValue:
    """1 - f(m) - f(1/m); positive means stability is certified by f."""
    s = lambda_sum(m, kind)
    return BoundValue(1.0 - s.value, s.kind, s.abs_error)


def mass_window(kind="schur", tol=1e-8, bracket=(1e-3, 1.0)) -> MassWindow:
    """Window of mass ratios where the margin is positive, by bisection."""
    kind = WindowBound.parse(kind)
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = lambda m: stability_margin(m, kind).value  # noqa: E731
    lo, hi = bracket
    if np.sign(g(lo)) == np.sign(g(hi)):
        raise NoRoot(f"stability margin has no sign change on {bracket}")
    m_low = bisect(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return MassWindow(float(m_low), float(1.0 / m_low), kind, tol)


def theorem_rhs(m, mu, lambda_sum, xi_norm_sq):
    """(1 - lambda_sum) sqrt(2 mu) pi^2 (m/(m+1))^{3/2} |xi|^2."""
    m = check_mass(m)
    if not mu > 0:
        raise DomainError("mu must be > 0")
    if xi_norm_sq < 0:
        raise DomainError("xi_norm_sq must be >= 0")
    return (1 - lambda_sum) * np.sqrt(2 * mu) * np.pi**2 * (m / (m + 1)) ** 1.5 * xi_norm_sq


def energy_lower_bound(alpha, m, lambda_sum):
    """Lower bound on F_alpha(psi)/|psi|^2 implied by the stability margin."""
    m = check_mass(m)
    if lambda_sum >= 1:
        raise Unstable(f"lambda_sum = {lambda_sum} >= 1, no lower bound available")
    if alpha >= 0:
        return 0.0
    return -(alpha**2) * ((m + 1) / m) ** 3 / (2 * np.pi**4 * (1 - lambda_sum) ** 2)


@dataclass
class SweepTable:
    columns: tuple
    rows: np.ndarray

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, fh=None):
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([f"{v:.12g}" for v in row])
        if fh is None:
            return out.getvalue()
        return None


SWEEP_DEFAULTS = {"fig1": (1e-3, 10.0), "fig2": (0.1, 10.0)}


def sweep(kind, lo=None, hi=None, points=200, m=1.0) -> SweepTable:
    """Figure data: fig1 is (kappa, lambda(m, kappa)), fig2 is (m, lambda(m) + lambda(1/m)).

    Both abscissae are log-spaced.
    """
    kind = {"1": "fig1", "2": "fig2", 1: "fig1", 2: "fig2"}.get(kind, kind)
    if kind not in SWEEP_DEFAULTS:
        raise ValueError(f"unknown sweep {kind!r}")
    if points < 2:
        raise ValueError("points must be >= 2")
    dlo, dhi = SWEEP_DEFAULTS[kind]
    lo, hi = (dlo if lo is None else lo), (dhi if hi is None else hi)
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    x = np.geomspace(lo, hi, points)
    if kind == "fig1":
        y = lambda_schur_kappa(m, x)
        return SweepTable(("kappa", "lambda"), np.column_stack([x, y]))
    y = np.array([lambda_sum(v, "schur").value for v in x])
    return SweepTable(("m", "lambda_sum"), np.column_stack([x, y]))


def crossings(x, y, level=1.0):
    """Abscissae where y - level changes sign, by linear interpolation."""
    s = np.sign(np.asarray(y) - level)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    out = []
    for i in idx:
        x0, x1, y0, y1 = x[i], x[i + 1], y[i] - level, y[i + 1] - level
        out.append(x0 - y0 * (x1 - x0) / (y1 - y0))
    return out
