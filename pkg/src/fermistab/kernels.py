"""Closed-form scalar functions and integral kernels of the 2+2 model.

All momenta are arrays whose last axis has length 3; leading axes
broadcast, so every function here works pointwise on batches of points.
Natural units: the two species have masses 1/2 and m/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularPoint

INV_SQRT2 = 1.0 / np.sqrt(2.0)


def check_mass(m) -> float:
    """Validate a mass ratio and return it as a float."""
    m = float(m)
    if not np.isfinite(m) or m <= 0.0:
        raise DomainError(f"mass ratio must be positive and finite, got {m!r}")
    return m


def _vec(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"momentum arrays need a trailing axis of length 3, got shape {p.shape}")
    return p


def _sq(p) -> np.ndarray:
    return np.einsum("...i,...i->...", p, p)


def _dot(p, q) -> np.ndarray:
    return np.einsum("...i,...i->...", p, q)


@dataclass(frozen=True)
class KernelParams:
    """Parameters (m, a, b, mu) selecting one operator O^m_{a,b}."""

    m: float
    a: tuple = (0.0, 0.0, 0.0)
    b: float = 0.0
    mu: float | None = None
    _a: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "m", check_mass(self.m))
        a = np.asarray(self.a, dtype=float).reshape(3)
        if not np.all(np.isfinite(a)):
            raise DomainError("a must be finite")
        object.__setattr__(self, "a", tuple(float(x) for x in a))
        object.__setattr__(self, "_a", a)
        if not np.isfinite(self.b) or self.b < 0:
            raise DomainError(f"b must be >= 0, got {self.b!r}")
        object.__setattr__(self, "b", float(self.b))
        if self.mu is not None and not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu!r}")

    @property
    def a_vec(self) -> np.ndarray:
        return self._a

    @property
    def shift(self) -> float:
        """Constant part 2(2+m)a^2/(1+m)^2 + 2m b^2/(1+m)^2 of the denominator."""
        m = self.m
        return (2 * (2 + m) * float(self._a @ self._a) + 2 * m * self.b**2) / (1 + m) ** 2


def h0(p1, p2, k1, k2, m):
    """Kinetic energy p1^2 + p2^2 + (k1^2 + k2^2)/m."""
    m = check_mass(m)
    return _sq(_vec(p1)) + _sq(_vec(p2)) + (_sq(_vec(k1)) + _sq(_vec(k2))) / m


def o_kernel(p1, p2, params: KernelParams):
    """Integral kernel O^m_{a,b}(p1, p2).

    Raises SingularPoint where a weight factor ``[(p+a)^2 + b^2]^{-1/4}`` or
    the denominator vanishes.
    """
    p1, p2 = _vec(p1), _vec(p2)
    m, a, b = params.m, params.a_vec, params.b
    w1 = _sq(p1 + a) + b * b
    w2 = _sq(p2 + a) + b * b
    den = _sq(p1) + _sq(p2) + 2.0 / (1 + m) * _dot(p1, p2) + params.shift
    if np.any(w1 <= 0) or np.any(w2 <= 0):
        raise SingularPoint("weight factor vanishes (p = -a with b = 0)")
    if np.any(den <= 0):
        raise SingularPoint("kernel denominator vanishes")
    return (w1 * w2) ** -0.25 / den


def _l_base(P1, P2, m, mu):
    return m * (_sq(P1) + _sq(P2)) / (1 + m) ** 2 + m * mu / (1 + m)


def big_l(P1, P2, q, m, mu, lam):
    """The completing-the-square remainder L_lambda(P1, P2, q).

    Nonnegative for 0 <= lam <= 1; at lam = 1/sqrt(2) it reduces to
    ``(1/sqrt 2) * sqrt(m (P1^2+P2^2)/(1+m)^2 + m mu/(1+m))``.
    Values of ``lam`` outside [0, 1] are accepted so the range can be probed.
    """
    m = check_mass(m)
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu!r}")
    P1, P2, q = _vec(P1), _vec(P2), _vec(q)
    base = _l_base(P1, P2, m, mu)
    q2 = _sq(q)
    outer = np.sqrt(q2 + base)
    inner = np.sqrt(base)
    return outer - (q2 + lam * lam * base) / (lam * inner + outer)


def big_l_half(P1, P2, m, mu):
    """Closed form of L_lambda at lambda = 1/sqrt(2); independent of q."""
    m = check_mass(m)
    return INV_SQRT2 * np.sqrt(_l_base(_vec(P1), _vec(P2), m, mu))


def ell_arguments(q, P, k, m):
    """Arguments (P1, P2, q') at which ell evaluates L_lambda."""
    q, P, k = _vec(q), _vec(P), _vec(k)
    return (
        (1 + m) / (2 + m) * P - q,
        P / (2 + m) + q + k,
        m * q / (1 + m) + m * P / ((1 + m) * (2 + m)) - k / (1 + m),
    )


def ell(q, P, k, m, mu, lam=INV_SQRT2):
    """Weight ell_lambda(q, P, k) used for the phi_1 bound."""
    m = check_mass(m)
    return big_l(*ell_arguments(q, P, k, m), m, mu, lam)


def ell_half_explicit(q, P, k, m, mu):
    """Explicit form of ell at lambda = 1/sqrt(2)."""
    m = check_mass(m)
    q, P, k = _vec(q), _vec(P), _vec(k)
    shifted = q + 0.5 * k - m / (2 * (2 + m)) * P
    return np.sqrt(m) / (1 + m) * np.sqrt(_sq(shifted) + 0.25 * _sq(P + k) + (1 + m) * mu / 2)


def tilde_ell_arguments(q, P, p, m):
    """Arguments (P1, P2, q') at which tilde_ell evaluates L_lambda."""
    q, P, p = _vec(q), _vec(P), _vec(p)
    return (
        (1 + m) / (1 + 2 * m) * P - q,
        p + q + m * P / (1 + 2 * m),
        m * p / (1 + m) - q / (1 + m) - m * P / ((1 + m) * (1 + 2 * m)),
    )


def tilde_ell(q, P, p, m, mu, lam=INV_SQRT2):
    """Weight tilde-ell_lambda(q, P, p) used for the phi_2 bound."""
    m = check_mass(m)
    return big_l(*tilde_ell_arguments(q, P, p, m), m, mu, lam)


def _schur_base(p1, p2, params):
    p1, p2 = _vec(p1), _vec(p2)
    return _sq(p1) + _sq(p2) + params.shift, _dot(p1, p2)


def schur_k(p1, p2, params: KernelParams):
    """Unweighted kernel k(p1, p2) = 1/[p1^2 + p2^2 + 2 p1.p2/(1+m) + shift]."""
    s, u = _schur_base(p1, p2, params)
    den = s + 2.0 / (1 + params.m) * u
    if np.any(den <= 0):
        raise SingularPoint("k denominator vanishes")
    return 1.0 / den


def schur_k_minus(p1, p2, params: KernelParams):
    """Kernel of the negative part of k, odd in p2."""
    s, u = _schur_base(p1, p2, params)
    m = params.m
    den = s * s - 4.0 * u * u / (1 + m) ** 2
    if np.any(den <= 0):
        raise SingularPoint("k_minus denominator vanishes")
    return 2.0 / (1 + m) * u / den


def c_m(m):
    """Constant 2 sqrt(2+m) / ((1+m) sqrt m); drops below 1 for m above ~1.88."""
    m = check_mass(m)
    return 2.0 * np.sqrt(2.0 + m) / ((1.0 + m) * np.sqrt(m))
