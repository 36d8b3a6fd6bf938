"""Monte Carlo estimates of phi_0..phi_3, T_mu and the stepwise bounds.

The trial functions are Gaussian mixtures on R^9.  Every integrand is a
product of two evaluations of xi (or |xi|^2) times a smooth factor, so the
importance density is the normalized mixture of the pairwise products of
Gaussian envelopes; the weights xi(X) xi(Y) / q are then bounded.

Random numbers come from a fixed logical stream: chunk ``c`` of stream
``s`` draws from ``SeedSequence(seed, spawn_key=(s, c))``.  Shards only
distribute chunks across threads, and partial results are merged in chunk
order, so estimates are bit-identical for any shard count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .bounds import lambda_upper, theorem_rhs
from .errors import DegenerateSampler, DomainError
from .kernels import INV_SQRT2, big_l, check_mass, h0

CHUNK = 1 << 16

# Slot maps (rows P, p, k) acting on the variables (p1, p2, k1, k2).
_FIRST = np.array([[1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=float)  # xi(p1+k1, p2, k2)
FORMS = {
    "phi1": (_FIRST, np.array([[0, 1, 1, 0], [1, 0, 0, 0], [0, 0, 0, 1]], dtype=float), 1.0),
    "phi2": (_FIRST, np.array([[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0]], dtype=float), 1.0),
    "phi3": (_FIRST, np.array([[0, 1, 0, 1], [1, 0, 0, 0], [0, 0, 1, 0]], dtype=float), -1.0),
}
_IDENT = np.eye(3)
STREAMS = {"phi0": 0, "phi1": 1, "phi2": 2, "phi3": 3, "weighted_norm": 4}


@dataclass(frozen=True)
class GaussianTerm:
    coeff: float
    A: tuple
    B: tuple
    C: tuple
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Gaussian width must be positive")
        for name in ("A", "B", "C"):
            object.__setattr__(self, name, tuple(float(v) for v in np.reshape(getattr(self, name), 3)))
        object.__setattr__(self, "coeff", float(self.coeff))


@dataclass(frozen=True)
class GaussianTrial:
    """xi(P, p, k) = sum c exp(-(|P-A|^2 + |p-B|^2 + |k-C|^2) / (2 sigma^2))."""

    terms: tuple
    _c: np.ndarray = field(init=False, repr=False, compare=False)
    _centers: np.ndarray = field(init=False, repr=False, compare=False)
    _s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise DomainError("a trial needs at least one term")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_c", np.array([t.coeff for t in terms]))
        object.__setattr__(self, "_centers", np.array([[t.A, t.B, t.C] for t in terms]))
        object.__setattr__(self, "_s", np.array([t.sigma for t in terms]))

    @classmethod
    def single(cls, coeff=1.0, A=(0, 0, 0), B=(0, 0, 0), C=(0, 0, 0), sigma=1.0):
        return cls((GaussianTerm(coeff, A, B, C, sigma),))

    @classmethod
    def random(cls, rng, n_terms=None, center_box=2.0, sigma_range=(0.5, 2.0)):
        rng = np.random.default_rng(rng)
        k = int(rng.integers(1, 4)) if n_terms is None else int(n_terms)
        terms = [
            GaussianTerm(
                rng.uniform(-1, 1),
                *rng.uniform(-center_box, center_box, (3, 3)),
                rng.uniform(*sigma_range),
            )
            for _ in range(k)
        ]
        return cls(tuple(terms))

    def scaled(self, s):
        """The trial x -> xi(x / s)."""
        return GaussianTrial(
            tuple(
                GaussianTerm(t.coeff, np.multiply(t.A, s), np.multiply(t.B, s), np.multiply(t.C, s), t.sigma * s)
                for t in self.terms
            )
        )

    @property
    def is_zero(self):
        return not np.any(self._c)

    def log_envelopes(self, slots):
        """log of each unit-coefficient Gaussian.

        ``slots`` has shape (..., 3, 3) indexed [spatial component, slot] with
        slots ordered (P, p, k).
        """
        flat = slots.reshape(slots.shape[:-2] + (9,))
        cen = self._centers.transpose(0, 2, 1).reshape(-1, 9)
        d2 = np.sum(flat * flat, axis=-1)[..., None] - 2 * flat @ cen.T + np.sum(cen * cen, axis=-1)
        return -0.5 * np.maximum(d2, 0.0) / self._s**2

    def __call__(self, P, p, k):
        slots = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (P, p, k))), axis=-1)
        return np.exp(self.log_envelopes(slots)) @ self._c

    def norm_sq(self):
        """|xi|^2 from pairwise Gaussian overlap integrals."""
        s2 = self._s[:, None] ** 2 + self._s[None, :] ** 2
        d = self._centers[:, None] - self._centers[None, :]
        dist2 = np.einsum("ijab,ijab->ij", d, d)
        overlap = (2 * np.pi * self._s[:, None] ** 2 * self._s[None, :] ** 2 / s2) ** 4.5 * np.exp(-dist2 / (2 * s2))
        return float(self._c @ overlap @ self._c)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    def __add__(self, other):
        return MCEstimate(
            self.mean + other.mean, math.hypot(self.stderr, other.stderr), self.n_samples + other.n_samples, self.seed
        )

    def shifted(self, c):
        return MCEstimate(self.mean + c, self.stderr, self.n_samples, self.seed)

    def z_score(self, reference=0.0):
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.stderr

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "n_samples": self.n_samples, "seed": self.seed}


class PairSampler:
    """Mixture proposal proportional to |c_i c_j| e_i(L1 x) e_j(L2 x)."""

    def __init__(self, xi: GaussianTrial, L1, L2):
        self.xi, self.L1, self.L2 = xi, np.asarray(L1, float), np.asarray(L2, float)
        d = self.L1.shape[1]
        self.dim = d
        c, s, cen = xi._c, xi._s, xi._centers
        K = len(c)
        means, chols, logZ, logw = [], [], [], []
        for i in range(K):
            for j in range(K):
                prec = self.L1.T @ self.L1 / s[i] ** 2 + self.L2.T @ self.L2 / s[j] ** 2
                lin = self.L1.T @ cen[i] / s[i] ** 2 + self.L2.T @ cen[j] / s[j] ** 2  # (d, 3)
                cov = np.linalg.inv(prec)
                mean = cov @ lin
                const = np.sum(cen[i] ** 2) / s[i] ** 2 + np.sum(cen[j] ** 2) / s[j] ** 2
                _, logdet = np.linalg.slogdet(prec)
                lz = 1.5 * d * np.log(2 * np.pi) - 1.5 * logdet - 0.5 * (const - np.sum(lin * mean))
                means.append(mean)
                chols.append(np.linalg.cholesky(cov))
                logZ.append(lz)
                cc = abs(c[i] * c[j])
                logw.append(np.log(cc) + lz if cc > 0 else -np.inf)
        self.means = np.array(means)
        self.chols = np.array(chols)
        self.logZ = np.array(logZ)
        logw = np.array(logw)
        if not np.all(np.isfinite(self.logZ)) or not np.any(np.isfinite(logw)):
            raise DegenerateSampler("proposal normalization underflows")
        self.log_pi = logw - logsumexp(logw)
        self.pi = np.exp(self.log_pi)
        self.pi /= self.pi.sum()
        self._log_mix = self.log_pi - self.logZ
        self.K = K

    def draw(self, rng, n):
        """Samples of shape (n, 3, d), grouped by mixture component.

        The layout is spatial component first, then variable.
        """
        counts = rng.multinomial(n, self.pi)
        x = rng.standard_normal((n, 3, self.dim))
        start = 0
        for c, k in enumerate(counts):
            if k:
                blk = x[start : start + k]
                blk[...] = (blk.reshape(-1, self.dim) @ self.chols[c].T).reshape(k, 3, self.dim) + self.means[c].T
                start += k
        return x

    def weight(self, x):
        """Returns xi(L1 x) xi(L2 x) / q(x)."""
        n = len(x)
        flat = x.reshape(-1, self.dim)
        e1 = self.xi.log_envelopes((flat @ self.L1.T).reshape(n, 3, 3))
        e2 = self.xi.log_envelopes((flat @ self.L2.T).reshape(n, 3, 3))
        e1 -= e1.max(axis=1, keepdims=True)
        e2 -= e2.max(axis=1, keepdims=True)
        num = (np.exp(e1) @ self.xi._c) * (np.exp(e2) @ self.xi._c)
        # log q up to the same offsets as num
        lq = (e1[:, :, None] + e2[:, None, :]).reshape(n, -1) + self._log_mix
        top = lq.max(axis=1)
        den = np.exp(top) * np.sum(np.exp(lq - top[:, None]), axis=1)
        return num / den


def _chunk_stats(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    return len(values), mean, m2


def _merge(a, b):
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, qa + qb + delta**2 * na * nb / n


def default_threads():
    env = os.environ.get("FERMISTAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_stream(sample_fn, n, seed, stream, shards=1, chunk=CHUNK):
    """Evaluate ``sample_fn(rng, k) -> values`` over a chunked logical stream.

    Returns a list of MCEstimate, one per output column.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    n_chunks = -(-n // chunk)
    sizes = [min(chunk, n - c * chunk) for c in range(n_chunks)]

    def work(c):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, c))))
        return _chunk_stats(sample_fn(rng, sizes[c]))

    if shards > 1:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            stats = list(pool.map(work, range(n_chunks)))
    else:
        stats = [work(c) for c in range(n_chunks)]
    acc = stats[0]
    for s in stats[1:]:
        acc = _merge(acc, s)
    total, mean, m2 = acc
    se = np.sqrt(m2 / (total - 1) / total)
    return [MCEstimate(float(mu_), float(s_), int(total), int(seed)) for mu_, s_ in zip(mean, se)]


def _zero(n, seed):
    return MCEstimate(0.0, 0.0, int(n), int(seed))


def _phi0_values(w, x, m, mu):
    P, p, k = x[:, :, 0], x[:, :, 1], x[:, :, 2]
    root = np.sqrt(np.sum(P * P, -1) / (1 + m) + np.sum(p * p, -1) + np.sum(k * k, -1) / m + mu)
    return 2 * np.pi**2 * (m / (m + 1)) ** 1.5 * w * root


def _weighted_values(w, x, m, mu, lam):
    P, p, k = x[:, :, 0], x[:, :, 1], x[:, :, 2]
    return w * big_l(P, p + k, (m * p - k) / (1 + m), m, mu, lam)


def _check(m, mu):
    m = check_mass(m)
    if not mu > 0:
        raise DomainError("mu must be > 0")
    return m


def phi0(xi, m, mu, n=10**6, seed=0, shards=1):
    """Estimate of phi_0(xi) (9-dimensional, |xi|^2 proposal)."""
    m = _check(m, mu)
    if xi.is_zero:
        return _zero(n, seed)
    sampler = PairSampler(xi, _IDENT, _IDENT)

    def fn(rng, k):
        x = sampler.draw(rng, k)
        w = sampler.weight(x)
        return _phi0_values(w, x, m, mu)

    return run_stream(fn, n, seed, STREAMS["phi0"], shards)[0]


def weighted_norm(xi, m, mu, n=10**6, seed=0, shards=1, lam=INV_SQRT2):
    """Estimate of int |xi(P, p, k)|^2 L_lam(P, p + k, (m p - k)/(1+m))."""
    m = _check(m, mu)
    if xi.is_zero:
        return _zero(n, seed)
    sampler = PairSampler(xi, _IDENT, _IDENT)

    def fn(rng, k):
        x = sampler.draw(rng, k)
        w = sampler.weight(x)
        return _weighted_values(w, x, m, mu, lam)

    return run_stream(fn, n, seed, STREAMS["weighted_norm"], shards)[0]


def phi_form(which, xi, m, mu, n=10**6, seed=0, shards=1, swap=False):
    """Estimate of phi_1, phi_2 or phi_3 (12-dimensional).

    ``swap`` exchanges the two evaluation points of xi, which leaves the
    integral unchanged (relabel p1 <-> p2 for phi_1).
    """
    m = _check(m, mu)
    L1, L2, sign = FORMS[which]
    if swap:
        L1, L2 = L2, L1
    if xi.is_zero:
        return _zero(n, seed)
    sampler = PairSampler(xi, L1, L2)

    def fn(rng, k):
        x = sampler.draw(rng, k)
        w = sampler.weight(x)
        return sign * w / (h0(x[:, :, 0], x[:, :, 1], x[:, :, 2], x[:, :, 3], m) + mu)

    return run_stream(fn, n, seed, STREAMS[which], shards)[0]


def phi1(xi, m, mu, n=10**6, seed=0, shards=1):
    return phi_form("phi1", xi, m, mu, n, seed, shards)


def phi2(xi, m, mu, n=10**6, seed=0, shards=1):
    return phi_form("phi2", xi, m, mu, n, seed, shards)


def phi3(xi, m, mu, n=10**6, seed=0, shards=1):
    return phi_form("phi3", xi, m, mu, n, seed, shards)


def t_mu_parts(xi, m, mu, n=10**6, seed=0, shards=1):
    return {
        "phi0": phi0(xi, m, mu, n, seed, shards),
        "phi1": phi1(xi, m, mu, n, seed, shards),
        "phi2": phi2(xi, m, mu, n, seed, shards),
        "phi3": phi3(xi, m, mu, n, seed, shards),
    }


def t_mu(xi, m, mu, n=10**6, seed=0, shards=1):
    """T_mu(xi) as the sum of four independently sampled estimates."""
    parts = t_mu_parts(xi, m, mu, n, seed, shards).values()
    out = None
    for p in parts:
        out = p if out is None else out + p
    return MCEstimate(out.mean, out.stderr, n, seed)


def theorem_gap(xi, m, mu, n=10**6, seed=0, shards=1, lambda_sum=None):
    """Estimate of T_mu(xi) minus the lower bound with the given Lambda-sum.

    lambda_sum defaults to the certified Schur value lambda(m) + lambda(1/m).
    """
    if lambda_sum is None:
        lambda_sum = lambda_upper(m).value + lambda_upper(1 / m).value
    est = t_mu(xi, m, mu, n, seed, shards)
    return est.shifted(-theorem_rhs(m, mu, lambda_sum, xi.norm_sq()))


def check_step_bound(which, xi, m, mu, n=10**6, seed=0, shards=1, lam=INV_SQRT2, lambda_value=None):
    """Estimate of (left side) - (right side) of one stepwise bound.

    bd1: phi0 + phi3 >= c W_lam
    bd2: phi1 >= -Lambda(m) c W
    bd3: phi2 >= -Lambda(1/m) c W
    with c = 2 pi^2 m/(m+1) and W the L-weighted norm (lam only enters bd1).
    Lambda defaults to the Schur upper bound lambda(m), which is admissible
    because W >= 0.
    """
    m = _check(m, mu)
    if which not in ("bd1", "bd2", "bd3"):
        raise ValueError(f"unknown bound {which!r}")
    if xi.is_zero:
        return _zero(n, seed)
    c = 2 * np.pi**2 * m / (m + 1)
    sampler = PairSampler(xi, _IDENT, _IDENT)
    if which == "bd1":

        def fn(rng, k):
            x = sampler.draw(rng, k)
            w = sampler.weight(x)
            W = _weighted_values(w, x, m, mu, lam)
            return np.column_stack([_phi0_values(w, x, m, mu) - c * W, W])

        head, W = run_stream(fn, n, seed, STREAMS["phi0"], shards)
        tail = phi3(xi, m, mu, n, seed, shards)
    else:
        if lambda_value is None:
            lambda_value = lambda_upper(m if which == "bd2" else 1 / m).value
        W = weighted_norm(xi, m, mu, n, seed, shards)
        head = MCEstimate(lambda_value * c * W.mean, lambda_value * c * W.stderr, n, seed)
        tail = (phi1 if which == "bd2" else phi2)(xi, m, mu, n, seed, shards)
    if not W.mean > 0:
        raise DegenerateSampler("weighted norm estimate is not positive")
    out = head + tail
    return MCEstimate(out.mean, out.stderr, n, seed)
