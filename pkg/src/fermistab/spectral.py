"""Rayleigh-Ritz lower estimates of Lambda(m).

For a = 0 the operator O^m_{0,b} commutes with rotations and splits into
radial operators, one per angular momentum l.  Writing f(p) = R(r) Y_lm
and v(x) = r^{3/2} R(r) with x = log r, the sector-l quadratic form is

    int int v(x) v(y) (r_x r_y)^{3/2} K_l(r_x, r_y) dx dy,
    K_l(r, s) = 2 pi int_{-1}^{1} O(r e, s u(t)) P_l(t) dt,

which at b = 0 depends on x - y only.  We project onto functions that are
piecewise constant in x.  Every matrix eigenvalue is then a Rayleigh
quotient, so the minimum eigenvalue bounds inf spec from above and the
derived Lambda estimate bounds Lambda from below.

At b = 0 the truncation to r_min <= r <= r_max costs about 1% in Lambda for
the default core grid (the finite-section error of a convolution).  Cells
of geometrically growing width beyond both ends of the core reduce it
without leaving the variational setting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import eval_legendre

from .bounds import BoundKind, BoundValue
from .errors import DomainError, QuadratureFailure, SingularNode
from .kernels import KernelParams, check_mass

ROW_BLOCK = 384


@dataclass(frozen=True)
class RadialGrid:
    """Log-radial cells: ``n`` uniform core cells on [r_min, r_max] plus tails.

    Tail cell k (k = 1..tail_cells) on each side has log-width
    ``tail_base * tail_growth**k``; this does not depend on ``n``, so
    ``refined()`` produces a nested space.
    """

    r_min: float = 1e-4
    r_max: float = 1e4
    n: int = 400
    tail_cells: int = 12
    tail_growth: float = 1.5
    tail_base: float = 0.05
    sub_nodes: int = 2
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise DomainError("need 0 < r_min < r_max")
        if self.n < 16:
            raise DomainError("need at least 16 core cells")
        if self.sub_nodes < 1 or self.tail_cells < 0 or self.tail_growth < 1:
            raise DomainError("invalid tail or sub-node settings")
        core = np.linspace(np.log(self.r_min), np.log(self.r_max), self.n + 1)
        w = self.tail_base * self.tail_growth ** np.arange(1, self.tail_cells + 1)
        left = core[0] - np.cumsum(w)
        right = core[-1] + np.cumsum(w)
        object.__setattr__(self, "edges", np.concatenate([left[::-1], core, right]))

    @property
    def n_cells(self):
        return len(self.edges) - 1

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def nodes(self):
        """Cell centers in r (geometric means of the cell ends)."""
        return np.exp(0.5 * (self.edges[:-1] + self.edges[1:]))

    @property
    def weights(self):
        """Cell measures in r (length of each cell)."""
        return np.diff(np.exp(self.edges))

    def quadrature(self):
        """Sub-cell Gauss-Legendre rule in x = log r: (x, weight, owning cell)."""
        h = (self.edges[self.tail_cells + self.n] - self.edges[self.tail_cells]) / self.n
        xs, ws, owner = [], [], []
        for i, (a, b) in enumerate(zip(self.edges[:-1], self.edges[1:])):
            width = b - a
            k = self.sub_nodes
            if width > 1.01 * h:
                k = max(k, min(int(np.ceil(width / h)) * k, int(np.ceil(width / 0.1))))
            g, gw = np.polynomial.legendre.leggauss(k)
            xs.append(a + width * (g + 1) / 2)
            ws.append(gw * width / 2)
            owner.append(np.full(k, i))
        return np.concatenate(xs), np.concatenate(ws), np.concatenate(owner)

    def refined(self):
        """Grid whose core cells are halved; its trial space contains this one's."""
        return RadialGrid(
            self.r_min, self.r_max, 2 * self.n, self.tail_cells, self.tail_growth, self.tail_base, self.sub_nodes
        )

    def to_dict(self):
        return {
            "r_min": self.r_min,
            "r_max": self.r_max,
            "n": self.n,
            "tail_cells": self.tail_cells,
            "tail_growth": self.tail_growth,
            "tail_base": self.tail_base,
            "sub_nodes": self.sub_nodes,
            "n_cells": self.n_cells,
            "r_extent": [float(np.exp(self.edges[0])), float(np.exp(self.edges[-1]))],
        }


def _t_rule(z_min):
    """Gauss-Legendre rule in t, sized for a pole at t = -z_min."""
    rho = z_min + np.sqrt(max(z_min * z_min - 1.0, 0.0))
    n = 32 if rho <= 1 else int(np.clip(np.ceil(20.0 / np.log(rho)), 32, 2048))
    return np.polynomial.legendre.leggauss(n)


def _sector_parts(params: KernelParams):
    if np.any(params.a_vec != 0):
        raise DomainError("partial-wave reduction needs a = 0")
    m, b = params.m, params.b
    return m, b, 2 * m * b * b / (1 + m) ** 2


def legendre_kernel(ls, r, s, params: KernelParams):
    """K_l(r, s) for each l in ``ls`` (arrays r, s broadcast)."""
    m, b, shift = _sector_parts(params)
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    if np.any(r <= 0) or np.any(s <= 0):
        raise SingularNode("radial nodes must be positive")
    den0 = r * r + s * s + shift
    d = 2.0 / (1 + m) * r * s
    z_min = float(np.min(den0 / d))
    t, tw = _t_rule(z_min)
    P = np.array([eval_legendre(l, t) for l in ls]) * tw
    inv = 1.0 / (den0[..., None] + d[..., None] * t)
    weight = 2 * np.pi * ((r * r + b * b) * (s * s + b * b)) ** -0.25
    return np.moveaxis(inv @ P.T, -1, 0) * weight


def _assemble(ls, params: KernelParams, grid: RadialGrid):
    m, b, shift = _sector_parts(params)
    x, w, owner = grid.quadrature()
    r = np.exp(x)
    if np.any(r <= 0):
        raise SingularNode("radial node at r = 0")
    starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    # dx-weighted, r^{3/2}-scaled values entering the double sum
    scale = w * r**1.5 * (r * r + b * b) ** -0.25
    d_all = 2.0 / (1 + m)
    z_min = float(np.min((2 * r * r + shift) / (d_all * r * r)))
    t, tw = _t_rule(z_min)
    P = np.array([eval_legendre(l, t) for l in ls]) * tw  # (L, nt)
    nf, nc = len(r), grid.n_cells
    half = np.empty((len(ls), nf, nc))
    r2 = r * r
    for lo in range(0, nf, ROW_BLOCK):
        hi = min(lo + ROW_BLOCK, nf)
        den0 = r2[lo:hi, None] + r2[None, :] + shift
        d = d_all * r[lo:hi, None] * r[None, :]
        acc = np.zeros((len(ls), hi - lo, nf))
        for tk, pk in zip(t, P.T):
            inv = 1.0 / (den0 + d * tk)
            for li in range(len(ls)):
                acc[li] += pk[li] * inv
        acc *= scale[lo:hi, None] * scale[None, :]
        half[:, lo:hi, :] = np.add.reduceat(acc, starts, axis=2)
    full = 2 * np.pi * np.add.reduceat(half, starts, axis=1)
    norm = 1.0 / np.sqrt(grid.widths)
    return full * norm[None, :, None] * norm[None, None, :]


def partial_wave_matrix(l, params: KernelParams, grid: RadialGrid | None = None):
    """Galerkin matrix of O^m_{0,b} in angular sector l (symmetric)."""
    if l < 0:
        raise DomainError("l must be >= 0")
    grid = grid or RadialGrid()
    M = _assemble([l], params, grid)[0]
    return 0.5 * (M + M.T)


def partial_wave_matrices(ls, params: KernelParams, grid: RadialGrid | None = None):
    grid = grid or RadialGrid()
    Ms = _assemble(list(ls), params, grid)
    return [0.5 * (M + M.T) for M in Ms]


def lambda_from_eig(m, eig):
    """-(1+m)/(2 pi^2 sqrt m) times an eigenvalue."""
    return -(1 + m) / (2 * np.pi**2 * np.sqrt(m)) * eig


@dataclass
class SpectralResult:
    per_l_min_eig: list
    lambda_estimate: BoundValue
    params: KernelParams
    grid: RadialGrid
    l_max: int
    best_l: int
    eigenvector: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "per_l_min_eig": [[l, v] for l, v in self.per_l_min_eig],
            "lambda_estimate": self.lambda_estimate.to_dict(),
            "params": {"m": self.params.m, "a": list(self.params.a), "b": self.params.b},
            "grid": self.grid.to_dict(),
            "l_max": self.l_max,
            "best_l": self.best_l,
        }


def lambda_lower_spectral(m, b=0.0, l_max=5, grid: RadialGrid | None = None, error_estimate=True):
    """Per-sector minimum eigenvalues of O^m_{0,b} and the implied Lambda estimate.

    ``abs_error`` is the change against the grid with half as many core
    cells (a resolution estimate; it does not cover truncation).
    """
    m = check_mass(m)
    if l_max < 1:
        raise DomainError("l_max must be >= 1")
    grid = grid or RadialGrid()
    params = KernelParams(m, b=b)
    ls = list(range(l_max + 1))
    per_l, vecs = [], []
    for l, M in zip(ls, partial_wave_matrices(ls, params, grid)):
        vals, v = eigh(M, subset_by_index=[0, 0])
        per_l.append((l, float(vals[0])))
        vecs.append(v[:, 0])
    i = int(np.argmin([v for _, v in per_l]))
    est = lambda_from_eig(m, per_l[i][1])
    err = 0.0
    if error_estimate and grid.n >= 32 and grid.n % 2 == 0:
        coarse = RadialGrid(
            grid.r_min, grid.r_max, grid.n // 2, grid.tail_cells, grid.tail_growth, grid.tail_base, grid.sub_nodes
        )
        M = partial_wave_matrix(per_l[i][0], params, coarse)
        err = abs(est - lambda_from_eig(m, eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0]))
    vec = vecs[i] * np.sign(vecs[i][np.argmax(np.abs(vecs[i]))])
    return SpectralResult(
        per_l, BoundValue(float(est), BoundKind.SPECTRAL_LOWER, float(err)), params, grid, l_max, per_l[i][0], vec
    )


# -- Rayleigh quotients for a != 0 -----------------------------------------


@dataclass(frozen=True)
class RadialTrial:
    """Trial f(p) = R(|p + a|) P_l(cos angle(p + a, a)).

    ``breaks`` are radii where R may be nonsmooth; radial quadrature uses
    Gauss-Legendre panels in log r between consecutive breaks.
    """

    radial: object
    l: int
    breaks: tuple

    @classmethod
    def gaussian(cls, l=1, width=1.0, panels=40):
        def R(r):
            return r**l * np.exp(-0.5 * (r / width) ** 2)

        return cls(R, l, tuple(np.geomspace(1e-5 * width, 9 * width, panels + 1)))

    @classmethod
    def from_spectral(cls, result: SpectralResult):
        """The piecewise-constant eigenvector of a spectral run as a continuum trial."""
        edges = result.grid.edges
        amp = result.eigenvector / np.sqrt(result.grid.widths)

        def R(r):
            idx = np.clip(np.searchsorted(edges, np.log(r)) - 1, 0, len(amp) - 1)
            return amp[idx] * r**-1.5

        return cls(R, result.best_l, tuple(np.exp(edges)))


def _probe_nodes(trial: RadialTrial, q, n_c):
    lb = np.log(np.asarray(trial.breaks, float))
    g, gw = np.polynomial.legendre.leggauss(q)
    h = np.diff(lb)
    x = (lb[:-1, None] + h[:, None] * (g + 1) / 2).ravel()
    wx = (h[:, None] * gw / 2).ravel()
    r = np.exp(x)
    c, wc = np.polynomial.legendre.leggauss(n_c)
    return r, wx * r, c, wc


def _rayleigh(params: KernelParams, trial: RadialTrial, q, n_c):
    m, b = params.m, params.b
    alpha = float(np.sqrt(params.a_vec @ params.a_vec))
    r, wr, c, wc = _probe_nodes(trial, q, n_c)
    R = np.asarray(trial.radial(r), float)
    Pl = eval_legendre(trial.l, c)
    norm = 2 * np.pi * 2.0 / (2 * trial.l + 1) * np.sum(wr * r * r * R * R)
    rr = np.repeat(r, n_c)
    cc = np.tile(c, len(r))
    ss = np.sqrt(1 - cc * cc)
    f = np.repeat(wr * r * r * R * (r * r + b * b) ** -0.25, n_c) * np.tile(wc * Pl, len(r))
    z = rr * cc  # projection of p + a on the a axis
    g = 2.0 / (1 + m)
    base = rr * rr - (2 + g) * alpha * z
    const = 2 * alpha * alpha + g * alpha * alpha + params.shift
    form = 0.0
    for lo in range(0, len(f), 2048):
        hi = min(lo + 2048, len(f))
        C0 = base[lo:hi, None] + base[None, :] + const + g * z[lo:hi, None] * z[None, :]
        C1 = g * (rr * ss)[lo:hi, None] * (rr * ss)[None, :]
        disc = C0 * C0 - C1 * C1
        if np.any(disc <= 0):
            raise SingularNode("kernel denominator vanishes on the probe grid")
        form += f[lo:hi] @ (4 * np.pi**2 / np.sqrt(disc)) @ f
    return form / norm


def rayleigh_probe(params: KernelParams, trial: RadialTrial | None = None, q=6, n_c=24, rtol=1e-4):
    """Lambda estimate -(1+m)/(2 pi^2 sqrt m) <f, O f>/<f, f> for one trial.

    Any returned value is a lower estimate of Lambda(m), since the Rayleigh
    quotient bounds inf spec O^m_{a,b} from above.  The azimuthal integral
    about the a axis is done in closed form; the remaining four dimensions
    use tensor Gauss-Legendre rules.  ``abs_error`` compares against a
    coarser rule.
    """
    trial = trial or RadialTrial.gaussian()
    fine = _rayleigh(params, trial, q, n_c)
    coarse = _rayleigh(params, trial, max(q - 2, 2), max(2 * n_c // 3, trial.l + 2))
    err = abs(fine - coarse)
    if not np.isfinite(fine) or err > rtol * max(abs(fine), 1e-300):
        raise QuadratureFailure(f"Rayleigh quotient unresolved: {fine:.8g} vs {coarse:.8g}")
    m = params.m
    return BoundValue(float(lambda_from_eig(m, fine)), BoundKind.SPECTRAL_LOWER, float(abs(lambda_from_eig(m, err))))
