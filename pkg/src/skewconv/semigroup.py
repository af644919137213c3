"""Strongly continuous linear semigroups on discretized Hilbert spaces.

Four kinds are supported:

* ``matrix``: ``T_t = exp(tA)`` on R^n.
* ``heat_line`` / ``heat_plane``: Brownian transition semigroup on a truncated
  uniform grid in 1 or 2 dimensions, Lebesgue weight.
* ``absorbing_halfline``: Brownian motion killed at 0, on the nodes
  ``h, 2h, ..., L`` with weight ``gamma(dy) = (1 - exp(-y^2)) dy`` by default.

Grid kinds apply ``T_t`` by trapezoid quadrature of the Gaussian kernel when
``t >= h**2`` (kernel width at least one grid step, aliasing error below
3e-9).  Below that the kernel cannot be sampled, so ``exp(t L_h)`` with the
finite-difference generator ``L_h`` is used instead; it tends to the identity
as ``t -> 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import erfc, exp1

from .grid import Grid, GridFunction, ShapeError
from .quadrature import panel_rule, panel_rule_uniform

KINDS = ("matrix", "heat_line", "heat_plane", "absorbing_halfline")


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


# ---------------------------------------------------------------- kernels

def gauss(d: int, s, r2):
    """``g_d(s, x)`` given the squared radius ``r2 = |x|^2`` (vectorized)."""
    s = np.asarray(s, dtype=float)
    return (2.0 * np.pi * s) ** (-d / 2.0) * np.exp(-np.asarray(r2) / (2.0 * s))


def gauss_dt(d: int, s, r2, order: int = 1):
    """Time derivatives of ``g_d(s, x)``; equal to ``(1/2 Laplacian)^order g``."""
    s = np.asarray(s, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    g = gauss(d, s, r2)
    l1 = -d / (2.0 * s) + r2 / (2.0 * s * s)
    if order == 0:
        return g
    if order == 1:
        return g * l1
    if order == 2:
        l2 = d / (2.0 * s * s) - r2 / s**3
        return g * (l1 * l1 + l2)
    raise ValueError("order must be 0, 1 or 2")


def _positive(name, *vals):
    for v in vals:
        if np.any(np.asarray(v) <= 0):
            raise DomainError(f"{name} requires strictly positive arguments")


def kernel_g(d: int, s: float, x) -> float:
    """Gaussian heat kernel ``(2 pi s)^(-d/2) exp(-|x|^2 / 2s)``."""
    if d not in (1, 2):
        raise DomainError("dimension must be 1 or 2")
    _positive("kernel_g", s)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != d:
        raise DomainError(f"point must have {d} coordinates")
    return float(gauss(d, s, np.dot(x, x)))


def kernel_p(s: float, x: float, y: float) -> float:
    """Absorbing-barrier transition density on the half-line."""
    _positive("kernel_p", s, x, y)
    return float(p_density(s, x, y))


def kernel_k(s: float, y: float) -> float:
    """Boundary entrance density ``y g_1(s, y) / s``."""
    _positive("kernel_k", s, y)
    return float(k_density(s, y))


def p_density(s, x, y, order: int = 0):
    return gauss_dt(1, s, (y - x) ** 2, order) - gauss_dt(1, s, (y + x) ** 2, order)


def k_density(s, y, order: int = 0):
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if order == 0:
        return y * gauss(1, s, y * y) / s
    if order == 1:
        return y * (gauss_dt(1, s, y * y, 1) / s - gauss(1, s, y * y) / s**2)
    if order == 2:
        return y * (gauss_dt(1, s, y * y, 2) / s - 2 * gauss_dt(1, s, y * y, 1) / s**2
                    + 2 * gauss(1, s, y * y) / s**3)
    raise ValueError("order must be 0, 1 or 2")


def heat_pair_time_integral(d: int, l: float, r) -> np.ndarray:
    """Closed form of ``int_0^l g_d(2s, r) ds`` (infinite at r = 0 when d = 2)."""
    r = np.abs(np.asarray(r, dtype=float))
    if d == 1:
        return np.sqrt(l / np.pi) * np.exp(-r * r / (4 * l)) - 0.5 * r * erfc(r / (2 * np.sqrt(l)))
    out = np.full(r.shape, np.inf)
    pos = r > 0
    out[pos] = exp1(r[pos] ** 2 / (4 * l)) / (4 * np.pi)
    return out


# ---------------------------------------------------------------- specs

@dataclass(frozen=True, eq=False)
class SemigroupSpec:
    """Immutable description of a semigroup; hashed by identity for caching."""

    kind: str
    grid: Grid
    matrix: np.ndarray | None = None
    c0: float = 1.0
    b0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown semigroup kind {self.kind!r}")
        if self.c0 < 0 or self.b0 < 0:
            raise ValueError("growth constants must be non-negative")
        if self.kind == "matrix":
            a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            if a.shape[0] != a.shape[1] or a.shape[0] != self.grid.size:
                raise ShapeError("matrix must be square and match the grid")
            a.setflags(write=False)
            object.__setattr__(self, "matrix", a)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def min_resolved_time(self) -> float:
        """Smallest time at which kernel sections are faithfully sampled."""
        return 0.0 if self.kind == "matrix" else self.grid.h ** 2

    @property
    def is_heat(self) -> bool:
        return self.kind in ("heat_line", "heat_plane")

    def element(self, values) -> GridFunction:
        return GridFunction(np.asarray(values, dtype=float), self.grid)

    def discretize(self, fn) -> GridFunction:
        return self.grid.discretize(fn)


def matrix_growth(a: np.ndarray, horizon: float = 10.0, samples: int = 201):
    """``b0 = max(0, max Re eig)`` and ``c0`` = 1.1 x the sampled sup of ``|e^{tA}| e^{-b0 t}``."""
    b0 = max(0.0, float(np.max(np.linalg.eigvals(a).real)))
    ts = np.linspace(0.0, horizon, samples)
    sup = max(np.linalg.norm(sla.expm(t * a), 2) * np.exp(-b0 * t) for t in ts)
    return max(1.0, 1.1 * sup), b0


def matrix_semigroup(a, c0: float | None = None, b0: float | None = None) -> SemigroupSpec:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if c0 is None or b0 is None:
        c_est, b_est = matrix_growth(a)
        c0 = c_est if c0 is None else c0
        b0 = b_est if b0 is None else b0
    return SemigroupSpec("matrix", Grid.finite(a.shape[0]), a, c0, b0)


def heat_line(half_width: float = 8.0, count: int = 321) -> SemigroupSpec:
    return SemigroupSpec("heat_line", Grid.uniform(-half_width, half_width, count))


def heat_plane(half_width: float = 8.0, count: int = 81) -> SemigroupSpec:
    return SemigroupSpec("heat_plane", Grid.uniform(-half_width, half_width, count, dim=2))


def absorbing_halfline(length: float = 10.0, count: int = 200,
                       weight: str = "gamma") -> SemigroupSpec:
    h = length / count
    return SemigroupSpec("absorbing_halfline", Grid.uniform(h, length, count, weight=weight))


def grid_tolerance(spec: SemigroupSpec) -> float:
    """Discretization tolerance used by the identity checks."""
    return 1e-10 if spec.kind == "matrix" else 1e-7


# ---------------------------------------------------------------- operators

def _fd_laplacian_1d(n: int, h: float) -> np.ndarray:
    """Half the second difference with zero values outside the grid."""
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    return 0.5 * (np.diag(main) + np.diag(off, 1) + np.diag(off, -1)) / (h * h)


@lru_cache(maxsize=4)
def _generator_factor(spec: SemigroupSpec) -> np.ndarray:
    if spec.kind == "matrix":
        return spec.matrix
    return _fd_laplacian_1d(spec.grid.shape[0], spec.h)


@lru_cache(maxsize=4)
def generator_matrix(spec: SemigroupSpec):
    """Generator on the grid (sparse for the plane)."""
    f = _generator_factor(spec)
    if spec.kind == "heat_plane":
        n = spec.grid.shape[0]
        one = sp.identity(n, format="csr")
        fs = sp.csr_matrix(f)
        return (sp.kron(fs, one) + sp.kron(one, fs)).tocsr()
    return f


def _spectral_factor(spec: SemigroupSpec, t: float) -> np.ndarray:
    """Fourier multiplier ``exp(-t w^2 / 2)``: periodic on the line, sine basis on the half-line.

    The sampled kernel aliases once its width drops below the spacing.
    """
    n, h = spec.grid.shape[0], spec.h
    if spec.kind == "absorbing_halfline":
        # nodes are j*h, so the boundary sits on the sine zero
        k = np.arange(1, n + 1)
        s = np.sin(np.pi * np.outer(k, k) / (n + 1))
        w = np.pi * k / ((n + 1) * h)
        return (s * np.exp(-0.5 * t * w * w)) @ s * (2.0 / (n + 1))
    w = 2 * np.pi * np.fft.fftfreq(n, d=h)
    col = np.fft.ifft(np.exp(-0.5 * t * w * w)).real
    idx = np.subtract.outer(np.arange(n), np.arange(n)) % n
    return col[idx]


@lru_cache(maxsize=256)
def _factor(spec: SemigroupSpec, t: float) -> np.ndarray:
    """Transition matrix (or its 1-d factor for the plane) at time ``t``."""
    if spec.kind == "matrix":
        return sla.expm(t * spec.matrix)
    if t < spec.h ** 2:
        return _spectral_factor(spec, t)
    h = spec.h
    x = spec.grid.axis_nodes(0)
    n = x.size
    # uniform nodes: differences are Toeplitz, sums (image term) Hankel
    lag = h * np.arange(n)
    m = sla.toeplitz(gauss(1, t, lag * lag))
    if spec.kind == "absorbing_halfline":
        sums = 2 * x[0] + h * np.arange(2 * n - 1)
        img = gauss(1, t, sums * sums)
        m = m - sla.hankel(img[:n], img[n - 1:])
    return h * m


def _apply_factor(spec: SemigroupSpec, m: np.ndarray, v: np.ndarray, transpose=False) -> np.ndarray:
    """Apply a factor matrix to values ``v`` of shape ``(..., size)``."""
    if transpose:
        m = m.T
    if spec.kind == "heat_plane":
        n = spec.grid.shape[0]
        vv = v.reshape(v.shape[:-1] + (n, n))
        out = m @ vv @ m.T
        return out.reshape(v.shape)
    return v @ m.T


def _check_time(t):
    if t < 0:
        raise DomainError("time must be non-negative")


def _check_grid(spec: SemigroupSpec, f: GridFunction):
    if f.grid != spec.grid:
        raise ShapeError("function grid does not match the semigroup domain")


def apply_values(spec: SemigroupSpec, t: float, v: np.ndarray) -> np.ndarray:
    """``T_t`` on raw value arrays of shape ``(..., size)``."""
    _check_time(t)
    if t == 0:
        return np.array(v, dtype=float, copy=True)
    return _apply_factor(spec, _factor(spec, float(t)), np.asarray(v, dtype=float))


def adjoint_values(spec: SemigroupSpec, t: float, v: np.ndarray) -> np.ndarray:
    """``T_t^*`` with respect to the grid's weighted inner product."""
    _check_time(t)
    v = np.asarray(v, dtype=float)
    if t == 0:
        return v.copy()
    w = spec.grid.quad_weights
    out = _apply_factor(spec, _factor(spec, float(t)), v * w, transpose=True)
    return out / w


def apply(spec: SemigroupSpec, t: float, f: GridFunction) -> GridFunction:
    _check_grid(spec, f)
    _check_time(t)
    if t == 0:
        return f
    return GridFunction(apply_values(spec, t, f.values), spec.grid)


def adjoint_apply(spec: SemigroupSpec, t: float, a: GridFunction) -> GridFunction:
    _check_grid(spec, a)
    _check_time(t)
    if t == 0:
        return a
    return GridFunction(adjoint_values(spec, t, a.values), spec.grid)


def generator_values(spec: SemigroupSpec, v: np.ndarray) -> np.ndarray:
    g = generator_matrix(spec)
    v = np.asarray(v, dtype=float)
    if sp.issparse(g):
        return (g @ v.reshape(-1, v.shape[-1]).T).T.reshape(v.shape)
    return v @ g.T


def generator_apply(spec: SemigroupSpec, f: GridFunction) -> GridFunction:
    """``A f``; for grid kinds the second-order central difference of ``f/2``."""
    _check_grid(spec, f)
    return GridFunction(generator_values(spec, f.values), spec.grid)


def operator_norm(spec: SemigroupSpec, t: float) -> float:
    """``||T_t||`` in the weighted norm of the grid."""
    _check_time(t)
    if t == 0:
        return 1.0
    m = _factor(spec, float(t))
    if spec.kind == "heat_plane":
        return float(np.linalg.norm(m, 2) ** 2)
    sw = np.sqrt(spec.grid.quad_weights)
    return float(np.linalg.norm(sw[:, None] * m / sw[None, :], 2))


# ---------------------------------------------------------------- resolvent

def resolvent_horizon(spec: SemigroupSpec, alpha: float, eps: float = 1e-13) -> float:
    gap = alpha - spec.b0
    return max(1.0, float(np.log(max(spec.c0, 1.0) / (gap * eps)) / gap))


def resolvent_tail_bound(spec: SemigroupSpec, alpha: float, fnorm: float, t_max: float) -> float:
    gap = alpha - spec.b0
    return float(np.exp(-gap * t_max) * spec.c0 * fnorm / gap)


def _resolvent_rule(spec: SemigroupSpec, alpha: float):
    t0 = 1e-7 if spec.kind == "matrix" else spec.h ** 2
    n0, w0 = panel_rule_uniform(0.0, t0, 1, 8)
    n1, w1 = panel_rule(t0, resolvent_horizon(spec, alpha), 1.5, 8)
    nodes = np.concatenate([n0, n1])
    return nodes, np.concatenate([w0, w1]) * np.exp(-alpha * nodes)


@lru_cache(maxsize=8)
def resolvent_matrix(spec: SemigroupSpec, alpha: float) -> np.ndarray:
    """Dense ``U_alpha`` by quadrature of ``int e^{-alpha t} T_t dt`` (not for the plane)."""
    if spec.kind == "heat_plane":
        raise ValueError("plane resolvent is applied matrix-free")
    nodes, weights = _resolvent_rule(spec, alpha)
    r = np.zeros((spec.grid.size, spec.grid.size))
    for t, w in zip(nodes, weights):
        if spec.kind == "matrix":
            r += w * sla.expm(t * spec.matrix)
        else:
            r += w * _factor.__wrapped__(spec, float(t))
    return r


def resolvent_values(spec: SemigroupSpec, alpha: float, v: np.ndarray) -> np.ndarray:
    if alpha <= spec.b0:
        raise DomainError(f"resolvent needs alpha > b0 = {spec.b0}")
    v = np.asarray(v, dtype=float)
    if spec.kind != "heat_plane":
        return v @ resolvent_matrix(spec, float(alpha)).T
    nodes, weights = _resolvent_rule(spec, alpha)
    out = np.zeros_like(v)
    for t, w in zip(nodes, weights):
        out = out + w * _apply_factor(spec, _factor.__wrapped__(spec, float(t)), v)
    return out


def resolvent(spec: SemigroupSpec, alpha: float, f: GridFunction) -> GridFunction:
    """``U_alpha f = int_0^inf e^{-alpha t} T_t f dt``."""
    _check_grid(spec, f)
    return GridFunction(resolvent_values(spec, alpha, f.values), spec.grid)


@lru_cache(maxsize=32)
def resolvent_norm(spec: SemigroupSpec, alpha: float, iterations: int = 50,
                   safety: float = 1.05, seed: int = 0) -> float:
    """Power-iteration estimate of ``||U_alpha||`` times a safety factor."""
    w = spec.grid.quad_weights
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(spec.grid.size)
    est = 0.0
    for _ in range(iterations):
        v = v / np.sqrt(np.sum(v * v * w))
        u = resolvent_values(spec, alpha, v)
        est = np.sqrt(np.sum(u * u * w))
        # adjoint in the weighted inner product
        v = _resolvent_adjoint(spec, alpha, u)
    return float(safety * est)


def _resolvent_adjoint(spec, alpha, u):
    w = spec.grid.quad_weights
    if spec.kind == "heat_plane":
        return resolvent_values(spec, alpha, u)
    return (u * w) @ resolvent_matrix(spec, float(alpha)) / w
