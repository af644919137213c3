"""Entrance paths, the entrance space inner product and its weak (resolvent) norm.

An entrance path is a rule ``s -> x(s)`` for ``s > 0`` with
``x(r + t) = T_t x(r)``.  Paths are represented symbolically as finite linear
combinations of *leaves* (embedded elements, heat/absorbing kernel measures,
sampled states), each taken at a time offset and differentiated in ``s`` a
given number of times.  Shifts and time derivatives therefore act exactly,
and inner products between heat-kernel leaves are evaluated in closed form
via ``<g_d(s1, . - z1), g_d(s2, . - z2)> = g_d(s1 + s2, z1 - z2)``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from . import quadrature as q
from .grid import GridFunction, ShapeError
from .semigroup import (
    DomainError,
    SemigroupSpec,
    apply_values,
    gauss_dt,
    generator_values,
    heat_pair_time_integral,
    k_density,
    p_density,
    resolvent_horizon,
    resolvent_norm,
    resolvent_values,
)


class UnsupportedEvaluation(ValueError):
    """A sampled path was queried before its first sample."""


class RejectedMeasure(ValueError):
    def __init__(self, message, **values):
        super().__init__(f"{message}: {values}")
        self.values = values


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class EntranceNormParams:
    """Weight ``b`` and the geometric time grid of the entrance inner product."""

    b: float
    s_min: float = 1e-4
    s_max: float | None = None
    rho: float = 1.1
    order: int = 4

    def __post_init__(self):
        if self.s_min <= 0 or self.rho <= 1:
            raise ValueError("need s_min > 0 and rho > 1")
        if self.s_max is not None and self.s_max <= self.s_min:
            raise ValueError("need s_max > s_min")

    def check(self, spec: SemigroupSpec):
        if self.b <= spec.b0:
            raise DomainError(f"b = {self.b} must exceed b0 = {spec.b0}")

    def upper(self, spec: SemigroupSpec) -> float:
        if self.s_max is not None:
            return self.s_max
        return 20.0 / (2.0 * (self.b - spec.b0))


def default_params(spec: SemigroupSpec, **kw) -> EntranceNormParams:
    return EntranceNormParams(b=spec.b0 + 1.0, **kw)


@dataclass(frozen=True)
class SignedMeasureAtoms:
    """Finite signed measure; ``locations`` has shape ``(m, d)``."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        if loc.ndim == 1:
            loc = loc[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if loc.shape[0] != w.size:
            raise ValueError("one weight per location")
        if np.any(w == 0):
            raise ValueError("atom weights must be non-zero")
        if len({tuple(r) for r in loc}) != loc.shape[0]:
            raise ValueError("atom locations must be distinct")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, pairs, dim: int = 1) -> "SignedMeasureAtoms":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros((0, dim)), np.zeros(0))
        loc = np.array([np.atleast_1d(p[0]) for p in pairs], dtype=float)
        return cls(loc, np.array([p[1] for p in pairs], dtype=float))

    @classmethod
    def parse(cls, text: str, dim: int = 1) -> "SignedMeasureAtoms":
        """Atom list in the ``location weight`` per-line format (``#`` comments)."""
        pairs = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [float(p) for p in line.replace(",", " ").split()]
            if len(parts) != dim + 1:
                raise ValueError(f"expected {dim} coordinates and a weight: {line!r}")
            pairs.append((parts[:dim], parts[dim]))
        return cls.from_pairs(pairs, dim)

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def __len__(self):
        return self.weights.size

    def total_variation(self) -> "SignedMeasureAtoms":
        return SignedMeasureAtoms(self.locations, np.abs(self.weights))

    def __add__(self, other: "SignedMeasureAtoms") -> "SignedMeasureAtoms":
        acc: dict = {}
        for loc, w in zip(np.vstack([self.locations, other.locations]),
                          np.concatenate([self.weights, other.weights])):
            acc[tuple(loc)] = acc.get(tuple(loc), 0.0) + w
        return SignedMeasureAtoms.from_pairs([(k, v) for k, v in acc.items() if v != 0], self.dim)


# ---------------------------------------------------------------- paths

class EntrancePath:
    """Base class; concrete paths implement ``terms``."""

    spec: SemigroupSpec

    def terms(self) -> tuple:
        """Flat expansion ``((coef, leaf, offset, order), ...)``."""
        raise NotImplementedError

    @property
    def min_time(self) -> float:
        return max((leaf.first_time - off for _, leaf, off, _ in self.terms()), default=0.0)

    def values(self, s, order: int = 0) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, self.spec.grid.size))
        for c, leaf, off, k in self.terms():
            out += c * leaf.leaf_values(s + off, k + order)
        return out

    def eval(self, s: float) -> GridFunction:
        if s <= 0:
            raise DomainError("entrance paths are evaluated at s > 0")
        return GridFunction(self.values([s])[0], self.spec.grid)

    def closure(self) -> GridFunction | None:
        """Exact ``x(0)`` when the representation provides it."""
        out = np.zeros(self.spec.grid.size)
        for c, leaf, off, k in self.terms():
            if off > 0:
                out += c * leaf.leaf_values(np.array([off]), k)[0]
                continue
            v = leaf.leaf_closure(k)
            if v is None:
                return None
            out += c * v
        return GridFunction(out, self.spec.grid)

    def _combine(self, other, sign):
        if other.spec is not self.spec:
            raise ShapeError("paths belong to different semigroups")
        t = self.terms() + tuple((sign * c, l, o, k) for c, l, o, k in other.terms())
        return Combination(self.spec, t)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return Combination(self.spec, tuple((c * a, l, o, k) for a, l, o, k in self.terms()))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class Leaf(EntrancePath):
    first_time = 0.0

    def terms(self):
        return ((1.0, self, 0.0, 0),)

    def leaf_values(self, s: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def leaf_closure(self, order: int):
        return None


@dataclass(frozen=True, eq=False)
class Embedded(Leaf):
    """``s -> T_s x0`` for ``x0`` in H."""

    spec: SemigroupSpec
    x0: GridFunction

    def __post_init__(self):
        if self.x0.grid != self.spec.grid:
            raise ShapeError("element does not live on the semigroup's grid")

    def _derive(self, v, order):
        for _ in range(order):
            v = generator_values(self.spec, v)
        return v

    def leaf_values(self, s, order):
        if np.any(s <= 0):
            raise DomainError("s must be positive")
        v = np.stack([apply_values(self.spec, float(si), self.x0.values) for si in s])
        return self._derive(v, order)

    def leaf_closure(self, order):
        return self._derive(self.x0.values, order)


@dataclass(frozen=True, eq=False)
class HeatMeasure(Leaf):
    """``s -> sum_k w_k g_d(s, . - z_k)`` on a heat kind."""

    spec: SemigroupSpec
    atoms: SignedMeasureAtoms

    def __post_init__(self):
        if not self.spec.is_heat:
            raise ValueError("heat measures need a heat_line or heat_plane semigroup")
        if self.atoms.dim != self.spec.grid.dim:
            raise ShapeError("atom dimension does not match the grid")

    @property
    def d(self) -> int:
        return self.spec.grid.dim

    def leaf_values(self, s, order):
        if np.any(s <= 0):
            raise DomainError("s must be positive")
        pts = self.spec.grid.points
        r2 = np.sum((pts[None, :, :] - self.atoms.locations[:, None, :]) ** 2, axis=-1)
        g = gauss_dt(self.d, s[:, None, None], r2[None], order)
        return np.einsum("k,skn->sn", self.atoms.weights, g)


@dataclass(frozen=True, eq=False)
class AbsorbingMeasure(Leaf):
    """``s -> a k_s + sum_k w_k p_s(z_k, .)`` on the absorbing half-line."""

    spec: SemigroupSpec
    a: float
    atoms: SignedMeasureAtoms

    def __post_init__(self):
        if self.spec.kind != "absorbing_halfline":
            raise ValueError("absorbing measures need an absorbing_halfline semigroup")
        if self.a < 0:
            raise DomainError("boundary weight a must be >= 0")
        if len(self.atoms) and np.any(self.atoms.locations <= 0):
            raise DomainError("atoms must lie in (0, inf)")

    def leaf_values(self, s, order):
        if np.any(s <= 0):
            raise DomainError("s must be positive")
        y = self.spec.grid.points[:, 0]
        out = self.a * k_density(s[:, None], y[None, :], order)
        if len(self.atoms):
            z = self.atoms.locations[:, 0]
            p = p_density(s[:, None, None], z[None, :, None], y[None, None, :], order)
            out = out + np.einsum("k,skn->sn", self.atoms.weights, p)
        return out


@dataclass(frozen=True, eq=False)
class Sampled(Leaf):
    """States known from ``times[0]`` on; later times are reached with ``T``."""

    spec: SemigroupSpec
    times: tuple
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be positive and increasing")
        st = np.atleast_2d(np.asarray(self.states, dtype=float))
        if st.shape != (t.size, self.spec.grid.size):
            raise ShapeError("one state per sample time")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "states", st)

    @property
    def first_time(self):
        return self.times[0]

    def leaf_values(self, s, order):
        t = np.asarray(self.times)
        if np.any(s < t[0]):
            raise UnsupportedEvaluation(
                f"sampled path starts at s = {t[0]}; earlier sections are not representable")
        idx = np.searchsorted(t, s, side="right") - 1
        v = np.stack([apply_values(self.spec, float(si - t[i]), self.states[i])
                      for si, i in zip(s, idx)])
        if order:
            warnings.warn("sampled path derivative via the finite-difference generator",
                          stacklevel=3)
            for _ in range(order):
                v = generator_values(self.spec, v)
        return v


@dataclass(frozen=True, eq=False)
class Combination(EntrancePath):
    spec: SemigroupSpec
    term_list: tuple = field(default=())

    def terms(self):
        return self.term_list

    def compact(self, tol: float = 1e-12) -> "Combination":
        """Merge terms with the same leaf and order whose offsets agree within ``tol``."""
        merged: list = []
        index: dict = {}
        # rank leaves by first appearance, not id(): summation order must not depend on addresses
        rank: dict = {}
        for _, leaf, _, _ in self.term_list:
            rank.setdefault(id(leaf), len(rank))
        for c, leaf, off, k in sorted(self.term_list, key=lambda t: (rank[id(t[1])], t[3], t[2])):
            key = (id(leaf), k)
            j = index.get(key)
            if j is not None and abs(merged[j][2] - off) <= tol:
                c0, l0, o0, k0 = merged[j]
                merged[j] = (c0 + c, l0, o0, k0)
            else:
                index[key] = len(merged)
                merged.append((c, leaf, off, k))
        return Combination(self.spec, tuple(t for t in merged if t[0] != 0))

    def __len__(self):
        return len(self.term_list)


# ---------------------------------------------------------------- operations

def embed_J(spec: SemigroupSpec, x: GridFunction) -> Embedded:
    return Embedded(spec, x)


def path_eval(path: EntrancePath, s: float) -> GridFunction:
    return path.eval(s)


def shift_apply(t: float, path: EntrancePath) -> EntrancePath:
    """``s -> x(t + s)``."""
    if t < 0:
        raise DomainError("shift must be non-negative")
    if t == 0:
        return path
    return Combination(path.spec, tuple((c, l, o + t, k) for c, l, o, k in path.terms()))


def generator_path(path: EntrancePath) -> EntrancePath:
    """``s -> (d/ds) x(s)``, which equals ``A x(s)`` along an entrance path."""
    return Combination(path.spec, tuple((c, l, o, k + 1) for c, l, o, k in path.terms()))


def from_measure_heat(spec: SemigroupSpec, atoms: SignedMeasureAtoms, l: float = 1.0) -> HeatMeasure:
    """Heat-kernel path of a finite signed measure, after checking local square integrability."""
    if len(atoms) == 0:
        raise ValueError("measure must have at least one atom")
    path = HeatMeasure(spec, atoms)
    cond = heat_conditions(atoms, l)
    if not np.isfinite(cond["time_integral"]):
        raise RejectedMeasure("heat measure is not locally square integrable", **cond)
    if "gaussian_overlap" in cond and not np.isfinite(cond["gaussian_overlap"]):
        raise RejectedMeasure("d = 1 overlap criterion diverges", **cond)
    return path


def heat_conditions(atoms: SignedMeasureAtoms, l: float = 1.0) -> dict:
    """Double atom sums behind local square integrability of a heat path.

    ``time_integral`` is ``int_0^l ds sum |w_i||w_j| g_d(2s, z_i - z_j)``; in
    d = 1 ``gaussian_overlap`` is ``sum |w_i||w_j| exp(-(z_i - z_j)^2 / 4)``.
    """
    z = atoms.locations
    w = np.abs(atoms.weights)
    r = np.sqrt(np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=-1))
    out = {"time_integral": float(np.sum(w[:, None] * w[None, :]
                                         * heat_pair_time_integral(atoms.dim, l, r)))}
    if atoms.dim == 1:
        out["gaussian_overlap"] = float(np.sum(w[:, None] * w[None, :] * np.exp(-r * r / 4)))
    return out


def from_measure_absorbing(spec: SemigroupSpec, a: float, atoms: SignedMeasureAtoms,
                           l: float = 1.0, params: EntranceNormParams | None = None) -> AbsorbingMeasure:
    path = AbsorbingMeasure(spec, a, atoms)
    if len(atoms):
        res = absorbing_condition(spec, atoms, l, params)
        if not res.head.finite or not np.isfinite(res.value):
            raise RejectedMeasure("absorbing measure fails local square integrability",
                                  value=res.value, exponent=res.head.exponent)
    return path


def absorbing_condition(spec, atoms, l=1.0, params=None) -> q.QuadResult:
    """``int_0^l ds int_D (sum |w_k| p_s(z_k, y))^2 gamma(dy)`` on the grid."""
    params = params or default_params(spec)
    total = AbsorbingMeasure(spec, 0.0, atoms.total_variation())
    lo = max(params.s_min, 4 * spec.min_resolved_time)

    def integrand(s):
        v = total.values(s)
        return spec.grid.inner(v, v)

    return q.integrate(integrand, lo, l, params.rho, params.order)


# ------------------------------------------------- section inner products

def _heat_closed_form(x: EntrancePath, y: EntrancePath) -> bool:
    if not x.spec.is_heat:
        return False
    tx, ty = x.terms(), y.terms()
    if not all(isinstance(l, HeatMeasure) for _, l, _, _ in tx + ty):
        return False
    return max(k for *_, k in tx) + max(k for *_, k in ty) <= 2


def cross_inner(x: EntrancePath, sx, y: EntrancePath, sy=None) -> np.ndarray:
    """``<x(sx_i), y(sy_i)>`` elementwise (``sy`` defaults to ``sx``)."""
    sx = np.atleast_1d(np.asarray(sx, dtype=float))
    sy = sx if sy is None else np.atleast_1d(np.asarray(sy, dtype=float))
    if _heat_closed_form(x, y):
        d = x.spec.grid.dim
        out = np.zeros(np.broadcast(sx, sy).shape)
        for c1, l1, o1, k1 in x.terms():
            for c2, l2, o2, k2 in y.terms():
                z1, z2 = l1.atoms.locations, l2.atoms.locations
                r2 = np.sum((z1[:, None, :] - z2[None, :, :]) ** 2, axis=-1)
                ww = l1.atoms.weights[:, None] * l2.atoms.weights[None, :]
                t = (sx + o1 + sy + o2)[:, None, None]
                out += c1 * c2 * np.sum(ww * gauss_dt(d, t, r2[None], k1 + k2), axis=(1, 2))
        return out
    vx = x.values(sx)
    vy = vx if (y is x and sy is sx) else y.values(sy)
    return x.spec.grid.inner(vx, vy)


def spectral_pairing_supported(x: EntrancePath) -> bool:
    """Heat-line paths built only from kernel measures pair spectrally with grid data."""
    return (x.spec.kind == "heat_line"
            and all(isinstance(l, HeatMeasure) for _, l, _, _ in x.terms()))


@lru_cache(maxsize=64)
def _spectrum(grid, span: float, data: bytes):
    """Quadrature nodes in frequency and ``(h/pi) w_j sum_j a_j e^{-i w y_j}``."""
    # one 16-point panel per oscillation period of the widest phase
    w_max = np.pi / grid.h
    panels = int(np.ceil(w_max * span / (2 * np.pi))) + 2
    om, wom = q.panel_rule_uniform(0.0, w_max, panels, 16)
    a = np.frombuffer(data, dtype=float)
    y = grid.axis_nodes(0)
    return om, (grid.h / np.pi) * wom * (np.exp(-1j * np.outer(om, y)) @ a)


def section_pairing(x: EntrancePath, s, a: GridFunction) -> np.ndarray:
    """``<x(s), a>`` for an array of ``s``.

    Heat-line kernel paths are paired with the band-limited interpolant of
    ``a``; the result agrees with the grid quadrature up to aliasing of
    order ``exp(-2 pi^2 s / h^2)`` and stays smooth down to ``s = 0``.
    Other paths use the grid values directly (``s > 0``).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    grid = x.spec.grid
    if a.grid != grid:
        raise ShapeError("test function does not live on the semigroup grid")
    if not spectral_pairing_supported(x):
        return grid.inner(x.values(s), a.values)
    lo, hi, _ = grid.axes[0]
    zs = np.concatenate([l.atoms.locations[:, 0] for _, l, _, _ in x.terms()])
    span = float(np.ceil(max(np.max(zs) - lo, hi - np.min(zs))))
    om, spec_a = _spectrum(grid, span, np.ascontiguousarray(a.values).tobytes())
    out = np.zeros(s.size)
    for c, leaf, off, k in x.terms():
        z, w = leaf.atoms.locations[:, 0], leaf.atoms.weights
        phase = np.real(np.exp(1j * np.outer(z, om)) * spec_a).T @ w  # (n_omega,)
        tau = s + off
        damp = np.exp(-0.5 * np.outer(tau, om * om)) * (-0.5 * om * om) ** k
        out += c * (damp @ phase)
    return out


@dataclass(frozen=True)
class InnerReport:
    value: float
    body: float
    head: q.HeadEstimate
    tail_bound: float
    lower: float
    upper: float


def _lower_cut(params, spec, closed_form: bool) -> float:
    if closed_form:
        # closed-form sections are cheap; push the head cut far down
        return params.s_min * 1e-4
    return max(params.s_min, 4 * spec.min_resolved_time)


def _closure_inner(x, y, alpha=None):
    """``<x(0), y(0)>`` (after ``U_alpha`` if given) when both paths close exactly."""
    cx = x.closure() if x.min_time == 0 else None
    cy = cx if y is x else (y.closure() if y.min_time == 0 else None)
    if cx is None or cy is None:
        return None
    vx, vy = cx.values, cy.values
    if alpha is not None:
        vx = resolvent_values(x.spec, alpha, vx)
        vy = vx if y is x else resolvent_values(x.spec, alpha, vy)
    return float(x.spec.grid.inner(vx, vy))


def _with_origin(s, fn, at_zero):
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, at_zero)
    pos = s > 0
    if np.any(pos):
        out[pos] = fn(s[pos])
    return out


def _integrate(fn, lo, hi, params, smooth):
    """Trapezoid head through ``s = 0`` for continuous integrands, power-law head otherwise."""
    if smooth:
        return q.integrate_smooth(fn, lo, hi, params.rho, params.order)
    return q.integrate(fn, lo, hi, params.rho, params.order)


def entrance_report(x: EntrancePath, y: EntrancePath, params: EntranceNormParams) -> InnerReport:
    """``int_0^inf e^{-2bs} <x(s), y(s)> ds`` with head and tail diagnostics."""
    spec = x.spec
    params.check(spec)
    if y.spec is not spec:
        raise ShapeError("paths belong to different semigroups")
    lo = _lower_cut(params, spec, _heat_closed_form(x, y))
    hi = params.upper(spec)
    lo = max(lo, x.min_time, y.min_time)
    b = params.b

    at_zero = _closure_inner(x, y)

    def integrand(s):
        if at_zero is None:
            return np.exp(-2 * b * s) * cross_inner(x, s, y)
        return _with_origin(s, lambda p: np.exp(-2 * b * p) * cross_inner(x, p, y), at_zero)

    res = _integrate(integrand, lo, hi, params, at_zero is not None)
    nx = np.sqrt(max(cross_inner(x, hi, x)[0], 0.0))
    ny = np.sqrt(max(cross_inner(y, hi, y)[0], 0.0))
    tail = spec.c0**2 * nx * ny * np.exp(-2 * b * hi) / (2 * (b - spec.b0))
    return InnerReport(float(np.real(res.value)), float(res.body), res.head, float(tail), lo, hi)


def entrance_inner(x: EntrancePath, y: EntrancePath, params: EntranceNormParams) -> float:
    return entrance_report(x, y, params).value


def entrance_norm(x: EntrancePath, params: EntranceNormParams) -> float:
    return float(np.sqrt(max(entrance_inner(x, x, params), 0.0)))


def resolvent_sections(x: EntrancePath, s, alpha: float) -> np.ndarray:
    """``U_alpha x(s)`` with time derivatives removed through ``U A = alpha U - I``.

    A term of order ``k`` contributes ``alpha^k U v - sum_{j<k} alpha^(k-1-j) v^(j)``,
    so the resolvent only ever acts on undifferentiated sections.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    base = np.zeros((s.size, x.spec.grid.size))
    corr = np.zeros_like(base)
    for c, leaf, off, k in x.terms():
        tau = s + off
        base += c * alpha**k * leaf.leaf_values(tau, 0)
        for j in range(k):
            corr += c * alpha ** (k - 1 - j) * leaf.leaf_values(tau, j)
    return resolvent_values(x.spec, alpha, base) - corr


# phi(x) = sum_{n>=2} (-1)^n (n - 1) x^(n-2) / n!, highest power first
_PHI_SERIES = np.array([(-1) ** n * (n - 1) / math.factorial(n) for n in range(10, 1, -1)])


def minus_kernel(tau, alpha: float, b: float) -> np.ndarray:
    """``K(tau) = (1/2) int_0^tau e^{-b (tau - u)} u e^{-alpha u} du``.

    With ``U_alpha g(s) = int e^{-alpha u} g(s + u) du`` on kernel paths, the
    weak inner product collapses to ``int_0^inf K(tau) <x(tau/2), y(tau/2)> dtau``.
    """
    tau = np.asarray(tau, dtype=float)
    x = (alpha - b) * tau
    # int_0^tau u e^{-cu} du = tau^2 phi(c tau), phi(x) = (1 - (1 + x) e^{-x}) / x^2
    phi = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs, xl = x[small], x[~small]
    phi[small] = np.polyval(_PHI_SERIES, xs)
    phi[~small] = (-np.expm1(-xl) - xl * np.exp(-xl)) / xl**2
    return 0.5 * np.exp(-b * tau) * tau**2 * phi


def _heat_minus(x, y, alpha, params) -> InnerReport:
    b = params.b
    hi = 2 * params.upper(x.spec) + resolvent_horizon(x.spec, alpha)

    def integrand(t):
        return minus_kernel(t, alpha, b) * cross_inner(x, 0.5 * t, y)

    lo = params.s_min * 1e-6
    res = q.integrate(integrand, lo, hi, params.rho, params.order)
    return InnerReport(float(res.value), float(res.body), res.head, 0.0, lo, hi)


def minus_report(x: EntrancePath, y: EntrancePath, alpha: float,
                 params: EntranceNormParams) -> InnerReport:
    """``int_0^inf e^{-2bs} <U_alpha x(s), U_alpha y(s)> ds``.

    Kernel-measure paths on the heat kinds use the continuum resolvent in
    closed form; everything else applies the grid resolvent to sections.
    """
    spec = x.spec
    params.check(spec)
    if alpha <= spec.b0:
        raise DomainError(f"alpha = {alpha} must exceed b0 = {spec.b0}")
    if y.spec is not spec:
        raise ShapeError("paths belong to different semigroups")
    if _heat_closed_form(x, y):
        return _heat_minus(x, y, alpha, params)
    lo = max(_lower_cut(params, spec, False), x.min_time, y.min_time)
    hi = params.upper(spec)
    b = params.b
    w = spec.grid.quad_weights

    def sections(p, s):
        return resolvent_sections(p, s, alpha)

    def positive(s):
        ux = sections(x, s)
        uy = ux if y is x else sections(y, s)
        return np.exp(-2 * b * s) * np.sum(ux * uy * w, axis=-1)

    at_zero = _closure_inner(x, y, alpha)
    if at_zero is None:
        integrand = positive
    else:
        def integrand(s):
            return _with_origin(s, positive, at_zero)

    res = _integrate(integrand, lo, hi, params, at_zero is not None)
    ux, uy = sections(x, [hi]), sections(y, [hi])
    nx, ny = np.sqrt(np.sum(ux * ux * w)), np.sqrt(np.sum(uy * uy * w))
    tail = spec.c0**2 * nx * ny * np.exp(-2 * b * hi) / (2 * (b - spec.b0))
    return InnerReport(float(res.value), float(res.body), res.head, float(tail), lo, hi)


def minus_inner(x, y, alpha, params) -> float:
    return minus_report(x, y, alpha, params).value


def minus_norm(x, alpha, params) -> float:
    return float(np.sqrt(max(minus_inner(x, x, alpha, params), 0.0)))


def weak_embedding_check(x, alpha, params) -> tuple[float, float]:
    """``(||x||_-, ||U_alpha|| ||x||_~)``; the first never exceeds the second."""
    return minus_norm(x, alpha, params), resolvent_norm(x.spec, alpha) * entrance_norm(x, params)


def embedding_bound_check(spec: SemigroupSpec, x: GridFunction, params) -> tuple[float, float]:
    """``(||J x||_~, c0 (2 (b - b0))^(-1/2) ||x||)``."""
    params.check(spec)
    bound = spec.c0 * x.norm() / np.sqrt(2 * (params.b - spec.b0))
    return entrance_norm(embed_J(spec, x), params), bound


def generator_bound_check(x, alpha, params) -> tuple[float, float]:
    """``(||d/ds x||_-, 2 (alpha^2 ||U||^2 + 1)^(1/2) ||x||_~)``."""
    u = resolvent_norm(x.spec, alpha)
    lhs = minus_norm(generator_path(x), alpha, params)
    return lhs, 2.0 * np.sqrt(alpha**2 * u**2 + 1.0) * entrance_norm(x, params)


# ---------------------------------------------------------------- L2 check

@dataclass(frozen=True)
class L2Check:
    finite: bool | None
    value: float
    head: float
    exponents: tuple


def local_l2_check(x: EntrancePath, l: float, params: EntranceNormParams | None = None,
                   refinements: int = 3) -> L2Check:
    """Estimate ``int_0^l ||x(s)||^2 ds`` and decide whether it is finite.

    The verdict comes from the local power-law exponent ``p`` of the
    integrand near 0, read at ``lo, lo/4, lo/16, ...``: finite when every
    reading is above -0.9, infinite when every reading is at most -0.98.
    """
    params = params or default_params(x.spec)
    closed = _heat_closed_form(x, x)
    lo = min(_lower_cut(params, x.spec, closed), l / 10)

    def integrand(s):
        return cross_inner(x, s, x)

    try:
        res = q.integrate(integrand, max(lo, x.min_time), l, params.rho, params.order)
    except UnsupportedEvaluation:
        return L2Check(None, float("nan"), float("nan"), ())
    if x.min_time > 0:
        return L2Check(None, float(res.body), float("nan"), ())
    cuts = [lo * 4.0**-j for j in range(refinements)] if closed else [lo]
    exps = tuple(q.head_integral(integrand, c, params.rho).exponent for c in cuts)
    if all(p > -0.9 for p in exps):
        finite = True
    elif all(p <= -0.98 for p in exps):
        finite = False
    else:
        finite = None
    value = float(res.value) if res.head.finite else float("inf")
    head = float(res.head.value) if res.head.finite else float("inf")
    return L2Check(finite, value, head, exps)


# ---------------------------------------------------------------- closability

@dataclass(frozen=True)
class ProbeResult:
    verdict: str  # "closable" | "blowup" | "inconclusive"
    x0: GridFunction | None
    times: tuple
    norms2: tuple
    diffs: tuple
    ratios: tuple
    certification: float = float("nan")


def default_probe_times(n: int = 12) -> np.ndarray:
    return 4.0 ** -np.arange(1, n + 1)


def closability_probe(x: EntrancePath, s_probe=None, tol: float = 1e-6,
                      blowup_ratio: float = 1.5, blowup_steps: int = 4) -> ProbeResult:
    """Decide numerically whether ``lim_{s -> 0} x(s)`` exists in H.

    ``ratios`` are quotients of successive squared norms along the probe.
    """
    s = np.asarray(default_probe_times() if s_probe is None else s_probe, dtype=float)
    if s.size < 4 or np.any(np.diff(s) >= 0) or np.any(s <= 0):
        raise ValueError("need at least 4 positive, decreasing probe times")
    spec = x.spec
    if x.min_time > s[-1]:
        return _probe_by_inversion(x, s, tol)
    if _heat_closed_form(x, x):
        n2 = cross_inner(x, s, x)
        cross = cross_inner(x, s[:-1], x, s[1:])
        d2 = n2[1:] + n2[:-1] - 2 * cross
        vals = None
    else:
        vals = x.values(s)
        n2 = spec.grid.inner(vals, vals)
        dv = np.diff(vals, axis=0)
        d2 = spec.grid.inner(dv, dv)
    diffs = np.sqrt(np.maximum(d2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = n2[1:] / n2[:-1]
    common = dict(times=tuple(s), norms2=tuple(n2), diffs=tuple(diffs), ratios=tuple(ratios))
    if ratios.size >= blowup_steps and np.all(ratios[-blowup_steps:] >= blowup_ratio):
        return ProbeResult("blowup", None, **common)
    scale = max(1.0, float(np.sqrt(n2[-1])))
    decreasing = np.all(diffs[-3:][1:] <= diffs[-3:][:-1] * (1 + 1e-9) + 1e-300)
    if vals is not None and diffs[-1] <= tol * scale and decreasing:
        x0 = vals[-1]
        cert = max(float(np.sqrt(spec.grid.inner(vals[j] - apply_values(spec, sj, x0),
                                                  vals[j] - apply_values(spec, sj, x0))))
                   for j, sj in enumerate(s))
        if cert <= 10 * tol * scale:
            return ProbeResult("closable", GridFunction(x0, spec.grid), certification=cert, **common)
    return ProbeResult("inconclusive", None, **common)


def _probe_by_inversion(x, s, tol):
    spec = x.spec
    if spec.kind != "matrix":
        return ProbeResult("inconclusive", None, tuple(s), (), (), ())
    t0 = x.min_time
    x0 = sla.expm(-t0 * spec.matrix) @ x.values([t0])[0]
    later = np.concatenate([[t0], s[s > t0]]) if np.any(s > t0) else np.array([t0, 2 * t0])
    vals = x.values(later)
    cert = max(float(np.linalg.norm(v - sla.expm(t * spec.matrix) @ x0)) for v, t in zip(vals, later))
    verdict = "closable" if cert <= 10 * tol * max(1.0, np.linalg.norm(x0)) else "inconclusive"
    return ProbeResult(verdict, GridFunction(x0, spec.grid) if verdict == "closable" else None,
                       tuple(later), tuple(np.sum(vals * vals, axis=1)), (), (), cert)


# ------------------------------------------------- non-representable element

def shift_defect(eps: float, params: EntranceNormParams, spec: SemigroupSpec) -> float:
    """Quadrature of ``int e^{-2bs} int (g(s, y - eps) - g(s, y))^2 dy ds``."""
    atoms = SignedMeasureAtoms.from_pairs([(eps, 1.0), (0.0, -1.0)])
    path = HeatMeasure(spec, atoms)
    p = EntranceNormParams(params.b, s_min=min(params.s_min, eps * eps * 1e-2),
                           s_max=params.s_max, rho=params.rho, order=params.order)
    return entrance_inner(path, path, p)


@dataclass(frozen=True)
class NonRepresentable:
    path: HeatMeasure
    eps: tuple
    defects: tuple
    tail_bound: float
    overlap: float


def nonrepresentable_example(a_seq, n: int, params: EntranceNormParams,
                             spec: SemigroupSpec, iterations: int = 60,
                             slack: float = 0.9) -> NonRepresentable:
    """Partial sum ``sum_{k<=n} a_k [g(s, . - z_k) - g(s, . - x_k)]`` with
    ``x_k = 1/k`` and ``z_k = x_k + eps_k``.

    Each ``eps_k`` in ``(0, k^-2)`` is bisected so that the weighted shift
    defect times ``a_k^2`` stays below ``slack * 2^-k``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.kind != "heat_line":
        raise ValueError("construction lives on the heat_line")
    a = [float(a_seq(k)) if callable(a_seq) else float(a_seq[k - 1]) for k in range(1, n + 1)]
    eps, defects, pairs = [], [], []
    for k, ak in enumerate(a, start=1):
        target = slack * 2.0**-k
        lo, hi = 0.0, k**-2.0
        if ak == 0:
            e = 0.5 * hi
        else:
            for _ in range(iterations):
                mid = 0.5 * (lo + hi)
                if ak * ak * shift_defect(mid, params, spec) <= target:
                    lo = mid
                else:
                    hi = mid
            e = min(lo, (1 - 1e-9) * hi)  # eps_k must stay inside the open interval
            if e <= 0:
                raise ConstructionError(f"no eps in (0, {k**-2.0}) meets the bound for k = {k}")
        eps.append(e)
        defects.append(ak * ak * shift_defect(e, params, spec) if ak else 0.0)
        if ak:
            pairs += [(1.0 / k + e, ak), (1.0 / k, -ak)]
    atoms = SignedMeasureAtoms.from_pairs(pairs)
    overlap = heat_conditions(atoms)["gaussian_overlap"]
    return NonRepresentable(HeatMeasure(spec, atoms), tuple(eps), tuple(defects),
                            2.0**-n, overlap)


# ---------------------------------------------------------------- export

def export_path_csv(path: EntrancePath, times, fh) -> None:
    """Write ``s, grid_index, value`` rows at full precision."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", "grid_index", "value"])
    vals = path.values(times)
    for s, row in zip(times, vals):
        for j, v in enumerate(row):
            w.writerow([format(float(s), ".17g"), j, format(float(v), ".17g")])


__all__ = [
    "AbsorbingMeasure", "Combination", "ConstructionError", "Embedded",
    "EntranceNormParams", "EntrancePath", "HeatMeasure", "L2Check", "NonRepresentable",
    "ProbeResult", "RejectedMeasure", "Sampled", "SignedMeasureAtoms",
    "UnsupportedEvaluation", "absorbing_condition", "closability_probe", "cross_inner",
    "default_params", "embed_J", "embedding_bound_check", "entrance_inner", "entrance_norm",
    "entrance_report", "export_path_csv", "from_measure_absorbing", "from_measure_heat",
    "generator_bound_check", "generator_path", "heat_conditions", "local_l2_check",
    "minus_inner", "minus_norm", "minus_report", "nonrepresentable_example", "path_eval",
    "resolvent_sections", "section_pairing", "shift_apply", "shift_defect", "spectral_pairing_supported",
    "weak_embedding_check",
]
