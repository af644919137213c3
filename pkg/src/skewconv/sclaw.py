"""Centered infinitely divisible laws and skew convolution semigroups.

Exponents are assembled additively from the Gaussian and compensated-jump
parts, so the continuous branch of ``log mu_t`` is obtained without ever
taking a complex logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as q
from .entrance import (
    EntranceNormParams,
    EntrancePath,
    cross_inner,
    default_params,
    entrance_inner,
    section_pairing,
    spectral_pairing_supported,
)
from .grid import GridFunction, ShapeError
from .semigroup import DomainError, SemigroupSpec, adjoint_values, apply_values

CARRIERS = ("H", "entrance")
ORTHO_TOL = 1e-8


class QuadratureDivergence(ArithmeticError):
    """The time integral of an exponent has a non-integrable head."""


@dataclass(frozen=True, eq=False)
class IDLaw:
    """Gaussian directions ``(sigma, e)`` plus a finite compensated jump catalog ``(rate, v)``.

    With ``carrier="H"`` the elements are GridFunctions; with
    ``carrier="entrance"`` they are entrance paths.
    """

    gaussian: tuple = ()
    jumps: tuple = ()
    carrier: str = "H"

    def __post_init__(self):
        if self.carrier not in CARRIERS:
            raise ValueError(f"carrier must be one of {CARRIERS}")
        kind = GridFunction if self.carrier == "H" else EntrancePath
        for sigma, e in self.gaussian:
            if sigma < 0 or not isinstance(e, kind):
                raise ValueError("gaussian entries are (sigma >= 0, element)")
        for rate, v in self.jumps:
            if rate < 0 or not isinstance(v, kind):
                raise ValueError("jump entries are (rate >= 0, element)")
        object.__setattr__(self, "gaussian", tuple(self.gaussian))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if self.carrier == "H" and self.orthonormality_defect() > ORTHO_TOL:
            raise ValueError("Gaussian directions must be orthonormal in H")

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([s for s, _ in self.gaussian], dtype=float)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.jumps], dtype=float)

    @property
    def elements(self) -> list:
        return [e for _, e in self.gaussian] + [v for _, v in self.jumps]

    def orthonormality_defect(self, params: EntranceNormParams | None = None) -> float:
        """Max deviation of the Gaussian Gram matrix from the identity."""
        es = [e for _, e in self.gaussian]
        if not es:
            return 0.0
        if self.carrier == "H":
            gram = np.array([[a.inner(b) for b in es] for a in es])
        else:
            params = params or default_params(es[0].spec)
            gram = np.array([[entrance_inner(a, b, params) for b in es] for a in es])
        return float(np.max(np.abs(gram - np.eye(len(es)))))


def exponent_from_pairings(law: IDLaw, gauss_pairs, jump_pairs):
    """``psi`` given the pairings with the Gaussian and jump elements (last axis)."""
    gp = np.asarray(gauss_pairs, dtype=float)
    jp = np.asarray(jump_pairs, dtype=float)
    out = 0.5 * np.sum(law.sigmas**2 * gp**2, axis=-1) + 0j if law.gaussian else 0j
    if law.jumps:
        # e^{ix} - 1 - ix with real part written as -2 sin^2(x/2) to avoid cancellation
        comp = -2.0 * np.sin(0.5 * jp) ** 2 + 1j * (np.sin(jp) - jp)
        out = out - np.sum(law.rates * comp, axis=-1)
    return out


def _empty_pairs(shape):
    return np.zeros(shape + (0,))


def id_exponent(law: IDLaw, a, params: EntranceNormParams | None = None) -> complex:
    """``psi(a)`` with ``exp(-psi(a))`` the characteristic functional of the law."""
    if law.carrier == "H":
        if not isinstance(a, GridFunction):
            raise ShapeError("H-carried law pairs with a GridFunction")
        pair = lambda e: e.inner(a)  # noqa: E731
    else:
        if not isinstance(a, EntrancePath):
            raise ShapeError("entrance-carried law pairs with an entrance path")
        params = params or default_params(a.spec)
        pair = lambda e: entrance_inner(e, a, params)  # noqa: E731
    gp = np.array([pair(e) for _, e in law.gaussian]) if law.gaussian else _empty_pairs(())
    jp = np.array([pair(v) for _, v in law.jumps]) if law.jumps else _empty_pairs(())
    return complex(exponent_from_pairings(law, gp, jp))


@dataclass(frozen=True, eq=False)
class SCSemigroupSpec:
    """``mode="entrance"``: law on the entrance space, sections paired with ``a``.
    ``mode="differentiable"``: law on H, exponent ``int_0^t psi_0(T_s^* a) ds``.
    """

    mode: str
    law: IDLaw
    spec: SemigroupSpec
    params: EntranceNormParams | None = None

    def __post_init__(self):
        if self.mode not in ("entrance", "differentiable"):
            raise ValueError("mode must be 'entrance' or 'differentiable'")
        want = "entrance" if self.mode == "entrance" else "H"
        if self.law.carrier != want:
            raise ValueError(f"{self.mode} mode needs a law carried by {want}")
        for e in self.law.elements:
            grid = e.spec.grid if isinstance(e, EntrancePath) else e.grid
            if isinstance(e, EntrancePath) and e.spec is not self.spec:
                raise ShapeError("law element belongs to another semigroup")
            if grid != self.spec.grid:
                raise ShapeError("law element does not live on the semigroup grid")
        if self.params is None:
            object.__setattr__(self, "params", default_params(self.spec))
        self.params.check(self.spec)

    @property
    def smooth_at_zero(self) -> bool:
        """Whether ``s -> psi_s(a)`` is evaluated continuously up to ``s = 0``."""
        if self.mode == "differentiable":
            return True
        return all(spectral_pairing_supported(e) for e in self.law.elements)

    def lower_cut(self, t: float) -> float:
        if self.smooth_at_zero:
            return t * 1e-6
        lo = min(self.params.s_min, t * 1e-3)
        if self.mode == "entrance" and self.spec.kind != "matrix":
            lo = min(max(lo, 4 * self.spec.min_resolved_time), 0.5 * t)
        return lo


def section_pairings(sc: SCSemigroupSpec, s, a: GridFunction):
    """Pairings of ``a`` with the time-``s`` sections of every law element.

    Returns ``(gauss, jumps)`` arrays of shape ``(len(s), G)`` and ``(len(s), J)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    spec = sc.spec
    w = spec.grid.quad_weights
    if sc.mode == "entrance":
        def pair(e):
            return section_pairing(e, s, a)
    else:
        adj = np.stack([adjoint_values(spec, float(si), a.values) for si in s])

        def pair(e):
            return adj @ (e.values * w)
    g = np.stack([pair(e) for _, e in sc.law.gaussian], axis=-1) if sc.law.gaussian \
        else _empty_pairs((s.size,))
    j = np.stack([pair(v) for _, v in sc.law.jumps], axis=-1) if sc.law.jumps \
        else _empty_pairs((s.size,))
    return g, j


def section_exponent(sc: SCSemigroupSpec, s, a: GridFunction) -> np.ndarray:
    """``psi_s(a)`` for an array of section times."""
    g, j = section_pairings(sc, s, a)
    return exponent_from_pairings(sc.law, g, j)


def _time_integral(sc, fn, t):
    p = sc.params
    rule = q.integrate_smooth if sc.smooth_at_zero else q.integrate
    return rule(fn, sc.lower_cut(t), t, p.rho, p.order)


def sc_exponent_report(sc: SCSemigroupSpec, t: float, a: GridFunction) -> q.QuadResult:
    if t < 0:
        raise DomainError("t must be non-negative")
    if a.grid != sc.spec.grid:
        raise ShapeError("test function does not live on the semigroup grid")
    if t == 0:
        return q.integrate_from_zero(None, 0.0, 1.0)
    res = _time_integral(sc, lambda s: section_exponent(sc, s, a), t)
    if not res.head.finite:
        raise QuadratureDivergence(
            f"exponent integrand behaves like s^{res.head.exponent:.3f} near 0")
    return res


def sc_exponent(sc: SCSemigroupSpec, t: float, a: GridFunction) -> complex:
    """``Psi_t(a)``, so that ``mu_t^(a) = exp(-Psi_t(a))``."""
    return complex(sc_exponent_report(sc, t, a).value)


def characteristic(sc: SCSemigroupSpec, t: float, a: GridFunction) -> complex:
    return complex(np.exp(-sc_exponent(sc, t, a)))


def verify_sc_identity(sc: SCSemigroupSpec, r: float, t: float, a: GridFunction) -> float:
    """``|Psi_{r+t}(a) - Psi_r(T_t^* a) - Psi_t(a)|``."""
    if r == 0 or t == 0:
        return 0.0
    at = GridFunction(adjoint_values(sc.spec, t, a.values), a.grid)
    return abs(sc_exponent(sc, r + t, a) - sc_exponent(sc, r, at) - sc_exponent(sc, t, a))


def mehler_exponent(sc: SCSemigroupSpec, t: float, x: GridFunction, a: GridFunction) -> complex:
    """Exponent of ``Q_t`` applied to ``y -> exp(i <y, a>)`` at ``x``."""
    tx = apply_values(sc.spec, t, x.values)
    return 1j * float(sc.spec.grid.inner(tx, a.values)) - sc_exponent(sc, t, a)


def mehler_composition_residual(sc, r, t, x, a) -> float:
    """``|log Q_{r+t} e_a(x) - log Q_r(Q_t e_a)(x)|`` on exponential test functions."""
    at = GridFunction(adjoint_values(sc.spec, t, a.values), a.grid)
    lhs = mehler_exponent(sc, r + t, x, a)
    rhs = -sc_exponent(sc, t, a) + mehler_exponent(sc, r, x, at)
    return abs(lhs - rhs)


# ---------------------------------------------------------------- moments

@dataclass(frozen=True)
class MomentReport:
    direct: float
    via_sections: float

    @property
    def residual(self) -> float:
        return abs(self.direct - self.via_sections)


def _section_norms2(sc, s):
    """``||e(s)||^2`` per element, shape ``(len(s), G + J)``."""
    spec = sc.spec
    cols = []
    for e in sc.law.elements:
        if sc.mode == "entrance":
            cols.append(cross_inner(e, s, e))
        else:
            v = np.stack([apply_values(spec, float(si), e.values) for si in s])
            cols.append(spec.grid.inner(v, v))
    return np.stack(cols, axis=-1)


def _basis_moment(sc, s, theta):
    """``sum_n 2 Re psi_s(theta e_n) / theta^2`` over the grid's orthonormal basis."""
    spec = sc.spec
    sw = np.sqrt(spec.grid.quad_weights)
    out = np.zeros(np.size(s))
    for i, si in enumerate(np.atleast_1d(s)):
        rows = []
        for e in sc.law.elements:
            if sc.mode == "entrance":
                v = e.values([si])[0]
            else:
                v = apply_values(spec, float(si), e.values)
            rows.append(v * sw)  # <e(s), delta_n / sqrt(w_n)>
        p = theta * np.array(rows).T  # (n, G + J)
        G = len(sc.law.gaussian)
        psi = exponent_from_pairings(sc.law, p[:, :G], p[:, G:])
        out[i] = np.sum(2.0 * psi.real) / theta**2
    return out


def second_moment(sc: SCSemigroupSpec, t: float, theta: float = 1e-4) -> MomentReport:
    """``int ||x||^2 mu_t(dx)`` from the law parameters and from the section laws.

    The second route differentiates ``psi_s`` twice along each basis vector
    and sums, then integrates over ``s``.
    """
    if t == 0:
        return MomentReport(0.0, 0.0)
    coef = np.concatenate([sc.law.sigmas**2, sc.law.rates])
    p = sc.params
    if sc.mode == "differentiable":
        rule, lo = q.integrate_smooth, t * 1e-6
    else:
        # section norms of entrance laws blow up at 0; use the power-law head
        rule = q.integrate
        lo = min(p.s_min, t * 1e-3)
        if sc.spec.kind != "matrix":
            lo = min(max(lo, 4 * sc.spec.min_resolved_time), 0.5 * t)
    direct = rule(lambda s: _section_norms2(sc, s) @ coef, lo, t, p.rho, p.order)
    via = rule(lambda s: _basis_moment(sc, s, theta), lo, t, p.rho, p.order)
    return MomentReport(float(direct.value), float(via.value))


# ------------------------------------------------- non-differentiability

@dataclass(frozen=True)
class QuotientTrace:
    h: tuple
    sup_quotient: tuple
    fixed_quotient: tuple

    @property
    def ratios(self) -> tuple:
        v = np.asarray(self.sup_quotient)
        return tuple(v[1:] / v[:-1])


def difference_quotient_trace(sc: SCSemigroupSpec, hs, a: GridFunction | None = None,
                              rho: float = 1.5, order: int = 4, depth: float = 1e-8) -> QuotientTrace:
    """``Re Psi_h(a) / h`` for a fixed ``a`` and its sup over unit-norm ``a``.

    The sup uses the Gaussian part only: ``(1/2h) int_0^h sum sigma^2 <e(s), a>^2 ds``
    is a quadratic form whose top eigenvalue is read off the Gram matrix of
    quadrature-weighted sections.
    """
    if sc.mode != "entrance":
        raise ValueError("trace is defined for entrance-driven specs")
    sups, fixed = [], []
    for h in hs:
        nodes, weights = q.panel_rule(h * depth, h, rho, order)
        blocks = []
        for s1, e1 in sc.law.gaussian:
            row = []
            for s2, e2 in sc.law.gaussian:
                m = np.array([cross_inner(e1, np.full(nodes.size, si), e2, nodes) for si in nodes])
                row.append(s1 * s2 * np.sqrt(weights[:, None] * weights[None, :]) * m)
            blocks.append(row)
        gram = np.block(blocks)
        sups.append(0.5 * float(np.max(np.linalg.eigvalsh(gram))) / h)
        fixed.append(float(sc_exponent(sc, h, a).real) / h if a is not None else float("nan"))
    return QuotientTrace(tuple(hs), tuple(sups), tuple(fixed))
