"""Geometric-panel time quadrature with power-law head extrapolation.

Integrands over time ``s`` typically behave like ``C s**p`` near 0 (kernel
paths give ``p = -1/2``) and decay exponentially for large ``s``.  Panels
with geometrically growing width resolve both ends; each panel is
integrated with Gauss-Legendre nodes.  The piece ``[0, s_lo]`` is estimated
by fitting the local exponent ``p`` and integrating ``C s**p`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_ORDER = 4


@lru_cache(maxsize=16)
def _gauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def geometric_breaks(lo: float, hi: float, rho: float) -> np.ndarray:
    if not (0 < lo < hi) or rho <= 1:
        raise ValueError(f"need 0 < lo < hi and rho > 1 (got {lo}, {hi}, {rho})")
    n = int(np.ceil(np.log(hi / lo) / np.log(rho) - 1e-12))
    br = lo * rho ** np.arange(n + 1)
    br[-1] = hi
    return br


def panel_rule(lo: float, hi: float, rho: float, order: int = DEFAULT_ORDER):
    """Nodes and weights of the composite rule on ``[lo, hi]``."""
    br = geometric_breaks(lo, hi, rho)
    x, w = _gauss(order)
    width = np.diff(br)
    nodes = (br[:-1, None] + width[:, None] * x).ravel()
    weights = (width[:, None] * w).ravel()
    return nodes, weights


def panel_rule_uniform(lo: float, hi: float, panels: int, order: int = DEFAULT_ORDER):
    """Composite Gauss-Legendre rule on ``panels`` equal pieces of ``[lo, hi]``."""
    br = np.linspace(lo, hi, panels + 1)
    x, w = _gauss(order)
    width = np.diff(br)
    return (br[:-1, None] + width[:, None] * x).ravel(), (width[:, None] * w).ravel()


def power_exponent(g0, g1, ratio: float) -> float:
    """Exponent p of ``|g| ~ s**p`` from values at ``s`` and ``ratio * s``."""
    a0, a1 = abs(g0), abs(g1)
    if not (np.isfinite(a0) and np.isfinite(a1)) or a0 == 0 or a1 == 0:
        return 0.0
    if np.real(g0) * np.real(g1) < 0:
        return 0.0
    return float(np.log(a1 / a0) / np.log(ratio))


@dataclass(frozen=True)
class HeadEstimate:
    value: complex | float
    exponent: float
    finite: bool


def head_integral(fn, s0: float, ratio: float = 1.1) -> HeadEstimate:
    """Estimate ``int_0^s0 fn`` from the local power law at ``s0``."""
    g = fn(np.array([s0, s0 * ratio]))
    p = power_exponent(g[0], g[1], ratio)
    if p <= -1.0 + 1e-9:
        return HeadEstimate(np.inf, p, False)
    return HeadEstimate(g[0] * s0 / (p + 1.0), p, True)


@dataclass(frozen=True)
class QuadResult:
    value: complex | float
    body: complex | float
    head: HeadEstimate
    n_nodes: int


def integrate(fn, lo: float, hi: float, rho: float = 1.1, order: int = DEFAULT_ORDER,
              with_head: bool = True) -> QuadResult:
    """Integrate a vectorized ``fn`` over ``[0, hi]`` (or ``[lo, hi]`` if no head).

    ``fn`` maps a 1-d array of times to a 1-d array of (real or complex) values.
    """
    nodes, weights = panel_rule(lo, hi, rho, order)
    body = np.sum(weights * fn(nodes))
    head = head_integral(fn, lo, rho) if with_head else HeadEstimate(0.0, 0.0, True)
    return QuadResult(body + head.value, body, head, nodes.size)


def integrate_smooth(fn, lo: float, hi: float, rho: float = 1.1,
                     order: int = DEFAULT_ORDER) -> QuadResult:
    """``int_0^hi fn`` for integrands finite at 0; the head is a trapezoid."""
    nodes, weights = panel_rule(lo, hi, rho, order)
    body = np.sum(weights * fn(nodes))
    g = fn(np.array([0.0, lo]))
    head = HeadEstimate(0.5 * lo * (g[0] + g[1]), 0.0, True)
    return QuadResult(body + head.value, body, head, nodes.size)


def integrate_from_zero(fn, t: float, s_min: float, rho: float = 1.1,
                        order: int = DEFAULT_ORDER) -> QuadResult:
    """``int_0^t fn``; the head cut is ``min(s_min, t/1000)``."""
    if t == 0:
        return QuadResult(0.0, 0.0, HeadEstimate(0.0, 0.0, True), 0)
    lo = min(s_min, t * 1e-3)
    return integrate(fn, lo, t, rho, order)
