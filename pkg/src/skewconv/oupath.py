"""Levy driver, Ornstein-Uhlenbeck construction on entrance paths, Monte Carlo checks.

The OU state is

    X_t = T_t x + Y_t + int_0^t T_{t-s} A Y_s ds,

with the time integral replaced by the right-endpoint Riemann sum
``(t/n) sum_{k=1}^n T_{t-s_k} A Y_{s_k}``, ``s_k = k t / n``.  Single paths are
built symbolically (``construct_ou``).  Ensembles never build states: a
pairing ``<X_t(sigma), a>`` is a fixed linear functional of the driver
increments, so it is evaluated directly from per-path random draws.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entrance import (
    Combination,
    ConstructionError,
    EntranceNormParams,
    EntrancePath,
    ProbeResult,
    closability_probe,
    embed_J,
    entrance_inner,
    generator_path,
    section_pairing,
    shift_apply,
)
from .grid import GridFunction, ShapeError
from .sclaw import IDLaw, SCSemigroupSpec, exponent_from_pairings, sc_exponent
from .semigroup import DomainError

MAX_TERMS = 200_000
MIN_SAMPLES = 100


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for path ``index``; independent of chunking and workers."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def driver_elements(law: IDLaw, sc: SCSemigroupSpec) -> list[EntrancePath]:
    """Law elements as entrance paths (H-carried elements are embedded)."""
    if law.carrier == "entrance":
        return list(law.elements)
    return [embed_J(sc.spec, e) for e in law.elements]


def draw_increments(law: IDLaw, dt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Coefficient increments, shape ``(len(dt), G + J)``.

    Gaussian direction ``i`` moves by ``sigma_i sqrt(dt) xi``; jump entry ``k``
    by ``N - lambda_k dt`` with ``N ~ Poisson(lambda_k dt)``.
    """
    dt = np.asarray(dt, dtype=float)
    parts = []
    if law.gaussian:
        xi = rng.standard_normal((dt.size, len(law.gaussian)))
        parts.append(law.sigmas * np.sqrt(dt)[:, None] * xi)
    if law.jumps:
        lam = law.rates * dt[:, None]
        parts.append(rng.poisson(lam) - lam)
    if not parts:
        return np.zeros((dt.size, 0))
    return np.concatenate(parts, axis=1)


@dataclass(frozen=True, eq=False)
class DriverPath:
    """Piecewise-constant (cadlag) coefficients of ``Y`` on the law elements.

    ``coef[j]`` holds the coordinates of ``Y_t`` for ``times[j] <= t < times[j+1]``.
    """

    times: np.ndarray
    coef: np.ndarray
    elements: tuple
    seed: tuple | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        c = np.asarray(self.coef, dtype=float)
        if t.ndim != 1 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("driver times must increase from 0")
        if c.shape != (t.size, len(self.elements)):
            raise ShapeError("coefficient table does not match times x elements")
        if np.any(c[0] != 0):
            raise ValueError("driver starts at 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coef", c)
        object.__setattr__(self, "elements", tuple(self.elements))

    def coef_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.searchsorted(self.times, s + 1e-12 * max(1.0, self.times[-1]), side="right") - 1
        return self.coef[idx]

    def state(self, s: float) -> EntrancePath:
        c = self.coef_at(s)[0]
        terms = []
        for ci, e in zip(c, self.elements):
            if ci != 0:
                terms += [(ci * a, l, o, k) for a, l, o, k in e.terms()]
        return Combination(self.elements[0].spec, tuple(terms))


def simulate_driver(sc: SCSemigroupSpec, times, seed: int, index: int = 0) -> DriverPath:
    times = np.asarray(times, dtype=float)
    inc = draw_increments(sc.law, np.diff(times), path_rng(seed, index))
    coef = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
    return DriverPath(times, coef, tuple(driver_elements(sc.law, sc)), (seed, index))


def jump_driver(element: EntrancePath, tau: float, size: float = 1.0) -> DriverPath:
    """Deterministic driver jumping by ``size * element`` at time ``tau``."""
    return DriverPath(np.array([0.0, tau]), np.array([[0.0], [size]]), (element,))


# ------------------------------------------------------------ single paths

@dataclass(frozen=True)
class Projection:
    verdict: str
    element: GridFunction | None
    probe: ProbeResult


@dataclass(frozen=True)
class OUPathRecord:
    times: np.ndarray
    states: tuple
    projections: tuple | None
    scheme: tuple  # (n_sub, "right")


def riemann_nodes(t: float, n_sub: int) -> np.ndarray:
    return t * np.arange(1, n_sub + 1) / n_sub


def ou_state(x0: EntrancePath, driver: DriverPath, t: float, n_sub: int) -> Combination:
    """``X_t`` with the convolution integral replaced by the right-endpoint sum."""
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")
    spec = x0.spec
    terms = list(shift_apply(t, x0).terms()) if t > 0 else list(x0.terms())
    if t > 0:
        ct = driver.coef_at(t)[0]
        nodes = riemann_nodes(t, n_sub)
        cs = driver.coef_at(nodes)
        dt = t / n_sub
        for i, e in enumerate(driver.elements):
            if ct[i] != 0:
                terms += [(ct[i] * a, l, o, k) for a, l, o, k in e.terms()]
            try:
                ae = generator_path(e)
            except (DomainError, NotImplementedError) as exc:
                raise ConstructionError(f"no generator for driver element {i}: {exc}") from exc
            for sk, ck in zip(nodes, cs[:, i]):
                if ck == 0:
                    continue
                terms += [(dt * ck * a, l, o + t - sk, k) for a, l, o, k in ae.terms()]
            if len(terms) > MAX_TERMS:
                raise ConstructionError(f"state exceeds {MAX_TERMS} terms; lower n_sub")
    return Combination(spec, tuple(terms)).compact()


def project_to_H(state: EntrancePath, **probe_kw) -> Projection:
    """Recover the H element behind ``state`` when it is closable."""
    res = closability_probe(state, **probe_kw)
    return Projection(res.verdict, res.x0 if res.verdict == "closable" else None, res)


def construct_ou(x0: EntrancePath, driver: DriverPath, sc: SCSemigroupSpec, n_sub: int,
                 times, project: bool = False) -> OUPathRecord:
    """States ``X_t`` at each requested time, ``n_sub`` Riemann substeps per state."""
    if x0.spec is not sc.spec:
        raise ShapeError("initial state belongs to another semigroup")
    times = np.asarray(times, dtype=float)
    states = tuple(ou_state(x0, driver, float(t), n_sub) for t in times)
    proj = tuple(project_to_H(s) for s in states) if project else None
    return OUPathRecord(times, states, proj, (n_sub, "right"))


def single_jump_exact(x0: EntrancePath, element: EntrancePath, tau: float, t: float,
                      size: float = 1.0) -> EntrancePath:
    """``T_t x0 + size T_{t - tau} v``: the integral term telescopes along the orbit."""
    out = shift_apply(t, x0) if t > 0 else x0
    if t >= tau:
        v = shift_apply(t - tau, element) if t > tau else element
        out = out + size * v
    return out


# ------------------------------------------------------------- ensembles

@dataclass(frozen=True)
class Functional:
    """``x -> <x(section), a>`` evaluated on ``X_t``; ``section = 0`` needs a closure."""

    t: float
    a: GridFunction
    section: float = 0.0


def _pair(path: EntrancePath, u, a: GridFunction) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.size)
    pos = u > 0
    if np.any(pos):
        out[pos] = section_pairing(path, u[pos], a)
    if not np.all(pos):
        c = path.closure()
        if c is None:
            raise DomainError("pairing at section 0 needs a closable path; use section > 0")
        out[~pos] = c.inner(a)
    return out


@dataclass(frozen=True, eq=False)
class OUEnsemble:
    """Paths on the uniform driver grid ``k * horizon / n_steps``.

    Only the seed is stored; path ``i`` is regenerated from ``(seed, i)``.
    """

    sc: SCSemigroupSpec
    x0: EntrancePath
    horizon: float
    n_steps: int
    seed: int
    elements: tuple = field(init=False)

    def __post_init__(self):
        if self.n_steps < 1 or self.horizon <= 0:
            raise ValueError("need horizon > 0 and n_steps >= 1")
        object.__setattr__(self, "elements", tuple(driver_elements(self.sc.law, self.sc)))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def step_index(self, t: float) -> int:
        k = t / self.dt
        if abs(k - round(k)) > 1e-9 or not 0 <= round(k) <= self.n_steps:
            raise ValueError(f"t={t} is not on the driver grid")
        return int(round(k))

    def weights(self, f: Functional) -> tuple[float, np.ndarray]:
        """``(base, V)`` with ``<X_t(section), a> = base + sum_{k,i} V[k, i] dY[k, i]``."""
        m = self.step_index(f.t)
        base = float(_pair(self.x0, [f.t + f.section], f.a)[0])
        V = np.zeros((self.n_steps, len(self.elements)))
        if m == 0:
            return base, V
        s = self.dt * np.arange(1, m + 1)
        for i, e in enumerate(self.elements):
            w = self.dt * _pair(generator_path(e), f.t - s + f.section, f.a)
            w[-1] += _pair(e, [f.section], f.a)[0]
            # coefficient at s_k collects every increment up to k: reverse cumsum
            V[:m, i] = np.cumsum(w[::-1])[::-1]
        return base, V

    def increments(self, index: int) -> np.ndarray:
        dt = np.full(self.n_steps, self.dt)
        return draw_increments(self.sc.law, dt, path_rng(self.seed, index))

    def driver(self, index: int) -> DriverPath:
        """Driver path ``index`` on the ensemble grid (same draws as ``sample``)."""
        inc = self.increments(index)
        coef = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
        times = self.dt * np.arange(self.n_steps + 1)
        return DriverPath(times, coef, self.elements, (self.seed, index))

    def sample(self, functionals, n_paths: int, jobs: int = 1, start: int = 0,
               chunk: int = 2000) -> np.ndarray:
        """Pairings, shape ``(n_paths, len(functionals))``; identical for any ``jobs``."""
        bases, Vs = zip(*(self.weights(f) for f in functionals))
        W = np.stack(Vs)  # (F, n_steps, m)
        base = np.array(bases)
        bounds = [(lo, min(lo + chunk, start + n_paths)) for lo in range(start, start + n_paths, chunk)]
        jobs = max(1, min(jobs, len(bounds), os.cpu_count() or 1))
        if jobs == 1:
            parts = [_chunk(self, W, lo, hi) for lo, hi in bounds]
        else:
            with ProcessPoolExecutor(jobs) as ex:
                parts = list(ex.map(_chunk, [self] * len(bounds), [W] * len(bounds),
                                    *zip(*bounds)))
        return base + np.concatenate(parts, axis=0)


def _chunk(ens: OUEnsemble, W: np.ndarray, lo: int, hi: int) -> np.ndarray:
    inc = np.stack([ens.increments(i) for i in range(lo, hi)])
    return np.einsum("pki,fki->pf", inc, W)


def ou_log_charfn(sc: SCSemigroupSpec, x0: EntrancePath, f: Functional) -> complex:
    """``log E exp(i <X_t(section), a>)`` from the SC exponent."""
    u = f.t + f.section
    mean = float(_pair(x0, [u], f.a)[0])
    return 1j * mean - (sc_exponent(sc, u, f.a) - sc_exponent(sc, f.section, f.a))


# ------------------------------------------------------------- statistics

@dataclass(frozen=True)
class MCEstimate:
    value: complex
    se_re: float
    se_im: float
    n: int

    def zscore(self, target: complex) -> tuple[float, float]:
        d = self.value - target
        zr = abs(d.real) / self.se_re if self.se_re > 0 else (0.0 if d.real == 0 else np.inf)
        zi = abs(d.imag) / self.se_im if self.se_im > 0 else (0.0 if d.imag == 0 else np.inf)
        return float(zr), float(zi)

    def within(self, target: complex, k: float = 3.0) -> bool:
        return max(self.zscore(target)) <= k


def jackknife_mean(samples, blocks: int = 100) -> MCEstimate:
    """Mean with delete-one-block jackknife standard errors (real and imaginary parts)."""
    x = np.asarray(samples)
    n = x.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    groups = np.array_split(x, blocks)
    sums = np.array([g.sum() for g in groups])
    sizes = np.array([g.size for g in groups])
    loo = (sums.sum() - sums) / (n - sizes)
    est = x.mean()
    fac = (blocks - 1) / blocks
    se_re = float(np.sqrt(fac * np.sum((loo.real - loo.real.mean()) ** 2)))
    se_im = float(np.sqrt(fac * np.sum((loo.imag - loo.imag.mean()) ** 2))) if np.iscomplexobj(x) else 0.0
    return MCEstimate(complex(est), se_re, se_im, n)


def empirical_charfn(pairings) -> MCEstimate:
    return jackknife_mean(np.exp(1j * np.asarray(pairings)))


@dataclass(frozen=True)
class CharfnCheck:
    functional: Functional
    estimate: MCEstimate
    target: complex

    @property
    def z(self) -> float:
        return max(self.estimate.zscore(self.target))


def charfn_checks(ens: OUEnsemble, functionals, n_paths: int, jobs: int = 1) -> list[CharfnCheck]:
    phi = ens.sample(functionals, n_paths, jobs=jobs)
    out = []
    for j, f in enumerate(functionals):
        target = complex(np.exp(ou_log_charfn(ens.sc, ens.x0, f)))
        out.append(CharfnCheck(f, empirical_charfn(phi[:, j]), target))
    return out


def markov_increment_check(ens: OUEnsemble, r: float, t: float, a: GridFunction,
                           n_paths: int, section: float = 0.0, jobs: int = 1) -> MCEstimate:
    """Mean of ``exp(i<X_{r+t}, a>) - exp(i<X_r(t), a> - Psi_{t}(a))``; zero under the Markov law.

    Conditionally on ``X_r`` the first term has mean equal to the second, so
    the estimate should be within a few standard errors of 0.
    """
    f_late = Functional(r + t, a, section)
    f_cond = Functional(r, a, t + section)
    phi = ens.sample([f_late, f_cond], n_paths, jobs=jobs)
    expo = sc_exponent(ens.sc, t + section, a) - sc_exponent(ens.sc, section, a)
    resid = np.exp(1j * phi[:, 0]) - np.exp(1j * phi[:, 1] - expo)
    return jackknife_mean(resid)


def basis_functionals(sc: SCSemigroupSpec, t: float, section: float = 0.0) -> list[Functional]:
    """Pairings with the orthonormal grid basis ``delta_n / sqrt(w_n)``."""
    grid = sc.spec.grid
    w = grid.quad_weights
    return [Functional(t, GridFunction(np.eye(grid.size)[n] / np.sqrt(w[n]), grid), section)
            for n in range(grid.size)]


def mc_second_moment(ens: OUEnsemble, t: float, n_paths: int, section: float = 0.0,
                     jobs: int = 1) -> MCEstimate:
    """Sample mean of ``||X_t(section) - T_t x(section)||^2``."""
    fs = basis_functionals(ens.sc, t, section)
    phi = ens.sample(fs, n_paths, jobs=jobs)
    base = np.array([_pair(ens.x0, [t + section], f.a)[0] for f in fs])
    return jackknife_mean(np.sum((phi - base) ** 2, axis=1))


# ------------------------------------------------------------- driver law

def driver_coefficients(ens: OUEnsemble, t: float, n_paths: int) -> np.ndarray:
    """Coordinates of ``Y_t`` on the law elements, shape ``(n_paths, G + J)``."""
    m = ens.step_index(t)
    return np.stack([ens.increments(i)[:m].sum(axis=0) for i in range(n_paths)])


def driver_charfn_check(ens: OUEnsemble, coef: np.ndarray, t: float, a: GridFunction,
                        section: float) -> CharfnCheck:
    """Empirical ``E exp(i <Y_t(section), a>)`` against ``exp(-t psi(a))``."""
    p = np.array([_pair(e, [section], a)[0] for e in ens.elements])
    G = len(ens.sc.law.gaussian)
    psi = exponent_from_pairings(ens.sc.law, p[:G], p[G:])
    target = complex(np.exp(-t * psi))
    return CharfnCheck(Functional(t, a, section), empirical_charfn(coef @ p), target)


def driver_second_moment(ens: OUEnsemble, coef: np.ndarray, t: float,
                         params: EntranceNormParams) -> tuple[MCEstimate, float]:
    """Sample mean of ``||Y_t||_~^2`` and its closed form ``t sum c_i ||e_i||_~^2``."""
    els = ens.elements
    gram = np.array([[entrance_inner(x, y, params) for y in els] for x in els])
    law = ens.sc.law
    weights = np.concatenate([law.sigmas**2, law.rates])
    exact = float(t * np.sum(weights * np.diag(gram)))
    return jackknife_mean(np.einsum("pi,ij,pj->p", coef, gram, coef)), exact
