"""Verification suites and the ensemble simulation driver behind the CLI."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate as spi

from . import oupath as ou
from . import quadrature as q
from .config import Experiment
from .entrance import (
    AbsorbingMeasure,
    EntrancePath,
    HeatMeasure,
    SignedMeasureAtoms,
    closability_probe,
    embed_J,
    embedding_bound_check,
    entrance_norm,
    generator_bound_check,
    heat_conditions,
    nonrepresentable_example,
    shift_apply,
    weak_embedding_check,
)
from .grid import GridFunction
from .sclaw import (
    mehler_composition_residual,
    second_moment,
    verify_sc_identity,
)
from .semigroup import (
    SemigroupSpec,
    apply_values,
    grid_tolerance,
    k_density,
    kernel_g,
    operator_norm,
)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}\t{self.value:.17g}\t{self.tolerance:.17g}\t{status}"


def at_most(name, value, tol) -> Check:
    value = float(value)
    return Check(name, value, float(tol), bool(np.isfinite(value) and value <= tol))


# ------------------------------------------------------ random test inputs

def random_element(spec: SemigroupSpec, rng: np.random.Generator) -> GridFunction:
    """Unit-norm H element kept away from the truncated boundary."""
    grid = spec.grid
    if spec.kind == "matrix":
        v = rng.standard_normal(grid.size)
        f = GridFunction(v, grid)
    else:
        d = grid.dim
        if spec.kind == "absorbing_halfline":
            c = rng.uniform(2.0, 4.0, size=1)
        else:
            c = rng.uniform(-1.0, 1.0, size=d)
        w = rng.uniform(0.5, 1.0)
        f = grid.discretize(lambda p: np.exp(-np.sum((p - c) ** 2, axis=1) / (2 * w * w)))
    return f * (1.0 / f.norm())


def random_path(spec: SemigroupSpec, rng: np.random.Generator) -> EntrancePath:
    """Embedded element, or a kernel-measure path where the kind supports one."""
    if spec.kind == "matrix" or rng.uniform() < 0.3:
        return embed_J(spec, random_element(spec, rng))
    m = int(rng.integers(1, 4))
    w = rng.standard_normal(m)
    if spec.kind == "absorbing_halfline":
        z = rng.uniform(0.5, 4.0, size=m)
        return AbsorbingMeasure(spec, float(abs(rng.standard_normal())),
                                SignedMeasureAtoms.from_pairs(list(zip(z, w))))
    d = spec.grid.dim
    z = rng.uniform(-2.0, 2.0, size=(m, d))
    return HeatMeasure(spec, SignedMeasureAtoms(z, w))


def default_test_functions(spec: SemigroupSpec) -> tuple:
    grid = spec.grid
    if spec.kind == "matrix":
        e = np.eye(grid.size)[0]
        return tuple(GridFunction(c * e, grid) for c in (0.5, 1.0, 2.0))
    c0 = 3.0 if spec.kind == "absorbing_halfline" else 0.0
    return tuple(grid.discretize(lambda p, c=c: h * np.exp(-np.sum((p - c) ** 2, axis=1) / 2))
                 for c, h in ((c0, 1.0), (c0 + 0.5, 0.5)))


def test_functions(exp: Experiment) -> tuple:
    return exp.test_functions or default_test_functions(exp.spec)


# ------------------------------------------------------------- kernel suite

def k_time_l2(y: float) -> float:
    """``int_0^inf k_s(y)^2 ds`` by panel quadrature."""
    hi = 200.0 * y * y
    res = q.integrate(lambda s: k_density(s, y) ** 2, 1e-6 * y * y, hi, rho=1.05, order=8)
    # beyond hi the integrand is y^2 / (2 pi s^3) to relative O(y^2 / s)
    return float(res.value) + y * y / (4 * np.pi * hi * hi)


def g_space_l2(s: float) -> float:
    """``int g_1(s, x)^2 dx`` by adaptive quadrature."""
    val, _ = spi.quad(lambda x: kernel_g(1, s, x) ** 2, -np.inf, np.inf, epsabs=0, epsrel=1e-13)
    return float(val)


def kernel_suite() -> list[Check]:
    out = []
    err = max(abs(k_time_l2(y) * 2 * np.pi * y * y - 1.0) for y in (0.5, 1.0, 2.0))
    out.append(at_most("kernels.k_time_l2", err, 1e-6))
    err = max(abs(g_space_l2(s) * 2 * np.sqrt(np.pi * s) - 1.0) for s in (0.25, 1.0, 4.0))
    out.append(at_most("kernels.g_space_l2", err, 1e-6))
    return out


# ---------------------------------------------------------- semigroup suite

def chapman_kolmogorov(spec: SemigroupSpec, rng, cases: int) -> float:
    worst = 0.0
    for _ in range(cases):
        s, t = rng.uniform(0.0, 0.5, size=2)
        f = random_element(spec, rng).values
        lhs = apply_values(spec, s, apply_values(spec, t, f))
        rhs = apply_values(spec, s + t, f)
        worst = max(worst, float(np.sqrt(spec.grid.inner(lhs - rhs, lhs - rhs))))
    return worst


def semigroup_suite(exp: Experiment, rng) -> list[Check]:
    spec = exp.spec
    tol = 1e-6 if spec.kind == "matrix" else 10 * grid_tolerance(spec)
    cases = exp.config.verify.random_cases
    return [at_most("semigroup.chapman_kolmogorov", chapman_kolmogorov(spec, rng, cases), tol)]


# ----------------------------------------------------------- entrance suite

def expected_verdict(path: EntrancePath) -> str:
    return "closable" if path.closure() is not None else "blowup"


def entrance_suite(exp: Experiment, rng) -> list[Check]:
    spec, params, alpha = exp.spec, exp.params, exp.alpha
    n = exp.config.verify.random_cases
    slack = 1.0 + exp.config.entrance.tolerance
    out = []

    ratios = []
    for _ in range(n):
        lhs, rhs = embedding_bound_check(spec, random_element(spec, rng), params)
        ratios.append(lhs / rhs)
    out.append(at_most("entrance.embedding_bound", max(ratios), slack))

    ratios = []
    for _ in range(n):
        x = random_path(spec, rng)
        t = float(rng.uniform(0.05, 1.0))
        nx = entrance_norm(x, params)
        ratios.append(entrance_norm(shift_apply(t, x), params) / (operator_norm(spec, t) * nx))
    out.append(at_most("entrance.shift_bound", max(ratios), slack))

    ratios_w, ratios_g = [], []
    for _ in range(n):
        x = random_path(spec, rng)
        lhs, rhs = weak_embedding_check(x, alpha, params)
        ratios_w.append(lhs / rhs)
        lhs, rhs = generator_bound_check(x, alpha, params)
        ratios_g.append(lhs / rhs)
    out.append(at_most("entrance.weak_embedding", max(ratios_w), slack))
    out.append(at_most("entrance.generator_bound", max(ratios_g), slack))

    errs = []
    for _ in range(n):
        x = random_element(spec, rng)
        res = closability_probe(embed_J(spec, x))
        errs.append(np.inf if res.x0 is None else (res.x0 - x).norm())
    out.append(at_most("entrance.embed_roundtrip", max(errs), 1e-6))

    named = [(f"gaussian[{i}]", e) for i, (_, e) in enumerate(exp.sc.law.gaussian)]
    named += [(f"jumps[{i}]", v) for i, (_, v) in enumerate(exp.sc.law.jumps)]
    named.append(("x0", exp.x0))
    for name, el in named:
        path = el if isinstance(el, EntrancePath) else embed_J(spec, el)
        if not np.any(path.values([1.0])):
            continue
        res = closability_probe(path)
        ratio = float(res.ratios[-1]) if len(res.ratios) else 0.0
        ok = res.verdict == expected_verdict(path)
        out.append(Check(f"entrance.closability.{name}.{res.verdict}", ratio, 1.5, ok))
    return out


# ------------------------------------------------------ representation suite

def prefix_overlaps(atoms: SignedMeasureAtoms) -> list[float]:
    """Overlap condition of the atom measure built from the first ``k`` pairs."""
    z, w = atoms.locations, atoms.weights
    return [heat_conditions(SignedMeasureAtoms(z[: 2 * k], w[: 2 * k]))["gaussian_overlap"]
            for k in range(1, z.shape[0] // 2 + 1)]


def representation_suite(exp: Experiment) -> list[Check]:
    spec = exp.spec
    out = []
    for i, (_, e) in enumerate(exp.sc.law.gaussian + exp.sc.law.jumps):
        if isinstance(e, HeatMeasure):
            c = heat_conditions(e.atoms)["time_integral"]
            out.append(at_most(f"representation.heat_condition[{i}]", c, np.finfo(float).max))
    if spec.kind != "heat_line":
        return out
    ex = nonrepresentable_example(lambda k: 1.0, 11, exp.params, spec)
    worst = max(d * 2.0**k for k, d in enumerate(ex.defects, start=1))
    out.append(at_most("representation.partial_sum_increments", worst, 1.0))
    ex = nonrepresentable_example(lambda k: float(k), 20, exp.params, spec)
    ov = prefix_overlaps(ex.path.atoms)
    growth = bool(np.all(np.diff(ov) > 0))
    out.append(Check("representation.overlap_growth", ov[-1] / ov[0], 1.0, growth))
    return out


# ---------------------------------------------------------------- SC suite

def sc_tolerance(exp: Experiment) -> float:
    """Identity tolerance: tight when the exponent integrand is smooth at 0."""
    if exp.spec.kind == "matrix" and exp.sc.mode == "differentiable":
        return 1e-8
    return 10 * (1e-9 if exp.sc.smooth_at_zero else exp.config.entrance.tolerance)


def random_test_function(spec, rng) -> GridFunction:
    f = random_element(spec, rng)
    return f * float(rng.uniform(0.3, 2.0))


def sc_suite(exp: Experiment, rng) -> list[Check]:
    v = exp.config.verify
    grid_rt = np.linspace(0.2, 1.0, v.sc_pairs)
    fs = [random_test_function(exp.spec, rng) for _ in range(v.functionals)]
    worst = max(verify_sc_identity(exp.sc, r, t, a) for a in fs for r in grid_rt for t in grid_rt)
    out = [at_most("sc.identity", worst, sc_tolerance(exp))]
    x = random_element(exp.spec, rng)
    worst = max(mehler_composition_residual(exp.sc, r, t, x, a)
                for a in fs[:3] for r in grid_rt[:2] for t in grid_rt[:2])
    out.append(at_most("sc.mehler_composition", worst, sc_tolerance(exp)))
    return out


# ------------------------------------------------------------ moment suite

def moment_suite(exp: Experiment, ens: ou.OUEnsemble, jobs: int) -> list[Check]:
    sim = exp.config.simulation
    out = []
    for t in sim.times:
        rep = second_moment(exp.sc, t)
        out.append(at_most(f"moment.identity[t={t:g}]",
                           rep.residual / max(1.0, abs(rep.direct)), 1e-6))
    t, sig = sim.times[-1], sim.section
    target = second_moment(exp.sc, t + sig).direct - (second_moment(exp.sc, sig).direct if sig else 0.0)
    est = ou.mc_second_moment(ens, t, exp.config.verify.mc_paths, section=sig, jobs=jobs)
    out.append(at_most("moment.monte_carlo_z", abs(est.value.real - target) / est.se_re, 3.0))
    if exp.spec.kind == "matrix":
        # classical OU variance: the 1% band is resolvable at desk-scale N
        out.append(at_most("moment.monte_carlo_rel", abs(est.value.real / target - 1.0), 0.01))
    return out


# ------------------------------------------------------- driver / OU suites

def driver_suite(exp: Experiment, ens: ou.OUEnsemble) -> list[Check]:
    sim, n = exp.config.simulation, exp.config.verify.mc_paths
    t = sim.times[-1]
    coef = ou.driver_coefficients(ens, t, n)
    out = []
    for j, a in enumerate(test_functions(exp)):
        c = ou.driver_charfn_check(ens, coef, t, a, sim.section)
        out.append(at_most(f"driver.charfn[{j}]", c.z, 3.0))
    est, exact = ou.driver_second_moment(ens, coef, t, exp.params)
    out.append(at_most("driver.second_moment_z", abs(est.value.real - exact) / est.se_re, 3.0))
    return out


def ou_functionals(exp: Experiment) -> list[ou.Functional]:
    sim = exp.config.simulation
    return [ou.Functional(float(t), a, sim.section) for t in sim.times for a in test_functions(exp)]


def markov_pairs(times) -> list[tuple[float, float]]:
    pairs = [(r, t2 - r) for i, r in enumerate(times) for t2 in times[i + 1:]]
    if not pairs:
        pairs = [(times[0] / 2, times[0] / 2)]
    return pairs[:5]


def ou_suite(exp: Experiment, ens: ou.OUEnsemble, jobs: int) -> list[Check]:
    n = exp.config.verify.mc_paths
    fs = ou_functionals(exp)[:10]
    out = [at_most(f"ou.charfn[t={c.functional.t:g},a={j % len(test_functions(exp))}]", c.z, 3.0)
           for j, c in enumerate(ou.charfn_checks(ens, fs, n, jobs=jobs))]
    a = test_functions(exp)[0]
    for r, t in markov_pairs(exp.config.simulation.times):
        est = ou.markov_increment_check(ens, r, t, a, n, section=exp.config.simulation.section,
                                        jobs=jobs)
        out.append(at_most(f"ou.markov[r={r:g},t={t:g}]", max(est.zscore(0j)), 3.0))
    return out


def make_ensemble(exp: Experiment) -> ou.OUEnsemble:
    sim = exp.config.simulation
    return ou.OUEnsemble(exp.sc, exp.x0, float(sim.times[-1]), sim.n_steps, sim.seed)


def _guarded(name, fn) -> list[Check]:
    try:
        return fn()
    except Exception as exc:  # noqa: BLE001 - a failing suite must not stop the rest
        return [Check(f"{name}.error[{type(exc).__name__}: {exc}]", float("nan"), 0.0, False)]


def run_verify(exp: Experiment, jobs: int = 1) -> list[Check]:
    """All suites in order; a failing suite is reported and the rest still run."""
    rng = np.random.default_rng(exp.config.simulation.seed)
    ens = make_ensemble(exp)
    checks: list[Check] = []
    checks += _guarded("kernels", kernel_suite)
    checks += _guarded("semigroup", lambda: semigroup_suite(exp, rng))
    checks += _guarded("entrance", lambda: entrance_suite(exp, rng))
    checks += _guarded("representation", lambda: representation_suite(exp))
    checks += _guarded("sc", lambda: sc_suite(exp, rng))
    checks += _guarded("moment", lambda: moment_suite(exp, ens, jobs))
    checks += _guarded("driver", lambda: driver_suite(exp, ens))
    checks += _guarded("ou", lambda: ou_suite(exp, ens, jobs))
    return checks


def format_report(checks) -> str:
    return "".join(c.line() + "\n" for c in checks)


# ---------------------------------------------------------------- simulate

def _g(x) -> str:
    return format(float(x), ".17g")


def _estimate(samples) -> ou.MCEstimate:
    samples = np.asarray(samples)
    if samples.size >= ou.MIN_SAMPLES:
        return ou.jackknife_mean(samples)
    return ou.MCEstimate(complex(samples.mean()), float("nan"), float("nan"), samples.size)


def run_simulate(exp: Experiment, out_dir, jobs: int = 1) -> list[Path]:
    """Write ``paths.csv``, ``pairings.csv`` and ``summary.csv`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    sim = exp.config.simulation
    ens = make_ensemble(exp)
    tests = test_functions(exp)
    fs = ou_functionals(exp)
    phi = ens.sample(fs, sim.n_paths, jobs=jobs)
    written = []

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_id", "t", "grid_index", "value"])
    for pid in range(min(sim.write_paths, sim.n_paths)):
        driver = ens.driver(pid)
        for t in sim.times:
            state = ou.ou_state(exp.x0, driver, float(t), max(1, ens.step_index(t)))
            proj = ou.project_to_H(state)
            if proj.element is None:
                w.writerow([pid, _g(t), "", "nonclosable"])
                continue
            for j, v in enumerate(proj.element.values):
                w.writerow([pid, _g(t), j, _g(v)])
    written.append(_write(out / "paths.csv", buf.getvalue()))

    if exp.config.outputs.pairings:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path_id", "t", "test_index", "section", "value"])
        for pid in range(sim.n_paths):
            for j, f in enumerate(fs):
                w.writerow([pid, _g(f.t), j % len(tests), _g(f.section), _g(phi[pid, j])])
        written.append(_write(out / "pairings.csv", buf.getvalue()))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "test_index", "section", "emp_re", "emp_im", "se_re", "se_im",
                "target_re", "target_im", "z", "status"])
    for j, f in enumerate(fs):
        est = _estimate(np.exp(1j * phi[:, j]))
        target = complex(np.exp(ou.ou_log_charfn(exp.sc, exp.x0, f)))
        if np.isnan(est.se_re):
            z, status = float("nan"), "n/a"
        else:
            z = max(est.zscore(target))
            status = "PASS" if z <= 3.0 else "FAIL"
        w.writerow([_g(f.t), j % len(tests), _g(f.section), _g(est.value.real), _g(est.value.imag),
                    _g(est.se_re), _g(est.se_im), _g(target.real), _g(target.imag), _g(z), status])
    written.append(_write(out / "summary.csv", buf.getvalue()))
    return written


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
