"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPT <id> PASS|FAIL`` line with the measured
quantity and its bound, then asserts.  Run with ``pytest -v`` or directly as
``python3 tests/test_acceptance.py``.
"""

import filecmp
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import linalg as sla

from skewconv import cli
from skewconv import entrance as en
from skewconv import harness as hs
from skewconv import oupath as ou
from skewconv import sclaw as sc
from skewconv import semigroup as sg
from skewconv.config import build, load_config, parse_config
from skewconv.grid import GridFunction, vector

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SEED = 20240611


@pytest.fixture
def report(capsys):
    def emit(ident: str, passed: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPT {ident} {'PASS' if passed else 'FAIL'} {detail}")
        assert passed, detail

    return emit


def experiment(name: str, **verify):
    cfg = load_config(CONFIGS / f"{name}.cfg")
    if verify:
        cfg = replace(cfg, verify=replace(cfg.verify, **verify))
    return build(cfg)


ABSORBING = """
semigroup.kind = absorbing_halfline
semigroup.length = 10
semigroup.count = 200
law.mode = entrance
law.gaussian = 1.0 absorb(1; 2:0.5)
simulation.times = 0.5, 1
simulation.section = 0.05
"""


# ---------------------------------------------------------------- 1

def test_01_kernel_closed_forms(report):
    k_err = max(abs(hs.k_time_l2(y) * 2 * np.pi * y * y - 1) for y in (0.5, 1.0, 2.0))
    g_err = max(abs(hs.g_space_l2(s) * 2 * np.sqrt(np.pi * s) - 1) for s in (0.25, 1.0, 4.0))
    report("1", max(k_err, g_err) <= 1e-6,
           f"k-time rel err {k_err:.2e}, g-space rel err {g_err:.2e} (bound 1e-6)")


# ---------------------------------------------------------------- 2

def triangular_exp(a, c, d, t):
    """Closed form of ``exp(t [[a, c], [0, d]])`` for ``a != d``."""
    ea, ed = np.exp(a * t), np.exp(d * t)
    return np.array([[ea, c * (ea - ed) / (a - d)], [0.0, ed]])


def test_02_chapman_kolmogorov(report):
    rng = np.random.default_rng(SEED)
    a, c, d = -1.0, 0.5, -2.0
    spec = sg.matrix_semigroup([[a, c], [0.0, d]])
    worst_m = 0.0
    for _ in range(100):
        s, t = rng.uniform(0, 2, size=2)
        f = rng.standard_normal(2)
        lhs = sg.apply_values(spec, s, sg.apply_values(spec, t, f))
        worst_m = max(worst_m, float(np.linalg.norm(lhs - triangular_exp(a, c, d, s + t) @ f)))
    grid_kinds = {"heat_line": sg.heat_line(), "absorbing_halfline": sg.absorbing_halfline(),
                  "heat_plane": sg.heat_plane()}
    worst = {k: hs.chapman_kolmogorov(spec_k, rng, 100) for k, spec_k in grid_kinds.items()}
    tol = 10 * sg.grid_tolerance(grid_kinds["heat_line"])
    ok = worst_m <= 1e-6 and all(v <= tol for v in worst.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    report("2", ok, f"matrix {worst_m:.2e} (bound 1e-6); {detail} (bound {tol:.0e}); 100 triples each")


# ---------------------------------------------------------------- 3

INEQUALITIES = ("entrance.embedding_bound", "entrance.shift_bound",
                "entrance.weak_embedding", "entrance.generator_bound")


def test_03_norm_inequalities(report):
    exps = {"matrix": experiment("matrix_jumps", random_cases=100),
            "heat_line": experiment("heat_delta", random_cases=100),
            "absorbing": build(parse_config(ABSORBING))}
    worst, failed = {}, []
    for kind, exp in exps.items():
        rng = np.random.default_rng(SEED)
        checks = [c for c in hs.entrance_suite(exp, rng) if c.name in INEQUALITIES]
        assert len(checks) == 4
        worst[kind] = max(c.value for c in checks)
        failed += [f"{kind}:{c.name}" for c in checks if not c.passed]
    detail = ", ".join(f"{k} max ratio {v:.4f}" for k, v in worst.items())
    report("3", not failed, f"{detail}; bound 1 + quad tol; violations {failed or 0}")


# ---------------------------------------------------------------- 4

def test_04_sc_identity(report):
    out = []
    for name in ("scalar_gaussian", "heat_delta"):
        exp = experiment(name, sc_pairs=5, functionals=20)
        chk = hs.sc_suite(exp, np.random.default_rng(SEED))[0]
        out.append((name, chk))
    ok = all(c.passed for _, c in out)
    report("4", ok, "; ".join(f"{n} residual {c.value:.2e} (bound {c.tolerance:.0e})" for n, c in out)
           + "; 5x5 (r,t) grid x 20 functionals")


# ---------------------------------------------------------------- 5

def test_05_moment_identity(report):
    exp = experiment("scalar_gaussian")
    rep = sc.second_moment(exp.sc, 1.0)
    exact = (1 - np.exp(-2.0)) / 2
    analytic = max(abs(rep.direct - exact), abs(rep.via_sections - exact))
    ens = ou.OUEnsemble(exp.sc, exp.x0, 1.0, 1024, SEED)
    est = ou.mc_second_moment(ens, 1.0, 100_000)
    z = abs(est.value.real - exact) / est.se_re
    report("5", analytic <= 1e-6 and z <= 3,
           f"analytic err {analytic:.2e} (bound 1e-6); MC {est.value.real:.6f} vs {exact:.6f}, "
           f"z = {z:.2f} (bound 3) at N = 1e5")


# ---------------------------------------------------------------- 6

def random_stable_matrix(rng, n):
    a = rng.standard_normal((n, n))
    return a - (np.max(np.linalg.eigvals(a).real) + rng.uniform(0.1, 1.0)) * np.eye(n)


def test_06_closability_dichotomy(report):
    rng = np.random.default_rng(SEED)
    line = sg.heat_line()
    errs = []
    for i in range(50):
        spec = line if i % 2 else sg.matrix_semigroup(random_stable_matrix(rng, int(rng.integers(1, 5))))
        x = hs.random_element(spec, rng)
        res = en.closability_probe(en.embed_J(spec, x))
        errs.append(np.inf if res.x0 is None else (res.x0 - x).norm())
    roundtrip = max(errs)

    delta = en.HeatMeasure(line, en.SignedMeasureAtoms.from_pairs([(0.0, 1.0)]))
    probe = en.closability_probe(delta)
    ratios = np.asarray(probe.ratios)
    blowup_ok = probe.verdict == "blowup" and np.all((ratios >= 1.8) & (ratios <= 2.2))

    verdicts = []
    for i in range(50):
        n = int(rng.integers(1, 5))
        spec = sg.matrix_semigroup(random_stable_matrix(rng, n))
        x0 = rng.standard_normal(n)
        if i % 2:
            t0 = float(rng.uniform(0.1, 1.0))
            path = en.Sampled(spec, (t0,), sg.apply_values(spec, t0, x0)[None])
        else:
            path = en.embed_J(spec, vector(x0))
        verdicts.append(en.closability_probe(path).verdict)
    n_closable = verdicts.count("closable")
    ok = roundtrip <= 1e-6 and blowup_ok and n_closable == 50
    report("6", ok, f"round-trip max err {roundtrip:.2e} (bound 1e-6); delta verdict {probe.verdict}, "
           f"squared-norm ratios per 4x refinement in [{ratios.min():.4f}, {ratios.max():.4f}] "
           f"(band [1.8, 2.2]); matrix paths closable {n_closable}/50")


# ---------------------------------------------------------------- 7

def test_07_non_representable(report):
    line = sg.heat_line()
    params = en.default_params(line)
    ex = en.nonrepresentable_example(lambda k: 1.0, 11, params, line)
    # defects[n] is ||x_{n+1} - x_n||^2, bounded by 2^-(n+1), n = 0..10
    worst = max(d * 2.0 ** (n + 1) for n, d in enumerate(ex.defects))
    grow = en.nonrepresentable_example(lambda k: float(k), 20, params, line)
    ov = np.asarray(hs.prefix_overlaps(grow.path.atoms))
    monotone = bool(np.all(np.diff(ov) > 0))
    # the overlap dominates sum a_k^2 = n(n+1)(2n+1)/6, which is unbounded in n
    dominates = bool(np.all(ov >= [k * (k + 1) * (2 * k + 1) / 6 for k in range(1, 21)]))
    ok = worst <= 1.0 and monotone and dominates
    report("7", ok, f"max ||dx||^2 2^(n+1) = {worst:.3f} (bound 1) for n <= 10; overlap sum "
           f"{ov[0]:.3g} -> {ov[-1]:.4g} over n = 1..20, monotone {monotone}, "
           f">= sum a_k^2 {dominates}")


# ---------------------------------------------------------------- 8

def test_08_ou_distribution(report):
    exp = experiment("scalar_gaussian")
    ens = ou.OUEnsemble(exp.sc, exp.x0, 1.0, 1024, SEED)
    n = 100_000
    var = ou.mc_second_moment(ens, 1.0, n).value.real
    rel = abs(var / 0.4323324 - 1)
    fs = [ou.Functional(t, vector([a])) for t in (0.25, 0.5, 0.75, 1.0) for a in (0.5, 1.0, 2.0)][:10]
    zs = [c.z for c in ou.charfn_checks(ens, fs, n)]
    pairs = [(0.25, 0.25), (0.25, 0.5), (0.25, 0.75), (0.5, 0.25), (0.5, 0.5)]
    mz = [max(ou.markov_increment_check(ens, r, t, vector([1.0]), n).zscore(0j)) for r, t in pairs]
    ok = rel <= 0.01 and max(zs) <= 3 and max(mz) <= 3
    report("8", ok, f"variance {var:.6f} rel err {rel:.2e} (bound 1e-2); charfn max z {max(zs):.2f} "
           f"over 10 (t,a); Markov max z {max(mz):.2f} over 5 (r,t); bands 3 SE, no Bonferroni "
           f"correction (family-wise level about {1 - 0.9973**15:.2f})")


# ---------------------------------------------------------------- 9

def test_09_riemann_convergence(report):
    tau, t = 0.5, 1.0
    ms = (8, 16, 32, 64)

    mspec = sg.matrix_semigroup([[-1.0, 0.5], [0.0, -2.0]])
    params = en.default_params(mspec)
    x0, v = en.embed_J(mspec, vector([1.0, -1.0])), en.embed_J(mspec, vector([0.3, -0.4]))
    exact = ou.single_jump_exact(x0, v, tau, t)
    m_err = [en.entrance_norm(ou.ou_state(x0, ou.jump_driver(v, tau), t, m) - exact, params) for m in ms]

    line = sg.heat_line()
    zero = en.embed_J(line, GridFunction(np.zeros(line.grid.size), line.grid))
    d = en.HeatMeasure(line, en.SignedMeasureAtoms.from_pairs([(0.0, 1.0)]))
    a = line.discretize(lambda p: np.exp(-p[:, 0] ** 2 / 2))
    sigma = 0.1
    want = en.section_pairing(ou.single_jump_exact(zero, d, tau, t), [sigma], a)[0]
    h_err = [abs(en.section_pairing(ou.ou_state(zero, ou.jump_driver(d, tau), t, m), [sigma], a)[0] - want)
             for m in ms]

    r_m = np.array(m_err[1:]) / np.array(m_err[:-1])
    r_h = np.array(h_err[1:]) / np.array(h_err[:-1])
    ok = np.all(r_m <= 0.6) and np.all(r_h <= 0.6)
    report("9", ok, f"err(2m)/err(m) for m = 8,16,32: matrix entrance norm "
           f"{np.array2string(r_m, precision=3)}, heat delta section pairing "
           f"{np.array2string(r_h, precision=3)} (bound 0.6)")


# ---------------------------------------------------------------- 10

def test_10_determinism(report, tmp_path):
    same = []
    for name in ("scalar_gaussian", "heat_delta", "matrix_jumps"):
        cfg = str(CONFIGS / f"{name}.cfg")
        dirs = [tmp_path / f"{name}-{k}" for k in "ab"]
        for dd in dirs:
            assert cli.main(["simulate", cfg, "--out", str(dd)]) == 0
        files = sorted(p.name for p in dirs[0].iterdir())
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
        same.append(bool(files) and not mismatch and not errors)
    report("10", all(same), f"byte-identical simulate outputs for 3 configs: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
