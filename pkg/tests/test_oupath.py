import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewconv import entrance as en
from skewconv import oupath as ou
from skewconv import sclaw as sc
from skewconv import semigroup as sg
from skewconv.grid import vector


@pytest.fixture(scope="module")
def scalar_ou():
    spec = sg.matrix_semigroup([[-1.0]])
    return sc.SCSemigroupSpec("differentiable", sc.IDLaw(gaussian=((1.0, vector([1.0])),)), spec)


@pytest.fixture(scope="module")
def jump_ou():
    spec = sg.matrix_semigroup([[-1.0, 0.5], [0.0, -2.0]])
    law = sc.IDLaw(gaussian=((0.7, vector([1.0, 0.0])),), jumps=((2.0, vector([0.3, -0.4])),))
    return sc.SCSemigroupSpec("differentiable", law, spec)


def embedded(spec, v):
    return en.embed_J(spec, vector(v))


# ------------------------------------------------------------------- rng

def test_path_streams_are_reproducible_and_distinct():
    a = ou.path_rng(5, 3).standard_normal(4)
    np.testing.assert_array_equal(a, ou.path_rng(5, 3).standard_normal(4))
    assert not np.array_equal(a, ou.path_rng(5, 4).standard_normal(4))
    assert not np.array_equal(a, ou.path_rng(6, 3).standard_normal(4))


def test_compensated_poisson_increments_have_zero_mean():
    law = sc.IDLaw(jumps=((3.0, vector([1.0])),))
    inc = ou.draw_increments(law, np.full(200_000, 0.01), ou.path_rng(1, 0))[:, 0]
    assert abs(inc.mean()) < 3 * np.sqrt(0.03 / inc.size)
    assert inc.var() == pytest.approx(0.03, rel=0.02)


def test_gaussian_increments_scale_with_root_dt():
    law = sc.IDLaw(gaussian=((2.0, vector([1.0])),))
    inc = ou.draw_increments(law, np.full(100_000, 0.25), ou.path_rng(2, 0))[:, 0]
    assert inc.std() == pytest.approx(1.0, rel=0.01)


# ---------------------------------------------------------------- driver

def test_driver_is_cadlag(scalar_ou):
    d = ou.jump_driver(embedded(scalar_ou.spec, [1.0]), 0.5)
    np.testing.assert_array_equal(d.coef_at([0.0, 0.49, 0.5, 2.0])[:, 0], [0, 0, 1, 1])


@pytest.mark.parametrize("times,coef", [([0.1, 1.0], [[0.0], [1.0]]),
                                        ([0.0, 1.0], [[1.0], [1.0]]),
                                        ([0.0, 0.0], [[0.0], [1.0]])])
def test_driver_validation(scalar_ou, times, coef):
    with pytest.raises(ValueError):
        ou.DriverPath(np.array(times), np.array(coef), (embedded(scalar_ou.spec, [1.0]),))


# ------------------------------------------------------------- scheme

def test_riemann_nodes_are_right_endpoints():
    np.testing.assert_allclose(ou.riemann_nodes(1.0, 4), [0.25, 0.5, 0.75, 1.0])


def single_jump_error(spec, n_sub, tau=0.5, t=1.0):
    x0 = embedded(spec, [0.5])
    v = embedded(spec, [1.0])
    approx = ou.ou_state(x0, ou.jump_driver(v, tau), t, n_sub)
    exact = ou.single_jump_exact(x0, v, tau, t)
    return abs(approx.closure().values[0] - exact.closure().values[0])


def test_single_jump_scheme_converges_at_first_order(scalar_ou):
    errs = [single_jump_error(scalar_ou.spec, m) for m in (8, 16, 32, 64)]
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    assert np.all(ratios <= 0.6)
    assert np.all(ratios >= 0.4)


def test_state_before_jump_is_free_evolution(scalar_ou):
    x0 = embedded(scalar_ou.spec, [2.0])
    d = ou.jump_driver(embedded(scalar_ou.spec, [1.0]), 0.5)
    st_ = ou.ou_state(x0, d, 0.25, 8)
    assert st_.closure().values[0] == pytest.approx(2 * np.exp(-0.25))


def test_construct_ou_projects_matrix_states(jump_ou):
    x0 = embedded(jump_ou.spec, [1.0, -1.0])
    drv = ou.simulate_driver(jump_ou, np.linspace(0, 1, 33), seed=3)
    rec = ou.construct_ou(x0, drv, jump_ou, 32, [0.5, 1.0], project=True)
    assert rec.scheme == (32, "right")
    for state, proj in zip(rec.states, rec.projections):
        assert proj.verdict == "closable"
        np.testing.assert_allclose(proj.element.values, state.closure().values, atol=1e-6)


def test_nonclosable_section_zero_pairing_is_refused():
    spec = sg.heat_line(8.0, 161)
    d = en.HeatMeasure(spec, en.SignedMeasureAtoms.from_pairs([(0.0, 1.0)]))
    law = sc.SCSemigroupSpec("entrance", sc.IDLaw(gaussian=((1.0, d),), carrier="entrance"), spec)
    x0 = en.embed_J(spec, spec.discretize(lambda p: np.zeros(len(p))))
    ens = ou.OUEnsemble(law, x0, 1.0, 8, seed=0)
    a = spec.discretize(lambda p: np.exp(-p[:, 0] ** 2))
    with pytest.raises(sg.DomainError):
        ens.weights(ou.Functional(1.0, a, 0.0))
    base, V = ens.weights(ou.Functional(1.0, a, 0.1))
    assert np.all(np.isfinite(V))


# ------------------------------------------------------------ ensembles

def test_ensemble_pairing_matches_symbolic_state(jump_ou):
    x0 = embedded(jump_ou.spec, [1.0, -1.0])
    ens = ou.OUEnsemble(jump_ou, x0, 1.0, 16, seed=9)
    a = vector([0.3, 1.1])
    fast = ens.sample([ou.Functional(0.75, a)], 3)[:, 0]
    for i in range(3):
        state = ou.ou_state(x0, ens.driver(i), 0.75, 12)
        assert fast[i] == pytest.approx(state.closure().inner(a), rel=1e-10, abs=1e-12)


def test_sampling_ignores_chunking_and_workers(jump_ou):
    ens = ou.OUEnsemble(jump_ou, embedded(jump_ou.spec, [1.0, 0.0]), 1.0, 32, seed=4)
    fs = [ou.Functional(1.0, vector([1.0, 0.0])), ou.Functional(0.5, vector([0.0, 1.0]))]
    ref = ens.sample(fs, 500, chunk=500)
    np.testing.assert_array_equal(ref, ens.sample(fs, 500, chunk=37))
    np.testing.assert_array_equal(ref, ens.sample(fs, 500, jobs=2, chunk=100))
    np.testing.assert_array_equal(ref[200:], ens.sample(fs, 300, start=200))


def test_off_grid_time_rejected(scalar_ou):
    ens = ou.OUEnsemble(scalar_ou, embedded(scalar_ou.spec, [0.0]), 1.0, 4, seed=0)
    with pytest.raises(ValueError):
        ens.step_index(0.3)


@pytest.mark.parametrize("t,a", [(0.5, 1.0), (1.0, 2.0)])
def test_scalar_log_charfn(scalar_ou, t, a):
    x0 = embedded(scalar_ou.spec, [0.5])
    got = ou.ou_log_charfn(scalar_ou, x0, ou.Functional(t, vector([a])))
    want = 1j * a * 0.5 * np.exp(-t) - a * a * (1 - np.exp(-2 * t)) / 4
    assert got == pytest.approx(want, rel=1e-12)


# ------------------------------------------------------------ statistics

def test_jackknife_matches_classical_standard_error():
    x = np.random.default_rng(0).standard_normal(20_000)
    est = ou.jackknife_mean(x)
    assert est.value == pytest.approx(x.mean())
    assert est.se_re == pytest.approx(x.std() / np.sqrt(x.size), rel=0.2)
    assert est.se_im == 0.0


def test_jackknife_needs_enough_samples():
    with pytest.raises(ValueError):
        ou.jackknife_mean(np.ones(10))


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1.0))
def test_zscore_is_scale_free(shift, se):
    est = ou.MCEstimate(complex(shift, 0), se, se, 1000)
    assert est.zscore(0.0)[0] == pytest.approx(abs(shift) / se)


def test_scalar_charfn_and_markov_checks(scalar_ou):
    x0 = embedded(scalar_ou.spec, [0.5])
    ens = ou.OUEnsemble(scalar_ou, x0, 1.0, 64, seed=21)
    fs = [ou.Functional(t, vector([a])) for t in (0.5, 1.0) for a in (0.5, 2.0)]
    for c in ou.charfn_checks(ens, fs, 20_000):
        assert c.z <= 3.0
    est = ou.markov_increment_check(ens, 0.5, 0.5, vector([1.0]), 20_000)
    assert max(est.zscore(0.0)) <= 3.0


def test_driver_law_moments(jump_ou):
    ens = ou.OUEnsemble(jump_ou, embedded(jump_ou.spec, [0.0, 0.0]), 1.0, 16, seed=8)
    coef = ou.driver_coefficients(ens, 1.0, 20_000)
    est, exact = ou.driver_second_moment(ens, coef, 1.0, jump_ou.params)
    assert abs(est.value.real - exact) <= 3 * est.se_re
    chk = ou.driver_charfn_check(ens, coef, 1.0, vector([1.0, 2.0]), 0.0)
    assert chk.z <= 3.0
