import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate as spi
from scipy import linalg as sla
from scipy.special import erf

from skewconv import semigroup as sg
from skewconv.grid import GridFunction


@pytest.fixture(scope="module")
def line():
    return sg.heat_line(8.0, 321)


@pytest.fixture(scope="module")
def halfline():
    return sg.absorbing_halfline(10.0, 200, weight="lebesgue")


def gaussian(spec, var, centre=0.0):
    return spec.discretize(lambda p: np.exp(-(p[:, 0] - centre) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var))


# ------------------------------------------------------------------ kernels

def test_kernel_g_peak():
    assert sg.kernel_g(1, 1.0, [0.0]) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert sg.kernel_g(2, 0.5, [0.0, 0.0]) == pytest.approx(1 / np.pi)


@pytest.mark.parametrize("args", [(3, 1.0, [0.0]), (1, 0.0, [0.0]), (2, 1.0, [0.0])])
def test_kernel_g_domain(args):
    with pytest.raises(sg.DomainError):
        sg.kernel_g(*args)


@pytest.mark.parametrize("s,x", [(0.1, 0.3), (1.0, 1.0), (4.0, 0.5)])
def test_absorbing_density_mass_is_survival_probability(s, x):
    mass, _ = spi.quad(lambda y: sg.kernel_p(s, x, y), 0, np.inf, epsabs=1e-13)
    assert mass == pytest.approx(erf(x / np.sqrt(2 * s)), rel=1e-9)


@pytest.mark.parametrize("y", [0.5, 1.0, 2.0])
def test_boundary_density_is_a_hitting_time_law(y):
    mass, _ = spi.quad(lambda s: sg.kernel_k(s, y), 0, np.inf, limit=200)
    assert mass == pytest.approx(1.0, rel=1e-8)


def test_boundary_density_is_the_flux_of_p():
    s, y, e = 0.7, 1.3, 1e-5
    flux = 0.5 * (sg.kernel_p(s, 2 * e, y) - 0.0) / (2 * e)
    assert flux == pytest.approx(sg.kernel_k(s, y), rel=1e-6)


@given(st.floats(0.05, 5.0), st.floats(-3.0, 3.0))
def test_time_derivative_solves_heat_equation(s, x):
    e = 1e-5 * s
    dt = (sg.gauss(1, s + e, x * x) - sg.gauss(1, s - e, x * x)) / (2 * e)
    assert sg.gauss_dt(1, s, x * x) == pytest.approx(dt, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("l,r", [(0.5, 0.0), (1.0, 0.7), (2.0, 3.0)])
def test_pair_time_integral_closed_form(l, r):
    oracle, _ = spi.quad(lambda s: sg.gauss(1, 2 * s, r * r), 0, l)
    assert sg.heat_pair_time_integral(1, l, r) == pytest.approx(oracle, rel=1e-9)


# ---------------------------------------------------------------- operators

def test_scalar_matrix_semigroup_is_exponential():
    spec = sg.matrix_semigroup([[-1.0]])
    assert spec.c0 >= 1.0 and spec.b0 == 0.0
    v = sg.apply_values(spec, 0.7, np.array([2.0]))
    assert v[0] == pytest.approx(2 * np.exp(-0.7), rel=1e-14)


def test_heat_line_spreads_gaussians(line):
    for t in (1e-4, 0.01, 0.5, 2.0):
        out = sg.apply(line, t, gaussian(line, 0.25))
        err = (out - gaussian(line, 0.25 + t)).norm()
        assert err < 1e-8, t


def test_absorbing_maps_odd_profile_in_closed_form(halfline):
    w2 = 0.3

    def profile(v, p):
        return p[:, 0] * np.exp(-p[:, 0] ** 2 / (2 * v))

    f = halfline.discretize(lambda p: profile(w2, p))
    for t in (1e-4, 0.2, 1.0):
        want = halfline.discretize(lambda p: (w2 / (w2 + t)) ** 1.5 * profile(w2 + t, p))
        assert (sg.apply(halfline, t, f) - want).norm() < 1e-8, t


@pytest.mark.parametrize("make", [lambda: sg.heat_line(6.0, 121), lambda: sg.absorbing_halfline(6.0, 120),
                                  sg.heat_plane])
def test_grid_semigroups_compose_at_all_scales(make):
    spec = make()
    f = gaussian(spec, 0.3, 2.0) if spec.grid.dim == 1 else spec.discretize(
        lambda p: np.exp(-np.sum(p * p, axis=1)))
    tiny = 0.1 * spec.h**2
    for s, t in [(tiny, tiny), (tiny, 0.3), (0.2, 0.25)]:
        lhs = sg.apply(spec, s, sg.apply(spec, t, f))
        assert (lhs - sg.apply(spec, s + t, f)).norm() < 10 * sg.grid_tolerance(spec)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (2, 2), elements=st.floats(-2, 2)), st.floats(0, 1), st.floats(0, 1))
def test_matrix_semigroup_law(a, s, t):
    spec = sg.matrix_semigroup(a, c0=1.0, b0=0.0)
    v = np.array([1.0, -0.5])
    lhs = sg.apply_values(spec, s, sg.apply_values(spec, t, v))
    assert np.allclose(lhs, sg.apply_values(spec, s + t, v), atol=1e-10)


def test_adjoint_respects_weighted_inner_product(halfline):
    spec = sg.absorbing_halfline(8.0, 80)
    rng = np.random.default_rng(1)
    f, a = (GridFunction(rng.standard_normal(80), spec.grid) for _ in range(2))
    lhs = sg.apply(spec, 0.3, f).inner(a)
    assert lhs == pytest.approx(f.inner(sg.adjoint_apply(spec, 0.3, a)), rel=1e-10)


def test_heat_is_a_contraction(line):
    assert sg.operator_norm(line, 0.0) == 1.0
    for t in (1e-4, 0.1, 1.0):
        assert sg.operator_norm(line, t) <= 1.0 + 1e-9


def test_generator_on_gaussian(line):
    f = gaussian(line, 0.5)
    lap = line.discretize(lambda p: 0.5 * (p[:, 0] ** 2 / 0.25 - 1 / 0.5)
                          * np.exp(-p[:, 0] ** 2 / 1.0) / np.sqrt(np.pi))
    assert (sg.generator_apply(line, f) - lap).norm() < 1e-3


def test_negative_time_rejected(line):
    with pytest.raises(sg.DomainError):
        sg.apply_values(line, -0.1, np.zeros(321))


# ---------------------------------------------------------------- resolvent

def test_matrix_resolvent_is_inverse():
    a = np.array([[-1.0, 0.5], [0.0, -2.0]])
    spec = sg.matrix_semigroup(a)
    want = np.linalg.solve(1.5 * np.eye(2) - a, np.array([1.0, 2.0]))
    assert np.allclose(sg.resolvent_values(spec, 1.5, np.array([1.0, 2.0])), want, atol=1e-10)


def test_heat_resolvent_against_time_quadrature():
    spec = sg.heat_line(8.0, 161)
    alpha = 1.0
    got = sg.resolvent(spec, alpha, gaussian(spec, 0.3)).values[80]
    oracle, _ = spi.quad(lambda t: np.exp(-alpha * t) / np.sqrt(2 * np.pi * (0.3 + t)), 0, np.inf)
    assert got == pytest.approx(oracle, rel=1e-6)


def test_resolvent_needs_alpha_above_growth_bound():
    spec = sg.matrix_semigroup([[0.5]])
    with pytest.raises(sg.DomainError):
        sg.resolvent_values(spec, 0.4, np.ones(1))


def test_resolvent_norm_bounds_the_inverse():
    a = np.array([[-1.0, 0.5], [0.0, -2.0]])
    spec = sg.matrix_semigroup(a)
    exact = np.linalg.norm(np.linalg.inv(1.5 * np.eye(2) - a), 2)
    assert exact <= sg.resolvent_norm(spec, 1.5) <= 1.1 * exact


def test_matrix_growth_bounds_exponential():
    a = np.array([[0.0, 3.0], [0.0, -1.0]])
    c0, b0 = sg.matrix_growth(a)
    for t in np.linspace(0, 5, 11):
        assert np.linalg.norm(sla.expm(t * a), 2) <= c0 * np.exp(b0 * t)
