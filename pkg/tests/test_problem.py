import math

import numpy as np
import pytest
import sympy as sp

from mixres import fields
from mixres.geometry import BallDomain, sample_interior
from mixres.problem import (
    INSENSIBLE,
    AssumptionError,
    h1_error,
    h1_norm,
    make_manufactured,
    require_assumptions,
    validate_assumptions,
)
from mixres.registry import bundled_names, get_problem


def _sym_field(expr, xs):
    grad = [sp.diff(expr, v) for v in xs]
    hess = [[sp.diff(g, v) for v in xs] for g in grad]
    lap = sum(hess[i][i] for i in range(len(xs)))
    return (sp.lambdify(xs, expr), sp.lambdify(xs, grad), sp.lambdify(xs, hess), sp.lambdify(xs, lap))


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("which", ["quadratic", "gaussian"])
def test_field_derivatives_match_sympy(d, which):
    xs = sp.symbols(f"x0:{d}")
    r2 = sum(v**2 for v in xs)
    expr = 1 - r2 if which == "quadratic" else sp.exp(-r2)
    f, g, h, lap = _sym_field(expr, xs)
    dom = BallDomain(d)
    fld = fields.quadratic_bump(dom) if which == "quadratic" else fields.gaussian_bump(dom)
    pts = sample_interior(dom, 20, 1).points
    for x in pts:
        assert fld(x[None])[0] == pytest.approx(float(f(*x)), abs=1e-14)
        np.testing.assert_allclose(fld.grad(x[None])[0], np.array(g(*x), dtype=float), atol=1e-14)
        np.testing.assert_allclose(fld.hess(x[None])[0], np.array(h(*x), dtype=float), atol=1e-14)
        assert fld.laplacian(x[None])[0] == pytest.approx(float(lap(*x)), abs=1e-13)


def test_sup_oracles_dominate_samples():
    dom = BallDomain(2)
    pts = sample_interior(dom, 50_000, 2).points
    for fld in (fields.quadratic_bump(dom), fields.gaussian_bump(dom), fields.affine(2.0, [0.1, 0.0], dom)):
        assert np.max(np.abs(fld(pts))) <= fld.sup_abs
        assert np.max(np.linalg.norm(fld.grad(pts), axis=1)) <= fld.sup_grad
        assert np.min(fld(pts)) >= fld.inf
    u = fields.quadratic_bump(dom)
    for alpha in (0.0, 1.0):
        ext = fields.normal_derivative_extension(u, dom, alpha)
        assert np.max(np.abs(ext(pts))) <= ext.sup_abs
        assert np.max(np.linalg.norm(ext.grad(pts), axis=1)) <= ext.sup_grad


def test_normal_extension_gradient_matches_fd():
    dom = BallDomain(3)
    ext = fields.normal_derivative_extension(fields.gaussian_bump(dom), dom, alpha=0.7)
    x = sample_interior(dom, 10, 0).points
    h = 1e-6
    fd = np.stack([(ext(x + h * e) - ext(x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    np.testing.assert_allclose(ext.grad(x), fd, atol=1e-8)


def test_manufactured_rhs_matches_sympy_varcoef():
    x0, x1 = sp.symbols("x0 x1")
    u = 1 - x0**2 - x1**2
    om = 2 + sp.Rational(1, 10) * x0
    f_expr = -(sp.diff(u, x0, 2) + sp.diff(u, x1, 2)) + om * u
    f = sp.lambdify((x0, x1), f_expr)
    prob, sol = get_problem("ball-d2-dirichlet-quadratic-varcoef")
    pts = sample_interior(prob.domain, 50, 4).points
    np.testing.assert_allclose(prob.rhs_f(pts), [f(*p) for p in pts], atol=1e-14)
    np.testing.assert_allclose(sol.div_p(pts), -4.0)


def test_manufactured_jet_layout():
    prob, sol = get_problem("ball-d3-neumann-quadratic")
    x = sample_interior(prob.domain, 5, 0).points
    jet = sol.jet(x)
    np.testing.assert_array_equal(jet.u, 1 - np.sum(x**2, 1))
    np.testing.assert_array_equal(jet.p, -2 * x)
    np.testing.assert_array_equal(jet.grad_u, -2 * x)
    np.testing.assert_array_equal(jet.div_p, -6.0)


def test_boundary_data_consistent_with_solution():
    # g~ restricted to the sphere equals u, du/dnu and alpha u + du/dnu
    from mixres.geometry import sample_boundary

    for kind, expect in (
        ("dirichlet", lambda x: 1 - np.sum(x**2, 1)),
        ("neumann", lambda x: np.full(len(x), -2.0)),
        ("robin", lambda x: np.full(len(x), -2.0)),
    ):
        prob, _ = get_problem(f"ball-d2-{kind}-quadratic")
        x = sample_boundary(prob.domain, 100, 3).points
        np.testing.assert_allclose(prob.boundary.g_tilde(x), expect(x), atol=1e-14)


def test_assumption_validation():
    for name in bundled_names():
        prob, _ = get_problem(name)
        assert validate_assumptions(prob, 5000).passed, name
    prob, _ = get_problem("ball-d2-dirichlet-quadratic-steep")
    rep = validate_assumptions(prob, 5000)
    assert not rep.passed and not rep.insensible_variation
    with pytest.raises(AssumptionError, match=INSENSIBLE):
        require_assumptions(prob)


def test_certified_lower_bound_must_hold():
    dom = BallDomain(2)
    prob, _ = make_manufactured(dom, fields.affine(2.0, [0.1, 0.0], dom), fields.quadratic_bump(dom), c_omega=2.0)
    rep = validate_assumptions(prob, 20_000)
    assert not rep.lower_bound_consistent
    prob, _ = make_manufactured(dom, fields.constant(1.0, 2), fields.quadratic_bump(dom), c_omega=0.0)
    assert not validate_assumptions(prob, 1000).positive_lower_bound


def test_h1_norm_closed_form():
    # ||1-|x|^2||^2_{H1} on the unit disk = pi/3 + 2 pi
    prob, sol = get_problem("ball-d2-dirichlet-quadratic")
    est, se = h1_norm(prob, sol.u, 400_000, 1)
    exact = math.sqrt(math.pi / 3 + 2 * math.pi)
    assert abs(est - exact) < 4 * se


def test_h1_error_of_exact_jets_is_zero_and_of_zero_is_norm():
    prob, sol = get_problem("ball-d2-dirichlet-quadratic")
    err = h1_error(prob, sol, sol.jet, 10_000, 0)
    assert err.h1_u == 0 and err.l2_p == 0
    from mixres.network import Jet

    zero = lambda x: Jet(np.zeros((len(x), 3)), np.zeros((len(x), 3, 2)))  # noqa: E731
    err = h1_error(prob, sol, zero, 400_000, 2)
    assert err.h1_u == pytest.approx(math.sqrt(math.pi / 3 + 2 * math.pi), abs=4 * err.stderr[0])
    # ||grad u||^2 = 2 pi
    assert err.l2_p == pytest.approx(math.sqrt(2 * math.pi), abs=4 * err.stderr[1])


def test_registry_names():
    with pytest.raises(KeyError):
        get_problem("ball-d2-dirichlet-cubic")
    with pytest.raises(KeyError):
        get_problem("square-d2-dirichlet-quadratic")
    prob, _ = get_problem("ball-d1-robin-quadratic", alpha=2.5)
    assert prob.boundary.alpha == 2.5 and prob.dim == 1
