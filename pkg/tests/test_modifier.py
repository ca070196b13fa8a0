import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixres import fields
from mixres.geometry import BallDomain, sample_boundary, sample_interior
from mixres.modifier import BoundaryModifier, check_assumption, default_constants, modify, modify_vjp
from mixres.network import Jet, forward_jet, init_params
from mixres.verify import boundary_residuals


def _mod(kind, g, dom, alpha=1.0):
    return BoundaryModifier(kind, g, dom, alpha)


@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "robin"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_boundary_identity_exact(kind, d):
    assert boundary_residuals(kind, d, n_nets=5, n_points=2000) <= 1e-12


def test_near_boundary_dirichlet_value():
    dom = BallDomain(2)
    g = fields.gaussian_bump(dom)
    x = np.array([[1 - 1e-15, 0.0]])
    jet = Jet(np.array([[5.0, 1.0, -2.0]]), np.ones((1, 3, 2)))
    out = modify(_mod("dirichlet", g, dom), x, jet)
    assert abs(out.u[0] - g(x)[0]) <= 1e-12


def test_dirichlet_at_center_passes_jacobian_through():
    dom = BallDomain(2)
    jet = Jet(np.array([[0.7, 1.0, -2.0]]), np.arange(6.0).reshape(1, 3, 2))
    out = modify(_mod("dirichlet", fields.zero(2), dom), np.zeros((1, 2)), jet)
    assert out.u[0] == 0.7
    np.testing.assert_array_equal(out.jacobian, jet.jacobian)


def test_neumann_hand_example():
    dom = BallDomain(2)
    c = 1.7
    jet = Jet(np.zeros((1, 3)), np.zeros((1, 3, 2)))
    out = modify(_mod("neumann", fields.constant(c, 2), dom), np.array([[0.6, 0.0]]), jet)
    np.testing.assert_allclose(out.p[0], [0.6 * c, 0.0])
    assert out.p[0] @ np.array([1.0, 0.0]) == pytest.approx(0.6 * c)


@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "robin"])
def test_passthrough_components_bitwise(kind):
    dom = BallDomain(3)
    x = sample_interior(dom, 50, 0).points
    jet = forward_jet(init_params((3, 6, 4), 1.0, 1), "tanh", x)
    out = modify(_mod(kind, fields.gaussian_bump(dom), dom, 0.5), x, jet)
    if kind == "dirichlet":
        assert np.array_equal(out.value[:, 1:], jet.value[:, 1:])
        assert np.array_equal(out.jacobian[:, 1:], jet.jacobian[:, 1:])
    else:
        assert np.array_equal(out.value[:, 0], jet.value[:, 0])
        assert np.array_equal(out.jacobian[:, 0], jet.jacobian[:, 0])


@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "robin"])
def test_modified_jacobian_matches_fd(kind):
    dom = BallDomain(2, center=(0.2, -0.1), radius=1.3)
    p = init_params((2, 8, 3), 1.0, 2)
    g = fields.gaussian_bump(dom)
    mod = _mod(kind, g, dom, 0.8)
    x = sample_interior(dom, 40, 5).points
    x = x[np.linalg.norm(x - dom.center_array, axis=1) > 0.05]
    full = modify(mod, x, forward_jet(p, "tanh", x))

    def val(z):
        j = forward_jet(p, "tanh", z)
        return modify(mod, z, j).value

    h = 1e-6
    fd = np.stack([(val(x + h * e) - val(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    assert np.max(np.abs(fd - full.jacobian)) / np.max(np.abs(full.jacobian)) < 1e-7


@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "robin"])
def test_vjp_is_transpose(kind):
    dom = BallDomain(3)
    mod = _mod(kind, fields.gaussian_bump(dom), dom, 1.3)
    rng = np.random.default_rng(0)
    x = sample_interior(dom, 30, 1).points
    J1 = Jet(rng.standard_normal((30, 4)), rng.standard_normal((30, 4, 3)))
    zero = Jet(np.zeros((30, 4)), np.zeros((30, 4, 3)))
    a = modify(mod, x, J1)
    b = modify(mod, x, zero)
    gv, gJ = rng.standard_normal((30, 4)), rng.standard_normal((30, 4, 3))
    lhs = np.sum((a.value - b.value) * gv) + np.sum((a.jacobian - b.jacobian) * gJ)
    rv, rJ = modify_vjp(mod, x, gv, gJ)
    rhs = np.sum(J1.value * rv) + np.sum(J1.jacobian * rJ)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_default_constants_examples():
    dom = BallDomain(2)
    assert default_constants("dirichlet", fields.zero(2), dom) == (0.0, 0.0, 2.0)
    c = -1.5
    Bg, Bgp, Bphi = default_constants("dirichlet", fields.constant(c, 2), dom)
    assert Bg == abs(c) and Bgp == abs(c) and Bphi == 2.0
    assert default_constants("robin", fields.zero(2), dom, 1.0)[2] >= 3.0
    with pytest.raises(ValueError):
        default_constants("periodic", fields.zero(2), dom)


def test_check_assumption_examples():
    dom = BallDomain(2)
    assert check_assumption(_mod("dirichlet", fields.zero(2), dom), dom, 2000, 0).value_bound <= 1
    assert check_assumption(_mod("dirichlet", fields.constant(1.0, 2), dom), dom, 2000, 0).value_bound <= 1
    slack = _mod("neumann", fields.gaussian_bump(dom), dom).with_constants(1e6, 1e6, 1e6)
    rep = check_assumption(slack, dom, 2000, 0)
    assert rep.value_bound <= 1 and rep.derivative_bound < 1e-3 and rep.derivative_lipschitz <= 1
    for kind in ("dirichlet", "neumann", "robin"):
        assert check_assumption(_mod(kind, fields.gaussian_bump(dom), dom), dom, 5000, 1).admissible


def test_robin_value_lipschitz_needs_alpha_at_most_one():
    dom = BallDomain(2)
    rep = check_assumption(_mod("robin", fields.zero(2), dom, alpha=3.0), dom, 5000, 2)
    assert rep.value_lipschitz > 1


def test_invalid_modifiers():
    dom = BallDomain(2)
    with pytest.raises(ValueError):
        _mod("periodic", fields.zero(2), dom)
    with pytest.raises(ValueError):
        _mod("robin", fields.zero(2), dom, alpha=0.0)
    with pytest.raises(ValueError):
        modify(_mod("neumann", fields.zero(2), dom), np.zeros((1, 2)), Jet(np.full((1, 3), np.nan), np.zeros((1, 3, 2))))


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(["dirichlet", "neumann", "robin"]), seed=st.integers(0, 10_000),
       alpha=st.floats(0.1, 5.0), d=st.integers(1, 3))
def test_boundary_identity_property(kind, seed, alpha, d):
    dom = BallDomain(d)
    mod = _mod(kind, fields.gaussian_bump(dom), dom, alpha)
    x = sample_boundary(dom, 200, seed).points
    p = init_params((d, 5, d + 1), 3.0, seed)
    res = mod.boundary_residual(x, modify(mod, x, forward_jet(p, "logistic", x)))
    assert np.max(np.abs(res)) <= 1e-12
