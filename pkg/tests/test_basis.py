from math import factorial

import numpy as np
import pytest

from hdgcontrol import EdgeBasis, TriBasis, edge_quadrature, eval_basis, \
    eval_grad, tri_quadrature


def tri_monomial_integral(a, b):
    # closed form over the unit triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_tri_rule_basics():
    r = tri_quadrature(2)
    assert r.weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert (r.weights > 0).all()
    xy = (tri_quadrature(2).weights * r.points[:, 0] * r.points[:, 1]).sum()
    assert xy == pytest.approx(1.0 / 24.0, abs=1e-15)
    r4 = tri_quadrature(4)
    assert (r4.weights * r4.points[:, 0] ** 4).sum() == pytest.approx(1.0 / 30.0, abs=1e-15)


@pytest.mark.parametrize("exactness", [0, 1, 2, 5, 9, 14, 20])
def test_tri_rule_exactness(exactness):
    r = tri_quadrature(exactness)
    for a in range(exactness + 1):
        for b in range(exactness + 1 - a):
            val = (r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b).sum()
            assert val == pytest.approx(tri_monomial_integral(a, b), abs=1e-13)


def test_edge_rule():
    r = edge_quadrature(2)
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert (r.weights * r.points**2).sum() == pytest.approx(1.0 / 3.0, abs=1e-15)
    r3 = edge_quadrature(5)
    assert len(r3.weights) == 3
    assert (r3.weights * r3.points**5).sum() == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_rule_rejects_unsupported_degree():
    with pytest.raises(ValueError):
        tri_quadrature(21)
    with pytest.raises(ValueError):
        edge_quadrature(21)
    with pytest.raises(ValueError):
        tri_quadrature(-1)


@pytest.mark.parametrize("degree,dim", [(0, 1), (1, 3), (2, 6), (3, 10)])
def test_tri_dims(degree, dim):
    assert TriBasis(degree).dim == dim


@pytest.mark.parametrize("degree", range(6))
def test_tri_orthonormal(degree):
    basis = TriBasis(degree)
    rule = tri_quadrature(2 * degree)
    V = basis.eval(rule.points)
    gram = np.einsum("q,qi,qj->ij", rule.weights, V, V)
    assert np.abs(gram - np.eye(basis.dim)).max() < 1e-12


@pytest.mark.parametrize("degree", range(5))
def test_edge_orthonormal(degree):
    basis = EdgeBasis(degree)
    rule = edge_quadrature(2 * degree)
    V = basis.eval(rule.points)
    gram = np.einsum("q,qi,qj->ij", rule.weights, V, V)
    assert np.abs(gram - np.eye(basis.dim)).max() < 1e-12


def test_constant_mode_values():
    pts = np.array([[0.1, 0.3], [0.5, 0.25], [1 / 3, 1 / 3]])
    vals = eval_basis(TriBasis(0), pts)
    assert vals == pytest.approx(np.full((3, 1), np.sqrt(2.0)))
    e = EdgeBasis(1)
    t = np.array([0.2, 0.8])
    ve = e.eval(t)
    assert ve[0, 0] == pytest.approx(ve[1, 0])  # first mode constant


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    pts = 0.05 + 0.4 * rng.random((40, 2))  # interior, room for the FD stencil
    for degree in (1, 2, 3, 5):
        basis = TriBasis(degree)
        grads = eval_grad(basis, pts)
        scale = max(1.0, np.abs(grads).max())
        step = 1e-6
        for c in range(2):
            dp = pts.copy()
            dp[:, c] += step
            dm = pts.copy()
            dm[:, c] -= step
            fd = (basis.eval(dp) - basis.eval(dm)) / (2 * step)
            assert np.abs(fd - grads[..., c]).max() / scale < 1e-6


def test_eval_rejects_outside_points():
    with pytest.raises(ValueError):
        TriBasis(1).eval(np.array([[0.7, 0.7]]))
    with pytest.raises(ValueError):
        TriBasis(1).eval(np.array([[-0.1, 0.2]]))
    with pytest.raises(ValueError):
        EdgeBasis(1).eval(np.array([1.5]))


def test_tabulated_fields():
    rule = tri_quadrature(4)
    basis = TriBasis(2, rule)
    assert basis.values.shape == (len(rule.weights), 6)
    assert basis.grads.shape == (len(rule.weights), 6, 2)
    gram = np.einsum("q,qi,qj->ij", rule.weights, basis.values, basis.values)
    assert np.abs(gram - np.eye(6)).max() < 1e-12
