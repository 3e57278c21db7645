"""Orthonormal polynomial bases and quadrature on the reference triangle
and the reference edge.

The triangle basis is the Jacobi-polynomial (Dubiner) family on the unit
triangle {x, y >= 0, x + y <= 1}, orthonormalized so reference mass
matrices are the identity.  The edge basis is shifted Legendre on [0,1].
Triangle quadrature is a conical (Duffy) product of Gauss-Legendre and
Gauss-Jacobi rules, exact for the requested total degree.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_jacobi, eval_legendre, roots_jacobi

MAX_QUAD_EXACTNESS = 20
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference domain.

    ``points`` has shape (nq, 2) for the triangle, (nq,) for the edge.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)


def tri_quadrature(exactness: int) -> QuadratureRule:
    """Rule on the unit triangle exact for total degree <= ``exactness``.

    Conical product: Gauss-Legendre in the collapsed direction times
    Gauss-Jacobi with weight (1-b) absorbing the Duffy Jacobian.
    """
    if exactness < 0:
        raise ValueError(f"exactness must be non-negative, got {exactness}")
    if exactness > MAX_QUAD_EXACTNESS:
        raise ValueError(
            f"unsupported quadrature degree {exactness} (max {MAX_QUAD_EXACTNESS})"
        )
    q = exactness // 2 + 1
    xa, wa = np.polynomial.legendre.leggauss(q)
    xb, wb = roots_jacobi(q, 1, 0)
    a = np.repeat(xa, q)
    b = np.tile(xb, q)
    w = np.repeat(wa, q) * np.tile(wb, q) / 2.0
    # biunit triangle -> unit triangle
    r = (1.0 + a) * (1.0 - b) / 2.0 - 1.0
    pts = np.column_stack([(r + 1.0) / 2.0, (b + 1.0) / 2.0])
    return QuadratureRule(pts, w / 4.0, exactness)


def edge_quadrature(exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0,1] exact for degree <= ``exactness``."""
    if exactness < 0:
        raise ValueError(f"exactness must be non-negative, got {exactness}")
    if exactness > MAX_QUAD_EXACTNESS:
        raise ValueError(
            f"unsupported quadrature degree {exactness} (max {MAX_QUAD_EXACTNESS})"
        )
    q = exactness // 2 + 1
    x, w = np.polynomial.legendre.leggauss(q)
    return QuadratureRule((x + 1.0) / 2.0, w / 2.0, exactness)


def _check_tri_points(pts):
    x, y = pts[..., 0], pts[..., 1]
    if (x < -_DOMAIN_TOL).any() or (y < -_DOMAIN_TOL).any() or (x + y > 1.0 + _DOMAIN_TOL).any():
        raise ValueError("evaluation point outside the reference triangle")


def _check_edge_points(t):
    if (t < -_DOMAIN_TOL).any() or (t > 1.0 + _DOMAIN_TOL).any():
        raise ValueError("evaluation point outside the reference edge [0,1]")


@dataclass(frozen=True)
class TriBasis:
    """Orthonormal basis of P^degree on the unit triangle.

    When a quadrature rule is supplied, ``values`` (nq, dim) and ``grads``
    (nq, dim, 2) are tabulated at its points.
    """

    degree: int
    rule: QuadratureRule | None = None
    modes: np.ndarray = field(init=False)
    values: np.ndarray | None = field(init=False, default=None)
    grads: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        modes = [(m, d - m) for d in range(self.degree + 1) for m in range(d + 1)]
        object.__setattr__(self, "modes", np.asarray(modes, dtype=np.int64))
        if self.rule is not None:
            object.__setattr__(self, "values", self.eval(self.rule.points))
            object.__setattr__(self, "grads", self.grad(self.rule.points))

    @property
    def dim(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def _collapsed(self, pts):
        r = 2.0 * pts[..., 0] - 1.0
        b = 2.0 * pts[..., 1] - 1.0
        omb = 1.0 - b
        safe = np.where(np.abs(omb) < 1e-14, 1.0, omb)
        a = np.where(np.abs(omb) < 1e-14, -1.0, 2.0 * (1.0 + r) / safe - 1.0)
        return a, b, omb

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values at reference points (..., 2) -> (..., dim)."""
        pts = np.asarray(pts, dtype=float)
        _check_tri_points(pts)
        a, b, omb = self._collapsed(pts)
        out = np.empty(pts.shape[:-1] + (self.dim,))
        for i, (m, n) in enumerate(self.modes):
            # x2 maps the orthonormal biunit-triangle family to the unit triangle
            norm = 2.0 * np.sqrt((2 * m + 1) * (m + n + 1) / 2.0 ** (2 * m + 1))
            out[..., i] = norm * eval_jacobi(m, 0, 0, a) * omb**m * eval_jacobi(n, 2 * m + 1, 0, b)
        return out

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference gradients at points (..., 2) -> (..., dim, 2)."""
        pts = np.asarray(pts, dtype=float)
        _check_tri_points(pts)
        a, b, omb = self._collapsed(pts)
        out = np.empty(pts.shape[:-1] + (self.dim, 2))
        for i, (m, n) in enumerate(self.modes):
            norm = 2.0 * np.sqrt((2 * m + 1) * (m + n + 1) / 2.0 ** (2 * m + 1))
            pm = eval_jacobi(m, 0, 0, a)
            pn = eval_jacobi(n, 2 * m + 1, 0, b)
            dpm = 0.5 * (m + 1) * eval_jacobi(m - 1, 1, 1, a) if m >= 1 else 0.0
            dpn = 0.5 * (n + 2 * m + 2) * eval_jacobi(n - 1, 2 * m + 2, 1, b) if n >= 1 else 0.0
            ombm1 = omb ** (m - 1) if m >= 1 else 0.0
            dr = 2.0 * dpm * ombm1 * pn if m >= 1 else np.zeros_like(a)
            ds = pm * (omb**m * dpn - (m * ombm1 * pn if m >= 1 else 0.0))
            if m >= 1:
                ds = ds + dpm * (1.0 + a) * ombm1 * pn
            # unit-triangle coordinates scale both directions by 2
            out[..., i, 0] = 2.0 * norm * dr
            out[..., i, 1] = 2.0 * norm * ds
        return out


@dataclass(frozen=True)
class EdgeBasis:
    """Orthonormal (shifted Legendre) basis of P^degree on [0,1]."""

    degree: int
    rule: QuadratureRule | None = None
    values: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.rule is not None:
            object.__setattr__(self, "values", self.eval(self.rule.points))

    @property
    def dim(self) -> int:
        return self.degree + 1

    def eval(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        _check_edge_points(t)
        x = 2.0 * t - 1.0
        out = np.empty(t.shape + (self.dim,))
        for j in range(self.dim):
            out[..., j] = np.sqrt(2 * j + 1) * eval_legendre(j, x)
        return out


def eval_basis(basis, point):
    """Values of all basis functions at a reference point (or points)."""
    return basis.eval(point)


def eval_grad(basis: TriBasis, point):
    """Reference-space gradients; callers apply the affine pullback."""
    return basis.grad(point)


@dataclass(frozen=True)
class QuadratureSet:
    """The three rules one solver run needs."""

    volume: QuadratureRule
    face: QuadratureRule
    error: QuadratureRule


def default_rules(k: int) -> QuadratureSet:
    """Default exactness: covers every bilinear-form integrand for
    polynomial convection of degree <= 1, with margin; the error rule is
    denser for non-polynomial error integrands."""
    return QuadratureSet(
        volume=tri_quadrature(2 * (k + 2) + 2),
        face=edge_quadrature(2 * (k + 1) + 2),
        error=tri_quadrature(2 * (k + 2) + 6),
    )
