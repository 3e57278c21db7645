"""Problem data for the distributed control of convection-diffusion.

A problem bundles the convection field, the Tikhonov weight gamma, and
the data (f, g, y_d) generated in closed form from a chosen exact state
and dual state.  The control never appears explicitly: it equals z/gamma
through the optimality condition, and the data formulas below already
account for that.

The built-in problems use divergence-free convection; a finite-difference
residual check (``consistency_residual``) guards the hand-derived data
against derivation mistakes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExactSolution:
    y: Field
    grad_y: Field
    z: Field
    grad_z: Field


@dataclass(frozen=True)
class ProblemData:
    """Coefficients and data of one control problem.

    All callables are vectorized over trailing-axis-2 point arrays;
    ``beta`` and gradients return arrays with a trailing axis of length 2.
    ``g`` is the Dirichlet state datum, only ever evaluated on the
    boundary.  ``exact`` enables error measurement and may be None.
    """

    name: str
    beta: Field
    div_beta: Field
    gamma: float
    f: Field
    g: Field
    y_d: Field
    exact: Optional[ExactSolution] = None


def example1(gamma: float = 1.0) -> ProblemData:
    """Constant convection [1,1]; y = sin(pi x1), z = sin(pi x1) sin(pi x2)."""
    pi = np.pi
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")

    def y(x):
        return np.sin(pi * x[..., 0])

    def grad_y(x):
        out = np.zeros_like(x)
        out[..., 0] = pi * np.cos(pi * x[..., 0])
        return out

    def z(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    def grad_z(x):
        s0, c0 = np.sin(pi * x[..., 0]), np.cos(pi * x[..., 0])
        s1, c1 = np.sin(pi * x[..., 1]), np.cos(pi * x[..., 1])
        return np.stack([pi * c0 * s1, pi * s0 * c1], axis=-1)

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return (pi**2 * np.sin(pi * x1) + pi * np.cos(pi * x1)
                - np.sin(pi * x1) * np.sin(pi * x2) / gamma)

    def y_d(x):
        x1, x2 = x[..., 0], x[..., 1]
        s0, c0 = np.sin(pi * x1), np.cos(pi * x1)
        s1, c1 = np.sin(pi * x2), np.cos(pi * x2)
        return s0 + 2.0 * pi**2 * s0 * s1 - pi * c0 * s1 - pi * s0 * c1

    return ProblemData(
        name="example1",
        beta=lambda x: np.broadcast_to(np.array([1.0, 1.0]), x.shape).copy(),
        div_beta=lambda x: np.zeros(x.shape[:-1]),
        gamma=gamma,
        f=f,
        g=y,
        y_d=y_d,
        exact=ExactSolution(y, grad_y, z, grad_z),
    )


def example2(gamma: float = 1.0) -> ProblemData:
    """Rotating convection [x2, x1]; same exact state and dual state."""
    pi = np.pi
    base = example1(gamma)

    def beta(x):
        return np.stack([x[..., 1], x[..., 0]], axis=-1)

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return (pi**2 * np.sin(pi * x1) + x2 * pi * np.cos(pi * x1)
                - np.sin(pi * x1) * np.sin(pi * x2) / gamma)

    def y_d(x):
        x1, x2 = x[..., 0], x[..., 1]
        s0, c0 = np.sin(pi * x1), np.cos(pi * x1)
        s1, c1 = np.sin(pi * x2), np.cos(pi * x2)
        return s0 + 2.0 * pi**2 * s0 * s1 - x2 * pi * c0 * s1 - x1 * pi * s0 * c1

    return ProblemData(
        name="example2",
        beta=beta,
        div_beta=lambda x: np.zeros(x.shape[:-1]),
        gamma=gamma,
        f=f,
        g=base.g,
        y_d=y_d,
        exact=base.exact,
    )


def poly_debug(gamma: float = 1.0) -> ProblemData:
    """Linear exact state y = x1 with zero dual state.

    Every field lies in the degree-(k+1) spaces for k >= 1, so the scheme
    reproduces it to roundoff; used as an exactness oracle.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")

    def y(x):
        return x[..., 0].copy()

    def grad_y(x):
        out = np.zeros_like(x)
        out[..., 0] = 1.0
        return out

    zero = lambda x: np.zeros(x.shape[:-1])
    zero_vec = lambda x: np.zeros_like(x)

    return ProblemData(
        name="poly_debug",
        beta=lambda x: np.broadcast_to(np.array([1.0, 1.0]), x.shape).copy(),
        div_beta=zero,
        gamma=gamma,
        f=lambda x: np.ones(x.shape[:-1]),
        g=y,
        y_d=y,
        exact=ExactSolution(y, grad_y, zero, zero_vec),
    )


BUILTIN_PROBLEMS = {
    "example1": example1,
    "example2": example2,
    "poly_debug": poly_debug,
}

# 6th-order central stencils; the built-in data functions are entire, so
# the stencil may poke outside the unit square.
_D1 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_D2 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
_FD_STEP = 0.02


def _fd_apply(fn, pts, coeffs, axis, power):
    h = _FD_STEP
    acc = np.zeros(pts.shape[:-1])
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        shifted = pts.copy()
        shifted[..., axis] += (k - 3) * h
        acc += c * fn(shifted)
    return acc / h**power


def _fd_grad(fn, pts):
    return np.stack(
        [_fd_apply(fn, pts, _D1, 0, 1), _fd_apply(fn, pts, _D1, 1, 1)], axis=-1
    )


def _fd_laplacian(fn, pts):
    return _fd_apply(fn, pts, _D2, 0, 2) + _fd_apply(fn, pts, _D2, 1, 2)


def consistency_residual(problem: ProblemData, pts: np.ndarray):
    """Residuals of the two PDEs of the optimality system at given points.

    Uses finite differences of the supplied exact solution, so it is an
    independent check on the closed-form data (f, y_d).  Returns
    (state residual, adjoint residual) arrays.
    """
    if problem.exact is None:
        raise ValueError("consistency check needs exact solutions")
    ex = problem.exact
    beta = problem.beta(pts)

    grad_y = _fd_grad(ex.y, pts)
    res_state = (
        -_fd_laplacian(ex.y, pts)
        + np.sum(beta * grad_y, axis=-1)
        - problem.f(pts)
        - ex.z(pts) / problem.gamma
    )

    grad_z = _fd_grad(ex.z, pts)
    div_beta_z = problem.div_beta(pts) * ex.z(pts) + np.sum(beta * grad_z, axis=-1)
    res_adjoint = problem.y_d(pts) - ex.y(pts) + _fd_laplacian(ex.z, pts) + div_beta_z
    return res_state, res_adjoint


def sample_points(count: int = 100, seed: int = 0) -> np.ndarray:
    """Quasi-random interior points for self-checks."""
    sampler = qmc.Halton(d=2, seed=seed)
    return 0.02 + 0.96 * sampler.random(count)
