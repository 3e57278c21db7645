"""Error norms against exact solutions and convergence-rate reporting."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import DiscreteSolution
from .basis import QuadratureSet, TriBasis, default_rules
from .local import _element_points, project_face, project_volume
from .mesh import Mesh
from .problems import ProblemData

VARIABLES = ("q", "p", "y", "z", "u")

# errors at roundoff level are treated as exact zeros when forming rates
ZERO_ERROR_FLOOR = 1e-13


def l2_error(solution: DiscreteSolution, problem: ProblemData,
             variable: str, rules: QuadratureSet | None = None) -> float:
    """L2(Omega) error of one discrete field.

    Exact fluxes are the negative gradients of the exact states; the
    exact control is z/gamma.
    """
    if problem.exact is None:
        raise ValueError("problem carries no exact solution")
    if variable not in VARIABLES:
        raise ValueError(f"unknown variable {variable!r}")
    ex = problem.exact
    k = solution.k
    rule = (rules if rules is not None else default_rules(k)).error
    X, detJ = _element_points(solution.mesh, rule.points)

    if variable in ("q", "p"):
        V = TriBasis(k)
        Vv = V.eval(rule.points)
        m = V.dim
        coef = solution.q if variable == "q" else solution.p
        grad = ex.grad_y(X) if variable == "q" else ex.grad_z(X)
        err2 = 0.0
        for c in range(2):
            disc = np.einsum("ej,qj->eq", coef[:, c * m:(c + 1) * m], Vv)
            err2 += np.einsum("e,q,eq->", detJ, rule.weights,
                              (disc - (-grad[..., c])) ** 2)
        return float(np.sqrt(err2))

    W = TriBasis(k + 1)
    Wv = W.eval(rule.points)
    if variable == "y":
        coef, exact = solution.y, ex.y(X)
    elif variable == "z":
        coef, exact = solution.z, ex.z(X)
    else:
        coef, exact = solution.u, ex.z(X) / problem.gamma
    disc = np.einsum("ej,qj->eq", coef, Wv)
    err2 = np.einsum("e,q,eq->", detJ, rule.weights, (disc - exact) ** 2)
    return float(np.sqrt(err2))


def all_errors(solution: DiscreteSolution, problem: ProblemData,
               rules: QuadratureSet | None = None) -> dict[str, float]:
    return {v: l2_error(solution, problem, v, rules) for v in VARIABLES}


def compute_rates(errors: list[float]) -> list[Optional[float]]:
    """Per-step orders log2(e_prev / e_curr); None where a level hit zero."""
    if len(errors) < 2:
        raise ValueError("need at least two levels to compute rates")
    rates: list[Optional[float]] = []
    for prev, curr in zip(errors, errors[1:]):
        if prev <= ZERO_ERROR_FLOOR or curr <= ZERO_ERROR_FLOOR:
            rates.append(None)
        else:
            rates.append(float(np.log2(prev / curr)))
    return rates


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors and per-step orders of a refinement study.

    ``rates[0]`` entries are always None (no previous level).
    """

    problem: str
    k: int
    gamma: float
    tau2: float
    levels: list[int]
    h_values: list[float]
    errors: list[dict[str, float]]
    rates: list[dict[str, Optional[float]]] = field(init=False)

    def __post_init__(self):
        per_var = {
            v: compute_rates([e[v] for e in self.errors]) if len(self.errors) > 1 else []
            for v in VARIABLES
        }
        rates: list[dict[str, Optional[float]]] = [{v: None for v in VARIABLES}]
        for i in range(1, len(self.levels)):
            rates.append({v: per_var[v][i - 1] for v in VARIABLES})
        object.__setattr__(self, "rates", rates)


def project_exact(problem: ProblemData, mesh: Mesh, k: int,
                  rules: QuadratureSet | None = None) -> DiscreteSolution:
    """Interpolant (L2 projection) of the exact solution in the HDG spaces.

    Used as an independent oracle: its errors are pure projection errors.
    """
    if problem.exact is None:
        raise ValueError("problem carries no exact solution")
    from .assembly import DiscreteSolution as DS

    ex = problem.exact
    rule = (rules if rules is not None else default_rules(k)).error
    y = project_volume(ex.y, k + 1, mesh, rule)
    z = project_volume(ex.z, k + 1, mesh, rule)
    q = project_volume(lambda x: -ex.grad_y(x), k, mesh, rule, vector=True)
    p = project_volume(lambda x: -ex.grad_z(x), k, mesh, rule, vector=True)
    yhat = project_face(ex.y, k, mesh)[mesh.interior_faces]
    zhat = project_face(ex.z, k, mesh)[mesh.interior_faces]
    return DS(mesh, k, q, y, p, z, z / problem.gamma, yhat, zhat)
