"""Static condensation onto face traces and the global trace solve.

Only the interior-face trace modes of yhat and zhat are globally coupled;
each element contributes the Schur complement of its dense local system.
Boundary traces carry Dirichlet data and were folded into the local
right-hand sides during element assembly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import QuadratureSet, default_rules
from .errors import SolverError
from .local import BatchedLocalSystems, HDGAssembler, StabilizationConfig, \
    check_rcond, stack_local_systems
from .mesh import Mesh, build_uniform
from .problems import ProblemData

SOLVE_TOL = 1e-10


@dataclass(frozen=True)
class GlobalTraceSystem:
    """Condensed sparse system over interior-face trace modes.

    Global dof layout: all yhat modes first (interior faces in ascending
    index order, k+1 modes each), then all zhat modes.
    """

    matrix: sp.csc_matrix
    rhs: np.ndarray
    face_rank: np.ndarray
    k: int
    n_interior: int

    @property
    def dim(self) -> int:
        return 2 * self.n_interior * (self.k + 1)

    def dof_index(self, face: int, variable: str, mode: int) -> int:
        """Global index of (face, yhat|zhat, mode)."""
        rank = int(self.face_rank[face])
        if rank < 0:
            raise ValueError(f"face {face} is not an interior face")
        if not 0 <= mode <= self.k:
            raise ValueError(f"mode {mode} out of range for degree {self.k}")
        offset = {"yhat": 0, "zhat": self.n_interior * (self.k + 1)}[variable]
        return offset + rank * (self.k + 1) + mode


@dataclass(frozen=True)
class DiscreteSolution:
    """Coefficient vectors of all discrete fields.

    Interior fields are per element (orthonormal reference basis); traces
    are per interior face in the global face parametrization.  ``u`` is
    ``z / gamma`` by construction.
    """

    mesh: Mesh
    k: int
    q: np.ndarray
    y: np.ndarray
    p: np.ndarray
    z: np.ndarray
    u: np.ndarray
    yhat: np.ndarray
    zhat: np.ndarray


def _face_rank(mesh: Mesh) -> np.ndarray:
    rank = np.full(mesh.n_faces, -1, dtype=np.int64)
    rank[mesh.interior_faces] = np.arange(mesh.n_interior_faces)
    return rank


def _global_dofs(batch: BatchedLocalSystems, face_rank: np.ndarray, n_int: int):
    """Map local trace dofs (ne, 6(k+1)) to global indices, -1 on boundary."""
    K1 = batch.k + 1
    rank = face_rank[batch.face_ids]                      # (ne, 3)
    base = rank[:, :, None] * K1 + np.arange(K1)[None, None, :]
    base = np.where(batch.interior_mask[:, :, None], base, -1)
    yhat = base.reshape(len(batch), 3 * K1)
    zhat = np.where(yhat >= 0, yhat + n_int * K1, -1)
    return np.concatenate([yhat, zhat], axis=1)


def condense(local_systems, mesh: Mesh, k: int) -> GlobalTraceSystem:
    """Accumulate per-element Schur complements into the trace system."""
    batch = stack_local_systems(local_systems)
    face_rank = _face_rank(mesh)
    n_int = mesh.n_interior_faces
    dim = 2 * n_int * (k + 1)

    Ainv = check_rcond(batch.A, batch.elems)
    AinvB = Ainv @ batch.B
    Ainvr = np.einsum("eij,ej->ei", Ainv, batch.rhs_interior)
    S = batch.D - batch.C @ AinvB
    g = batch.rhs_trace - np.einsum("eij,ej->ei", batch.C, Ainvr)

    gdof = _global_dofs(batch, face_rank, n_int)
    rows = np.broadcast_to(gdof[:, :, None], S.shape)
    cols = np.broadcast_to(gdof[:, None, :], S.shape)
    keep = (rows >= 0) & (cols >= 0)
    matrix = sp.coo_matrix(
        (S[keep], (rows[keep], cols[keep])), shape=(dim, dim)
    ).tocsc()

    rhs = np.zeros(dim)
    valid = gdof >= 0
    np.add.at(rhs, gdof[valid], g[valid])
    return GlobalTraceSystem(matrix, rhs, face_rank, k, n_int)


def solve_traces(system: GlobalTraceSystem) -> np.ndarray:
    """Direct sparse solve with a residual guarantee.

    The condensed matrix is nonsymmetric (convection plus the optimality
    coupling), so this uses LU; one refinement step recovers the residual
    tolerance if the first solve falls short.
    """
    b = system.rhs
    scale = max(float(np.linalg.norm(b)), 1.0)
    try:
        lu = spla.splu(system.matrix)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    residual = float(np.linalg.norm(system.matrix @ x - b)) / scale
    if residual > SOLVE_TOL:
        x = x + lu.solve(b - system.matrix @ x)
        residual = float(np.linalg.norm(system.matrix @ x - b)) / scale
    if residual > SOLVE_TOL:
        raise SolverError(
            f"trace solve residual {residual:.3e} above {SOLVE_TOL:.1e}", residual
        )
    return x


def recover(traces: np.ndarray, local_systems, mesh: Mesh,
            gamma: float) -> DiscreteSolution:
    """Back-substitute traces into every element's local system."""
    batch = stack_local_systems(local_systems)
    k = batch.k
    K1 = k + 1
    n_int = mesh.n_interior_faces
    face_rank = _face_rank(mesh)

    gdof = _global_dofs(batch, face_rank, n_int)
    t_loc = np.where(gdof >= 0, traces[np.clip(gdof, 0, None)], 0.0)
    b = batch.rhs_interior - np.einsum("eij,ej->ei", batch.B, t_loc)
    x = np.linalg.solve(batch.A, b[..., None])[..., 0]

    m = (k + 1) * (k + 2) // 2
    w = (k + 2) * (k + 3) // 2
    q = x[:, : 2 * m]
    y = x[:, 2 * m: 2 * m + w]
    p = x[:, 2 * m + w: 4 * m + w]
    z = x[:, 4 * m + w:]
    yhat = traces[: n_int * K1].reshape(n_int, K1)
    zhat = traces[n_int * K1:].reshape(n_int, K1)
    return DiscreteSolution(mesh, k, q, y, p, z, z / gamma, yhat, zhat)


def solve_problem(problem: ProblemData, n: int, k: int,
                  stab: StabilizationConfig | None = None,
                  rules: QuadratureSet | None = None,
                  mesh: Mesh | None = None) -> DiscreteSolution:
    """Build, condense, solve, and recover on the n x n mesh."""
    if mesh is None:
        mesh = build_uniform(n)
    assembler = HDGAssembler(mesh, problem, stab, k, rules)
    batch = assembler.local_systems()
    system = condense(batch, mesh, k)
    traces = solve_traces(system)
    return recover(traces, batch, mesh, problem.gamma)


def conservation_residuals(assembler: HDGAssembler,
                           solution: DiscreteSolution) -> tuple[float, float]:
    """Largest interior-face residual of the two flux conservation laws.

    Evaluates the numerical-trace jumps by direct quadrature against
    every face mode, independently of the condensed matrices.
    """
    a = assembler
    mesh, m = a.mesh, a.m
    rank = _face_rank(mesh)
    out = []
    for qc, yc, hc, tau, bn_sign in (
        (solution.q, solution.y, solution.yhat, a.t1v, 1.0),
        (solution.p, solution.z, solution.zhat, a.t2v, -1.0),
    ):
        qn = sum(
            np.einsum("ej,elqj->elq", qc[:, c * m:(c + 1) * m], a.Vf)
            * a.nrm[:, :, None, c]
            for c in range(2)
        )
        yf = np.einsum("ej,elqj->elq", yc, a.Wf)
        pmyv = np.einsum("elai,ei,qa->elq", a.Pf, yc, a.E)
        r = rank[a.face_ids]
        hvals = np.where(a.int_mask[..., None], hc[np.clip(r, 0, None)], 0.0)
        hv = np.einsum("ela,qa->elq", hvals, a.E)
        trace = qn + a.hinv * (pmyv - hv) + tau * (yf - hv) + bn_sign * a.bn * hv
        contrib = a.flen[..., None] * np.einsum("q,elq,qa->ela", a.wf, trace, a.E)
        acc = np.zeros((mesh.n_interior_faces, a.K1))
        sel = a.int_mask
        np.add.at(acc, r[sel], contrib[sel])
        out.append(float(np.abs(acc).max()) if acc.size else 0.0)
    return out[0], out[1]


def compute_cost(solution: DiscreteSolution, problem: ProblemData,
                 rules: QuadratureSet | None = None) -> float:
    """Discrete tracking cost 0.5|y - y_d|^2 + (gamma/2)|u|^2."""
    from .basis import TriBasis
    from .local import _element_points

    rule = (rules if rules is not None else default_rules(solution.k)).error
    W = TriBasis(solution.k + 1)
    Wv = W.eval(rule.points)
    X, detJ = _element_points(solution.mesh, rule.points)
    yv = np.einsum("ej,qj->eq", solution.y, Wv)
    uv = np.einsum("ej,qj->eq", solution.u, Wv)
    track = np.einsum("e,q,eq->", detJ, rule.weights, (yv - problem.y_d(X)) ** 2)
    penal = np.einsum("e,q,eq->", detJ, rule.weights, uv**2)
    return 0.5 * track + 0.5 * problem.gamma * penal
