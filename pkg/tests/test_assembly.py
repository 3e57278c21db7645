from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from hdgcontrol import HDGAssembler, StabilizationConfig, build_uniform, \
    compute_cost, condense, conservation_residuals, example1, poly_debug, \
    project_face, project_volume, recover, solve_problem, solve_traces
from hdgcontrol.assembly import GlobalTraceSystem, _face_rank
from hdgcontrol.errors import SolverError


def zero_data_problem():
    base = example1()
    zero = lambda x: np.zeros(x.shape[:-1])
    return replace(base, name="zero", f=zero, g=zero, y_d=zero, exact=None)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_global_dimension_formula(n, k):
    mesh = build_uniform(n)
    asm = HDGAssembler(mesh, example1(), None, k)
    system = condense(asm.local_systems(), mesh, k)
    expected = 2 * mesh.n_interior_faces * (k + 1)
    assert system.dim == expected
    assert system.matrix.shape == (expected, expected)
    assert system.rhs.shape == (expected,)


def test_smallest_system_dimension():
    mesh = build_uniform(1)
    asm = HDGAssembler(mesh, example1(), None, 0)
    assert condense(asm.local_systems(), mesh, 0).dim == 2


def test_matrix_has_no_empty_rows_or_columns():
    mesh = build_uniform(4)
    asm = HDGAssembler(mesh, example1(), None, 1)
    system = condense(asm.local_systems(), mesh, 1)
    csr = system.matrix.tocsr()
    assert (np.diff(csr.indptr) > 0).all()
    csc = system.matrix.tocsc()
    assert (np.diff(csc.indptr) > 0).all()


def test_dof_map():
    mesh = build_uniform(2)
    asm = HDGAssembler(mesh, example1(), None, 1)
    system = condense(asm.local_systems(), mesh, 1)
    seen = set()
    for f in mesh.interior_faces:
        for var in ("yhat", "zhat"):
            for mode in range(2):
                seen.add(system.dof_index(int(f), var, mode))
    assert seen == set(range(system.dim))
    with pytest.raises(ValueError):
        system.dof_index(int(mesh.boundary_faces[0]), "yhat", 0)


def test_zero_data_gives_zero_rhs_and_solution():
    problem = zero_data_problem()
    mesh = build_uniform(2)
    asm = HDGAssembler(mesh, problem, None, 1)
    batch = asm.local_systems()
    system = condense(batch, mesh, 1)
    assert np.abs(system.rhs).max() == 0.0
    traces = solve_traces(system)
    assert np.abs(traces).max() == 0.0
    sol = recover(traces, batch, mesh, problem.gamma)
    for coef in (sol.q, sol.y, sol.p, sol.z, sol.u):
        assert np.abs(coef).max() <= 1e-9


@pytest.mark.parametrize("n", [2, 4])
@pytest.mark.parametrize("k", [0, 1])
def test_uniqueness(n, k):
    sol = solve_problem(zero_data_problem(), n, k)
    for coef in (sol.q, sol.y, sol.p, sol.z, sol.u, sol.yhat, sol.zhat):
        assert np.abs(coef).max() <= 1e-9


def test_solver_contract_on_random_system():
    rng = np.random.default_rng(5)
    n = 40
    dense = rng.standard_normal((n, n)) + n * np.eye(n)
    matrix = sp.csc_matrix(dense)
    rhs = rng.standard_normal(n)
    mesh = build_uniform(2)
    system = GlobalTraceSystem(matrix, rhs, _face_rank(mesh), 0, n // 2)
    x = solve_traces(system)
    assert np.linalg.norm(matrix @ x - rhs) / np.linalg.norm(rhs) <= 1e-10


@pytest.mark.parametrize("n", [1, 2, 4])
def test_poly_debug_recovery_is_exact(n):
    problem = poly_debug()
    mesh = build_uniform(n)
    sol = solve_problem(problem, n, 1, mesh=mesh)

    y_ref = project_volume(problem.exact.y, 2, mesh)
    q_ref = project_volume(lambda x: -problem.exact.grad_y(x), 1, mesh, vector=True)
    assert np.abs(sol.y - y_ref).max() < 1e-9
    assert np.abs(sol.q - q_ref).max() < 1e-9
    assert np.abs(sol.p).max() < 1e-9
    assert np.abs(sol.z).max() < 1e-9
    assert np.abs(sol.u).max() < 1e-9

    traces_ref = project_face(problem.exact.y, 1, mesh)[mesh.interior_faces]
    assert np.abs(sol.yhat - traces_ref).max() < 1e-9
    assert np.abs(sol.zhat).max() < 1e-9


def test_control_is_scaled_dual_state_exactly():
    sol = solve_problem(example1(), 4, 1)
    assert np.abs(sol.u - sol.z / 1.0).max() == 0.0


@pytest.mark.parametrize("k", [0, 1])
def test_flux_conservation(k):
    problem = example1()
    mesh = build_uniform(4)
    asm = HDGAssembler(mesh, problem, None, k)
    batch = asm.local_systems()
    traces = solve_traces(condense(batch, mesh, k))
    sol = recover(traces, batch, mesh, problem.gamma)
    r1, r2 = conservation_residuals(asm, sol)
    assert r1 <= 1e-9
    assert r2 <= 1e-9


def test_recovered_solution_satisfies_operator_equations():
    """b1/b2 applied to the solution against every basis test function
    reproduce the condensed optimality equations."""
    problem = example1()
    k = 1
    mesh = build_uniform(2)
    asm = HDGAssembler(mesh, problem, None, k)
    batch = asm.local_systems()
    traces = solve_traces(condense(batch, mesh, k))
    sol = recover(traces, batch, mesh, problem.gamma)

    ne, nif = mesh.n_elements, mesh.n_interior_faces
    m, w, K1 = asm.m, asm.w, asm.K1
    zero_v = np.zeros((ne, 2 * m))
    zero_w = np.zeros((ne, w))
    zero_m = np.zeros((nif, K1))

    wq, Xv = asm.wq, asm.Xv
    fv = problem.f(Xv)
    ydv = problem.y_d(Xv)
    uv = np.einsum("ej,qj->eq", sol.u, asm.Wv)
    yv = np.einsum("ej,qj->eq", sol.y, asm.Wv)
    gq = problem.g(asm.Xf)
    gcoef = np.einsum("q,qa,elq->ela", asm.wf, asm.E, gq)
    gval = np.einsum("ela,qa->elq", gcoef, asm.E)
    bd = (~asm.int_mask).astype(float)
    coef1 = asm.bn - asm.hinv - asm.t1v

    scale = max(1.0, max(np.abs(c).max() for c in (sol.q, sol.y, sol.p, sol.z)))
    worst = 0.0
    for e in range(ne):
        for j in range(2 * m):
            r1 = zero_v.copy()
            r1[e, j] = 1.0
            lhs = asm.b1(sol.q, sol.y, sol.yhat, r1, zero_w, zero_m)
            c = j // m
            rn = np.einsum("lq,l->lq", asm.Vf[e, :, :, j % m], asm.nrm[e, :, c])
            rhs = -(bd[e][:, None] * asm.flen[e][:, None] * asm.wf * gval[e] * rn).sum()
            worst = max(worst, abs(lhs - rhs))
            lhs2 = asm.b2(sol.p, sol.z, sol.zhat, r1, zero_w, zero_m)
            worst = max(worst, abs(lhs2))
        for j in range(w):
            w1 = zero_w.copy()
            w1[e, j] = 1.0
            lhs = asm.b1(sol.q, sol.y, sol.yhat, zero_v, w1, zero_m)
            rhs = asm.detJ[e] * (wq * (fv[e] + uv[e]) * asm.Wv[:, j]).sum()
            rhs -= (bd[e][:, None] * asm.flen[e][:, None] * asm.wf
                    * coef1[e] * gval[e] * asm.Wf[e, :, :, j]).sum()
            worst = max(worst, abs(lhs - rhs))
            lhs2 = asm.b2(sol.p, sol.z, sol.zhat, zero_v, w1, zero_m)
            rhs2 = asm.detJ[e] * (wq * (ydv[e] - yv[e]) * asm.Wv[:, j]).sum()
            worst = max(worst, abs(lhs2 - rhs2))
    for i in range(nif):
        for a in range(K1):
            mu = zero_m.copy()
            mu[i, a] = 1.0
            worst = max(worst, abs(asm.b1(sol.q, sol.y, sol.yhat, zero_v, zero_w, mu)))
            worst = max(worst, abs(asm.b2(sol.p, sol.z, sol.zhat, zero_v, zero_w, mu)))
    assert worst <= 1e-9 * scale


def test_cost_trivial_values():
    problem = poly_debug()
    mesh = build_uniform(2)
    sol = solve_problem(problem, 2, 1, mesh=mesh)
    # y_h equals y_d (both are x1) and u_h is zero
    assert compute_cost(sol, problem) == pytest.approx(0.0, abs=1e-28)

    one = project_volume(lambda x: np.ones(x.shape[:-1]), 2, mesh)
    bumped = replace(sol, u=one)
    gamma2 = replace(problem, gamma=2.0)
    assert compute_cost(bumped, gamma2) == pytest.approx(1.0, abs=1e-12)


def test_cost_converges_monotonically():
    problem = example1()
    costs = [compute_cost(solve_problem(problem, n, 1), problem)
             for n in (2, 4, 8, 16)]
    ref = compute_cost(solve_problem(problem, 32, 1), problem)
    gaps = [abs(c - ref) for c in costs]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_solver_failure_reports_residual():
    mesh = build_uniform(1)
    singular = sp.csc_matrix((2, 2))
    system = GlobalTraceSystem(singular, np.ones(2), _face_rank(mesh), 0, 1)
    with pytest.raises(SolverError):
        solve_traces(system)
