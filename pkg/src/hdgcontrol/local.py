"""Element-local HDG assembly for the coupled optimality system.

Per element the interior unknowns are stacked as
``[q (2m) | y (w) | p (2m) | z (w)]`` with ``m = dim P^k`` and
``w = dim P^(k+1)``; the control is eliminated through ``u = z/gamma``.
Trace unknowns use a fixed three-face layout, ``[yhat | zhat]`` with
``k+1`` modes per face; entries that belong to boundary faces are folded
into the right-hand sides and left zero.

Face integrals always use the global face parametrization so both
elements sharing a face integrate against the same trace functions.  The
``1/h`` trace penalty uses the global mesh parameter.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .basis import EdgeBasis, QuadratureSet, TriBasis, default_rules
from .errors import LocalSingularityError, StabilizationError
from .mesh import FACE_INTERIOR, Mesh
from .problems import ProblemData

RCOND_FLOOR = 1e-13

FaceFn = Union[float, Callable[[np.ndarray], np.ndarray]]


def _as_face_fn(v: FaceFn) -> Callable[[np.ndarray], np.ndarray]:
    if callable(v):
        return v
    c = float(v)
    return lambda pts: np.full(pts.shape[:-1], c)


@dataclass(frozen=True)
class StabilizationConfig:
    """Face stabilization for the two fluxes.

    ``tau2`` is a constant or a function of position.  ``tau1`` defaults
    to ``tau2 + beta.n`` on each element side, which is the coupling the
    adjoint identity requires; passing an explicit function decouples the
    two (used to demonstrate what breaks without the coupling).

    Positivity needs ``tau2 + beta.n/2 > 0`` on every face.  The default
    constant keeps a wide margin for moderate convection and, on the
    built-in problems, lands the error constants close to the reference
    tables without delaying the asymptotic rates.
    """

    tau2: FaceFn = 4.0
    tau1: Optional[FaceFn] = None

    def tau2_values(self, pts: np.ndarray) -> np.ndarray:
        return _as_face_fn(self.tau2)(pts)

    def tau1_values(self, pts: np.ndarray, beta_n: np.ndarray) -> np.ndarray:
        if self.tau1 is None:
            return self.tau2_values(pts) + beta_n
        return _as_face_fn(self.tau1)(pts)


@dataclass(frozen=True)
class LocalSystem:
    """Dense element blocks coupling interior unknowns to face traces.

    ``A x + B t = rhs_interior`` are the interior equations and
    ``C x + D t = rhs_trace`` this element's share of the flux
    conservation equations; rows/columns of trace dofs on boundary faces
    are zero (their data already sits in the right-hand sides).
    """

    elem: int
    k: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    rhs_interior: np.ndarray
    rhs_trace: np.ndarray
    face_ids: np.ndarray
    interior_mask: np.ndarray


@dataclass(frozen=True)
class BatchedLocalSystems:
    """All element systems stacked along a leading axis."""

    elems: np.ndarray
    k: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    rhs_interior: np.ndarray
    rhs_trace: np.ndarray
    face_ids: np.ndarray
    interior_mask: np.ndarray

    def __len__(self) -> int:
        return self.elems.size

    def __getitem__(self, i: int) -> LocalSystem:
        return LocalSystem(int(self.elems[i]), self.k, self.A[i], self.B[i],
                           self.C[i], self.D[i], self.rhs_interior[i],
                           self.rhs_trace[i], self.face_ids[i],
                           self.interior_mask[i])


def stack_local_systems(systems) -> BatchedLocalSystems:
    """Stack a sequence of LocalSystem into the batched form."""
    if isinstance(systems, BatchedLocalSystems):
        return systems
    systems = list(systems)
    return BatchedLocalSystems(
        elems=np.array([s.elem for s in systems]),
        k=systems[0].k,
        A=np.stack([s.A for s in systems]),
        B=np.stack([s.B for s in systems]),
        C=np.stack([s.C for s in systems]),
        D=np.stack([s.D for s in systems]),
        rhs_interior=np.stack([s.rhs_interior for s in systems]),
        rhs_trace=np.stack([s.rhs_trace for s in systems]),
        face_ids=np.stack([s.face_ids for s in systems]),
        interior_mask=np.stack([s.interior_mask for s in systems]),
    )


class HDGAssembler:
    """Precomputed tables and element assembly for one (mesh, problem, k).

    Everything is vectorized over elements; the instance is read-only
    after construction and safe to share between threads.
    """

    def __init__(self, mesh: Mesh, problem: ProblemData,
                 stab: StabilizationConfig | None = None, k: int = 1,
                 rules: QuadratureSet | None = None):
        if k < 0:
            raise ValueError("polynomial degree k must be >= 0")
        self.mesh = mesh
        self.problem = problem
        self.stab = stab if stab is not None else StabilizationConfig()
        self.k = k
        self.rules = rules if rules is not None else default_rules(k)

        self.V = TriBasis(k)
        self.W = TriBasis(k + 1)
        self.M = EdgeBasis(k)
        self.m = self.V.dim
        self.w = self.W.dim
        self.n_interior = 2 * self.m + self.w  # per PDE pair member
        self.ni = 2 * (2 * self.m + self.w)
        self.K1 = k + 1
        self.nt = 6 * self.K1
        self.hinv = 1.0 / mesh.h

        verts, elems = mesh.vertices, mesh.elements
        v0 = verts[elems[:, 0]]
        self.J = np.stack([verts[elems[:, 1]] - v0, verts[elems[:, 2]] - v0], axis=-1)
        self.detJ = self.J[:, 0, 0] * self.J[:, 1, 1] - self.J[:, 0, 1] * self.J[:, 1, 0]
        self.Jinv = np.empty_like(self.J)
        self.Jinv[:, 0, 0] = self.J[:, 1, 1] / self.detJ
        self.Jinv[:, 0, 1] = -self.J[:, 0, 1] / self.detJ
        self.Jinv[:, 1, 0] = -self.J[:, 1, 0] / self.detJ
        self.Jinv[:, 1, 1] = self.J[:, 0, 0] / self.detJ
        self.v0 = v0

        # volume tables
        vol = self.rules.volume
        self.wq = vol.weights
        self.Vv = self.V.eval(vol.points)
        self.Wv = self.W.eval(vol.points)
        Vg = self.V.grad(vol.points)
        Wg = self.W.grad(vol.points)
        self.Xv = v0[:, None, :] + np.einsum("eij,qj->eqi", self.J, vol.points)
        self.GV = np.einsum("qid,edc->eqic", Vg, self.Jinv)
        self.GW = np.einsum("qid,edc->eqic", Wg, self.Jinv)
        self.beta_v = problem.beta(self.Xv)
        self.divb_v = problem.div_beta(self.Xv)

        # face tables (global parametrization of every face)
        face = self.rules.face
        self.wf = face.weights
        self.E = self.M.eval(face.points)
        fids = mesh.elem_faces
        va = verts[mesh.faces[fids, 0]]
        vb = verts[mesh.faces[fids, 1]]
        tq = face.points
        self.Xf = va[:, :, None, :] + tq[None, None, :, None] * (vb - va)[:, :, None, :]
        ref = np.einsum("ecd,elqd->elqc", self.Jinv, self.Xf - v0[:, None, None, :])
        self.Vf = self.V.eval(ref)
        self.Wf = self.W.eval(ref)

        p = verts[elems[:, [1, 2, 0]]]
        q = verts[elems[:, [2, 0, 1]]]
        d = q - p
        self.flen = np.linalg.norm(d, axis=-1)
        self.nrm = np.stack([d[..., 1], -d[..., 0]], axis=-1) / self.flen[..., None]
        self.int_mask = mesh.face_class[fids] == FACE_INTERIOR
        self.face_ids = fids

        self.beta_f = problem.beta(self.Xf)
        self.bn = np.einsum("elqc,elc->elq", self.beta_f, self.nrm)
        self.t2v = np.broadcast_to(self.stab.tau2_values(self.Xf), self.bn.shape)
        self.t1v = np.broadcast_to(self.stab.tau1_values(self.Xf, self.bn), self.bn.shape)

        # P_M restricted to each element face: volume coefficients -> face modes
        self.Pf = np.einsum("q,qa,elqi->elai", self.wf, self.E, self.Wf)

        self.Kv = np.einsum("q,qi,qj->ij", self.wq, self.Vv, self.Vv)
        self.Kw = np.einsum("q,qi,qj->ij", self.wq, self.Wv, self.Wv)

    # -- stabilization ------------------------------------------------

    def a2_margin(self) -> float:
        """min over element boundaries of tau1 - beta.n/2 (must be > 0)."""
        return float((self.t1v - 0.5 * self.bn).min())

    def validate_stabilization(self):
        margin = self.a2_margin()
        if margin <= 0.0:
            raise StabilizationError(
                f"stabilization violates positivity: min(tau1 - beta.n/2) = {margin:.3e}"
            )

    # -- local systems -------------------------------------------------

    def local_systems(self, elems: np.ndarray | None = None) -> BatchedLocalSystems:
        """Assemble the dense blocks of every requested element."""
        self.validate_stabilization()
        sel = np.arange(self.mesh.n_elements) if elems is None else np.atleast_1d(elems)
        m, w, K1 = self.m, self.w, self.K1
        ne = sel.size
        sq = slice(0, 2 * m)
        sy = slice(2 * m, 2 * m + w)
        sp = slice(2 * m + w, 4 * m + w)
        sz = slice(4 * m + w, 4 * m + 2 * w)

        detJ = self.detJ[sel]
        wq, Vv, Wv = self.wq, self.Vv, self.Wv
        GV, GW = self.GV[sel], self.GW[sel]
        beta_v, divb_v = self.beta_v[sel], self.divb_v[sel]
        Vf, Wf, E, wf = self.Vf[sel], self.Wf[sel], self.E, self.wf
        nrm, flen = self.nrm[sel], self.flen[sel]
        mi = self.int_mask[sel].astype(float)
        bn, t1v, t2v = self.bn[sel], self.t1v[sel], self.t2v[sel]
        Pf = self.Pf[sel]
        hinv, gamma = self.hinv, self.problem.gamma

        A = np.zeros((ne, self.ni, self.ni))
        B = np.zeros((ne, self.ni, self.nt))
        C = np.zeros((ne, self.nt, self.ni))
        D = np.zeros((ne, self.nt, self.nt))
        ri = np.zeros((ne, self.ni))
        rt = np.zeros((ne, self.nt))

        dJ = detJ[:, None, None]
        mass_v = dJ * self.Kv
        mass_w = dJ * self.Kw
        bGW = np.einsum("eqc,eqic->eqi", beta_v, GW)  # beta . grad(W basis)

        coef1 = bn - hinv - t1v   # multiplies yhat against state tests
        coef2 = bn + hinv + t2v   # multiplies zhat against adjoint tests

        for c in range(2):
            rc = slice(c * m, (c + 1) * m)          # q/r1 component rows & cols
            pc = slice(sp.start + c * m, sp.start + (c + 1) * m)
            A[:, rc, rc] += mass_v
            A[:, pc, pc] += mass_v
            div_c = np.einsum("q,qj,eqi->eij", wq, Wv, GV[..., c])
            A[:, rc, sy] -= dJ * div_c              # -(y, div r1)
            A[:, pc, sz] -= dJ * div_c              # -(z, div r2)
            grad_c = np.einsum("q,qj,eqi->eij", wq, Vv, GW[..., c])
            A[:, sy, rc] -= dJ * grad_c             # -(q, grad w1)
            A[:, sz, pc] -= dJ * grad_c             # -(p, grad w2)

        conv = np.einsum("q,qj,eqi->eij", wq, Wv, bGW)
        A[:, sy, sy] -= dJ * conv                   # -(beta y, grad w1)
        A[:, sz, sz] += dJ * conv                   # +(beta z, grad w2)
        divb = np.einsum("q,eq,qj,qi->eij", wq, divb_v, Wv, Wv)
        A[:, sy, sy] -= dJ * divb                   # -((div beta) y, w1)
        A[:, sy, sz] -= (dJ / gamma) * self.Kw      # control eliminated: -(z/gamma, w1)
        A[:, sz, sy] += mass_w                      # +(y, w2)

        for l in range(3):
            fl = (flen[:, l] * 1.0)[:, None, None]
            fl_mi = (flen[:, l] * mi[:, l])[:, None, None]
            ycols = slice(l * K1, (l + 1) * K1)
            zcols = slice(3 * K1 + l * K1, 3 * K1 + (l + 1) * K1)

            qn_w = np.einsum("q,eqj,eqi->eij", wf, Vf[:, l], Wf[:, l])
            pen1 = hinv * np.einsum("eaj,eai->eij", Pf[:, l], Pf[:, l]) \
                + np.einsum("q,eq,eqj,eqi->eij", wf, t1v[:, l], Wf[:, l], Wf[:, l])
            pen2 = hinv * np.einsum("eaj,eai->eij", Pf[:, l], Pf[:, l]) \
                + np.einsum("q,eq,eqj,eqi->eij", wf, t2v[:, l], Wf[:, l], Wf[:, l])
            A[:, sy, sy] += fl * pen1               # <(1/h P_M + tau1) y, w1>, all faces
            A[:, sz, sz] += fl * pen2

            vE = np.einsum("q,qa,eqi->eia", wf, E, Vf[:, l])
            wE1 = np.einsum("q,eq,qa,eqi->eia", wf, coef1[:, l], E, Wf[:, l])
            wE2 = np.einsum("q,eq,qa,eqi->eia", wf, coef2[:, l], E, Wf[:, l])
            EE1 = np.einsum("q,eq,qa,qb->eab", wf, coef1[:, l], E, E)
            EE2 = np.einsum("q,eq,qa,qb->eab", wf, coef2[:, l], E, E)
            t1E = np.einsum("q,eq,qa,eqj->eaj", wf, t1v[:, l], E, Wf[:, l])
            t2E = np.einsum("q,eq,qa,eqj->eaj", wf, t2v[:, l], E, Wf[:, l])

            for c in range(2):
                rc = slice(c * m, (c + 1) * m)
                pc = slice(sp.start + c * m, sp.start + (c + 1) * m)
                nc = nrm[:, l, c][:, None, None]
                A[:, sy, rc] += fl * nc * qn_w      # <q.n, w1>, all faces
                A[:, sz, pc] += fl * nc * qn_w      # <p.n, w2>
                B[:, rc, ycols] += fl_mi * nc * vE  # <yhat, r1.n>
                B[:, pc, zcols] += fl_mi * nc * vE  # <zhat, r2.n>
                vEn = np.einsum("eia->eai", vE)
                C[:, ycols, rc] += fl_mi * nc * vEn  # <q.n, mu1>
                C[:, zcols, pc] += fl_mi * nc * vEn  # <p.n, mu2>

            B[:, sy, ycols] += fl_mi * wE1          # <(b.n - 1/h - tau1) yhat, w1>
            B[:, sz, zcols] -= fl_mi * wE2          # -<(b.n + 1/h + tau2) zhat, w2>
            C[:, ycols, sy] += fl_mi * (hinv * Pf[:, l] + t1E)
            C[:, zcols, sz] += fl_mi * (hinv * Pf[:, l] + t2E)
            D[:, ycols, ycols] += fl_mi * EE1
            D[:, zcols, zcols] -= fl_mi * EE2

        # volume data
        ri[:, sy] += detJ[:, None] * np.einsum(
            "q,eq,qi->ei", wq, self.problem.f(self.Xv[sel]), Wv
        )
        ri[:, sz] += detJ[:, None] * np.einsum(
            "q,eq,qi->ei", wq, self.problem.y_d(self.Xv[sel]), Wv
        )

        # Dirichlet data on boundary faces: yhat := P_M g, zhat := 0
        bd = (~self.int_mask[sel]).astype(float)
        if bd.any():
            gq = self.problem.g(self.Xf[sel])
            gcoef = np.einsum("q,qa,elq->ela", wf, E, gq)
            gval = np.einsum("ela,qa->elq", gcoef, E)
            for l in range(3):
                fl_bd = flen[:, l] * bd[:, l]
                gv = gval[:, l]
                for c in range(2):
                    rc = slice(c * m, (c + 1) * m)
                    ri[:, rc] -= (fl_bd * nrm[:, l, c])[:, None] * np.einsum(
                        "q,eq,eqi->ei", wf, gv, Vf[:, l]
                    )
                ri[:, sy] -= fl_bd[:, None] * np.einsum(
                    "q,eq,eq,eqi->ei", wf, coef1[:, l], gv, Wf[:, l]
                )

        return BatchedLocalSystems(sel, self.k, A, B, C, D, ri, rt,
                                   self.face_ids[sel], self.int_mask[sel])

    # -- whole-mesh operator evaluation (property-test oracles) --------

    def _vol_vals(self, coef, table):
        return np.einsum("ej,qj->eq", coef, table)

    def _face_vals(self, coef, table):
        return np.einsum("ej,elqj->elq", coef, table)

    def _trace_vals(self, coef):
        """Trace coefficients on interior faces -> values on element faces."""
        rank = np.full(self.mesh.n_faces, -1, dtype=np.int64)
        rank[self.mesh.interior_faces] = np.arange(self.mesh.n_interior_faces)
        r = rank[self.face_ids]
        gathered = np.where(self.int_mask[..., None], coef[np.clip(r, 0, None)], 0.0)
        return np.einsum("ela,qa->elq", gathered, self.E)

    def _check_fields(self, q, y, traces):
        ne, nif = self.mesh.n_elements, self.mesh.n_interior_faces
        if q.shape != (ne, 2 * self.m) or y.shape != (ne, self.w) \
                or traces.shape != (nif, self.K1):
            raise ValueError("coefficient arrays do not match mesh and degree")

    def _bform(self, sol, test, tau, sign_beta, sign_hat):
        """Shared core of the two HDG operators.

        ``sign_beta`` is the sign of the convection volume term and
        ``sign_hat`` the sign of beta.n against the single-valued trace
        in the test-function row.
        """
        m = self.m
        (qc, yc, hc), (rc, wc, mc) = sol, test
        self._check_fields(qc, yc, hc)
        self._check_fields(rc, wc, mc)

        wq, detJ = self.wq, self.detJ
        qv = [self._vol_vals(qc[:, c * m:(c + 1) * m], self.Vv) for c in range(2)]
        rv = [self._vol_vals(rc[:, c * m:(c + 1) * m], self.Vv) for c in range(2)]
        rdiv = sum(
            np.einsum("ej,eqj->eq", rc[:, c * m:(c + 1) * m], self.GV[..., c])
            for c in range(2)
        )
        yv = self._vol_vals(yc, self.Wv)
        gw = np.einsum("ej,eqjc->eqc", wc, self.GW)
        wv = self._vol_vals(wc, self.Wv)

        total = np.einsum("e,q,eq->", detJ, wq, qv[0] * rv[0] + qv[1] * rv[1])
        total -= np.einsum("e,q,eq,eq->", detJ, wq, yv, rdiv)
        flux_like = np.stack(qv, axis=-1) + sign_beta * self.beta_v * yv[..., None]
        total -= np.einsum("e,q,eqc,eqc->", detJ, wq, flux_like, gw)
        if sign_beta > 0:
            total -= np.einsum("e,q,eq,eq,eq->", detJ, wq, self.divb_v, yv, wv)

        qf = [self._face_vals(qc[:, c * m:(c + 1) * m], self.Vf) for c in range(2)]
        rf = [self._face_vals(rc[:, c * m:(c + 1) * m], self.Vf) for c in range(2)]
        qn = sum(qf[c] * self.nrm[:, :, None, c] for c in range(2))
        rn = sum(rf[c] * self.nrm[:, :, None, c] for c in range(2))
        yf = self._face_vals(yc, self.Wf)
        wf_vals = self._face_vals(wc, self.Wf)
        pmy = np.einsum("elai,ei->ela", self.Pf, yc)
        pmyv = np.einsum("ela,qa->elq", pmy, self.E)
        hv = self._trace_vals(hc)
        muv = self._trace_vals(mc)
        mi = self.int_mask.astype(float)
        wgt_all = self.flen[..., None] * self.wf
        wgt_int = (self.flen * mi)[..., None] * self.wf

        total += (wgt_int * hv * rn).sum()
        total += (wgt_all * (qn + self.hinv * pmyv + tau * yf) * wf_vals).sum()
        total += (wgt_int * (sign_hat * self.bn - self.hinv - tau) * hv * wf_vals).sum()
        total -= (wgt_int * (qn + sign_hat * self.bn * hv
                             + self.hinv * (pmyv - hv) + tau * (yf - hv)) * muv).sum()
        return float(total)

    def b1(self, q, y, yhat, r1, w1, mu1) -> float:
        """State-side HDG operator evaluated as a scalar."""
        return self._bform((q, y, yhat), (r1, w1, mu1), self.t1v, 1.0, 1.0)

    def b2(self, p, z, zhat, r2, w2, mu2) -> float:
        """Adjoint-side HDG operator evaluated as a scalar."""
        return self._bform((p, z, zhat), (r2, w2, mu2), self.t2v, -1.0, -1.0)

    def _energy_rhs(self, v, w, mu, tau, half_bn_sign) -> float:
        m = self.m
        self._check_fields(v, w, mu)
        total = np.einsum(
            "e,q,eq->", self.detJ, self.wq,
            sum(self._vol_vals(v[:, c * m:(c + 1) * m], self.Vv) ** 2 for c in range(2))
        )
        wv = self._vol_vals(w, self.Wv)
        total -= 0.5 * np.einsum("e,q,eq,eq->", self.detJ, self.wq, self.divb_v, wv**2)

        wfv = self._face_vals(w, self.Wf)
        muv = self._trace_vals(mu)
        pmw = np.einsum("elai,ei->ela", self.Pf, w)
        rank = np.full(self.mesh.n_faces, -1, dtype=np.int64)
        rank[self.mesh.interior_faces] = np.arange(self.mesh.n_interior_faces)
        r = rank[self.face_ids]
        mu_modes = np.where(self.int_mask[..., None], mu[np.clip(r, 0, None)], 0.0)

        mi = self.int_mask.astype(float)
        bd = 1.0 - mi
        coef = tau + half_bn_sign * 0.5 * self.bn
        wgt = self.flen[..., None] * self.wf
        total += (wgt * coef * (wfv - muv) ** 2 * mi[..., None]).sum()
        total += (wgt * coef * wfv**2 * bd[..., None]).sum()
        total += self.hinv * (self.flen * ((pmw - mu_modes) ** 2).sum(-1) * mi).sum()
        total += self.hinv * (self.flen * (pmw**2).sum(-1) * bd).sum()
        return float(total)

    def b1_energy_rhs(self, v, w, mu) -> float:
        """Closed-form value of b1(v,w,mu; v,w,mu): squared-term sum."""
        return self._energy_rhs(v, w, mu, self.t1v, -1.0)

    def b2_energy_rhs(self, v, w, mu) -> float:
        return self._energy_rhs(v, w, mu, self.t2v, +1.0)


def assemble_element(mesh: Mesh, elem: int, problem: ProblemData,
                     stab: StabilizationConfig, k: int,
                     rules: QuadratureSet | None = None) -> LocalSystem:
    """Assemble the dense local system of one element."""
    if not 0 <= elem < mesh.n_elements:
        raise ValueError(f"element index {elem} out of range")
    asm = HDGAssembler(mesh, problem, stab, k, rules)
    return asm.local_systems(np.array([elem]))[0]


def b1_apply(assembler: HDGAssembler, q, y, yhat, r1, w1, mu1) -> float:
    return assembler.b1(q, y, yhat, r1, w1, mu1)


def b2_apply(assembler: HDGAssembler, p, z, zhat, r2, w2, mu2) -> float:
    return assembler.b2(p, z, zhat, r2, w2, mu2)


def check_rcond(A: np.ndarray, elems: np.ndarray) -> np.ndarray:
    """Invert the stacked local matrices, rejecting near-singular ones."""
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        sv = np.linalg.svd(A, compute_uv=False)
        rcond = sv[:, -1] / sv[:, 0]
        worst = int(np.argmin(rcond))
        raise LocalSingularityError(int(elems[worst]), float(rcond[worst])) from None
    norm_fwd = np.abs(A).sum(axis=1).max(axis=1)
    norm_inv = np.abs(Ainv).sum(axis=1).max(axis=1)
    rcond = 1.0 / (norm_fwd * norm_inv)
    bad = np.flatnonzero(rcond < RCOND_FLOOR)
    if bad.size:
        raise LocalSingularityError(int(elems[bad[0]]), float(rcond[bad[0]]))
    return Ainv


# -- L2 projections -------------------------------------------------------


def _element_points(mesh: Mesh, pts: np.ndarray):
    verts, elems = mesh.vertices, mesh.elements
    v0 = verts[elems[:, 0]]
    J = np.stack([verts[elems[:, 1]] - v0, verts[elems[:, 2]] - v0], axis=-1)
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    X = v0[:, None, :] + np.einsum("eij,qj->eqi", J, pts)
    return X, detJ


def project_volume(fn: Callable, degree: int, mesh: Mesh,
                   rule=None, vector: bool = False) -> np.ndarray:
    """Element-wise L2 projection onto P^degree (scalar) or [P^degree]^2.

    With the orthonormal pulled-back basis the element mass matrix is
    detJ times identity, so coefficients reduce to reference quadratures.
    Vector projections return [x-modes | y-modes] per element.
    """
    from .basis import tri_quadrature

    if rule is None:
        rule = tri_quadrature(min(2 * degree + 6, 20))
    basis = TriBasis(degree)
    vals = basis.eval(rule.points)
    X, _ = _element_points(mesh, rule.points)
    fx = fn(X)
    if vector:
        cx = np.einsum("q,eq,qi->ei", rule.weights, fx[..., 0], vals)
        cy = np.einsum("q,eq,qi->ei", rule.weights, fx[..., 1], vals)
        return np.concatenate([cx, cy], axis=1)
    return np.einsum("q,eq,qi->ei", rule.weights, fx, vals)


def project_face(fn: Callable, k: int, mesh: Mesh, rule=None) -> np.ndarray:
    """Face-wise L2 projection onto P^k along the global parametrization."""
    from .basis import edge_quadrature

    if rule is None:
        rule = edge_quadrature(min(2 * k + 6, 20))
    basis = EdgeBasis(k)
    E = basis.eval(rule.points)
    va = mesh.vertices[mesh.faces[:, 0]]
    vb = mesh.vertices[mesh.faces[:, 1]]
    X = va[:, None, :] + rule.points[None, :, None] * (vb - va)[:, None, :]
    return np.einsum("q,fq,qa->fa", rule.weights, fn(X), E)
