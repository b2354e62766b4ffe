"""Element-local DDR operators on the discrete rotation/displacement spaces.

All operators are dense matrices acting on local DOF vectors and producing
coefficients against the orthonormal element bases. Vector-valued coefficient
layout is component-major: [all x-component coefficients, all y-component].

Sign conventions (see mesh.py): omega_TE * n_E is the outward normal and
omega_TE = +1 when t_E runs counterclockwise around the element, so
omega_TE * t_E is always the counterclockwise tangent. The boundary terms of
the scalar rotor and of the rotation potential are written accordingly:

    int_T R_T eta q  = int_T eta_R . rot q + sum_E omega_TE int_E (eta_E.t_E) q
    int_T P_T eta . (tau + rot q)
        = int_T eta_cR . tau + int_T R_T eta q - sum_E omega_TE int_E (eta_E.t_E) q

which with these orientations reproduce the usual integration-by-parts
identity int_T rot(eta) q = int_T eta . rot q + oint_{ccw} (eta.t) q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import SingularLocalSystem
from .polyspace import ElementContext, dim_P, dim_croly, dim_roly
from .spaces import Discretization

_COND_LIMIT = 1e12


@dataclass
class LocalOperatorPack:
    element_id: int
    k: int
    n_theta: int
    n_u: int
    # displacement side
    trace: list[np.ndarray]          # per local edge: (k+2, n_u)
    GT: np.ndarray                   # (2 np_k, n_u)
    PU: np.ndarray                   # (np_{k+1}, n_u)
    # rotation side
    RT: np.ndarray                   # (np_k, n_theta)
    PT: np.ndarray                   # (2 np_k, n_theta)
    M_theta: np.ndarray              # (n_theta, n_theta) local L2 product
    S_theta: np.ndarray              # stabilisation part of M_theta
    # projections from vP^k coefficients onto Roly^{k-1} / cRoly^k
    proj_roly: np.ndarray            # (n_roly, 2 np_k)
    proj_croly: np.ndarray           # (n_croly_k, 2 np_k)
    # element-basis x edge-basis cross masses, per local edge: (dim_P(k+2), k+2)
    scalar_cross: list[np.ndarray]


def _theta_slices(ctx: ElementContext):
    k = ctx.k
    n_roly, n_croly = dim_roly(k - 1), dim_croly(k)
    elem_dim = n_roly + n_croly
    sl_R = slice(0, n_roly)
    sl_cR = slice(n_roly, elem_dim)
    tang, norm = [], []
    for j in range(len(ctx.edges)):
        base = elem_dim + j * 2 * (k + 1)
        tang.append(slice(base, base + k + 1))
        norm.append(slice(base + k + 1, base + 2 * (k + 1)))
    n_theta = elem_dim + len(ctx.edges) * 2 * (k + 1)
    return sl_R, sl_cR, tang, norm, n_theta


def _u_layout(ctx: ElementContext):
    k = ctx.k
    nc = dim_P(k - 1)
    n_edges = len(ctx.edges)
    moments = [slice(nc + j * k, nc + (j + 1) * k) for j in range(n_edges)]
    vertex0 = nc + n_edges * k
    n_u = vertex0 + len(ctx.element.vertices)
    return nc, moments, vertex0, n_u


def build_local_pack(ctx: ElementContext) -> LocalOperatorPack:
    k = ctx.k
    w = ctx.qweights
    np_k, np_k1 = dim_P(k), dim_P(k + 1)
    phi = ctx.phi
    grad = ctx.grad
    rot = np.stack([grad[..., 1], -grad[..., 0]], axis=-1)

    sl_R, sl_cR, sl_t, sl_n, n_theta = _theta_slices(ctx)
    nc, sl_m, vertex0, n_u = _u_layout(ctx)
    n_roly, n_croly = dim_roly(k - 1), dim_croly(k)

    # --- edge trace matrices and scalar cross masses
    trace: list[np.ndarray] = []
    cross: list[np.ndarray] = []
    for j, led in enumerate(ctx.edges):
        ec = led.ctx
        tr = np.zeros((k + 2, n_u))
        tr[:, sl_m[j]] = ec.trace[:, :k]
        tr[:, vertex0 + led.local_vertices[0]] = ec.trace[:, k]
        tr[:, vertex0 + led.local_vertices[1]] = ec.trace[:, k + 1]
        trace.append(tr)
        cross.append(np.einsum("q,qm,qc->mc", ec.weights, led.phi, ec.psi))

    # --- transverse displacement gradient G_T
    GT = np.zeros((2 * np_k, n_u))
    for a in range(2):
        if nc:
            GT[a * np_k:(a + 1) * np_k, :nc] = -np.einsum(
                "q,qi,qj->ij", w, grad[:, :np_k, a], phi[:, :nc])
        for j, led in enumerate(ctx.edges):
            GT[a * np_k:(a + 1) * np_k, :] += led.n_out[a] * (
                cross[j][:np_k] @ trace[j])

    # --- displacement reconstruction P_U (tested against cRoly^{k+2})
    div_cr = ctx.croly.eval_div(ctx.qpoints)
    lhs = np.einsum("q,qj,qi->ji", w, div_cr, phi[:, :np_k1])
    rhs = np.zeros((np_k1, n_u))
    cr_on_vpk = np.einsum("q,qja,qi->jai", w, ctx.croly_vals, phi[:, :np_k]
                          ).reshape(np_k1, 2 * np_k)
    rhs -= cr_on_vpk @ GT
    for j, led in enumerate(ctx.edges):
        cr_edge = ctx.croly.eval(led.ctx.points)
        cr_n = np.einsum("q,qja,a,qc->jc", led.ctx.weights, cr_edge,
                         led.n_out, led.ctx.psi)
        rhs += cr_n @ trace[j]
    if np.linalg.cond(lhs) > _COND_LIMIT:
        raise SingularLocalSystem(
            f"element {ctx.element.id}: div cRoly^{{k+2}} -> P^{{k+1}} map ill-conditioned")
    PU = np.linalg.solve(lhs, rhs)

    # --- scalar rotor R_T
    RT = np.zeros((np_k, n_theta))
    if n_roly:
        RT[:, sl_R] = np.einsum("q,qma,qra->mr", w, rot[:, :np_k], ctx.roly_vals)
    for j, led in enumerate(ctx.edges):
        RT[:, sl_t[j]] += led.omega * cross[j][:np_k, :k + 1]

    # --- rotation potential P_T: square system over cRoly^k + rot P^{k+1}
    n_tests = n_croly + np_k1 - 1
    assert n_tests == 2 * np_k
    A = np.zeros((n_tests, 2 * np_k))
    B = np.zeros((n_tests, n_theta))
    if n_croly:
        A[:n_croly] = np.einsum("q,qra,qi->rai", w,
                                ctx.croly_vals[:, :n_croly], phi[:, :np_k]
                                ).reshape(n_croly, 2 * np_k)
        B[:n_croly, sl_cR] = np.eye(n_croly)
    A[n_croly:] = np.einsum("q,qma,qi->mai", w, rot[:, 1:np_k1], phi[:, :np_k]
                            ).reshape(np_k1 - 1, 2 * np_k)
    B[n_croly:n_croly + np_k - 1] += RT[1:np_k]
    for j, led in enumerate(ctx.edges):
        B[n_croly:, sl_t[j]] -= led.omega * cross[j][1:np_k1, :k + 1]
    if np.linalg.cond(A) > _COND_LIMIT:
        raise SingularLocalSystem(
            f"element {ctx.element.id}: rotation potential system ill-conditioned")
    PT = np.linalg.solve(A, B)

    # --- local DDR L2 product on the rotation space
    S = np.zeros((n_theta, n_theta))
    for j, led in enumerate(ctx.edges):
        ec = led.ctx
        t = ec.edge.tangent
        # tangential trace of P_T eta on the edge, in the edge family
        pt_edge = np.einsum("qm,mn->qn", led.phi[:, :np_k],
                            t[0] * PT[:np_k] + t[1] * PT[np_k:])
        w1 = np.einsum("q,qc,qn->cn", ec.weights, ec.psi[:, :k + 1], pt_edge)
        w1[:, sl_t[j]] -= np.eye(k + 1)
        S += ec.edge.length * (w1.T @ w1)
    M = PT.T @ PT + S

    # --- subspace projections of vP^k fields (used by the global gradient)
    proj_roly = np.einsum("q,qra,qi->rai", w, ctx.roly_vals, phi[:, :np_k]
                          ).reshape(n_roly, 2 * np_k) if n_roly else np.zeros((0, 2 * np_k))
    proj_croly = A[:n_croly].copy()

    return LocalOperatorPack(
        element_id=ctx.element.id, k=k, n_theta=n_theta, n_u=n_u,
        trace=trace, GT=GT, PU=PU, RT=RT, PT=PT,
        M_theta=0.5 * (M + M.T), S_theta=0.5 * (S + S.T),
        proj_roly=proj_roly, proj_croly=proj_croly, scalar_cross=cross)


def build_packs(disc: Discretization) -> list[LocalOperatorPack]:
    return [build_local_pack(ctx) for ctx in disc.elem_ctxs]


def build_global_gradient(disc: Discretization, packs: list[LocalOperatorPack]) -> sps.csr_matrix:
    """Global discrete gradient: rotation-space coefficients of the gradient
    of a displacement vector. Element blocks are the Roly/cRoly projections
    of G_T; edge blocks are the tangential derivative of the skeleton trace,
    exact from the trace coefficients."""
    sp_t, sp_u = disc.theta_space, disc.u_space
    k = disc.k
    rows, cols, vals = [], [], []

    def scatter(r_idx, c_idx, block):
        if block.size == 0:
            return
        r, c = np.meshgrid(r_idx, c_idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.asarray(block).ravel())

    for ctx, pack in zip(disc.elem_ctxs, packs):
        el = ctx.element
        u_idx = sp_u.local_dofs(el)
        off = sp_t.elem_offset(el.id)
        if sp_t.n_roly:
            scatter(np.arange(off, off + sp_t.n_roly), u_idx, pack.proj_roly @ pack.GT)
        if sp_t.n_croly:
            scatter(np.arange(off + sp_t.n_roly, off + sp_t.elem_dim), u_idx,
                    pack.proj_croly @ pack.GT)

    for ec in disc.edge_ctxs:
        e = ec.edge
        deriv = (ec.dmat @ ec.trace)[:k + 1]
        u_cols = np.concatenate([
            np.arange(sp_u.edge_offset(e.id), sp_u.edge_offset(e.id) + k),
            [sp_u.vertex_offset(e.vertices[0]), sp_u.vertex_offset(e.vertices[1])],
        ]).astype(int)
        scatter(sp_t.edge_tangential_slots(e.id), u_cols, deriv)

    if rows:
        data = (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols)))
    else:
        data = (np.zeros(0), (np.zeros(0, dtype=int), np.zeros(0, dtype=int)))
    return sps.coo_matrix(data, shape=(sp_t.dim, sp_u.dim)).tocsr()


def assemble_theta_product(disc: Discretization, packs: list[LocalOperatorPack]) -> sps.csr_matrix:
    """Global DDR L2 product matrix on the rotation space."""
    sp_t = disc.theta_space
    rows, cols, vals = [], [], []
    for ctx, pack in zip(disc.elem_ctxs, packs):
        idx = sp_t.local_dofs(ctx.element)
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(pack.M_theta.ravel())
    data = (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols)))
    return sps.coo_matrix(data, shape=(sp_t.dim, sp_t.dim)).tocsr()
