"""HHO machinery on the discrete rotation space.

The discrete rotation vector is embedded into the hybrid space (element
polynomial, edge polynomials) through its rotation potential, after which the
standard elasticity constructions apply: a full/symmetric tensor gradient and
divergence, a degree k+1 strain reconstruction fixed by skew-symmetry and
average closures, and a least-squares edge stabilisation built from
difference operators. For k = 0 an extra jump penalisation couples the
per-element reconstructions across edges.

Tensor coefficient layout: row blocks (1,1), (1,2), (2,1), (2,2), each a set
of scalar coefficients; the symmetric gradient is stored as [(1,1), sym(1,2),
(2,2)] with contraction metric (1, 2, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import SingularLocalSystem
from .operators import LocalOperatorPack, _theta_slices
from .polyspace import ElementContext, dim_P, dim_croly, dim_roly
from .spaces import Discretization

_TINY = 1e-300


@dataclass
class HHOLocalPack:
    element_id: int
    k: int
    GG: np.ndarray    # (4 np_k, n_theta) full tensor gradient
    GS: np.ndarray    # (3 np_k, n_theta) symmetric gradient [11, 12, 22]
    DD: np.ndarray    # (np_k, n_theta) divergence
    P1: np.ndarray    # (2 np_{k+1}, n_theta) strain reconstruction
    sT: np.ndarray    # (n_theta, n_theta) stabilisation bilinear form


def build_embedding(ctx: ElementContext, pack: LocalOperatorPack) -> np.ndarray:
    """Injection of the rotation DOFs into the hybrid space
    (P_T eta, (eta_E)_E); one-to-one by the potential projection identities."""
    k = ctx.k
    np_k = dim_P(k)
    _, _, sl_t, sl_n, n_theta = _theta_slices(ctx)
    n_edge = len(ctx.edges) * 2 * (k + 1)
    out = np.zeros((2 * np_k + n_edge, n_theta))
    out[:2 * np_k] = pack.PT
    row = 2 * np_k
    for j in range(len(ctx.edges)):
        out[row:row + k + 1, sl_t[j]] = np.eye(k + 1)
        out[row + k + 1:row + 2 * (k + 1), sl_n[j]] = np.eye(k + 1)
        row += 2 * (k + 1)
    return out


def build_tensor_gradient(ctx: ElementContext, pack: LocalOperatorPack):
    """Full tensor gradient, its symmetric part and the divergence."""
    k = ctx.k
    np_k = dim_P(k)
    w = ctx.qweights
    _, _, sl_t, sl_n, n_theta = _theta_slices(ctx)

    GG = np.zeros((4, np_k, n_theta))
    pt_blocks = [pack.PT[:np_k], pack.PT[np_k:]]
    for a in range(2):
        for b in range(2):
            vb = np.einsum("q,qm,qi->mi", w, ctx.grad[:, :np_k, b],
                           ctx.phi[:, :np_k])
            GG[2 * a + b] -= vb @ pt_blocks[a]
    for j, led in enumerate(ctx.edges):
        cs = pack.scalar_cross[j][:np_k, :k + 1]
        t, n = led.ctx.edge.tangent, led.ctx.edge.normal
        for a in range(2):
            for b in range(2):
                GG[2 * a + b][:, sl_t[j]] += led.n_out[b] * t[a] * cs
                GG[2 * a + b][:, sl_n[j]] += led.n_out[b] * n[a] * cs
    GG = GG.reshape(4 * np_k, n_theta)

    g11, g12 = GG[:np_k], GG[np_k:2 * np_k]
    g21, g22 = GG[2 * np_k:3 * np_k], GG[3 * np_k:]
    GS = np.vstack([g11, 0.5 * (g12 + g21), g22])
    DD = g11 + g22
    return GG, GS, DD


def build_reconstruction(ctx: ElementContext, pack: LocalOperatorPack) -> np.ndarray:
    """Degree k+1 strain reconstruction: symmetric-gradient moments plus the
    skew-average closure and the translation closure (element average for
    k >= 1, boundary average for k = 0)."""
    k = ctx.k
    np_k, np_k1 = dim_P(k), dim_P(k + 1)
    w = ctx.qweights
    _, _, sl_t, sl_n, n_theta = _theta_slices(ctx)
    grad = ctx.grad[:, :np_k1, :]
    hess = ctx.hess[:, :np_k1, :]
    lap = hess[..., 0] + hess[..., 2]
    pt_blocks = [pack.PT[:np_k], pack.PT[np_k:]]

    # stiffness of the symmetric gradient on vP^{k+1}
    k1 = np.einsum("q,qja,qma->jm", w, grad, grad)
    k2 = np.einsum("q,qmb,qja->bjam", w, grad, grad)
    K = 0.5 * (np.einsum("jm,ab->bjam", k1, np.eye(2)) + k2)
    K = K.reshape(2 * np_k1, 2 * np_k1)

    rhs = np.zeros((2, np_k1, n_theta))
    hess_ab = [[hess[..., 0], hess[..., 1]], [hess[..., 1], hess[..., 2]]]
    for b in range(2):
        for a in range(2):
            wab = 0.5 * np.einsum(
                "q,qj,qi->ji", w,
                (lap if a == b else 0.0) + hess_ab[a][b], ctx.phi[:, :np_k])
            rhs[b] -= wab @ pt_blocks[a]
    for j, led in enumerate(ctx.edges):
        ec = led.ctx
        t, n = ec.edge.tangent, ec.edge.normal
        ge = led.grad[:, :np_k1, :]
        gn1 = ge @ led.n_out                       # grad psi_j . n_out
        gt = np.einsum("qja,a->qj", ge, t)
        gnE = np.einsum("qja,a->qj", ge, n)
        for b in range(2):
            tang = 0.5 * (t[b] * gn1 + led.n_out[b] * gt)
            norm = 0.5 * (n[b] * gn1 + led.n_out[b] * gnE)
            rhs[b][:, sl_t[j]] += np.einsum("q,qj,qc->jc", ec.weights, tang,
                                            ec.psi[:, :k + 1])
            rhs[b][:, sl_n[j]] += np.einsum("q,qj,qc->jc", ec.weights, norm,
                                            ec.psi[:, :k + 1])
    rhs = rhs.reshape(2 * np_k1, n_theta)

    # skew closure: int (d2 p1 - d1 p2)/2 fixed by the edge unknowns
    g_int = ctx.integrate(grad)                    # (np_k1, 2)
    skew_row = 0.5 * np.concatenate([g_int[:, 1], -g_int[:, 0]])
    skew_rhs = np.zeros(n_theta)
    for j, led in enumerate(ctx.edges):
        ec = led.ctx
        psi_int = ec.weights @ ec.psi[:, :k + 1]
        skew_rhs[sl_t[j]] += -0.5 * led.omega * psi_int

    # translation closure
    clos = np.zeros((2, 2 * np_k1))
    clos_rhs = np.zeros((2, n_theta))
    if k >= 1:
        phi_int = ctx.integrate(ctx.phi[:, :np_k1])
        for a in range(2):
            clos[a, a * np_k1:(a + 1) * np_k1] = phi_int
            clos_rhs[a] = phi_int[:np_k] @ pt_blocks[a]
    else:
        bnd_int = np.zeros(np_k1)
        for j, led in enumerate(ctx.edges):
            bnd_int += led.ctx.weights @ led.phi[:, :np_k1]
        for a in range(2):
            clos[a, a * np_k1:(a + 1) * np_k1] = bnd_int
            for j, led in enumerate(ctx.edges):
                ec = led.ctx
                psi_int = ec.weights @ ec.psi[:, :k + 1]
                t, n = ec.edge.tangent, ec.edge.normal
                clos_rhs[a][sl_t[j]] += t[a] * psi_int
                clos_rhs[a][sl_n[j]] += n[a] * psi_int

    lhs = np.vstack([K, skew_row[None, :], clos])
    rhs_full = np.vstack([rhs, skew_rhs[None, :], clos_rhs])
    scale = np.maximum(np.abs(lhs).max(axis=1), _TINY)
    sol, _, rank, _ = np.linalg.lstsq(lhs / scale[:, None],
                                      rhs_full / scale[:, None], rcond=None)
    if rank < 2 * np_k1:
        raise SingularLocalSystem(
            f"element {ctx.element.id}: strain reconstruction rank deficient")
    return sol


def local_theta_interpolation(ctx: ElementContext) -> np.ndarray:
    """Interpolation of a vP^{k+1}(T) field (component-major coefficients)
    onto the local rotation DOFs."""
    k = ctx.k
    np_k1 = dim_P(k + 1)
    w = ctx.qweights
    sl_R, sl_cR, sl_t, sl_n, n_theta = _theta_slices(ctx)
    n_roly, n_croly = dim_roly(k - 1), dim_croly(k)
    J = np.zeros((n_theta, 2 * np_k1))
    if n_roly:
        J[sl_R] = np.einsum("q,qra,qm->ram", w, ctx.roly_vals,
                            ctx.phi[:, :np_k1]).reshape(n_roly, 2 * np_k1)
    if n_croly:
        J[sl_cR] = np.einsum("q,qra,qm->ram", w, ctx.croly_vals[:, :n_croly],
                             ctx.phi[:, :np_k1]).reshape(n_croly, 2 * np_k1)
    for j, led in enumerate(ctx.edges):
        ec = led.ctx
        cs = np.einsum("q,qm,qc->cm", ec.weights, led.phi[:, :np_k1],
                       ec.psi[:, :k + 1])
        t, n = ec.edge.tangent, ec.edge.normal
        J[sl_t[j]] = np.concatenate([t[0] * cs, t[1] * cs], axis=1)
        J[sl_n[j]] = np.concatenate([n[0] * cs, n[1] * cs], axis=1)
    return J


def _edge_restriction(ctx: ElementContext, pack: LocalOperatorPack, j: int,
                      n_members: int, n_coef: int) -> np.ndarray:
    """Frame coefficients [tangential, normal] on edge j of a vector
    polynomial given by component-major coefficients over n_coef scalars."""
    cs = pack.scalar_cross[j][:n_coef, :n_members]
    t = ctx.edges[j].ctx.edge.tangent
    n = ctx.edges[j].ctx.edge.normal
    top = np.concatenate([t[0] * cs.T, t[1] * cs.T], axis=1)
    bot = np.concatenate([n[0] * cs.T, n[1] * cs.T], axis=1)
    return np.vstack([top, bot])


def build_stabilisation(ctx: ElementContext, pack: LocalOperatorPack,
                        P1: np.ndarray) -> np.ndarray:
    """s_T from the difference operators: delta_T re-interpolates the defect
    of the reconstruction against the potential, delta_TE the defect against
    the edge unknowns; weight h_T^{-1} per edge."""
    k = ctx.k
    np_k, np_k1 = dim_P(k), dim_P(k + 1)
    _, _, sl_t, sl_n, n_theta = _theta_slices(ctx)
    pad = np.zeros((2 * np_k1, 2 * np_k))
    pad[:np_k, :np_k] = np.eye(np_k)
    pad[np_k1:np_k1 + np_k, np_k:] = np.eye(np_k)
    defect = P1 - pad @ pack.PT                     # vP^{k+1} coefficients
    delta_T = pack.PT @ (local_theta_interpolation(ctx) @ defect)
    sT = np.zeros((n_theta, n_theta))
    for j in range(len(ctx.edges)):
        rest_k1 = _edge_restriction(ctx, pack, j, k + 1, np_k1)
        rest_k = _edge_restriction(ctx, pack, j, k + 1, np_k)
        picks = np.zeros((2 * (k + 1), n_theta))
        picks[:k + 1, sl_t[j]] = np.eye(k + 1)
        picks[k + 1:, sl_n[j]] = np.eye(k + 1)
        delta_TE = rest_k1 @ P1 - picks
        diff = delta_TE - rest_k @ delta_T
        sT += (diff.T @ diff) / ctx.element.diameter
    return 0.5 * (sT + sT.T)


def build_hho_pack(ctx: ElementContext, pack: LocalOperatorPack) -> HHOLocalPack:
    GG, GS, DD = build_tensor_gradient(ctx, pack)
    P1 = build_reconstruction(ctx, pack)
    sT = build_stabilisation(ctx, pack, P1)
    return HHOLocalPack(ctx.element.id, ctx.k, GG, GS, DD, P1, sT)


def build_hho_packs(disc: Discretization, packs: list[LocalOperatorPack]) -> list[HHOLocalPack]:
    return [build_hho_pack(ctx, pack) for ctx, pack in zip(disc.elem_ctxs, packs)]


def build_jump_penalisation(disc: Discretization, packs: list[LocalOperatorPack],
                            hho_packs: list[HHOLocalPack],
                            edge_ids=None) -> sps.csr_matrix:
    """k = 0 jump bilinear form: h_E^{-1} integrals of the jumps of the p^1
    reconstructions over edges (the trace itself on boundary edges)."""
    if disc.k != 0:
        raise ValueError("jump penalisation is defined for k = 0 only")
    sp_t = disc.theta_space
    np_1 = dim_P(1)
    mesh = disc.mesh
    if edge_ids is None:
        edge_ids = range(mesh.n_edges)
    rows, cols, vals = [], [], []
    for eid in edge_ids:
        edge = mesh.edges[eid]
        mats, dofs = [], []
        for t_id in sorted(edge.elements):
            ctx = disc.elem_ctxs[t_id]
            j = ctx.element.edges.index(eid)
            rest = _edge_restriction(ctx, packs[t_id], j, disc.k + 2, np_1)
            mats.append(rest @ hho_packs[t_id].P1)
            dofs.append(sp_t.local_dofs(ctx.element))
        if len(mats) == 2:
            big = np.concatenate([mats[0], -mats[1]], axis=1)
            idx = np.concatenate([dofs[0], dofs[1]])
        else:
            big, idx = mats[0], dofs[0]
        block = (big.T @ big) / edge.length
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(block.ravel())
    if rows:
        data = (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols)))
    else:
        data = (np.zeros(0), (np.zeros(0, dtype=int), np.zeros(0, dtype=int)))
    return sps.coo_matrix(data, shape=(sp_t.dim, sp_t.dim)).tocsr()
