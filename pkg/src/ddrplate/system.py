"""Global assembly, boundary conditions, solve, norms and errors.

The expensive, material-independent pieces (symmetric-gradient and
divergence stiffness, stabilisation + jump matrix, DDR L2 product, global
gradient) are assembled once per (mesh, degree) and recombined with scalar
material factors afterwards, so thickness and material sweeps reuse all
local constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .errors import SolverFailure, ZeroNormError
from .hho import HHOLocalPack, build_hho_packs, build_jump_penalisation
from .operators import (LocalOperatorPack, assemble_theta_product, build_packs,
                        build_global_gradient)
from .polyspace import dim_P
from .spaces import (Discretization, ThetaVector, UVector, boundary_dof_sets)

_GS_METRIC = np.array([1.0, 2.0, 1.0])   # contraction weights for [11, 12, 22]


@dataclass(frozen=True)
class MaterialParams:
    """Plate material: Young modulus, Poisson ratio, thickness and shear
    correction factor, with the derived bending/shear coefficients."""
    E: float = 1.0
    nu: float = 0.3
    t: float = 0.1
    kappa0: float = 5.0 / 6.0

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError("Young modulus must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 1/2)")
        if not 0.0 < self.t < 1.0:
            raise ValueError("thickness must lie in (0, 1)")
        if self.kappa0 <= 0:
            raise ValueError("shear correction factor must be positive")

    @property
    def beta0(self) -> float:
        return self.E / (12.0 * (1.0 + self.nu))

    @property
    def beta1(self) -> float:
        return self.E * self.nu / (12.0 * (1.0 - self.nu ** 2))

    @property
    def kappa(self) -> float:
        return self.kappa0 * self.E / (2.0 * (1.0 + self.nu))

    @property
    def mu(self) -> float:
        return min(self.kappa, self.beta0)

    @property
    def shear_over_t2(self) -> float:
        return self.kappa / self.t ** 2


@dataclass
class SolveReport:
    residual: float
    n_free: int
    symmetric_defect: float
    condition_flag: bool = False
    extras: dict = field(default_factory=dict)


class PlateSystem:
    """Material-independent discrete operators for one mesh and degree."""

    def __init__(self, disc: Discretization,
                 packs: list[LocalOperatorPack] | None = None,
                 hho_packs: list[HHOLocalPack] | None = None):
        self.disc = disc
        self.packs = packs if packs is not None else build_packs(disc)
        self.hho_packs = (hho_packs if hho_packs is not None
                          else build_hho_packs(disc, self.packs))
        sp_t, sp_u = disc.theta_space, disc.u_space
        self.n_theta, self.n_u = sp_t.dim, sp_u.dim

        rows, cols, gs_vals, s_vals, d_vals = [], [], [], [], []
        for ctx, hho in zip(disc.elem_ctxs, self.hho_packs):
            idx = sp_t.local_dofs(ctx.element)
            np_k = dim_P(disc.k)
            gs = hho.GS
            h_gs = sum(_GS_METRIC[b] * gs[b * np_k:(b + 1) * np_k].T
                       @ gs[b * np_k:(b + 1) * np_k] for b in range(3))
            h_d = hho.DD.T @ hho.DD
            r, c = np.meshgrid(idx, idx, indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            gs_vals.append(h_gs.ravel())
            s_vals.append(hho.sT.ravel())
            d_vals.append(h_d.ravel())
        ij = (np.concatenate(rows), np.concatenate(cols))
        shape = (self.n_theta, self.n_theta)
        self.H_gs = sps.coo_matrix((np.concatenate(gs_vals), ij), shape=shape).tocsr()
        self.H_sj = sps.coo_matrix((np.concatenate(s_vals), ij), shape=shape).tocsr()
        self.H_d = sps.coo_matrix((np.concatenate(d_vals), ij), shape=shape).tocsr()
        if disc.k == 0:
            self.H_sj = self.H_sj + build_jump_penalisation(
                disc, self.packs, self.hho_packs)
        self.M_theta = assemble_theta_product(disc, self.packs)
        self.G = build_global_gradient(disc, self.packs)
        self.MG = (self.M_theta @ self.G).tocsr()
        self.GMG = (self.G.T @ self.MG).tocsr()

        th_d, u_d = boundary_dof_sets(disc)
        self.theta_dirichlet, self.u_dirichlet = th_d, u_d
        dir_mask = np.zeros(self.n_theta + self.n_u, dtype=bool)
        dir_mask[th_d] = True
        dir_mask[self.n_theta + u_d] = True
        self.dirichlet_mask = dir_mask
        self.free = np.where(~dir_mask)[0]

    # -- bilinear forms -----------------------------------------------------

    def ah_matrix(self, material: MaterialParams) -> sps.csr_matrix:
        return (material.beta0 * (self.H_gs + self.H_sj)
                + material.beta1 * self.H_d).tocsr()

    def bh_matrix(self, material: MaterialParams) -> sps.csr_matrix:
        c = material.shear_over_t2
        return sps.bmat([[c * self.M_theta, -c * self.MG],
                         [-c * self.MG.T, c * self.GMG]], format="csr")

    def full_matrix(self, material: MaterialParams) -> sps.csr_matrix:
        a = self.ah_matrix(material)
        c = material.shear_over_t2
        return sps.bmat([[a + c * self.M_theta, -c * self.MG],
                         [-c * self.MG.T, c * self.GMG]], format="csr")

    def load_vector(self, f) -> np.ndarray:
        """l_h(v) = sum_T int_T f * (displacement reconstruction of v)."""
        sp_u = self.disc.u_space
        out = np.zeros(self.n_theta + self.n_u)
        np_k1 = dim_P(self.disc.k + 1)
        for ctx, pack in zip(self.disc.elem_ctxs, self.packs):
            fv = np.asarray(f(ctx.qpoints), dtype=float)
            coef = ctx.integrate(fv[:, None] * ctx.phi[:, :np_k1])
            out[self.n_theta + sp_u.local_dofs(ctx.element)] += pack.PU.T @ coef
        return out

    # -- solve ---------------------------------------------------------------

    def solve(self, material: MaterialParams, load: np.ndarray,
              dirichlet_values: np.ndarray | None = None,
              residual_tol: float = 1e-10) -> tuple[ThetaVector, UVector, SolveReport]:
        """Eliminate Dirichlet DOFs (values from the interpolated exact traces
        for non-homogeneous runs, zero for the clamped case), solve the
        reduced symmetric system and verify the residual."""
        K = self.full_matrix(material)
        sym_defect = _symmetric_defect(K)
        n = self.n_theta + self.n_u
        x = np.zeros(n)
        if dirichlet_values is not None:
            x[self.dirichlet_mask] = dirichlet_values[self.dirichlet_mask]
        free = self.free
        report = SolveReport(residual=0.0, n_free=free.size,
                             symmetric_defect=sym_defect)
        if free.size:
            Kff = K[free][:, free].tocsc()
            rhs = load[free] - K[free] @ x
            # symmetric Jacobi equilibration tames the kappa/t^2 block scaling
            # of very thin plates; iterative refinement then recovers a
            # machine-accurate residual from the equilibrated factorization
            d = np.sqrt(np.abs(Kff.diagonal()))
            d[d <= 0] = 1.0
            dinv = 1.0 / d
            Ks = sps.diags(dinv) @ Kff @ sps.diags(dinv)
            try:
                lu = splu(Ks.tocsc())
            except Exception as exc:
                raise SolverFailure(f"sparse factorization failed: {exc}") from exc

            def prec_solve(r):
                return dinv * lu.solve(dinv * r)

            xf = prec_solve(rhs)
            # relative residual = normwise backward error; the naive
            # ||r||/||b|| is floored at eps*||K||*||x||/||b|| by cancellation
            # in K@x when kappa/t^2 is large, which says nothing about the
            # factorization quality
            knorm = _inf_norm(Kff)

            def backward_error(vec):
                r = rhs - Kff @ vec
                den = knorm * np.linalg.norm(vec) + np.linalg.norm(rhs)
                return float(np.linalg.norm(r) / max(den, 1e-300))

            for _ in range(8):
                if backward_error(xf) <= 0.01 * residual_tol:
                    break
                xf = xf + prec_solve(rhs - Kff @ xf)
            if not np.all(np.isfinite(xf)):
                raise SolverFailure("solver produced non-finite values")
            x[free] = xf
            report.residual = backward_error(xf)
            if report.residual > residual_tol:
                raise SolverFailure(
                    f"solver residual {report.residual:.3e} above {residual_tol:.1e}")
        theta = ThetaVector(self.disc.theta_space, x[:self.n_theta])
        u = UVector(self.disc.u_space, x[self.n_theta:])
        return theta, u, report

    # -- norms and errors ----------------------------------------------------

    def energy_norm(self, material: MaterialParams, theta: np.ndarray,
                    u: np.ndarray) -> float:
        eta = np.asarray(theta, dtype=float)
        v = np.asarray(u, dtype=float)
        g = self.G @ v
        d = eta - g
        val = (material.beta0 * (eta @ (self.H_gs @ eta) + eta @ (self.H_sj @ eta))
               + material.beta1 * (eta @ (self.H_d @ eta))
               + material.shear_over_t2 * (d @ (self.M_theta @ d))
               + material.mu * (eta @ (self.M_theta @ eta) + g @ (self.M_theta @ g)))
        return float(np.sqrt(max(val, 0.0)))

    def relative_error(self, material: MaterialParams,
                       theta: ThetaVector, u: UVector,
                       theta_ref: ThetaVector, u_ref: UVector) -> float:
        den = self.energy_norm(material, theta_ref.values, u_ref.values)
        if den < 1e-300:
            raise ZeroNormError("exact-solution interpolate has zero energy norm")
        num = self.energy_norm(material, theta.values - theta_ref.values,
                               u.values - u_ref.values)
        return num / den


def _inf_norm(K: sps.spmatrix) -> float:
    return float(np.max(np.abs(K).sum(axis=1)))


def _symmetric_defect(K: sps.csr_matrix) -> float:
    d = K - K.T
    denom = max(abs(K).max(), 1e-300)
    return float(abs(d).max() / denom)


def dirichlet_values_from_interpolates(system: PlateSystem, theta_i: ThetaVector,
                                       u_i: UVector) -> np.ndarray:
    out = np.concatenate([theta_i.values, u_i.values])
    vals = np.zeros_like(out)
    vals[system.dirichlet_mask] = out[system.dirichlet_mask]
    return vals
