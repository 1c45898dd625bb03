"""Slow-manifold reduction of the full network model.

On the slow manifold the complexes are affine-linear functions of the active
protein levels ``P`` once ``U`` and ``E`` are eliminated through the
conservation laws.  The enzyme complexes solve

    L1 * (C_E V P^t) + (L_-1 + L2) * C_E = L1 * (E_T P^t)

and, given ``C_E``, the protein complexes solve

    K1 * [P (V^t C_U^t + V^t C_U - V^t (I * C_U)) + P V^t C_E]
        + (K_-1 + K2) * C_U = K1 * [P (U_T - P)^t]

(``*`` is the entrywise product, ``V`` a vector of ones).  Both are
vectorized column-major, restricted to complexes whose edges exist, and
solved by LU.  The reduced model is then

    M(P) dP/dt = (K2 * C_U)^t V - (L2 * C_E)^t V,
    M(P) = I + d(C_U V)/dP + d(C_E^t V)/dP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import matops
from .fullsim import IntegratorConfig, TrajectoryTable
from .integrate import dopri45, output_grid
from .netmodel import NetworkSpec, masks

RESIDUAL_RTOL = 1e-10
PROJECTION_RTOL = 1e-10
PROJECTION_MAX_ITER = 100


class ProjectionError(ArithmeticError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"projection onto the slow manifold did not converge in {iterations} "
            f"iterations (last residual {residual:.3e})")


@dataclass(frozen=True)
class ComplexSolution:
    """Complexes on the slow manifold at one ``P``.

    ``d_cu_vn_dp[i, k]`` is the derivative of row sum ``i`` of ``C_U`` with
    respect to ``P_k``; ``d_cet_vn_dp[j, k]`` the same for column sum ``j``
    of ``C_E``.  ``dcu_dp`` / ``dce_dp`` hold the full derivative tensors,
    last axis over ``P_k``.  Derivative fields are ``None`` unless requested.
    """

    p: np.ndarray
    c_u: np.ndarray
    c_e: np.ndarray
    residual: float
    d_cu_vn_dp: np.ndarray | None = None
    d_cet_vn_dp: np.ndarray | None = None
    dcu_dp: np.ndarray | None = None
    dce_dp: np.ndarray | None = None

    @property
    def mass_matrix(self) -> np.ndarray:
        if self.d_cu_vn_dp is None:
            raise ValueError("derivative blocks were not computed")
        return np.eye(len(self.p)) + self.d_cu_vn_dp + self.d_cet_vn_dp

    @property
    def p_bar(self) -> np.ndarray:
        return self.p + self.c_u.sum(axis=1) + self.c_e.sum(axis=0)


def _coefficient_blocks(spec: NetworkSpec):
    """Vectorized coefficient matrices with ``P`` replaced by unit vectors.

    Both systems are affine in ``P``: ``A(P) = D + sum_k P_k A_k``.
    """
    n = spec.n
    ones = np.ones((n, 1))
    eye = np.eye(n)
    hat_i = matops.hat(eye)
    l1_hat = matops.hat(spec.l1)
    k1_hat = matops.hat(spec.k1)
    d_e = matops.hat(spec.l_neg1 + spec.l2)
    d_u = matops.hat(spec.k_neg1 + spec.k2)
    a_e = []
    a_u = []
    for k in range(n):
        e_k = eye[:, [k]]
        a_e.append(l1_hat @ matops.kron(e_k @ ones.T, eye))
        outer = matops.kron(eye, e_k @ ones.T)
        a_u.append(k1_hat @ (matops.kron(eye, e_k) @ matops.kron(ones.T, eye)
                             + outer - outer @ hat_i))
    return np.array(a_e), d_e, np.array(a_u), d_u


class ManifoldSystem:
    """Per-network precomputation for the slow-manifold linear solves."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        n = self.n = spec.n
        m = masks(spec)
        # column-major flat index of (i, j) is i + j * n
        self.ie = np.flatnonzero(matops.vec(m.i_l))
        self.iu = np.flatnonzero(matops.vec(m.i_k))
        rows = np.arange(n * n) % n
        cols = np.arange(n * n) // n
        self.e_rows, self.e_cols = rows[self.ie], cols[self.ie]
        self.u_rows, self.u_cols = rows[self.iu], cols[self.iu]

        a_e, d_e, a_u, d_u = _coefficient_blocks(spec)
        ie, iu = self.ie, self.iu
        self.a_e = a_e[:, ie][:, :, ie]
        self.d_e = d_e[np.ix_(ie, ie)]
        self.a_u = a_u[:, iu][:, :, iu]
        self.d_u = d_u[np.ix_(iu, iu)]
        self.a_e_flat = self.a_e.reshape(n, -1)
        self.a_u_flat = self.a_u.reshape(n, -1)

        self.l1 = matops.vec(spec.l1)[ie]
        self.k1 = matops.vec(spec.k1)[iu]
        self.k2 = matops.vec(spec.k2)[iu]
        self.l2 = matops.vec(spec.l2)[ie]
        self.et_e = spec.e_total[self.e_rows]
        self.ut_u = spec.u_total[self.u_cols]

        # selection matrices: row sums / column sums of the active entries
        self.sel_u_row = (self.u_rows[None, :] == np.arange(n)[:, None]).astype(float)
        self.sel_u_col = (self.u_cols[None, :] == np.arange(n)[:, None]).astype(float)
        self.sel_e_col = (self.e_cols[None, :] == np.arange(n)[:, None]).astype(float)

    @classmethod
    def of(cls, spec: NetworkSpec) -> "ManifoldSystem":
        sys = spec._memo.get("manifold")
        if sys is None:
            sys = spec._memo["manifold"] = cls(spec)
        return sys

    def _unvec(self, x, rows, cols) -> np.ndarray:
        c = np.zeros((self.n, self.n))
        c[rows, cols] = x
        return c

    def solve(self, p, derivatives: bool = False, residual: bool = True) -> ComplexSolution:
        p = np.asarray(p, dtype=float)
        n = self.n
        # enzyme complexes
        pe = p[self.e_cols]
        b_e = self.l1 * self.et_e * pe
        lu_e = matops.lu_factor(self.d_e + (p @ self.a_e_flat).reshape(self.d_e.shape))
        x_e = matops.lu_apply(lu_e, b_e)
        c_e = self._unvec(x_e, self.e_rows, self.e_cols)
        s_e = c_e.sum(axis=0)  # V^t C_E

        # protein complexes
        pu = p[self.u_rows]
        b_u = self.k1 * pu * (self.ut_u - p[self.u_cols] - s_e[self.u_cols])
        lu_u = matops.lu_factor(self.d_u + (p @ self.a_u_flat).reshape(self.d_u.shape))
        x_u = matops.lu_apply(lu_u, b_u)
        c_u = self._unvec(x_u, self.u_rows, self.u_cols)

        res = self._residual(p, c_u, c_e) if residual else math.nan
        if not derivatives:
            return ComplexSolution(p, c_u, c_e, res)

        eye = np.eye(n)
        # d b_E / d P_k - A_k x_E, one column per k
        rhs_e = (self.l1 * self.et_e)[:, None] * eye[self.e_cols]
        rhs_e -= np.einsum("kab,b->ak", self.a_e, x_e)
        dx_e = matops.lu_apply(lu_e, rhs_e)
        ds_e = self.sel_e_col @ dx_e  # d(V^t C_E)_j / dP_k

        resid_u = self.ut_u - p[self.u_cols] - s_e[self.u_cols]
        rhs_u = (self.k1 * resid_u)[:, None] * eye[self.u_rows]
        rhs_u -= (self.k1 * pu)[:, None] * (eye[self.u_cols] + ds_e[self.u_cols])
        rhs_u -= np.einsum("kab,b->ak", self.a_u, x_u)
        dx_u = matops.lu_apply(lu_u, rhs_u)

        dcu = np.zeros((n, n, n))
        dce = np.zeros((n, n, n))
        dcu[self.u_rows, self.u_cols] = dx_u
        dce[self.e_rows, self.e_cols] = dx_e
        return ComplexSolution(
            p, c_u, c_e, res,
            d_cu_vn_dp=self.sel_u_row @ dx_u,
            d_cet_vn_dp=ds_e,
            dcu_dp=dcu, dce_dp=dce,
        )

    def _residual(self, p, c_u, c_e) -> float:
        spec = self.spec
        ut = spec.u_total
        row_u = c_u.sum(axis=1)  # C_U V
        col_u = c_u.sum(axis=0)  # V^t C_U
        col_e = c_e.sum(axis=0)  # V^t C_E
        lhs_a = spec.k1 * np.outer(p, row_u + col_u - np.diag(c_u) + col_e) \
            + (spec.k_neg1 + spec.k2) * c_u
        rhs_a = spec.k1 * np.outer(p, ut - p)
        lhs_b = spec.l1 * (c_e @ np.outer(np.ones(self.n), p)) \
            + (spec.l_neg1 + spec.l2) * c_e
        rhs_b = spec.l1 * np.outer(spec.e_total, p)
        res = max(np.abs(lhs_a - rhs_a).max(), np.abs(lhs_b - rhs_b).max())
        scale = 1.0 + max(np.abs(rhs_a).max(), np.abs(rhs_b).max())
        return float(res / scale)

    def production(self, sol: ComplexSolution) -> np.ndarray:
        """Right-hand side ``(K2 * C_U)^t V - (L2 * C_E)^t V``."""
        x_u = sol.c_u[self.u_rows, self.u_cols]
        x_e = sol.c_e[self.e_rows, self.e_cols]
        return self.sel_u_col @ (self.k2 * x_u) - self.sel_e_col @ (self.l2 * x_e)


def solve_complexes(spec: NetworkSpec, p) -> ComplexSolution:
    """Slow-manifold complexes at active levels ``p``.

    The returned ``residual`` is relative to ``1 + ||rhs||_inf``.
    Raises :class:`~tqssa.matops.SingularMatrixError` if a coefficient
    matrix is singular.
    """
    return ManifoldSystem.of(spec).solve(p)


def complex_jacobian(spec: NetworkSpec, p) -> ComplexSolution:
    """Like :func:`solve_complexes` but with the derivatives in ``P`` filled in.

    Derivatives come from differentiating ``A(P) x = b(P)``:
    ``A dx/dP_k = db/dP_k - (dA/dP_k) x``, with ``dC_E/dP`` fed into the
    right-hand side of the ``C_U`` system.
    """
    return ManifoldSystem.of(spec).solve(p, derivatives=True)


def mass_matrix(spec: NetworkSpec, p) -> np.ndarray:
    return complex_jacobian(spec, p).mass_matrix


def reduced_rhs(spec: NetworkSpec, p) -> np.ndarray:
    """``dP/dt`` of the reduced model at ``p``."""
    system = ManifoldSystem.of(spec)
    sol = system.solve(p, derivatives=True, residual=False)
    return matops.lu_solve(sol.mass_matrix, system.production(sol))


@dataclass(frozen=True)
class ReducedModel:
    spec: NetworkSpec
    p_hat0: np.ndarray
    iterations: int
    residual: float


def project_initial(spec: NetworkSpec, p0=None) -> ReducedModel:
    """Project ``p0`` (default ``spec.p0``) onto the slow manifold.

    Finds ``P`` with ``P + C_U(P) V + C_E(P)^t V = p0`` by Newton's method,
    whose Jacobian is exactly the mass matrix.  Steps are clipped to
    ``[0, u_total]`` and backtracked until the residual decreases.
    """
    system = ManifoldSystem.of(spec)
    target = np.array(spec.p0 if p0 is None else p0, dtype=float)
    tol = PROJECTION_RTOL * (1.0 + np.abs(target).max())
    p = target.copy()
    sol = system.solve(p, derivatives=True, residual=False)
    g = sol.p_bar - target
    gnorm = np.abs(g).max()
    for it in range(PROJECTION_MAX_ITER + 1):
        if gnorm <= tol:
            return ReducedModel(spec, p, it, float(gnorm))
        if it == PROJECTION_MAX_ITER:
            break
        step = -matops.lu_solve(sol.mass_matrix, g)
        lam = 1.0
        while True:
            cand = np.clip(p + lam * step, 0.0, spec.u_total)
            cand_sol = system.solve(cand, derivatives=True, residual=False)
            g_new = cand_sol.p_bar - target
            gn = np.abs(g_new).max()
            if gn < (1 - 1e-4 * lam) * gnorm or lam < 1e-10:
                break
            lam *= 0.5
        p, sol, g, gnorm = cand, cand_sol, g_new, gn
    raise ProjectionError(PROJECTION_MAX_ITER, float(gnorm))


def integrate_reduced(spec: NetworkSpec, config: IntegratorConfig | None = None,
                      *, with_complexes: bool = False) -> TrajectoryTable:
    """Integrate the reduced model from the projected initial value."""
    config = config or IntegratorConfig()
    system = ManifoldSystem.of(spec)
    model = project_initial(spec)

    def f(t, p):
        sol = system.solve(p, derivatives=True, residual=False)
        return matops.lu_solve(sol.mass_matrix, system.production(sol))

    grid = output_grid(config.t_end, config.dt_out)
    values, stats = dopri45(f, model.p_hat0, grid, rtol=config.rtol,
                            atol=config.atol, max_steps=config.max_steps)
    columns = [f"P_{i + 1}" for i in range(spec.n)]
    if with_complexes:
        cu_idx = list(zip(*np.nonzero(spec.k1 > 0)))
        ce_idx = list(zip(*np.nonzero(spec.l1 > 0)))
        extra = []
        for p in values:
            sol = system.solve(p)
            extra.append([sol.c_u[i, j] for i, j in cu_idx]
                         + [sol.c_e[i, j] for i, j in ce_idx])
        values = np.hstack([values, np.array(extra).reshape(len(values), -1)])
        columns += [f"CU_{i + 1}_{j + 1}" for i, j in cu_idx]
        columns += [f"CE_{i + 1}_{j + 1}" for i, j in ce_idx]
    meta = {"mode": "reduced", "model_sha256": spec.digest(),
            "integrator": "dopri45", **config.as_dict(),
            "p_hat0": model.p_hat0.tolist(),
            "accepted_steps": stats.accepted, "rejected_steps": stats.rejected}
    return TrajectoryTable(grid, values, columns, meta)


# --- isolated Michaelis-Menten reaction ------------------------------------

@dataclass(frozen=True)
class IsolatedFlow:
    """One-dimensional reduced flow of ``X + E <-> C -> X_p + E``.

    ``mode == "sqrt"``: the state is total substrate ``X + C``, starting at
    ``x_total``.  ``mode == "linear"``: the state is free substrate ``X``,
    starting at the projected value ``x_hat0``.
    """

    mode: str
    rhs: Callable[[float], float]
    initial: float
    x_hat0: float
    k_m: float
    e_total: float

    def complex_of_free(self, x: float) -> float:
        return x * self.e_total / (self.k_m + x)

    def free_of_total(self, x_bar: float) -> float:
        """Positive root of ``X + E_T X / (k_m + X) = x_bar``."""
        b = self.k_m + self.e_total - x_bar
        return 2.0 * x_bar * self.k_m / (b + math.sqrt(b * b + 4.0 * x_bar * self.k_m)) \
            if x_bar > 0 else 0.0


def isolated_mm_reduced(x_total: float, e_total: float, k1: float, k_neg1: float,
                        k2: float, mode: str = "linear") -> IsolatedFlow:
    if min(x_total, e_total, k1, k_neg1, k2) < 0:
        raise ValueError("parameters must be non-negative")
    k_m = (k_neg1 + k2) / k1

    def sqrt_rhs(x_bar: float) -> float:
        s = x_bar + e_total + k_m
        disc = max(s * s - 4.0 * x_bar * e_total, 0.0)
        # stable branch (s - sqrt(disc)) / 2 written without cancellation
        c = 2.0 * x_bar * e_total / (s + math.sqrt(disc)) if s > 0 else 0.0
        return -k2 * c

    def linear_rhs(x: float) -> float:
        return -k2 * (x * e_total / (k_m + x)) / (1.0 + k_m * e_total / (k_m + x) ** 2)

    b = k_m + e_total - x_total
    x_hat0 = 2.0 * x_total * k_m / (b + math.sqrt(b * b + 4.0 * x_total * k_m)) \
        if x_total > 0 else 0.0
    if mode == "sqrt":
        return IsolatedFlow("sqrt", sqrt_rhs, x_total, x_hat0, k_m, e_total)
    if mode == "linear":
        return IsolatedFlow("linear", linear_rhs, x_hat0, x_hat0, k_m, e_total)
    raise ValueError(f"unknown mode {mode!r}; expected 'sqrt' or 'linear'")
