"""Diagnostics for whether the slow-manifold reduction can be trusted.

The main number is ``eps``: the largest of the per-edge ratios between the
fast complex timescale and the slow protein timescale.  It is backed up by
the spectrum of the fast subsystem's Jacobian on the manifold and by coarse
checks that rates and totals are of comparable size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import matops
from .fullsim import TrajectoryTable, derived_free
from .netmodel import NetworkSpec, masks
from .reduction import project_initial, solve_complexes

VALID_EPS = 0.05
MARGINAL_EPS = 0.25
RATIO_BOUND = 100.0


def _mm_constant(a1, am1, a2) -> np.ndarray:
    out = np.zeros_like(a1)
    on = a1 > 0
    out[on] = (am1[on] + a2[on]) / a1[on]
    return out


@dataclass(frozen=True)
class ScalingFactors:
    k_m: np.ndarray
    l_m: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    t_bar: float


def scaling_factors(spec: NetworkSpec) -> ScalingFactors:
    """Michaelis constants, pairwise-balance scales and the slow timescale.

    Entries for absent edges are zero; ``t_bar`` is 0 for a network with no
    edges.
    """
    m = masks(spec)
    ut, et = spec.u_total, spec.e_total
    k_m = _mm_constant(spec.k1, spec.k_neg1, spec.k2)
    l_m = _mm_constant(spec.l1, spec.l_neg1, spec.l2)
    alpha = np.where(m.i_k > 0, np.outer(ut, ut) / (ut[:, None] + ut[None, :] + k_m), 0.0)
    den_b = et[:, None] + ut[None, :] + l_m
    # den_b > 0 always since u_total > 0
    beta = np.where(m.i_l > 0, np.outer(et, ut) / den_b, 0.0)
    scales = []
    for i, j in zip(*np.nonzero(m.i_k)):
        scales.append(ut[j] / (spec.k2[i, j] * alpha[i, j]))
    for i, j in zip(*np.nonzero(m.i_l)):
        if beta[i, j] > 0:
            scales.append(ut[j] / (spec.l2[i, j] * beta[i, j]))
    return ScalingFactors(k_m, l_m, alpha, beta, max(scales, default=0.0))


def slow_manifold_jacobian(spec: NetworkSpec, p) -> tuple[np.ndarray, matops.Spectrum]:
    """Jacobian of the fast complex dynamics at fixed ``P_bar``, on the manifold.

    The complexes are stacked as ``C = [C_U : C_E^t]`` (``n x 2n``) and the
    free species as ``Z = [U; E]``.  With ``P = P_bar - C V`` and ``Z`` from
    conservation,

        J = -Q1_hat [(Z V^t (x) I) + (I (x) P V^t)(I - hat(top block of I))] - Q2_hat

    where ``Q1 = [K1 : L1^t]`` and ``Q2 = [K_-1 + K2 : (L_-1 + L2)^t]``.
    Only rows and columns of existing complexes are kept.
    """
    n = spec.n
    p = np.asarray(p, dtype=float)
    sol = solve_complexes(spec, p)
    u, e = derived_free(spec, p, sol.c_u, sol.c_e)
    z = np.concatenate([u, e])[:, None]
    q1 = np.hstack([spec.k1, spec.l1.T])
    q2 = np.hstack([spec.k_neg1 + spec.k2, (spec.l_neg1 + spec.l2).T])
    v_2n = np.ones((2 * n, 1))
    v_n = np.ones((n, 1))
    eye_n = np.eye(n)
    eye_2n = np.eye(2 * n)
    top = eye_2n[:, :n]  # I_2n^n
    pv = p[:, None] @ v_n.T
    j = -matops.hat(q1) @ (
        matops.kron(z @ v_2n.T, eye_n)
        + matops.kron(eye_2n, pv) @ (np.eye(2 * n * n) - matops.hat(top.T))
    ) - matops.hat(q2)
    active = np.flatnonzero(matops.vec(np.hstack([spec.k1 > 0, (spec.l1 > 0).T])))
    jr = j[np.ix_(active, active)]
    return jr, matops.eigenvalues(jr)


def lemma_a1_bound(k1: float, k2: float, k_neg1: float, e: float, x: float) -> tuple[float, bool]:
    """``eps`` of a single reaction and whether it respects the 1/4 ceiling.

    ``eps = (k2/k1) e / (e + x + k_m)^2 <= k1 e k2 / (k1 e + k2)^2 <= 1/4``.
    """
    k_m = (k_neg1 + k2) / k1
    eps = (k2 / k1) * e / (e + x + k_m) ** 2
    return eps, eps <= 0.25


def _ratio_flags(spec: NetworkSpec, bound: float) -> list[str]:
    groups = {
        "association rates": np.concatenate([spec.k1.ravel(), spec.l1.ravel()]),
        "dissociation rates": np.concatenate([spec.k_neg1.ravel(), spec.l_neg1.ravel()]),
        "catalytic rates": np.concatenate([spec.k2.ravel(), spec.l2.ravel()]),
        "totals": np.concatenate([spec.u_total, spec.e_total]),
    }
    flags = []
    for name, vals in groups.items():
        vals = vals[vals > 0]
        if len(vals) > 1:
            ratio = vals.max() / vals.min()
            if ratio > bound:
                flags.append(f"{name}: max/min ratio {ratio:.4g} exceeds {bound:g}")
    return flags


@dataclass(frozen=True)
class ValidityReport:
    eps_pp: np.ndarray
    eps_ep: np.ndarray
    eps: float
    ratio_flags: list[str]
    jacobian_spectrum: matops.Spectrum
    verdict: str
    p_query: np.ndarray = field(repr=False, default=None)

    @property
    def max_real_eig(self) -> float | None:
        """``None`` when no complexes exist (empty spectrum)."""
        if len(self.jacobian_spectrum) == 0:
            return None
        return self.jacobian_spectrum.max_real_part

    def to_dict(self) -> dict:
        return {
            "epsilon": self.eps,
            "epsilon_pp": self.eps_pp.tolist(),
            "epsilon_ep": self.eps_ep.tolist(),
            "max_real_eig": self.max_real_eig,
            "ratio_flags": list(self.ratio_flags),
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def epsilon_components(spec: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    sf = scaling_factors(spec)
    m = masks(spec)
    ut, et = spec.u_total, spec.e_total
    eps_pp = np.zeros((spec.n, spec.n))
    eps_ep = np.zeros((spec.n, spec.n))
    on = m.i_k > 0
    ratio = np.divide(spec.k2, spec.k1, out=np.zeros_like(spec.k1), where=on)
    eps_pp[on] = (ratio * ut[:, None] / (ut[:, None] + ut[None, :] + sf.k_m) ** 2)[on]
    on = m.i_l > 0
    ratio = np.divide(spec.l2, spec.l1, out=np.zeros_like(spec.l1), where=on)
    eps_ep[on] = (ratio * et[:, None] / (et[:, None] + ut[None, :] + sf.l_m) ** 2)[on]
    return eps_pp, eps_ep


def epsilon_report(spec: NetworkSpec, p_query=None, *, ratio_bound: float = RATIO_BOUND,
                   valid_eps: float = VALID_EPS,
                   marginal_eps: float = MARGINAL_EPS) -> ValidityReport:
    """ε components, ratio flags, fast-subsystem spectrum and a verdict.

    The spectrum is taken at ``p_query``, by default the projection of
    ``spec.p0`` onto the slow manifold.
    """
    eps_pp, eps_ep = epsilon_components(spec)
    eps = float(max(eps_pp.max(), eps_ep.max()))
    flags = _ratio_flags(spec, ratio_bound)
    p = project_initial(spec).p_hat0 if p_query is None else np.asarray(p_query, dtype=float)
    if p.shape != (spec.n,):
        raise ValueError(f"p_query must have length {spec.n}")
    _, spectrum = slow_manifold_jacobian(spec, p)
    stable = spectrum.max_real_part < 0
    if eps < valid_eps and not flags and stable:
        verdict = "valid"
    elif eps < marginal_eps:
        verdict = "marginal"
    else:
        verdict = "invalid"
    return ValidityReport(eps_pp, eps_ep, eps, flags, spectrum, verdict, p)


@dataclass(frozen=True)
class Violation:
    row: int
    t: float
    quantity: str
    value: float
    bound: float

    def __str__(self):
        return f"t={self.t:.6g}: {self.quantity} = {self.value:.6g} violates bound {self.bound:.6g}"


def omega_invariance_check(spec: NetworkSpec, trajectory: TrajectoryTable,
                           atol: float | None = None) -> list[Violation]:
    """Check ``0 <= C_U <= 2 alpha``, ``0 <= C_E <= 2 beta`` and ``0 <= P_bar <= U_T``.

    Each bound gets slack ``10 * atol``; ``atol`` defaults to the value in
    the trajectory metadata (or 1e-10).
    """
    if atol is None:
        atol = float(trajectory.metadata.get("atol", 1e-10))
    slack = 10.0 * atol
    sf = scaling_factors(spec)
    out: list[Violation] = []
    for row, t in enumerate(trajectory.times):
        st = trajectory.full_state(spec, row)
        for name, c, cap in (("CU", st.c_u, 2 * sf.alpha), ("CE", st.c_e, 2 * sf.beta)):
            for i in range(spec.n):
                for j in range(spec.n):
                    v = c[i, j]
                    label = f"{name}_{i + 1}_{j + 1}"
                    if v < -slack:
                        out.append(Violation(row, float(t), label, float(v), 0.0))
                    elif v > cap[i, j] + slack:
                        out.append(Violation(row, float(t), label, float(v), float(cap[i, j])))
        for i, v in enumerate(st.p_bar):
            label = f"Pbar_{i + 1}"
            if v < -slack:
                out.append(Violation(row, float(t), label, float(v), 0.0))
            elif v > spec.u_total[i] + slack:
                out.append(Violation(row, float(t), label, float(v), float(spec.u_total[i])))
    return out


@dataclass(frozen=True)
class ComparisonSummary:
    transient_cutoff: float
    sup_error_per_protein: np.ndarray
    relative_sup_error: float
    epsilon: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "transient_cutoff": self.transient_cutoff,
            "sup_error_per_protein": self.sup_error_per_protein.tolist(),
            "relative_sup_error": self.relative_sup_error,
            "epsilon": self.epsilon,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def compare_trajectories(spec: NetworkSpec, full: TrajectoryTable, reduced: TrajectoryTable,
                         *, transient: float, tol: float) -> ComparisonSummary:
    """Sup-norm gap between the ``P`` columns of two runs, for ``t >= transient``."""
    if full.times.shape != reduced.times.shape or not np.allclose(full.times, reduced.times):
        raise ValueError("trajectories are not on the same output grid")
    keep = full.times >= transient - 1e-12
    if not keep.any():
        err = np.zeros(spec.n)
    else:
        err = np.abs(full.p[keep] - reduced.p[keep]).max(axis=0)
    rel = float(err.max() / spec.u_total.max())
    eps_pp, eps_ep = epsilon_components(spec)
    eps = float(max(eps_pp.max(), eps_ep.max()))
    return ComparisonSummary(float(transient), err, rel, eps, float(tol),
                             bool(rel <= tol) and math.isfinite(rel))
