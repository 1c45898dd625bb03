"""Full mass-action model: ``n`` active proteins plus up to ``2 n^2`` complexes.

Only the active protein levels ``P`` and the complexes ``C_U``, ``C_E`` are
integrated.  Inactive proteins ``U`` and free enzymes ``E`` are always
reconstructed from the conservation laws.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from .integrate import IntegrationError, dopri45, output_grid
from .netmodel import NetworkSpec, masks

__all__ = [
    "FullState", "IntegratorConfig", "TrajectoryTable", "IntegrationError",
    "derived_free", "full_rhs", "full_rhs_termwise", "conserved_totals",
    "integrate_full", "total_protein",
]


def derived_free(spec: NetworkSpec, p, c_u, c_e) -> tuple[np.ndarray, np.ndarray]:
    """Free inactive protein ``U`` and free enzyme ``E`` from conservation."""
    u = (spec.u_total - p - c_u.sum(axis=1) - c_u.sum(axis=0)
         + np.diag(c_u) - c_e.sum(axis=0))
    e = spec.e_total - c_e.sum(axis=1)
    return u, e


def total_protein(p, c_u, c_e) -> np.ndarray:
    """``P_i`` plus every complex in which ``P_i`` is the bound active form."""
    return p + c_u.sum(axis=1) + c_e.sum(axis=0)


@dataclass(frozen=True)
class FullState:
    """A point of the full system.

    ``u`` and ``e`` are carried alongside so that bookkeeping errors can be
    detected by :func:`conserved_totals`; :meth:`build` fills them from the
    conservation laws.
    """

    p: np.ndarray
    c_u: np.ndarray
    c_e: np.ndarray
    u: np.ndarray
    e: np.ndarray

    @classmethod
    def build(cls, spec: NetworkSpec, p, c_u=None, c_e=None) -> "FullState":
        n = spec.n
        p = np.array(p, dtype=float)
        c_u = np.zeros((n, n)) if c_u is None else np.array(c_u, dtype=float)
        c_e = np.zeros((n, n)) if c_e is None else np.array(c_e, dtype=float)
        u, e = derived_free(spec, p, c_u, c_e)
        return cls(p, c_u, c_e, u, e)

    @classmethod
    def initial(cls, spec: NetworkSpec) -> "FullState":
        return cls.build(spec, spec.p0)

    @property
    def p_bar(self) -> np.ndarray:
        return total_protein(self.p, self.c_u, self.c_e)


def full_rhs(spec: NetworkSpec, state: FullState) -> FullState:
    """Time derivative of the full system, matrix form.

    The returned ``u`` and ``e`` fields hold the derivatives of the
    conservation-derived free species.
    """
    p, c_u, c_e = state.p, state.c_u, state.c_e
    u, e = derived_free(spec, p, c_u, c_e)
    d_cu = spec.k1 * np.outer(p, u) - (spec.k_neg1 + spec.k2) * c_u
    d_ce = spec.l1 * np.outer(e, p) - (spec.l_neg1 + spec.l2) * c_e
    d_pbar = (spec.k2 * c_u).sum(axis=0) - (spec.l2 * c_e).sum(axis=0)
    d_p = d_pbar - d_cu.sum(axis=1) - d_ce.sum(axis=0)
    d_u = -(d_p + d_cu.sum(axis=1) + d_cu.sum(axis=0) - np.diag(d_cu) + d_ce.sum(axis=0))
    d_e = -d_ce.sum(axis=1)
    return FullState(d_p, d_cu, d_ce, d_u, d_e)


def full_rhs_termwise(spec: NetworkSpec, state: FullState) -> FullState:
    """Reference evaluation of the mass-action equations, one term at a time."""
    n = spec.n
    p, c_u, c_e = state.p, state.c_u, state.c_e
    u, e = derived_free(spec, p, c_u, c_e)
    k1, km1, k2 = spec.k1, spec.k_neg1, spec.k2
    l1, lm1, l2 = spec.l1, spec.l_neg1, spec.l2
    d_p = np.zeros(n)
    d_cu = np.zeros((n, n))
    d_ce = np.zeros((n, n))
    for i in range(n):
        acc = 0.0
        for s in range(n):
            acc += -k1[i, s] * p[i] * u[s] + (km1[i, s] + k2[i, s]) * c_u[i, s]
        for r in range(n):
            acc += k2[r, i] * c_u[r, i] - l1[r, i] * e[r] * p[i] + lm1[r, i] * c_e[r, i]
        d_p[i] = acc
        for j in range(n):
            d_cu[i, j] = k1[i, j] * p[i] * u[j] - (km1[i, j] + k2[i, j]) * c_u[i, j]
            d_ce[i, j] = l1[i, j] * e[i] * p[j] - (lm1[i, j] + l2[i, j]) * c_e[i, j]
    d_u = np.zeros(n)
    d_e = np.zeros(n)
    for j in range(n):
        for i in range(n):
            d_u[j] += -k1[i, j] * p[i] * u[j] + km1[i, j] * c_u[i, j] + l2[i, j] * c_e[i, j]
            d_e[i] += -l1[i, j] * e[i] * p[j] + (lm1[i, j] + l2[i, j]) * c_e[i, j]
    return FullState(d_p, d_cu, d_ce, d_u, d_e)


def conserved_totals(spec: NetworkSpec, state: FullState) -> tuple[np.ndarray, np.ndarray]:
    """Protein and enzyme totals reconstructed from the stored species."""
    c_u, c_e = state.c_u, state.c_e
    proteins = (state.u + state.p + c_u.sum(axis=1) + c_u.sum(axis=0)
                - np.diag(c_u) + c_e.sum(axis=0))
    enzymes = state.e + c_e.sum(axis=1)
    return proteins, enzymes


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    t_end: float = 10.0
    dt_out: float = 0.01
    max_steps: int = 500_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if not self.dt_out > 0:
            raise ValueError("dt_out must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def as_dict(self) -> dict:
        return {"rtol": self.rtol, "atol": self.atol, "t_end": self.t_end,
                "dt_out": self.dt_out, "max_steps": self.max_steps}


@dataclass
class TrajectoryTable:
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(columns))
    columns: list[str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.times), len(self.columns)):
            raise ValueError("values shape does not match times/columns")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    @property
    def p(self) -> np.ndarray:
        idx = [k for k, c in enumerate(self.columns) if c.startswith("P_")]
        return self.values[:, idx]

    def full_state(self, spec: NetworkSpec, row: int) -> FullState:
        """Rebuild the full state at sample ``row`` (needs complex columns)."""
        n = spec.n
        c_u = np.zeros((n, n))
        c_e = np.zeros((n, n))
        p = np.zeros(n)
        for name, v in zip(self.columns, self.values[row]):
            kind, *idx = name.split("_")
            idx = [int(i) - 1 for i in idx]
            if kind == "P":
                p[idx[0]] = v
            elif kind == "CU":
                c_u[idx[0], idx[1]] = v
            elif kind == "CE":
                c_e[idx[0], idx[1]] = v
        return FullState.build(spec, p, c_u, c_e)

    def write_csv(self, dest: str | Path | TextIO) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self.write_csv(fh)
            return
        dest.write(",".join(["t"] + self.columns) + "\n")
        for t, row in zip(self.times, self.values):
            dest.write(",".join(repr(float(x)) for x in (t, *row)) + "\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "columns": ["t"] + self.columns,
            "rows": [[float(t), *map(float, row)] for t, row in zip(self.times, self.values)],
            "metadata": self.metadata,
        })


class StateLayout:
    """Packing of ``(P, active C_U, active C_E)`` into one flat vector."""

    def __init__(self, spec: NetworkSpec):
        m = masks(spec)
        self.n = spec.n
        self.cu_idx = tuple(np.nonzero(m.i_k))
        self.ce_idx = tuple(np.nonzero(m.i_l))
        self.n_cu = len(self.cu_idx[0])
        self.n_ce = len(self.ce_idx[0])
        self.size = self.n + self.n_cu + self.n_ce

    def columns(self) -> list[str]:
        cols = [f"P_{i + 1}" for i in range(self.n)]
        cols += [f"CU_{i + 1}_{j + 1}" for i, j in zip(*self.cu_idx)]
        cols += [f"CE_{i + 1}_{j + 1}" for i, j in zip(*self.ce_idx)]
        return cols

    def pack(self, p, c_u, c_e) -> np.ndarray:
        return np.concatenate([p, c_u[self.cu_idx], c_e[self.ce_idx]])

    def unpack(self, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        c_u = np.zeros((n, n))
        c_e = np.zeros((n, n))
        c_u[self.cu_idx] = y[n:n + self.n_cu]
        c_e[self.ce_idx] = y[n + self.n_cu:]
        return y[:n], c_u, c_e


def _full_vector_field(spec: NetworkSpec, layout: StateLayout):
    k1, l1 = spec.k1, spec.l1
    k_out = spec.k_neg1 + spec.k2
    l_out = spec.l_neg1 + spec.l2
    k2, l2 = spec.k2, spec.l2

    def f(t, y):
        p, c_u, c_e = layout.unpack(y)
        u, e = derived_free(spec, p, c_u, c_e)
        d_cu = k1 * np.outer(p, u) - k_out * c_u
        d_ce = l1 * np.outer(e, p) - l_out * c_e
        d_p = ((k2 * c_u).sum(axis=0) - (l2 * c_e).sum(axis=0)
               - d_cu.sum(axis=1) - d_ce.sum(axis=0))
        return layout.pack(d_p, d_cu, d_ce)

    return f


def integrate_full(spec: NetworkSpec, config: IntegratorConfig | None = None) -> TrajectoryTable:
    """Integrate from ``P = p0`` with all complexes at zero.

    Raises :class:`IntegrationError` on step-size underflow or when
    ``config.max_steps`` is exhausted.
    """
    config = config or IntegratorConfig()
    layout = StateLayout(spec)
    grid = output_grid(config.t_end, config.dt_out)
    y0 = layout.pack(spec.p0, np.zeros((spec.n, spec.n)), np.zeros((spec.n, spec.n)))
    values, stats = dopri45(_full_vector_field(spec, layout), y0, grid,
                            rtol=config.rtol, atol=config.atol,
                            max_steps=config.max_steps)
    meta = {"mode": "full", "model_sha256": spec.digest(),
            "integrator": "dopri45", **config.as_dict(),
            "accepted_steps": stats.accepted, "rejected_steps": stats.rejected}
    return TrajectoryTable(grid, values, layout.columns(), meta)
