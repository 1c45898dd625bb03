"""Network data model for coupled Michaelis-Menten networks.

A network has ``n`` proteins, each present in an inactive form ``U_i`` and an
active form ``P_i``, and ``n`` enzymes ``E_i``.  Two kinds of catalytic edges
exist:

* PP edge ``(i, j)``: ``P_i + U_j <-> C^U_ij -> P_j + P_i`` with rates
  ``k1[i, j]``, ``k_neg1[i, j]``, ``k2[i, j]``.
* EP edge ``(i, j)``: ``E_i + P_j <-> C^E_ij -> U_j + E_i`` with rates
  ``l1[i, j]``, ``l_neg1[i, j]``, ``l2[i, j]``.

Networks are stored as JSON documents::

    {"n": 2, "k1": [[...]], "k_neg1": [[...]], "k2": [[...]],
     "l1": [[...]], "l_neg1": [[...]], "l2": [[...]],
     "u_total": [...], "e_total": [...], "p0": [...]}
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np

MATRIX_KEYS = ("k1", "k_neg1", "k2", "l1", "l_neg1", "l2")
VECTOR_KEYS = ("u_total", "e_total", "p0")
KEYS = ("n",) + MATRIX_KEYS + VECTOR_KEYS


class ParseError(ValueError):
    """Raised when a network document does not match the schema."""


def _frozen(a: Any, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Rates, totals and initial active levels of one network.

    Matrices are ``n x n`` with entry ``(i, j)`` the edge from node ``i`` to
    node ``j``.  Arrays are stored read-only.  Complexes always start at zero,
    so ``U(0) = u_total - p0``.
    """

    n: int
    k1: np.ndarray
    k_neg1: np.ndarray
    k2: np.ndarray
    l1: np.ndarray
    l_neg1: np.ndarray
    l2: np.ndarray
    u_total: np.ndarray
    e_total: np.ndarray
    p0: np.ndarray
    _memo: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", n)
        for key in MATRIX_KEYS:
            object.__setattr__(self, key, _frozen(getattr(self, key), (n, n)))
        for key in VECTOR_KEYS:
            object.__setattr__(self, key, _frozen(getattr(self, key), (n,)))

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec):
            return NotImplemented
        return self.n == other.n and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in MATRIX_KEYS + VECTOR_KEYS
        )

    __hash__ = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"n": self.n}
        for key in MATRIX_KEYS + VECTOR_KEYS:
            out[key] = getattr(self, key).tolist()
        return out

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; used to tag outputs."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def replace(self, **changes) -> "NetworkSpec":
        d = {k: getattr(self, k) for k in KEYS}
        d.update(changes)
        return NetworkSpec(**d)

    @classmethod
    def zeros(cls, n: int, u_total, e_total, p0) -> "NetworkSpec":
        z = np.zeros((n, n))
        return cls(n, z, z, z, z, z, z, u_total, e_total, p0)


@dataclass(frozen=True)
class ConnectivityMasks:
    i_k: np.ndarray
    i_l: np.ndarray
    active_complex_count: int


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning" | "info"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


def _path(key: str, *idx: int) -> str:
    return "$." + key + "".join(f"[{i}]" for i in idx)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}: expected a number, got {type(value).__name__}")
    x = float(value)
    if not math.isfinite(x):
        raise ParseError(f"{path}: value must be finite")
    return x


def _read_vector(doc: dict, key: str, n: int) -> list[float]:
    value = doc[key]
    if not isinstance(value, list):
        raise ParseError(f"{_path(key)}: expected an array")
    if len(value) != n:
        raise ParseError(f"{_path(key)}: expected length {n}, got {len(value)}")
    return [_number(v, _path(key, i)) for i, v in enumerate(value)]


def _read_matrix(doc: dict, key: str, n: int) -> list[list[float]]:
    value = doc[key]
    if not isinstance(value, list) or len(value) != n:
        raise ParseError(f"{_path(key)}: expected {n} rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"{_path(key, i)}: expected a row of length {n}")
        rows.append([_number(v, _path(key, i, j)) for j, v in enumerate(row)])
    return rows


def parse_network(document: bytes | str | dict, *, check: bool = True) -> NetworkSpec:
    """Parse a JSON network document.

    Schema violations (missing keys, bad dimensions, non-numeric or negative
    rates) raise :class:`ParseError` naming the JSON path.  With ``check``
    (the default) any error reported by :func:`validate_network` is raised
    as well.
    """
    if isinstance(document, dict):
        doc = document
    else:
        if isinstance(document, bytes):
            try:
                document = document.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"document is not UTF-8: {exc}") from None
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("$: expected a JSON object")
    missing = [k for k in KEYS if k not in doc]
    if missing:
        raise ParseError(f"$: missing required field(s) {', '.join(missing)}")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError("$.n: expected a positive integer")

    fields: dict[str, Any] = {"n": n}
    for key in MATRIX_KEYS:
        m = _read_matrix(doc, key, n)
        for i, row in enumerate(m):
            for j, v in enumerate(row):
                if v < 0:
                    raise ParseError(f"{_path(key, i, j)}: negative rate {v!r}")
        fields[key] = m
    for key in VECTOR_KEYS:
        fields[key] = _read_vector(doc, key, n)

    spec = NetworkSpec(**fields)
    if check:
        errors = [d for d in validate_network(spec) if d.level == "error"]
        if errors:
            raise ParseError("; ".join(d.message for d in errors))
    return spec


def load_network(path: str | Path, *, check: bool = True) -> NetworkSpec:
    return parse_network(Path(path).read_bytes(), check=check)


def bundled_path(name: str) -> Path:
    """Path of a model shipped with the package, e.g. ``"g2m_two_protein"``."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("tqssa") / "data" / name))


def bundled_models() -> list[str]:
    root = resources.files("tqssa") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _triples(spec: NetworkSpec) -> Iterable[tuple[str, tuple[np.ndarray, ...]]]:
    yield "K", (spec.k1, spec.k_neg1, spec.k2)
    yield "L", (spec.l1, spec.l_neg1, spec.l2)


def validate_network(spec: NetworkSpec) -> list[Diagnostic]:
    """Check the hypotheses under which the reduction is defined.

    Errors: negative or non-finite values, non-positive protein totals,
    ``p0`` outside ``[0, u_total]``, and rate triples that are neither all
    zero nor all positive.  Warnings: a node with no incoming PP edge carrying
    a nonzero ``k2`` (no activation pathway), and an enzyme with zero total
    that still has EP edges.  Diagonal PP edges produce an info note.
    """
    out: list[Diagnostic] = []
    n = spec.n

    def err(msg):
        out.append(Diagnostic("error", msg))

    for key in MATRIX_KEYS + VECTOR_KEYS:
        a = getattr(spec, key)
        if not np.all(np.isfinite(a)):
            err(f"{key} has non-finite entries")
    for key in MATRIX_KEYS:
        a = getattr(spec, key)
        for i, j in zip(*np.nonzero(a < 0)):
            err(f"negative rate {key}({i + 1},{j + 1})")
    for i in range(n):
        if not spec.u_total[i] > 0:
            err(f"u_total({i + 1}) must be positive")
        if spec.e_total[i] < 0:
            err(f"e_total({i + 1}) must be non-negative")
        if not 0 <= spec.p0[i] <= spec.u_total[i]:
            err(f"p0({i + 1}) must lie in [0, u_total({i + 1})]")

    for name, (a1, am1, a2) in _triples(spec):
        pos = (a1 > 0).astype(int) + (am1 > 0) + (a2 > 0)
        for i, j in zip(*np.nonzero((pos > 0) & (pos < 3))):
            err(f"all-or-none triple violated at {name}({i + 1},{j + 1})")

    for j in range(n):
        if not np.any(spec.k2[:, j] > 0):
            out.append(Diagnostic("warning", f"node {j + 1} has no activation pathway"))
    for i in range(n):
        if spec.e_total[i] == 0 and np.any(spec.l1[i] > 0):
            out.append(Diagnostic(
                "warning", f"enzyme {i + 1} has zero total but acts on proteins"))
    for i in range(n):
        if spec.k1[i, i] > 0:
            out.append(Diagnostic(
                "info", f"autocatalytic PP edge at K({i + 1},{i + 1})"))
    return out


def masks(spec: NetworkSpec) -> ConnectivityMasks:
    i_k = (spec.k1 > 0).astype(int)
    i_l = (spec.l1 > 0).astype(int)
    return ConnectivityMasks(i_k, i_l, int(i_k.sum() + i_l.sum()))
