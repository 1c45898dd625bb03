"""Small dense matrix kernel.

Everything here works on plain ``numpy`` arrays.  ``vec`` stacks columns
(Fortran order), ``hat`` puts ``vec(M)`` on a diagonal.  The linear solver is
LU with partial pivoting and the eigenvalue routine is a Hessenberg reduction
followed by Francis double-shift QR on the real Schur form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SINGULAR_RTOL = 1e-13


class SingularMatrixError(ArithmeticError):
    def __init__(self, pivot_index: int, pivot: float, norm: float):
        self.pivot_index = pivot_index
        self.pivot = pivot
        super().__init__(
            f"matrix is singular to working precision at pivot {pivot_index} "
            f"(|pivot| = {pivot:.3e}, ||A||_inf = {norm:.3e})")


class ConvergenceError(ArithmeticError):
    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"QR iteration did not converge after {iterations} iterations")


def vec(m) -> np.ndarray:
    """Stack the columns of ``m`` into one vector."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape((rows, cols), order="F")


def hat(m) -> np.ndarray:
    return np.diag(vec(m))


def kron(a, b) -> np.ndarray:
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray
    perm: np.ndarray


def lu_factor(a) -> LUFactors:
    """Doolittle LU with partial pivoting, ``A[perm] = L U``.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-13 * ||A||_inf``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("lu_factor needs a square matrix")
    perm = np.arange(n)
    norm = float(np.abs(a).sum(axis=1).max()) if n else 0.0
    tiny = SINGULAR_RTOL * norm
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv = abs(a[p, k])
        if piv <= tiny or piv == 0.0:
            raise SingularMatrixError(k, piv, norm)
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        if k + 1 < n:
            a[k + 1:, k] /= a[k, k]
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return LUFactors(a, perm)


def lu_apply(f: LUFactors, b) -> np.ndarray:
    """Solve with precomputed factors; ``b`` may be a vector or a matrix."""
    lu = f.lu
    n = lu.shape[0]
    x = np.array(b, dtype=float)[f.perm]
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def lu_solve(a, b) -> np.ndarray:
    return lu_apply(lu_factor(a), b)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[complex, ...]

    @property
    def max_real_part(self) -> float:
        if not self.eigenvalues:
            return -math.inf
        return max(z.real for z in self.eigenvalues)

    def __len__(self):
        return len(self.eigenvalues)


def _balance(a: list[list[float]], n: int) -> None:
    # Parlett-Reinsch balancing by powers of two, in place (1-based rows/cols).
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(1, n + 1):
            r = c = 0.0
            for j in range(1, n + 1):
                if j != i:
                    c += abs(a[j][i])
                    r += abs(a[i][j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(1, n + 1):
                        a[i][j] *= g
                    for j in range(1, n + 1):
                        a[j][i] *= f


def hessenberg(a) -> np.ndarray:
    """Upper Hessenberg form by Householder similarity transforms."""
    h = np.array(a, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _hqr(a: list[list[float]], n: int, max_its: int) -> list[complex]:
    # Francis double-shift QR on an upper Hessenberg matrix stored 1-based.
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i][j])
    nn = n
    t = 0.0
    total_its = 0
    while nn >= 1:
        its = 0
        while True:
            for l in range(nn, 1, -1):
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) + s == s:
                    a[l][l - 1] = 0.0
                    break
            else:
                l = 1
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1][nn - 1]
            w = a[nn][nn - 1] * a[nn - 1][nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its == max_its:
                raise ConvergenceError(total_its)
            if its in (10, 20):
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i][i] -= x
                s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total_its += 1
            m = nn - 2
            while m >= l:
                z = a[m][m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                q = a[m + 1][m + 1] - z - r - s
                r = a[m + 2][m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                if u + v == v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i][i - 2] = 0.0
                if i != m + 2:
                    a[i][i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k][k - 1]
                    q = a[k + 1][k - 1]
                    r = a[k + 2][k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k][k - 1] = -a[k][k - 1]
                else:
                    a[k][k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k][j] + q * a[k + 1][j]
                    if k != nn - 1:
                        p += r * a[k + 2][j]
                        a[k + 2][j] -= p * z
                    a[k + 1][j] -= p * y
                    a[k][j] -= p * x
                for i in range(l, min(nn, k + 3) + 1):
                    p = x * a[i][k] + y * a[i][k + 1]
                    if k != nn - 1:
                        p += z * a[i][k + 2]
                        a[i][k + 2] -= p * r
                    a[i][k + 1] -= p * q
                    a[i][k] -= p
    return [complex(wr[i], wi[i]) for i in range(1, n + 1)]


def eigenvalues(a, max_its: int = 30) -> Spectrum:
    """All eigenvalues of a real square matrix.

    ``max_its`` caps the QR sweeps spent on any single eigenvalue; exceeding
    it raises :class:`ConvergenceError`.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("eigenvalues needs a square matrix")
    if n == 0:
        return Spectrum(())
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    work = [[0.0] * (n + 1)] + [[0.0] + row for row in a.tolist()]
    _balance(work, n)
    h = hessenberg(np.array([row[1:] for row in work[1:]]))
    work = [[0.0] * (n + 1)] + [[0.0] + row for row in h.tolist()]
    vals = _hqr(work, n, max_its)
    vals.sort(key=lambda z: (z.real, z.imag))
    return Spectrum(tuple(vals))
