"""Lattice tools: LLL reduction, exact SVP enumeration, dual bases, minima.

Lattices are given by generator *rows*: the lattice of ``B`` is ``{d B : d
integer}``. The effective-channel lattice ``{d H^T}`` therefore uses the
columns of the effective channel as its basis rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numba
import numpy as np

__all__ = [
    "LatticeError",
    "LatticeBasis",
    "ReductionResult",
    "SVPResult",
    "MinimaReport",
    "lll_reduce",
    "lll_reduce_batch",
    "is_lll_reduced",
    "svp_enumerate",
    "enumerate_ball",
    "dual_basis",
    "successive_minima",
    "successive_minima_check",
    "int_det",
]

DEFAULT_DELTA = 0.99
SVP_MAX_DIM = 12
MINIMA_MAX_DIM = 8
_REL_TIE = 1e-9


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        B = np.array(self.rows, dtype=float, ndmin=2)
        n, m = B.shape
        if n > m:
            raise LatticeError(f"{n} basis vectors in dimension {m} cannot be independent")
        if n == 0 or np.linalg.matrix_rank(B) < n:
            raise LatticeError(f"basis of {n} vectors is rank deficient")
        B.setflags(write=False)
        object.__setattr__(self, "rows", B)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def gram(self) -> np.ndarray:
        return self.rows @ self.rows.T


def _as_basis(basis) -> LatticeBasis:
    return basis if isinstance(basis, LatticeBasis) else LatticeBasis(basis)


@dataclass(frozen=True, eq=False)
class ReductionResult:
    reduced: LatticeBasis
    unimodular: np.ndarray = field(repr=False)
    delta: float = DEFAULT_DELTA


class SVPResult(NamedTuple):
    vector: np.ndarray
    coefficients: np.ndarray

    @property
    def norm2(self) -> float:
        return float(self.vector @ self.vector)


@numba.njit(cache=True)
def _round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)


@numba.njit(cache=True)
def _dot(x, y):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i] * y[i]
    return acc


@numba.njit(cache=True)
def _lll_kernel(B, U, Uinv, delta):
    """In-place LLL on the rows of B; U and Uinv track the transform.

    Gram-Schmidt data for row k is recomputed from the current vectors every
    time row k is visited. Returns False if the iteration cap was hit.
    """
    n, m = B.shape
    Bs = np.zeros((n, m))
    mu = np.zeros((n, n))
    bn = np.zeros(n)
    Bs[0, :] = B[0, :]
    bn[0] = _dot(B[0], B[0])
    k = 1
    it = 0
    cap = 1000 * n * n + 10000
    while k < n:
        it += 1
        if it > cap:
            return False
        for j in range(k):
            mu[k, j] = _dot(B[k], Bs[j]) / bn[j]
        for j in range(k - 1, -1, -1):
            q = _round_half_away(mu[k, j])
            if q != 0:
                qi = np.int64(q)
                for c in range(m):
                    B[k, c] -= q * B[j, c]
                for c in range(n):
                    U[k, c] -= qi * U[j, c]
                    Uinv[c, j] += qi * Uinv[c, k]
                for i in range(j):
                    mu[k, i] -= q * mu[j, i]
                mu[k, j] -= q
        for c in range(m):
            Bs[k, c] = B[k, c]
        for j in range(k):
            for c in range(m):
                Bs[k, c] -= mu[k, j] * Bs[j, c]
        bn[k] = _dot(Bs[k], Bs[k])
        if bn[k] < (delta - mu[k, k - 1] ** 2) * bn[k - 1]:
            for c in range(m):
                t = B[k, c]
                B[k, c] = B[k - 1, c]
                B[k - 1, c] = t
            for c in range(n):
                ti = U[k, c]
                U[k, c] = U[k - 1, c]
                U[k - 1, c] = ti
                ti = Uinv[c, k]
                Uinv[c, k] = Uinv[c, k - 1]
                Uinv[c, k - 1] = ti
            if k == 1:
                Bs[0, :] = B[0, :]
                bn[0] = _dot(B[0], B[0])
            else:
                k -= 1
        else:
            k += 1
    return True


@numba.njit(cache=True)
def _lll_batch_kernel(bases, delta):
    N, n, m = bases.shape
    U = np.zeros((N, n, n), dtype=np.int64)
    Uinv = np.zeros((N, n, n), dtype=np.int64)
    ok = np.ones(N, dtype=np.bool_)
    for t in range(N):
        B = bases[t].copy()
        for i in range(n):
            U[t, i, i] = 1
            Uinv[t, i, i] = 1
        ok[t] = _lll_kernel(B, U[t], Uinv[t], delta)
    return U, Uinv, ok


def _check_delta(delta: float):
    if not 0.25 < delta <= 1.0:
        raise ValueError(f"delta must lie in (1/4, 1], got {delta}")


def lll_reduce_batch(bases, delta: float = DEFAULT_DELTA) -> tuple[np.ndarray, np.ndarray]:
    """LLL-reduce a stack of bases ``(N, n, m)``.

    Returns ``(U, U_inv)``, integer arrays of shape ``(N, n, n)`` with
    ``U @ bases[t]`` reduced and ``U @ U_inv = I`` exactly. Rank is not
    checked here; callers on the hot path guarantee it.
    """
    _check_delta(delta)
    bases = np.ascontiguousarray(bases, dtype=np.float64)
    U, Uinv, ok = _lll_batch_kernel(bases, float(delta))
    if not ok.all():
        raise LatticeError(f"LLL failed to converge on {int((~ok).sum())} bases")
    return U, Uinv


def lll_reduce(basis, delta: float = DEFAULT_DELTA) -> ReductionResult:
    """LLL-reduce the rows of ``basis``.

    ``result.reduced.rows == result.unimodular @ basis`` with ``unimodular`` an
    integer matrix of determinant +-1.
    """
    basis = _as_basis(basis)
    U, _ = lll_reduce_batch(basis.rows[None], delta)
    U = U[0]
    return ReductionResult(reduced=LatticeBasis(U @ basis.rows), unimodular=U, delta=delta)


def _gram_schmidt(B):
    n = B.shape[0]
    Bs = np.array(B, dtype=float)
    mu = np.eye(n)
    for i in range(n):
        for j in range(i):
            mu[i, j] = B[i] @ Bs[j] / (Bs[j] @ Bs[j])
            Bs[i] = Bs[i] - mu[i, j] * Bs[j]
    return Bs, mu


def is_lll_reduced(basis, delta: float = DEFAULT_DELTA, tol: float = 1e-9) -> bool:
    """Check size reduction and the Lovasz condition."""
    B = np.asarray(getattr(basis, "rows", basis), dtype=float)
    Bs, mu = _gram_schmidt(B)
    bn = np.einsum("ij,ij->i", Bs, Bs)
    n = B.shape[0]
    for i in range(n):
        for j in range(i):
            if abs(mu[i, j]) > 0.5 + tol:
                return False
    for k in range(1, n):
        if bn[k] < (delta - mu[k, k - 1] ** 2) * bn[k - 1] * (1 - tol):
            return False
    return True


def int_det(A) -> int:
    """Exact determinant of an integer matrix (Bareiss elimination on Python ints)."""
    M = [[int(v) for v in row] for row in np.asarray(A)]
    n = len(M)
    if any(len(r) != n for r in M):
        raise ValueError("matrix must be square")
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1] if n else 1


def enumerate_ball(basis, radius2: float) -> Iterator[tuple[np.ndarray, float]]:
    """Yield ``(d, ||d B||^2)`` for every nonzero integer ``d`` with norm^2 <= radius2."""
    B = np.asarray(getattr(basis, "rows", basis), dtype=float)
    n = B.shape[0]
    R = np.linalg.qr(B.T, mode="r")
    diag = np.diag(R).copy()
    bound = radius2 * (1 + _REL_TIE) + 1e-300
    c = np.zeros(n, dtype=np.int64)

    def rec(i, partial):
        center = -float(R[i, i + 1:] @ c[i + 1:]) / diag[i]
        rem = bound - partial
        if rem < 0:
            return
        w = math.sqrt(rem) / abs(diag[i])
        for ci in range(math.ceil(center - w), math.floor(center + w) + 1):
            t = diag[i] * (ci - center)
            p = partial + t * t
            if p > bound:
                continue
            c[i] = ci
            if i == 0:
                if c.any():
                    v = c @ B
                    yield c.copy(), float(v @ v)
            else:
                yield from rec(i - 1, p)
        c[i] = 0

    yield from rec(n - 1, 0.0)


def _canonical(d: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(d)
    return -d if nz.size and d[nz[0]] < 0 else d


def _pick(cands: list[np.ndarray]) -> np.ndarray:
    # sign-normalized, then lexicographically largest: prefers e_1 over e_2
    return max((_canonical(d) for d in cands), key=lambda d: tuple(int(x) for x in d))


def svp_enumerate(basis, radius: float | None = None) -> SVPResult:
    """Exact shortest nonzero vector by enumeration (dimension <= 12).

    ``radius`` is a Euclidean length; by default the length of the first LLL
    vector. If the ball turns out empty it is grown by 1.5x until not.
    Equal-length minimizers are resolved by sign-normalizing (first nonzero
    coefficient positive) and taking the lexicographically largest
    coefficient vector.
    """
    basis = _as_basis(basis)
    if basis.n > SVP_MAX_DIM:
        raise LatticeError(
            f"svp_enumerate supports n <= {SVP_MAX_DIM}, got {basis.n}; "
            "use lll_reduce(...).reduced.rows[0] as an approximation"
        )
    red = lll_reduce(basis)
    if radius is None:
        radius = float(np.linalg.norm(red.reduced.rows[0]))
    if radius <= 0:
        raise ValueError("radius must be positive")
    r2 = radius * radius
    while True:
        # enumerate in the reduced basis, then map coefficients back
        pts = [(d @ red.unimodular, nrm) for d, nrm in enumerate_ball(red.reduced, r2)]
        if pts:
            break
        r2 *= 1.5 ** 2
    best = min(n2 for _, n2 in pts)
    ties = [d for d, n2 in pts if n2 <= best * (1 + _REL_TIE)]
    d = _pick(ties)
    return SVPResult(vector=d @ basis.rows, coefficients=d)


def dual_basis(basis, max_cond: float = 1e12) -> LatticeBasis:
    """Dual basis ``D = (B B^T)^{-1} B`` with ``D B^T = I``."""
    basis = _as_basis(basis)
    G = basis.gram()
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > max_cond:
        raise LatticeError(f"Gram matrix is near singular (condition number {cond:.3e})")
    return LatticeBasis(np.linalg.solve(G, basis.rows))


def successive_minima(basis) -> np.ndarray:
    """Squared successive minima lambda_1^2 <= ... <= lambda_n^2, by enumeration."""
    basis = _as_basis(basis)
    if basis.n > MINIMA_MAX_DIM:
        raise LatticeError(f"successive minima by enumeration need n <= {MINIMA_MAX_DIM}")
    red = lll_reduce(basis)
    # the reduced rows are n independent vectors, so they bound lambda_n
    r2 = float(max(np.einsum("ij,ij->i", red.reduced.rows, red.reduced.rows)))
    pts = sorted(enumerate_ball(red.reduced, r2), key=lambda p: p[1])
    chosen: list[np.ndarray] = []
    minima: list[float] = []
    for d, n2 in pts:
        trial = np.array(chosen + [d], dtype=float)
        if np.linalg.matrix_rank(trial) > len(chosen):
            chosen.append(d)
            minima.append(n2)
            if len(chosen) == basis.n:
                break
    return np.array(minima)


@dataclass(frozen=True)
class MinimaReport:
    K: int
    eps1_sq: float
    dual_eps_last_sq: float
    bound: float
    holds: bool

    @property
    def product(self) -> float:
        return self.eps1_sq * self.dual_eps_last_sq


def successive_minima_check(basis, K: int) -> MinimaReport:
    """Check ``eps_2K^2(dual) <= (2K^3 + 3K^2) / eps_1^2(lattice)`` exactly by enumeration."""
    basis = _as_basis(basis)
    if basis.n != 2 * K:
        raise LatticeError(f"basis has {basis.n} vectors, expected 2K = {2 * K}")
    if basis.n > MINIMA_MAX_DIM:
        raise LatticeError(f"enumeration needs 2K <= {MINIMA_MAX_DIM}")
    eps1 = svp_enumerate(basis).norm2
    dual_last = float(successive_minima(dual_basis(basis))[-1])
    bound = 2 * K ** 3 + 3 * K ** 2
    return MinimaReport(K=K, eps1_sq=eps1, dual_eps_last_sq=dual_last, bound=bound,
                        holds=bool(eps1 * dual_last <= bound * (1 + 1e-12)))
