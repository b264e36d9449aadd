"""Integer-forcing equalizer selection and three-step decoding.

The receiver works on the lattice generator ``G`` that maps centered integer
symbol vectors to the noiseless received vector (the effective channel times
the constellation power scale). For layer ``m`` with integer row ``a`` and
filter row ``b`` the effective noise power is::

    g(a, b) = ||b G - a||^2 * Ebar + n_t / (2P) * ||b||^2

Its minimizer over ``b`` is ``b = a (G^T G + lam I)^{-1} G^T`` with
``lam = n_t / (2 P Ebar)``, and the minimum is ``lam * Ebar * a W^{-1} a^T``
with ``W = G^T G + lam I``. Rows of ``A`` are taken from the unimodular
transform of an LLL reduction in that metric, so ``det A = +-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import Constellation, EffectiveChannel
from .lattice import DEFAULT_DELTA, int_det, lll_reduce_batch

__all__ = [
    "RingError",
    "IFEqualizer",
    "layer_noise",
    "select_equalizer",
    "equalize_batch",
    "decode",
    "decode_batch",
    "round_half_away",
    "solve_mod_ring",
    "layer_error_bound",
]


class RingError(ValueError):
    """Raised when an integer matrix is not invertible over Z_q."""


@dataclass(frozen=True, eq=False)
class IFEqualizer:
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    layer_noise: np.ndarray
    det_A_mod: int | None = None
    A_inv: np.ndarray | None = field(default=None, repr=False)


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _generator(heff, scale: float) -> np.ndarray:
    mat = heff.matrix if isinstance(heff, EffectiveChannel) else heff
    return scale * np.asarray(mat, dtype=float)


def _n_t(heff, n_t):
    if n_t is not None:
        return n_t
    if isinstance(heff, EffectiveChannel):
        return heff.source_H.n_t
    raise ValueError("n_t is required when passing a bare matrix")


def layer_noise(A, B, G, P: float, Ebar: float, n_t: int) -> np.ndarray:
    """Effective noise power per layer; broadcasts over leading batch axes."""
    A = np.asarray(A, dtype=float)
    resid = B @ G - A
    return (np.sum(resid ** 2, axis=-1) * Ebar
            + n_t / (2.0 * P) * np.sum(np.asarray(B) ** 2, axis=-1))


def equalize_batch(G, P: float, Ebar: float, n_t: int, delta: float = DEFAULT_DELTA):
    """Batched equalizer design for generators ``G`` of shape ``(N, d, n)``.

    Returns ``(A, A_inv, B)``; ``A`` and ``A_inv`` are exact integer inverses.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    lam = n_t / (2.0 * P * Ebar)
    W = np.swapaxes(G, -1, -2) @ G + lam * np.eye(n)
    Winv = np.linalg.inv(W)
    Winv = 0.5 * (Winv + np.swapaxes(Winv, -1, -2))
    # rows of L span the lattice whose squared norms are a W^{-1} a^T
    L = np.linalg.cholesky(Winv)
    A, A_inv = lll_reduce_batch(L, delta)
    B = A @ Winv @ np.swapaxes(G, -1, -2)
    return A, A_inv, B


def select_equalizer(heff, P: float, Ebar: float, n_t: int | None = None,
                     power_scale: float = 1.0, delta: float = DEFAULT_DELTA,
                     ring_size: int | None = None) -> IFEqualizer:
    """Pick integer matrix ``A`` (via LLL) and MMSE filter ``B`` for one channel.

    ``heff`` is an :class:`EffectiveChannel` or a real matrix; it is multiplied
    by ``power_scale`` to form the integer-lattice generator.
    """
    if P <= 0:
        raise ValueError("P must be positive")
    G = _generator(heff, power_scale)
    n_t = _n_t(heff, n_t)
    d, n = G.shape
    if d < n or np.linalg.matrix_rank(G) < n:
        raise ValueError(
            f"effective channel {d}x{n} is not full column rank; integer forcing needs "
            "n_r >= K/T (the system is underdetermined)"
        )
    A, A_inv, B = equalize_batch(G[None], P, Ebar, n_t, delta)
    A, A_inv, B = A[0], A_inv[0], B[0]
    det = int_det(A)
    return IFEqualizer(
        A=A, B=B, layer_noise=layer_noise(A, B, G, P, Ebar, n_t),
        det_A_mod=None if ring_size is None else det % ring_size, A_inv=A_inv,
    )


def solve_mod_ring(A, r, ring_size: int) -> np.ndarray:
    """Solve ``A s = r (mod ring_size)`` by Gaussian elimination with unit pivots."""
    q = int(ring_size)
    M = [[int(v) % q for v in row] for row in np.asarray(A)]
    n = len(M)
    rhs = [int(v) % q for v in np.asarray(r).ravel()]
    if any(len(row) != n for row in M) or len(rhs) != n:
        raise ValueError("A must be square and match the length of r")
    for col in range(n):
        piv = next((i for i in range(col, n) if np.gcd(M[i][col], q) == 1), None)
        if piv is None:
            raise RingError(
                f"matrix is not invertible over Z_{q} (det = {int_det(A)})"
            )
        M[col], M[piv] = M[piv], M[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = pow(M[col][col], -1, q)
        M[col] = [(v * inv) % q for v in M[col]]
        rhs[col] = (rhs[col] * inv) % q
        for i in range(n):
            if i != col and M[i][col]:
                f = M[i][col]
                M[i] = [(a - f * b) % q for a, b in zip(M[i], M[col])]
                rhs[i] = (rhs[i] - f * rhs[col]) % q
    return np.array(rhs, dtype=np.int64)


def decode_batch(Y, A, A_inv, B, ring_size: int, offset: float) -> np.ndarray:
    """Steps 1-3 on a batch; ``Y`` is ``(N, d)``, ``A_inv`` the exact integer inverse."""
    ytil = np.einsum("nij,nj->ni", B, Y) + offset * A.sum(axis=-1)
    yhat = round_half_away(ytil).astype(np.int64)
    r = np.mod(yhat, ring_size)
    return np.mod(np.einsum("nij,nj->ni", A_inv, r), ring_size)


def decode(y, eq: IFEqualizer, constellation: Constellation) -> np.ndarray:
    """Three-step IF decoding of one received vector.

    1. ``ytil = B y`` plus ``A offset 1`` to undo centering, rounded to Z;
    2. reduce mod ``sqrt(M)``;
    3. solve ``A s = r`` over the ring.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (eq.B.shape[1],):
        raise ValueError(f"received vector has shape {y.shape}, expected ({eq.B.shape[1]},)")
    q = constellation.ring_size
    ytil = eq.B @ y + constellation.offset * eq.A.sum(axis=1)
    r = np.mod(round_half_away(ytil).astype(np.int64), q)
    if eq.A_inv is not None:
        return np.mod(eq.A_inv @ r, q)
    return solve_mod_ring(eq.A, r, q)


def layer_error_bound(eq: IFEqualizer, P: float, n_t: int) -> np.ndarray:
    """Chernoff bound ``exp(-P / (4 n_t ||b_m||^2))`` per layer."""
    if P <= 0:
        raise ValueError("P must be positive")
    nb = np.sum(np.asarray(eq.B) ** 2, axis=1)
    out = np.zeros_like(nb)
    pos = nb > 0
    out[pos] = np.exp(-P / (4.0 * n_t * nb[pos]))
    return out
