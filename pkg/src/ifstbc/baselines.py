"""ZF, MMSE and exhaustive-search ML decoders on the real model.

All decoders take the lattice generator ``G`` (effective channel times the
constellation power scale) so that ``y = G (s - offset) + noise``. Linear
receivers round per component after undoing the centering and clamp to the
ring; ML scans every ring vector.
"""

from __future__ import annotations

import itertools

import numpy as np

from .channel import Constellation, EffectiveChannel
from .if_receiver import round_half_away

__all__ = [
    "ML_MAX_HYPOTHESES",
    "decode_zf",
    "decode_mmse",
    "decode_ml",
    "zf_filter",
    "mmse_filter",
    "linear_decode_batch",
    "ml_decode_batch",
    "ring_vectors",
]

ML_MAX_HYPOTHESES = 2 ** 16


def _G(heff, constellation: Constellation) -> np.ndarray:
    mat = heff.matrix if isinstance(heff, EffectiveChannel) else np.asarray(heff, dtype=float)
    return constellation.power_scale * mat


def _check_rank(G):
    d, n = G.shape[-2:]
    if d < n or np.any(np.linalg.matrix_rank(G) < n):
        raise ValueError(f"effective channel {d}x{n} is not full column rank (need n_r >= K/T)")


def zf_filter(G) -> np.ndarray:
    return np.linalg.pinv(G)


def mmse_filter(G, P: float, Ebar: float, n_t: int) -> np.ndarray:
    """``(G^T G + lam I)^{-1} G^T`` with ``lam = n_t / (2 P Ebar)``; works on stacks."""
    n = G.shape[-1]
    Gt = np.swapaxes(G, -1, -2)
    lam = n_t / (2.0 * P * Ebar)
    return np.linalg.solve(Gt @ G + lam * np.eye(n), Gt)


def linear_decode_batch(Y, F, constellation: Constellation) -> np.ndarray:
    """Round ``F y + offset`` per component and clamp into the ring."""
    est = np.einsum("nij,nj->ni", F, Y) + constellation.offset
    return np.clip(round_half_away(est), 0, constellation.ring_size - 1).astype(np.int64)


def ring_vectors(ring_size: int, n: int) -> np.ndarray:
    """All ring vectors of length n in lexicographic order."""
    if ring_size ** n > ML_MAX_HYPOTHESES:
        raise ValueError(
            f"ML search over {ring_size}^{n} = {ring_size ** n} hypotheses exceeds "
            f"the guard of {ML_MAX_HYPOTHESES}"
        )
    return np.array(list(itertools.product(range(ring_size), repeat=n)), dtype=np.int64)


def ml_decode_batch(Y, G, constellation: Constellation, chunk: int = 512) -> np.ndarray:
    """Exhaustive ML over ``ring^{2K}``; ties go to the lexicographically first vector.

    The metric ``c^T Q c - 2 c^T z`` with ``Q = G^T G``, ``z = G^T y`` is split
    over the first and second halves of ``c``, so each trial costs two small
    tables plus one cross term instead of a pass over every hypothesis.
    """
    Y = np.asarray(Y, dtype=float)
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    q = constellation.ring_size
    ring_vectors(q, n)  # guard
    h = n // 2
    U = ring_vectors(q, h)
    V = ring_vectors(q, n - h)
    Uc = (U - constellation.offset).astype(float)
    Vc = (V - constellation.offset).astype(float)
    out = np.empty((Y.shape[0], n), dtype=np.int64)
    for start in range(0, Y.shape[0], chunk):
        sl = slice(start, start + chunk)
        Gt = np.swapaxes(G[sl], -1, -2)
        Q = Gt @ G[sl]
        z = np.einsum("nij,nj->ni", Gt, Y[sl])
        qu = np.einsum("ai,nij,aj->na", Uc, Q[:, :h, :h], Uc, optimize=True) - 2 * z[:, :h] @ Uc.T
        qv = np.einsum("bi,nij,bj->nb", Vc, Q[:, h:, h:], Vc, optimize=True) - 2 * z[:, h:] @ Vc.T
        cross = 2 * (Uc @ Q[:, :h, h:]) @ Vc.T
        metric = qu[:, :, None] + qv[:, None, :] + cross
        best = np.argmin(metric.reshape(len(metric), -1), axis=1)
        out[sl] = np.concatenate([U[best // len(V)], V[best % len(V)]], axis=1)
    return out


def decode_zf(y, heff, constellation: Constellation) -> np.ndarray:
    G = _G(heff, constellation)
    _check_rank(G)
    return linear_decode_batch(np.asarray(y, float)[None], zf_filter(G)[None], constellation)[0]


def decode_mmse(y, heff, P: float, Ebar: float, constellation: Constellation,
                n_t: int | None = None) -> np.ndarray:
    G = _G(heff, constellation)
    _check_rank(G)
    if n_t is None:
        if not isinstance(heff, EffectiveChannel):
            raise ValueError("n_t is required when passing a bare matrix")
        n_t = heff.source_H.n_t
    F = mmse_filter(G, P, Ebar, n_t)
    return linear_decode_batch(np.asarray(y, float)[None], F[None], constellation)[0]


def decode_ml(y, heff, constellation: Constellation) -> np.ndarray:
    G = _G(heff, constellation)
    return ml_decode_batch(np.asarray(y, float)[None], G[None], constellation)[0]
