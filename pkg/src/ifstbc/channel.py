"""Rayleigh MIMO channel, real embedding and the transmit model.

Received signal, in real form::

    y = G (s - offset) + sqrt(n_t / P) z,    G = power_scale * (H' kron I_T) R

with ``z`` having i.i.d. N(0, 1/2) real components (complex noise N_c(0, 1)).
``power_scale`` makes the average codeword entry energy one, so ``P`` is the
average receive SNR per receive antenna.

Random numbers come from numpy's Philox counter-based generator. A
substream is addressed by ``(seed, *keys)`` through ``SeedSequence`` spawn
keys; Gaussians use numpy's ziggurat ``standard_normal``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .designs import CodeMatrix, DesignError, LinearDesign, code_matrix

__all__ = [
    "ChannelRealization",
    "EffectiveChannel",
    "Constellation",
    "substream",
    "sample_channel",
    "sample_channels",
    "embed_real",
    "effective_channel",
    "effective_channels",
    "transmit",
]


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H: np.ndarray = field(repr=False)
    seed_tag: int | None = None

    @property
    def n_r(self) -> int:
        return self.H.shape[0]

    @property
    def n_t(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    matrix: np.ndarray = field(repr=False)
    source_H: ChannelRealization
    source_R: CodeMatrix
    full_rank: bool = True


@dataclass(frozen=True)
class Constellation:
    """The ring Z_q, q = sqrt(M), centered and scaled for transmission."""

    M: int
    ring_size: int
    offset: float
    energy: float
    power_scale: float

    @classmethod
    def create(cls, M: int, design: LinearDesign | None = None) -> "Constellation":
        q = int(round(np.sqrt(M)))
        if M < 4 or q * q != M or q & (q - 1):
            raise ValueError(f"M must be an even power of 2 (4, 16, 64, ...), got {M}")
        offset = Fraction(q - 1, 2)
        energy = sum((Fraction(v) - offset) ** 2 for v in range(q)) / q
        if design is None:
            scale = 1.0
        else:
            # E|X_it|^2 averaged over entries = energy * sum_k ||D_k||_F^2 / (n_t T)
            gain = float(np.sum(np.abs(design.weights) ** 2)) / (design.n_t * design.T)
            scale = 1.0 / np.sqrt(float(energy) * gain)
        return cls(M=M, ring_size=q, offset=float(offset), energy=float(energy), power_scale=scale)

    @property
    def bits_per_symbol(self) -> int:
        """Bits carried by one real ring symbol."""
        return self.ring_size.bit_length() - 1

    def center(self, s) -> np.ndarray:
        return (np.asarray(s, dtype=float) - self.offset) * self.power_scale

    def contains(self, s) -> bool:
        s = np.asarray(s)
        return bool(np.all((s == np.round(s)) & (s >= 0) & (s < self.ring_size)))


def sample_channel(n_r: int, n_t: int, stream: np.random.Generator,
                   seed_tag: int | None = None) -> ChannelRealization:
    """Draw an ``n_r x n_t`` matrix with i.i.d. N_c(0, 1) entries."""
    if n_r < 1 or n_t < 1:
        raise ValueError("n_r and n_t must be >= 1")
    return ChannelRealization(H=sample_channels(1, n_r, n_t, stream)[0], seed_tag=seed_tag)


def sample_channels(N: int, n_r: int, n_t: int, stream: np.random.Generator) -> np.ndarray:
    """``N`` i.i.d. Rayleigh channels stacked as ``(N, n_r, n_t)``."""
    g = stream.standard_normal((N, n_r, n_t, 2)) * np.sqrt(0.5)
    return g[..., 0] + 1j * g[..., 1]


def embed_real(H) -> np.ndarray:
    """Real block embedding ``[[Re H, -Im H], [Im H, Re H]]``; works on stacks too."""
    H = np.asarray(H)
    top = np.concatenate([H.real, -H.imag], axis=-1)
    bottom = np.concatenate([H.imag, H.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def _block_length(R: CodeMatrix, n_t: int) -> int:
    rows = R.entries.shape[0]
    if rows % (2 * n_t):
        raise DesignError(f"code matrix with {rows} rows does not fit n_t={n_t}")
    return rows // (2 * n_t)


def effective_channel(H: ChannelRealization, R: CodeMatrix) -> EffectiveChannel:
    """``(H' kron I_T) R``; rank deficiency is flagged, not rejected."""
    Hc = np.asarray(H.H)
    T = _block_length(R, Hc.shape[1])
    mat = np.kron(embed_real(Hc), np.eye(T)) @ R.entries
    full = mat.shape[0] >= mat.shape[1] and np.linalg.matrix_rank(mat) == mat.shape[1]
    return EffectiveChannel(matrix=mat, source_H=H, source_R=R, full_rank=bool(full))


def effective_channels(H, design: LinearDesign) -> np.ndarray:
    """Batched effective channels for a stack of ``H`` of shape ``(N, n_r, n_t)``.

    Column k of each result is ``vec(H D_k)``, which equals ``(H' kron I_T) R``.
    """
    HD = np.einsum("nij,kjt->nkit", H, design.weights)
    N, K2 = HD.shape[:2]
    v = np.concatenate([HD.real.reshape(N, K2, -1), HD.imag.reshape(N, K2, -1)], axis=2)
    return np.ascontiguousarray(v.transpose(0, 2, 1))


def transmit(design: LinearDesign, constellation: Constellation, s, H, P: float,
             stream: np.random.Generator | None = None, noiseless: bool = False) -> np.ndarray:
    """Received real vector of length ``2 n_r T`` for ring symbols ``s``."""
    if not constellation.contains(s):
        raise ValueError(f"symbols must lie in the ring Z_{constellation.ring_size}")
    if P <= 0:
        raise ValueError("P must be positive")
    if isinstance(H, ChannelRealization):
        H = H.H
    Heff = effective_channel(ChannelRealization(np.asarray(H)), code_matrix(design)).matrix
    y = Heff @ constellation.center(s)
    if not noiseless:
        if stream is None:
            raise ValueError("a noise substream is required unless noiseless=True")
        z = stream.standard_normal(y.shape) * np.sqrt(0.5)
        y = y + np.sqrt(design.n_t / P) * z
    return y
