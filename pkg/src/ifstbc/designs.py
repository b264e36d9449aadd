"""Linear dispersion designs and their real code matrices.

A design carries 2K real symbols through ``X(s) = sum_k D_k s_k`` with
complex ``n_t x T`` weight matrices ``D_k``. Complex variables are split
as ``x_j = s_{2j-1} + i s_{2j}``, so weights come in (real part, imaginary
part) pairs.

Vectorization convention: a complex ``n_t x T`` matrix maps to the real
vector ``[rowstack(Re X); rowstack(Im X)]``. With it,
``vec(H X) = (H' kron I_T) vec(X)`` where ``H'`` is the real embedding of
``H`` (see :func:`ifstbc.channel.embed_real`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LinearDesign",
    "CodeMatrix",
    "DesignError",
    "DesignFileError",
    "BUILTIN_DESIGNS",
    "GAMMA_CE",
    "make_design",
    "assemble",
    "assemble_batch",
    "vectorize",
    "code_matrix",
    "parse_design_file",
    "format_design",
    "load_design",
]

GAMMA_CE = (1 + 1j) / np.sqrt(2)

_RANK_TOL = 1e-10


class DesignError(ValueError):
    """Raised for malformed or rank-deficient designs."""


class DesignFileError(DesignError):
    """Raised by the design-file parser; message carries the line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class LinearDesign:
    name: str
    n_t: int
    T: int
    K: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if w.shape != (2 * self.K, self.n_t, self.T):
            raise DesignError(
                f"design {self.name!r}: expected {2 * self.K} weights of shape "
                f"{self.n_t}x{self.T}, got array of shape {w.shape}"
            )
        if self.T < self.n_t:
            raise DesignError(f"design {self.name!r}: T={self.T} < n_t={self.n_t}")

    @property
    def n_real(self) -> int:
        """Number of real symbols, 2K."""
        return 2 * self.K

    @property
    def rate(self) -> float:
        """Symbol rate K/T in complex symbols per channel use."""
        return self.K / self.T

    def min_receive_antennas(self) -> int:
        """Smallest n_r satisfying n_r >= K/T."""
        return int(np.ceil(self.K / self.T - 1e-12))


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    entries: np.ndarray = field(repr=False)
    sigma_min: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def _split_complex(complex_weights) -> np.ndarray:
    """Turn K complex-variable weights into 2K real-variable weights."""
    out = []
    for w in complex_weights:
        w_re, w_im = w
        out.append(np.asarray(w_re, dtype=complex))
        out.append(np.asarray(w_im, dtype=complex))
    return np.array(out)


def _alamouti():
    # X = [x1 x2; -x2* x1*]
    return [
        ([[1, 0], [0, 1]], [[1j, 0], [0, -1j]]),
        ([[0, 1], [-1, 0]], [[0, 1j], [1j, 0]]),
    ]


def _example_xe():
    # X = [x1 2x2; 2x2 x1]
    return [
        ([[1, 0], [0, 1]], [[1j, 0], [0, 1j]]),
        ([[0, 2], [2, 0]], [[0, 2j], [2j, 0]]),
    ]


def _cyclic_ext():
    # X = [x1 x2; x2 g*x1], g = (1 + i)/sqrt(2)
    g = GAMMA_CE
    return [
        ([[1, 0], [0, g]], [[1j, 0], [0, 1j * g]]),
        ([[0, 1], [1, 0]], [[0, 1j], [1j, 0]]),
    ]


def _golden():
    # X = 1/sqrt5 [a(a1 + b1 th)       a(c1 + d1 th)    ]
    #             [i sa(c1 + d1 sth)   sa(a1 + b1 sth)  ]
    # th = (1+sqrt5)/2, sth = (1-sqrt5)/2, a = 1 + i - i th, sa = 1 + i - i sth.
    th = (1 + np.sqrt(5)) / 2
    sth = (1 - np.sqrt(5)) / 2
    a = 1 + 1j - 1j * th
    sa = 1 + 1j - 1j * sth
    nrm = 1 / np.sqrt(5)

    def pair(m):
        m = nrm * np.asarray(m, dtype=complex)
        return (m, 1j * m)

    return [
        pair([[a, 0], [0, sa]]),
        pair([[a * th, 0], [0, sa * sth]]),
        pair([[0, a], [1j * sa, 0]]),
        pair([[0, a * th], [1j * sa * sth, 0]]),
    ]


_BUILDERS = {
    "alamouti": _alamouti,
    "golden": _golden,
    "cyclic_ext": _cyclic_ext,
    "example_xe": _example_xe,
}

BUILTIN_DESIGNS = tuple(_BUILDERS)


def make_design(name: str) -> LinearDesign:
    """Build one of the shipped designs by name.

    Known names are ``alamouti``, ``golden``, ``cyclic_ext`` and ``example_xe``.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise DesignError(
            f"unknown design {name!r}; known designs: {', '.join(BUILTIN_DESIGNS)}"
        ) from None
    weights = _split_complex(builder())
    n_real, n_t, T = weights.shape
    return LinearDesign(name=name, n_t=n_t, T=T, K=n_real // 2, weights=weights)


def assemble(design: LinearDesign, s) -> np.ndarray:
    """Return the codeword ``sum_k D_k s_k`` for a real vector ``s`` of length 2K."""
    s = np.asarray(s, dtype=float)
    if s.shape != (design.n_real,):
        raise DesignError(
            f"symbol vector has shape {s.shape}, design {design.name!r} needs ({design.n_real},)"
        )
    return np.tensordot(s, design.weights, axes=1)


def assemble_batch(design: LinearDesign, S) -> np.ndarray:
    """Vectorized :func:`assemble` over the rows of ``S`` (shape ``(N, 2K)``)."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] != design.n_real:
        raise DesignError(f"expected (N, {design.n_real}) symbol array, got {S.shape}")
    return np.einsum("nk,kij->nij", S, design.weights)


def vectorize(X) -> np.ndarray:
    """Real vector ``[rowstack(Re X); rowstack(Im X)]`` of a complex matrix."""
    X = np.asarray(X)
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def code_matrix(design: LinearDesign) -> CodeMatrix:
    """Stack the vectorized weights as columns of the real code matrix R."""
    R = np.column_stack([vectorize(D) for D in design.weights])
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[-1] <= _RANK_TOL * max(sv[0], 1.0):
        raise DesignError(
            f"design {design.name!r}: weight matrices are linearly dependent "
            f"(rank {int(np.sum(sv > _RANK_TOL * sv[0]))} < {design.n_real})"
        )
    R.setflags(write=False)
    return CodeMatrix(entries=R, sigma_min=float(sv[-1]))


def _parse_complex(token: str, lineno: int) -> complex:
    parts = token.split(",")
    if len(parts) != 2:
        raise DesignFileError(lineno, f"expected 're,im' pair, got {token!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise DesignFileError(lineno, f"non-numeric entry {token!r}") from None


def parse_design_file(text: str, name: str = "user") -> LinearDesign:
    """Parse the plain-text design format.

    The file has ``key = value`` header lines for ``n_t``, ``T``, ``K`` and
    optionally ``name``, followed by 2K blocks. Each block starts with a line
    ``D <k>`` (k = 1..2K, in order) and has n_t rows of T whitespace-separated
    ``re,im`` pairs. ``#`` starts a comment.

    Example::

        name = alamouti
        n_t = 2
        T = 2
        K = 2
        D 1
        1,0  0,0
        0,0  1,0
        ...
    """
    header: dict[str, int] = {}
    blocks: list[list[list[complex]]] = []
    block_lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            if blocks:
                raise DesignFileError(lineno, "header line after weight blocks")
            key, value = (p.strip() for p in line.split("=", 1))
            if key == "name":
                name = value
                continue
            if key not in ("n_t", "T", "K"):
                raise DesignFileError(lineno, f"unknown header key {key!r}")
            try:
                header[key] = int(value)
            except ValueError:
                raise DesignFileError(lineno, f"{key} must be an integer, got {value!r}") from None
            if header[key] < 1:
                raise DesignFileError(lineno, f"{key} must be positive")
            continue
        if line.split()[0] == "D":
            missing = [k for k in ("n_t", "T", "K") if k not in header]
            if missing:
                raise DesignFileError(lineno, f"missing header keys before weights: {missing}")
            fields = line.split()
            if len(fields) != 2 or fields[1] != str(len(blocks) + 1):
                raise DesignFileError(lineno, f"expected 'D {len(blocks) + 1}'")
            if blocks and len(blocks[-1]) != header["n_t"]:
                raise DesignFileError(
                    lineno, f"D {len(blocks)} has {len(blocks[-1])} rows, expected {header['n_t']}"
                )
            blocks.append([])
            block_lines.append(lineno)
            continue
        if not blocks:
            raise DesignFileError(lineno, "matrix row before any 'D <k>' line")
        row = [_parse_complex(tok, lineno) for tok in line.split()]
        if len(row) != header["T"]:
            raise DesignFileError(lineno, f"row has {len(row)} entries, expected T={header['T']}")
        if len(blocks[-1]) >= header["n_t"]:
            raise DesignFileError(lineno, f"D {len(blocks)} has more than n_t={header['n_t']} rows")
        blocks[-1].append(row)

    last = len(text.splitlines())
    missing = [k for k in ("n_t", "T", "K") if k not in header]
    if missing:
        raise DesignFileError(last, f"missing header keys: {missing}")
    if blocks and len(blocks[-1]) != header["n_t"]:
        raise DesignFileError(
            block_lines[-1], f"D {len(blocks)} has {len(blocks[-1])} rows, expected {header['n_t']}"
        )
    if len(blocks) != 2 * header["K"]:
        raise DesignFileError(last, f"found {len(blocks)} weight matrices, expected 2K={2 * header['K']}")
    if header["T"] < header["n_t"]:
        raise DesignFileError(last, f"T={header['T']} must be >= n_t={header['n_t']}")
    design = LinearDesign(name=name, n_t=header["n_t"], T=header["T"], K=header["K"],
                          weights=np.array(blocks, dtype=complex))
    code_matrix(design)  # rejects linearly dependent weights
    return design


def load_design(name_or_path: str) -> LinearDesign:
    """Builtin design by name, otherwise parse the file at that path."""
    if name_or_path in _BUILDERS:
        return make_design(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise DesignError(
            f"{name_or_path!r} is neither a builtin design ({', '.join(BUILTIN_DESIGNS)}) nor a file"
        )
    return parse_design_file(path.read_text(), name=path.stem)


def format_design(design: LinearDesign) -> str:
    """Serialize a design in the format read by :func:`parse_design_file`."""
    lines = [f"name = {design.name}", f"n_t = {design.n_t}", f"T = {design.T}", f"K = {design.K}"]
    for k, D in enumerate(design.weights, start=1):
        lines.append(f"D {k}")
        for row in D:
            lines.append("  ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(lines) + "\n"
