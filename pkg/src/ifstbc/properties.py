"""Design criteria checks and the radius budget behind them.

* Smallest-eigenvalue CCDF of a square complex Wishart matrix ``W = H^H H``
  with ``H`` i.i.d. N_c(0, 1)::

      Prob(lambda_min > c) = det[Gamma(i + j - 1, c)] / det[Gamma(i + j - 1, 0)]

  for ``i, j = 1..n_t``. Integer-order upper incomplete gamma functions are
  evaluated by their finite sums.
* Radius choice: ``Prob(||d||^2 <= 1 / (c3^2 c1)) = ccdf(n_t, c1)`` with
  ``c3`` the least singular value of the code matrix.
* RNVS / NVD / rank checks by exhaustive enumeration of integer vectors in a
  ball (or of constellation differences). A "holds" verdict only covers the
  tested set.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterator

import mpmath
import numpy as np

from .designs import GAMMA_CE, LinearDesign, assemble_batch, code_matrix, make_design

__all__ = [
    "BudgetError",
    "RadiusBudget",
    "PropertyReport",
    "wishart_min_eig_ccdf",
    "wishart_tail",
    "choose_radius",
    "radius_curve",
    "count_ball",
    "ball_points",
    "enumerate_DC",
    "check_rnvs",
    "check_nvd",
    "check_rank",
    "sigma_min_closed_form",
    "symbols_to_vector",
    "DEFAULT_MAX_POINTS",
]

DEFAULT_MAX_POINTS = 5_000_000
SINGULAR_RTOL = 1e-7
_TIE_RTOL = 1e-9

mpmath.mp.dps = 40


class BudgetError(ValueError):
    """Enumeration would exceed the work budget."""

    def __init__(self, count: int, budget: int, what: str = "ball"):
        self.count = count
        self.budget = budget
        super().__init__(
            f"{what} holds {count:.3g} integer vectors, over the budget of {budget:.3g}; "
            "lower C or raise max_points"
        )


def _gamma_tail(order: int, c) -> mpmath.mpf:
    # Gamma(a, c) = (a-1)! e^{-c} sum_{k<a} c^k / k!
    c = mpmath.mpf(c)
    term = mpmath.mpf(1)
    total = mpmath.mpf(0)
    for k in range(order):
        if k:
            term *= c / k
        total += term
    return mpmath.factorial(order - 1) * mpmath.exp(-c) * total


def _ccdf_mp(n_t: int, c1) -> mpmath.mpf:
    Mc = mpmath.matrix(n_t, n_t)
    M0 = mpmath.matrix(n_t, n_t)
    for i in range(n_t):
        for j in range(n_t):
            Mc[i, j] = _gamma_tail(i + j + 1, c1)
            M0[i, j] = mpmath.factorial(i + j)
    return abs(mpmath.det(Mc)) / abs(mpmath.det(M0))


def wishart_min_eig_ccdf(n_t: int, c1: float, n_r: int | None = None) -> float:
    """``Prob(lambda_min(H^H H) > c1)`` for an ``n_t x n_t`` Rayleigh ``H``.

    Only the square case is computed; a different ``n_r`` triggers a warning
    and the square result is returned.
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    if c1 < 0:
        raise ValueError(f"c1 must be non-negative, got {c1}")
    if n_r is not None and n_r != n_t:
        warnings.warn(f"ccdf is computed for the square {n_t}x{n_t} case, not n_r={n_r}",
                      stacklevel=2)
    if c1 == 0:
        return 1.0
    return float(_ccdf_mp(n_t, c1))


def wishart_tail(n_t: int, c1: float) -> float:
    """``1 - ccdf`` evaluated without cancellation."""
    if c1 < 0:
        raise ValueError(f"c1 must be non-negative, got {c1}")
    return float(1 - _ccdf_mp(n_t, c1)) if c1 else 0.0


@dataclass(frozen=True)
class RadiusBudget:
    C: float
    c1: float
    tail_prob: float
    c3: float
    curve: tuple[tuple[float, float], ...] = field(default=(), repr=False)


def radius_curve(n_t: int, c3: float, c1_values) -> list[tuple[float, float]]:
    """``(log10 C, log10 tail)`` pairs for the given eigenvalue thresholds."""
    out = []
    for c1 in c1_values:
        C = 1.0 / (c3 * c3 * c1)
        out.append((math.log10(C), math.log10(wishart_tail(n_t, c1))))
    return out


def choose_radius(design: LinearDesign, target_tail: float, n_curve: int = 61) -> RadiusBudget:
    """Smallest squared radius ``C`` whose tail ``Prob(||d||^2 > C)`` is <= target."""
    if not 0 < target_tail < 1:
        raise ValueError("target_tail must lie in (0, 1)")
    c3 = code_matrix(design).sigma_min
    if c3 <= 0:
        raise ValueError(f"design {design.name!r} has a rank-deficient code matrix")
    n_t = design.n_t
    lo, hi = 0.0, 1.0
    while wishart_tail(n_t, hi) <= target_tail:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if wishart_tail(n_t, mid) <= target_tail:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    c1 = lo
    curve = radius_curve(n_t, c3, np.logspace(-6, 0.5, n_curve))
    return RadiusBudget(C=1.0 / (c3 * c3 * c1), c1=c1, tail_prob=wishart_tail(n_t, c1),
                        c3=c3, curve=tuple(curve))


def count_ball(n: int, C: float) -> int:
    """Number of nonzero integer vectors in ``R^n`` with ``||d||^2 <= C``."""
    cmax = int(math.floor(C + 1e-9))
    counts = np.zeros(cmax + 1, dtype=object)
    counts[0] = 1
    r = math.isqrt(cmax)
    for _ in range(n):
        new = np.zeros_like(counts)
        for v in range(-r, r + 1):
            sq = v * v
            if sq <= cmax:
                new[sq:] += counts[: cmax + 1 - sq]
        counts = new
    return int(counts.sum()) - 1


def ball_points(n: int, C: float, include_zero: bool = False) -> np.ndarray:
    """All integer vectors with ``||d||^2 <= C`` in lexicographic order."""
    cmax = int(math.floor(C + 1e-9))
    r = math.isqrt(cmax)
    vals = np.arange(-r, r + 1, dtype=np.int64)
    pts = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        rep = np.repeat(np.arange(len(pts)), len(vals))
        v = np.tile(vals, len(pts))
        p2 = partial[rep] + v * v
        keep = p2 <= cmax
        pts = np.column_stack([pts[rep[keep]], v[keep]])
        partial = p2[keep]
    if not include_zero:
        pts = pts[np.any(pts != 0, axis=1)]
    return pts


def _chunks(n: int, C: float, max_points: int) -> Iterator[np.ndarray]:
    total = count_ball(n, C)
    if total > max_points:
        raise BudgetError(total, max_points)
    cmax = int(math.floor(C + 1e-9))
    r = math.isqrt(cmax)
    for v in range(-r, r + 1):
        rest = ball_points(n - 1, cmax - v * v, include_zero=True)
        chunk = np.column_stack([np.full(len(rest), v, dtype=np.int64), rest])
        if v == 0:
            chunk = chunk[np.any(chunk != 0, axis=1)]
        if len(chunk):
            yield chunk


def enumerate_DC(design_or_n, C: float, max_points: int = DEFAULT_MAX_POINTS) -> Iterator[np.ndarray]:
    """Yield each nonzero integer vector with ``||d||^2 <= C`` once, lexicographically.

    Membership in the set of vectors that can produce a sub-unit lattice
    distance is not tested; the whole ball is a superset of it.
    """
    n = design_or_n.n_real if isinstance(design_or_n, LinearDesign) else int(design_or_n)
    for chunk in _chunks(n, C, max_points):
        yield from chunk


@dataclass
class PropertyReport:
    design: str
    criterion: str
    verdict: str
    min_value: float
    C: float | None
    witness: tuple[int, ...] | None = None
    argmin: tuple[int, ...] | None = None
    witnesses: list[tuple[int, ...]] = field(default_factory=list)
    n_checked: int = 0
    statistic: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds_on_tested_set"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = [
            f"design     : {self.design}",
            f"criterion  : {self.criterion}",
            f"verdict    : {self.verdict}",
            f"statistic  : {self.statistic}",
            f"min value  : {self.min_value:.12g}",
            f"argmin     : {self.argmin}",
            f"C          : {self.C}",
            f"checked    : {self.n_checked} vectors",
        ]
        if self.witness is not None:
            lines.append(f"witness    : {self.witness}")
            lines.append(f"witnesses  : {len(self.witnesses)} singular vectors in the tested set")
        return "\n".join(lines) + "\n"


def _canonical(d: np.ndarray) -> tuple[int, ...]:
    nz = np.flatnonzero(d)
    if nz.size and d[nz[0]] < 0:
        d = -d
    return tuple(int(x) for x in d)


def _singular_values(X: np.ndarray) -> np.ndarray:
    return np.linalg.svd(X, compute_uv=False)


def _scan(design: LinearDesign, chunks, statistic: str, criterion: str, C) -> PropertyReport:
    best = math.inf
    cands: list[tuple[float, np.ndarray]] = []
    singular: list[tuple[int, ...]] = []
    count = 0
    for D in chunks:
        count += len(D)
        sv = _singular_values(assemble_batch(design, D))
        smin = sv[:, -1]
        value = smin if statistic == "sigma_min" else np.prod(sv * sv, axis=1)
        sing = smin < SINGULAR_RTOL * np.sqrt(np.sum(sv * sv, axis=1))
        singular.extend(_canonical(d) for d in D[sing])
        best = min(best, float(value.min()))
        near = value <= best * (1 + _TIE_RTOL)
        cands.extend(zip(value[near], D[near]))
    if count == 0:
        raise ValueError("empty ball: C must be >= 1")
    singular = sorted(set(singular))
    if singular:
        # shortest singular vector, then lexicographically largest
        argmin = min(singular, key=lambda d: (sum(x * x for x in d), tuple(-x for x in d)))
    else:
        argmin = max(_canonical(d) for v, d in cands if v <= best * (1 + _TIE_RTOL))
    refuted = bool(singular)
    return PropertyReport(
        design=design.name, criterion=criterion,
        verdict="refuted" if refuted else "holds_on_tested_set",
        min_value=best, C=C, witness=argmin if refuted else None, argmin=argmin,
        witnesses=singular, n_checked=count, statistic=statistic,
    )


def check_rnvs(design: LinearDesign, C: float, max_points: int = DEFAULT_MAX_POINTS) -> PropertyReport:
    """Minimum of ``sigma_min(X(d))`` over the nonzero integer ball ``||d||^2 <= C``.

    Refuted iff some codeword has ``sigma_min < 1e-7 ||X||_F``. The reported
    witness is the shortest singular vector (ties: lexicographically largest
    after sign normalization); ``witnesses`` lists all of them.
    """
    return _scan(design, _chunks(design.n_real, C, max_points), "sigma_min", "rnvs", C)


def check_nvd(design: LinearDesign, C: float, max_points: int = DEFAULT_MAX_POINTS) -> PropertyReport:
    """Refutation search for the NVD property: minimum of ``det(X X^H)`` on the ball."""
    return _scan(design, _chunks(design.n_real, C, max_points), "det_XXH", "nvd", C)


def check_rank(design: LinearDesign, M: int, max_points: int = DEFAULT_MAX_POINTS) -> PropertyReport:
    """Rank criterion over the ring constellation: every nonzero difference is full rank."""
    q = int(round(math.sqrt(M)))
    n = design.n_real
    if (2 * q - 1) ** n > max_points:
        raise BudgetError((2 * q - 1) ** n, max_points, "difference set")
    vals = np.arange(-(q - 1), q, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([vals] * n), indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.any(grid != 0, axis=1)]
    return _scan(design, [grid], "sigma_min", "rank", None)


def sigma_min_closed_form(design_name: str, x1: complex, x2: complex) -> float:
    """Closed-form squared least singular value for ``alamouti`` and ``cyclic_ext``."""
    x1, x2 = complex(x1), complex(x2)
    a = abs(x1) ** 2 + abs(x2) ** 2
    if design_name == "alamouti":
        return a
    if design_name == "cyclic_ext":
        return a - abs(x1 * x2.conjugate() + GAMMA_CE.conjugate() * x1.conjugate() * x2)
    raise ValueError(f"no closed form for design {design_name!r}; supported: alamouti, cyclic_ext")


def symbols_to_vector(design: LinearDesign | str, *xs: complex) -> np.ndarray:
    """Interleave complex variables into the real symbol vector ``(Re x1, Im x1, ...)``."""
    if isinstance(design, str):
        design = make_design(design)
    if len(xs) != design.K:
        raise ValueError(f"design {design.name!r} takes {design.K} complex variables")
    return np.array([p for x in xs for p in (complex(x).real, complex(x).imag)])
