"""Seeded Monte Carlo BER engine and diversity-slope estimator.

Trials at each SNR point are grouped in fixed-size blocks. Block ``b`` of
point ``p`` draws its channels, symbols and noise from
``substream(seed, p, b)``, so the numbers a trial sees depend only on its
index, never on which worker ran it. Blocks are merged in index order and
the stopping rule (target bit errors or trial cap) is checked after each
block, so every partition count gives the same tallies.

Receivers share the substreams, so curves for different receivers (or
designs of the same shape) are paired comparisons on identical draws.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import linear_decode_batch, ml_decode_batch, mmse_filter, ring_vectors
from .channel import Constellation, effective_channels, sample_channels, substream
from .designs import LinearDesign, load_design
from .if_receiver import decode_batch, equalize_batch, round_half_away
from .lattice import DEFAULT_DELTA

__all__ = [
    "RECEIVERS",
    "ConfigError",
    "ExperimentConfig",
    "BERPoint",
    "BERCurve",
    "InsufficientErrors",
    "run_ber",
    "diversity_slope",
    "select_window",
    "write_outputs",
]

log = logging.getLogger(__name__)

RECEIVERS = ("if", "zf", "mmse", "ml")
CSV_HEADER = ("snr_db", "bit_errors", "bits", "ber")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors: dict[str, str]):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


@dataclass(frozen=True)
class ExperimentConfig:
    design: str
    n_r: int
    M: int
    receiver: str
    snr_points_db: tuple[float, ...]
    max_trials: int = 100_000
    target_bit_errors: int | None = 200
    seed: int = 0
    block_size: int = 2000
    workers: int = 1
    noiseless: bool = False
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        object.__setattr__(self, "snr_points_db", tuple(float(x) for x in self.snr_points_db))

    def load(self) -> LinearDesign:
        return load_design(self.design)

    def validate(self) -> LinearDesign:
        """Check every field; raise :class:`ConfigError` listing all problems."""
        errors: dict[str, str] = {}
        design = None
        try:
            design = self.load()
        except ValueError as exc:
            errors["design"] = str(exc)
        try:
            Constellation.create(self.M)
        except ValueError as exc:
            errors["M"] = str(exc)
        if self.receiver not in RECEIVERS:
            errors["receiver"] = f"must be one of {RECEIVERS}, got {self.receiver!r}"
        if self.n_r < 1:
            errors["n_r"] = "must be >= 1"
        elif design is not None and self.receiver in ("if", "zf", "mmse") \
                and self.n_r * design.T < design.K:
            errors["n_r"] = (
                f"receiver {self.receiver!r} needs n_r >= K/T = {design.K}/{design.T} "
                f"for a full-rank effective channel (rank condition), got n_r={self.n_r}"
            )
        if design is not None and self.receiver == "ml" and "M" not in errors:
            try:
                ring_vectors(int(round(np.sqrt(self.M))), design.n_real)
            except ValueError as exc:
                errors["receiver"] = str(exc)
        if not self.snr_points_db:
            errors["snr_points_db"] = "at least one SNR point is required"
        if self.max_trials < 1:
            errors["max_trials"] = "must be >= 1"
        if self.target_bit_errors is not None and self.target_bit_errors < 1:
            errors["target_bit_errors"] = "must be >= 1 or unset"
        if self.block_size < 1:
            errors["block_size"] = "must be >= 1"
        if self.workers < 1:
            errors["workers"] = "must be >= 1"
        if not 0.25 < self.delta <= 1:
            errors["delta"] = "must lie in (1/4, 1]"
        if errors:
            raise ConfigError(errors)
        return design


@dataclass(frozen=True)
class BERPoint:
    snr_db: float
    bit_errors: int
    bits: int
    trials: int
    symbol_errors: int = 0
    step1_errors: int = 0
    layer_errors: int = 0
    low_confidence: bool = False

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")


@dataclass(frozen=True)
class BERCurve:
    config: ExperimentConfig
    points: tuple[BERPoint, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    @property
    def bit_errors(self) -> np.ndarray:
        return np.array([p.bit_errors for p in self.points])

    def point(self, snr_db: float) -> BERPoint:
        for p in self.points:
            if p.snr_db == snr_db:
                return p
        raise KeyError(snr_db)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow([repr(p.snr_db), p.bit_errors, p.bits, f"{p.ber:.10e}"])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "metadata": self.metadata,
            "points": [dict(asdict(p), ber=p.ber) for p in self.points],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _popcount(x: np.ndarray) -> int:
    return int(np.unpackbits(x.astype(np.uint8)[..., None], axis=-1).sum())


class _Trials:
    """Per-configuration state for running blocks; cheap to pickle."""

    def __init__(self, config: ExperimentConfig, design: LinearDesign):
        self.cfg = config
        self.design = design
        self.const = Constellation.create(config.M, design)

    def run_block(self, point: int, block: int, n: int) -> tuple[int, int, int, int, int]:
        cfg, d, c = self.cfg, self.design, self.const
        P = 10.0 ** (cfg.snr_points_db[point] / 10.0)
        rng = substream(cfg.seed, point, block)
        H = sample_channels(n, cfg.n_r, d.n_t, rng)
        s = rng.integers(0, c.ring_size, size=(n, d.n_real))
        G = c.power_scale * effective_channels(H, d)
        noise = rng.standard_normal((n, G.shape[1])) * np.sqrt(0.5)
        Y = np.einsum("nij,nj->ni", G, s - c.offset)
        if cfg.noiseless:
            # receivers are designed for the noise-free limit (no MMSE bias)
            P = np.inf
        else:
            Y += np.sqrt(d.n_t / P) * noise
        step1 = layers = 0
        if cfg.receiver == "if":
            A, A_inv, B = equalize_batch(G, P, c.energy, d.n_t, cfg.delta)
            s_hat = decode_batch(Y, A, A_inv, B, c.ring_size, c.offset)
            yhat = round_half_away(np.einsum("nij,nj->ni", B, Y) + c.offset * A.sum(-1))
            layer_wrong = yhat != np.einsum("nij,nj->ni", A, s)
            step1 = int(layer_wrong.any(axis=1).sum())
            layers = int(layer_wrong.sum())
        elif cfg.receiver == "zf":
            s_hat = linear_decode_batch(Y, np.linalg.pinv(G), c)
        elif cfg.receiver == "mmse":
            s_hat = linear_decode_batch(Y, mmse_filter(G, P, c.energy, d.n_t), c)
        else:
            s_hat = ml_decode_batch(Y, G, c)
        bit_errors = _popcount(np.bitwise_xor(s_hat, s))
        sym_errors = int(np.any(s_hat != s, axis=1).sum())
        return bit_errors, n * d.n_real * c.bits_per_symbol, sym_errors, step1, layers


_WORKER: _Trials | None = None


def _init_worker(config, design):
    global _WORKER
    _WORKER = _Trials(config, design)


def _worker_block(args):
    return _WORKER.run_block(*args)


def _run_point(trials: _Trials, point: int, pool) -> BERPoint:
    cfg = trials.cfg
    bs = cfg.block_size
    n_blocks = -(-cfg.max_trials // bs)
    tally = np.zeros(5, dtype=np.int64)
    done = 0
    wave = max(cfg.workers, 1) if pool is not None else 1
    b = 0
    stop = False
    while b < n_blocks and not stop:
        jobs = [(point, j, min(bs, cfg.max_trials - j * bs)) for j in range(b, min(b + wave, n_blocks))]
        results = list(pool.map(_worker_block, jobs)) if pool is not None \
            else [trials.run_block(*job) for job in jobs]
        for job, res in zip(jobs, results):
            tally += res
            done += job[2]
            b += 1
            if cfg.target_bit_errors is not None and tally[0] >= cfg.target_bit_errors:
                stop = True
                break
    low = cfg.target_bit_errors is not None and tally[0] < cfg.target_bit_errors
    return BERPoint(
        snr_db=cfg.snr_points_db[point], bit_errors=int(tally[0]), bits=int(tally[1]),
        trials=done, symbol_errors=int(tally[2]), step1_errors=int(tally[3]),
        layer_errors=int(tally[4]), low_confidence=bool(low),
    )


def run_ber(config: ExperimentConfig) -> BERCurve:
    """Simulate one BER curve; deterministic in ``config`` apart from ``workers``."""
    design = config.validate()
    trials = _Trials(config, design)
    pool = None
    if config.workers > 1:
        pool = ProcessPoolExecutor(config.workers, initializer=_init_worker,
                                   initargs=(config, design))
    try:
        points = []
        for i, snr in enumerate(config.snr_points_db):
            pt = _run_point(trials, i, pool)
            log.info("%s/%s %.1f dB: %d errors / %d bits (%d trials)", design.name,
                     config.receiver, snr, pt.bit_errors, pt.bits, pt.trials)
            points.append(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {
        "seed": config.seed,
        "block_size": config.block_size,
        "substreams": "numpy Philox via SeedSequence(seed, spawn_key=(point, block))",
        "power_scale": trials.const.power_scale,
        "Ebar": trials.const.energy,
        "n_t": design.n_t,
        "T": design.T,
        "K": design.K,
        "bit_mapping": "natural binary per real ring symbol",
    }
    return BERCurve(config=config, points=tuple(points), metadata=meta)


class InsufficientErrors(ValueError):
    pass


def select_window(curve: BERCurve, n: int = 3, min_errors: int = 200) -> list[float]:
    """SNR values of the ``n`` highest-SNR points with at least ``min_errors`` errors."""
    ok = [p.snr_db for p in curve.points if p.bit_errors >= min_errors and p.bit_errors > 0]
    ok = sorted(ok)[-n:]
    if len(ok) < n:
        counts = {p.snr_db: p.bit_errors for p in curve.points}
        raise InsufficientErrors(f"need {n} points with >= {min_errors} errors, have {counts}")
    return ok


def diversity_slope(curve, window=None, min_errors: int = 100) -> float:
    """Least-squares slope of -log10(BER) against log10(SNR) over ``window``.

    ``curve`` is a :class:`BERCurve` or a sequence of ``(snr_db, ber)`` or
    ``(snr_db, ber, bit_errors)`` tuples. ``window`` lists the SNR values (dB)
    to use; by default every point.
    """
    if isinstance(curve, BERCurve):
        rows = [(p.snr_db, p.ber, p.bit_errors) for p in curve.points]
    else:
        rows = [tuple(r) if len(r) == 3 else (r[0], r[1], None) for r in curve]
    if window is not None:
        wanted = set(float(w) for w in window)
        rows = [r for r in rows if r[0] in wanted]
    bad = [r for r in rows if r[2] is not None and r[2] < min_errors]
    if len(rows) < 3 or bad:
        counts = {r[0]: r[2] for r in rows}
        raise InsufficientErrors(
            f"slope needs >= 3 points with >= {min_errors} bit errors; per-point errors: {counts}"
        )
    x = np.array([r[0] for r in rows]) / 10.0
    yv = -np.log10(np.array([r[1] for r in rows]))
    return float(np.polyfit(x, yv, 1)[0])


def write_outputs(curve: BERCurve, out_dir, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(curve.to_csv())
    json_path.write_text(curve.to_json())
    return csv_path, json_path
