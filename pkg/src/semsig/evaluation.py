"""Benchmark protocol: query sampling, error CDFs, recall curves and sweeps."""

from __future__ import annotations

import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .distortion import DistortionConfig, distort, query_seed
from .model import TYPE_PART, BuildParams, SemanticObject, Signature, SignatureDatabase
from .retrieval import FusionPolicy, Protocol, score_protocol, truth_position
from .siggen import BBox, build_database, objects_origin

ERROR_GRID_M = tuple(float(e) for e in range(0, 501, 10))
RANK_GRID_PCT = (0.1, 0.5, 1.0, 2.0, 5.0) + tuple(float(p) for p in range(10, 101, 10))

# cell centers are stored at 1e-7 degree resolution, so grid distances are
# only multiples of the step to within a few millimeters
_ERROR_SLACK_M = 1e-3
_RANK_SLACK = 1e-9


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SEMSIG_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ErrorCdf:
    points: tuple[tuple[float, float], ...]

    def at(self, error_m: float) -> float:
        for e, p in self.points:
            if e == error_m:
                return p
        raise KeyError(f"{error_m} m is not on the error grid")


@dataclass(frozen=True)
class RecallCurve:
    points: tuple[tuple[float, float], ...]

    def at(self, rank_pct: float) -> float:
        for r, f in self.points:
            if r == rank_pct:
                return f
        raise KeyError(f"{rank_pct}% is not on the rank grid")


def error_cdf(errors: Sequence[float], grid: Sequence[float] = ERROR_GRID_M) -> ErrorCdf:
    e = np.asarray(errors, dtype=np.float64)
    n = len(e)
    pts = tuple((g, float(np.count_nonzero(e <= g + _ERROR_SLACK_M)) / n if n else 0.0) for g in grid)
    return ErrorCdf(pts)


def recall_curve(rank_pcts: Sequence[float], grid: Sequence[float] = RANK_GRID_PCT) -> RecallCurve:
    r = np.asarray(rank_pcts, dtype=np.float64)
    n = len(r)
    pts = tuple((g, float(np.count_nonzero(r <= g + _RANK_SLACK)) / n if n else 0.0) for g in grid)
    return RecallCurve(pts)


@dataclass
class EvaluationReport:
    config: dict
    cdf: ErrorCdf
    recall: RecallCurve
    errors_m: np.ndarray
    rank_pct: np.ndarray
    query_ms: np.ndarray = field(repr=False)

    @property
    def n_queries(self) -> int:
        return len(self.errors_m)

    @property
    def p_error_50(self) -> float:
        return self.cdf.at(50.0)

    @property
    def recall_at_10(self) -> float:
        return self.recall.at(10.0)

    def timing(self) -> dict:
        t = self.query_ms
        if not len(t):
            return {"mean_ms": 0.0, "median_ms": 0.0, "p95_ms": 0.0}
        return {
            "mean_ms": float(t.mean()),
            "median_ms": float(np.median(t)),
            "p95_ms": float(np.percentile(t, 95)),
        }

    def check(self) -> None:
        """Assert the curve invariants; raises AssertionError on violation."""
        for pts in (self.cdf.points, self.recall.points):
            xs = [x for x, _ in pts]
            ys = [y for _, y in pts]
            assert xs == sorted(xs), "grid must be sorted"
            assert all(0.0 <= y <= 1.0 for y in ys), "probabilities must lie in [0, 1]"
            assert all(a <= b for a, b in zip(ys, ys[1:])), "curve must be nondecreasing"


def sample_query_set(db: SignatureDatabase, n: int, seed: int) -> list[tuple[int, Signature]]:
    """Uniform sample of ``n`` records without replacement."""
    if n > len(db):
        raise ValueError(f"cannot sample {n} queries from {len(db)} records")
    if n < 0:
        raise ValueError("query count must be nonnegative")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(db))[:n]
    return [(db.records[i].cell_id, db.records[i].signature) for i in idx.tolist()]


def localization_error(db: SignatureDatabase, truth_cell: int, candidate_cells: Sequence[int]) -> float:
    """Distance from the true cell to the nearest of the returned candidates."""
    if not len(candidate_cells):
        raise ValueError("no candidates")
    packed = db.packed
    t = db.index_of(truth_cell)
    idx = np.array([db.index_of(c) for c in candidate_cells], dtype=np.int64)
    return _min_distance(packed, t, idx)


def _min_distance(packed, truth_idx: int, idx: np.ndarray) -> float:
    dx = packed.x[idx] - packed.x[truth_idx]
    dy = packed.y[idx] - packed.y[truth_idx]
    return float(np.sqrt(np.min(dx * dx + dy * dy)))


def _evaluate_one(db, i, cell_id, sig, policy, cfg, protocol, part, master_seed, backend):
    q = distort(sig, cfg.with_seed(query_seed(master_seed, i)), db.alphabet, db.params.quantization_levels)
    t0 = time.perf_counter()
    scored = score_protocol(db, q, policy, protocol, part=part, backend=backend, full_order=False)
    elapsed = (time.perf_counter() - t0) * 1000.0
    top = scored.order[: policy.t]
    err = _min_distance(db.packed, db.index_of(cell_id), top)
    rank = 100.0 * truth_position(scored, db, cell_id) / len(db)
    return err, rank, elapsed


def run_benchmark(
    db: SignatureDatabase,
    queries: Sequence[tuple[int, Signature]],
    policy: FusionPolicy,
    distortion_cfg: DistortionConfig,
    protocol: Protocol,
    part: str = TYPE_PART,
    master_seed: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> EvaluationReport:
    """Distort, rank and score every query.

    Query ``i`` is distorted with a seed derived from ``(master_seed, i)``,
    so results do not depend on ``workers``. Only scoring and ranking are
    timed.
    """
    workers = workers or default_workers()
    args = [(db, i, c, s, policy, distortion_cfg, protocol, part, master_seed, backend)
            for i, (c, s) in enumerate(queries)]
    db.packed  # build the shared arrays before fanning out
    if workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _evaluate_one(*a), args))
    else:
        results = [_evaluate_one(*a) for a in args]
    errors = np.array([r[0] for r in results], dtype=np.float64)
    ranks = np.array([r[1] for r in results], dtype=np.float64)
    times = np.array([r[2] for r in results], dtype=np.float64)
    config = {
        "protocol": protocol.value,
        "part": part if protocol is Protocol.SINGLE else None,
        "policy": policy.describe(),
        "distortion": distortion_cfg.describe(),
        "database": {
            "records": len(db),
            "visibility_range_m": db.params.visibility_range_m,
            "grid_step_m": db.params.grid_step_m,
            "quantization_levels": db.params.quantization_levels,
        },
        "queries": len(queries),
        "master_seed": master_seed,
    }
    report = EvaluationReport(config, error_cdf(errors), recall_curve(ranks), errors, ranks, times)
    report.check()
    return report


def filter_unambiguous(
    queries: Sequence[tuple[int, Signature]], db: SignatureDatabase
) -> tuple[list[tuple[int, Signature]], float]:
    """Keep queries whose full signature occurs exactly once in ``db``.

    Returns the kept queries and the kept fraction.
    """
    counts = Counter(r.signature for r in db.records)
    kept = [(c, s) for c, s in queries if counts[s] == 1]
    frac = len(kept) / len(queries) if queries else 1.0
    return kept, frac


def cdf_violations(better: ErrorCdf, baseline: ErrorCdf) -> list[float]:
    """Grid points where ``better`` falls below ``baseline``."""
    return [e for (e, p), (_, b) in zip(better.points, baseline.points) if p < b]


@dataclass(frozen=True)
class SweepRow:
    value: float
    records: int
    mean_length: float
    p_error_50: float
    recall_at_10: float


def _sweep(objects, bbox, params_list, policy, distortion_cfg, protocol, n_queries, seed, workers, backend):
    origin = objects_origin(objects)
    rows = []
    for value, params in params_list:
        db = build_database(objects, params, bbox, origin=origin)
        queries = sample_query_set(db, min(n_queries, len(db)), seed)
        rep = run_benchmark(db, queries, policy, distortion_cfg, protocol,
                            master_seed=seed, workers=workers, backend=backend)
        mean_len = float(np.mean([r.signature.n for r in db.records])) if len(db) else 0.0
        rows.append(SweepRow(value, len(db), mean_len, rep.p_error_50, rep.recall_at_10))
    return rows


# the configuration used for the parameter-dependence tables
SWEEP_POLICY = FusionPolicy(alpha=0.5, k_percent=5.0, t=1)
SWEEP_PROTOCOL = Protocol.TWO_STAGE_TYPE_FIRST


def sweep_visibility(
    objects: Sequence[SemanticObject],
    bbox: BBox,
    params_base: BuildParams,
    r_values: Sequence[float],
    policy: FusionPolicy = SWEEP_POLICY,
    distortion_cfg: DistortionConfig = DistortionConfig("medium"),
    protocol: Protocol = SWEEP_PROTOCOL,
    n_queries: int = 1000,
    seed: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> list[SweepRow]:
    """Rebuild the database for each visibility range and rerun the benchmark."""
    params = [(float(r), replace(params_base, visibility_range_m=float(r))) for r in r_values]
    return _sweep(objects, bbox, params, policy, distortion_cfg, protocol, n_queries, seed, workers, backend)


def sweep_quantization(
    objects: Sequence[SemanticObject],
    bbox: BBox,
    params_base: BuildParams,
    q_values: Sequence[int],
    policy: FusionPolicy = SWEEP_POLICY,
    distortion_cfg: DistortionConfig = DistortionConfig("medium"),
    protocol: Protocol = SWEEP_PROTOCOL,
    n_queries: int = 1000,
    seed: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> list[SweepRow]:
    """Rebuild the database for each quantization level and rerun the benchmark."""
    params = [(int(q), replace(params_base, quantization_levels=int(q))) for q in q_values]
    return _sweep(objects, bbox, params, policy, distortion_cfg, protocol, n_queries, seed, workers, backend)
