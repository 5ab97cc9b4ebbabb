"""Ranking database records against a query signature.

Three protocols are supported:

* single metric on one signature part,
* metric fusion: ``alpha * d_type + beta * d_angle`` over every record,
* two-stage metric fusion: rank by one weighted part, keep the best
  ``k`` percent, then add the other weighted part and re-rank the survivors.

Scores are ascending (0 is a perfect match). Ties are broken by ascending
cell id, so rankings are independent of record order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import scan_part
from .metrics import UNIT_WEIGHTS, EditWeights, MetricKind, part_distance
from .model import ANGLE_PART, TYPE_PART, GeoPoint, Signature, SignatureDatabase


class Protocol(enum.Enum):
    FULL = "full"
    TWO_STAGE_TYPE_FIRST = "two-stage-type-first"
    TWO_STAGE_ANGLE_FIRST = "two-stage-angle-first"
    SINGLE = "single"

    @property
    def first_part(self) -> str | None:
        if self is Protocol.TWO_STAGE_TYPE_FIRST:
            return TYPE_PART
        if self is Protocol.TWO_STAGE_ANGLE_FIRST:
            return ANGLE_PART
        return None


@dataclass(frozen=True)
class FusionPolicy:
    metric_type: MetricKind = MetricKind.EDIT
    metric_angle: MetricKind = MetricKind.EDIT
    alpha: float = 0.5
    k_percent: float = 5.0
    t: int = 100
    weights: EditWeights = field(default=UNIT_WEIGHTS)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.k_percent <= 100.0:
            raise ValueError("k_percent must lie in (0, 100]")
        if int(self.t) != self.t or self.t < 1:
            raise ValueError("t must be a positive integer")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    def weight(self, part: str) -> float:
        return self.alpha if part == TYPE_PART else self.beta

    def metric(self, part: str) -> MetricKind:
        return self.metric_type if part == TYPE_PART else self.metric_angle

    def describe(self) -> dict:
        return {
            "metric_type": self.metric_type.value,
            "metric_angle": self.metric_angle.value,
            "alpha": self.alpha,
            "beta": self.beta,
            "k_percent": self.k_percent,
            "t": self.t,
            "edit_weights": [self.weights.w_del, self.weights.w_ins, self.weights.w_sub],
        }


@dataclass(frozen=True)
class RankedCandidate:
    cell_id: int
    cell_center: GeoPoint
    score: float
    rank: int


def _other(part: str) -> str:
    return ANGLE_PART if part == TYPE_PART else TYPE_PART


def score_fused(q: Signature, r: Signature, policy: FusionPolicy) -> float:
    d1 = part_distance(policy.metric_type, q, r, TYPE_PART, policy.weights)
    d2 = part_distance(policy.metric_angle, q, r, ANGLE_PART, policy.weights)
    return policy.alpha * d1 + policy.beta * d2


def _order(scores: np.ndarray, cell_ids: np.ndarray) -> np.ndarray:
    return np.lexsort((cell_ids, scores))


def _best(scores: np.ndarray, cell_ids: np.ndarray, keep: int) -> np.ndarray:
    """Indices of the ``keep`` best records under (score, cell id), unordered."""
    n = len(scores)
    if keep >= n:
        return np.arange(n)
    cut = np.argpartition(scores, keep - 1)[:keep]
    threshold = scores[cut].max()
    below = np.nonzero(scores < threshold)[0]
    tied = np.nonzero(scores == threshold)[0]
    tied = tied[np.argsort(cell_ids[tied], kind="stable")][: keep - len(below)]
    return np.concatenate([below, tied])


def _ranked(scores: np.ndarray, cell_ids: np.ndarray, t: int | None) -> np.ndarray:
    if t is None or t >= len(scores):
        return _order(scores, cell_ids)
    top = _best(scores, cell_ids, t)
    return top[_order(scores[top], cell_ids[top])]


def _candidates(db: SignatureDatabase, idx: np.ndarray, scores: np.ndarray) -> list[RankedCandidate]:
    recs = db.records
    return [
        RankedCandidate(recs[i].cell_id, recs[i].cell_center, float(s), rank)
        for rank, (i, s) in enumerate(zip(idx.tolist(), scores.tolist()), 1)
    ]


def _check_db(db: SignatureDatabase) -> None:
    if not len(db):
        raise ValueError("database is empty")


def _weighted_part(db, q, policy, part, idx=None, backend=None) -> np.ndarray:
    d = scan_part(db.packed, q, policy.metric(part), part, policy.weights, idx=idx, backend=backend)
    return policy.weight(part) * d


@dataclass
class Scored:
    """Scores and ranking of the database for one query under one protocol.

    ``order`` lists record indices best first (every record, or only the
    best ``t`` when scored with ``full_order=False``). ``scores`` covers every
    record: the final score for survivors and the stage-one score for records
    pruned by a two-stage protocol. ``survivors`` is the number of records
    that reached the final stage, and ``survived`` masks them.
    """

    order: np.ndarray
    scores: np.ndarray
    survivors: int
    survived: np.ndarray | None = None

    def position(self, i: int, cell_ids: np.ndarray) -> int:
        """1-based position of record index ``i`` in the complete ordering."""
        s, c = self.scores, cell_ids
        ahead = (s < s[i]) | ((s == s[i]) & (c < c[i]))
        if self.survived is None:
            return int(np.count_nonzero(ahead)) + 1
        if self.survived[i]:
            return int(np.count_nonzero(ahead & self.survived)) + 1
        return self.survivors + int(np.count_nonzero(ahead & ~self.survived)) + 1


def survivor_count(n: int, k_percent: float) -> int:
    return min(n, max(1, math.ceil(k_percent / 100.0 * n - 1e-9)))


def score_protocol(
    db: SignatureDatabase,
    q: Signature,
    policy: FusionPolicy,
    protocol: Protocol,
    part: str = TYPE_PART,
    backend: str | None = None,
    full_order: bool = True,
) -> Scored:
    """Score ``q`` against ``db`` and order the records.

    For :attr:`Protocol.SINGLE`, ``part`` selects the signature part and the
    policy's metric for that part is used unweighted. With
    ``full_order=False`` ``order`` holds only the best ``policy.t`` records
    (the scores still cover every record).
    """
    _check_db(db)
    packed = db.packed
    ids = packed.cell_ids
    n = len(db)
    t = None if full_order else policy.t

    if protocol is Protocol.SINGLE:
        scores = scan_part(packed, q, policy.metric(part), part, policy.weights, backend=backend)
        return Scored(_ranked(scores, ids, t), scores, n)

    if protocol is Protocol.FULL:
        scores = _weighted_part(db, q, policy, TYPE_PART, backend=backend) + _weighted_part(
            db, q, policy, ANGLE_PART, backend=backend
        )
        return Scored(_ranked(scores, ids, t), scores, n)

    first = protocol.first_part
    stage1 = _weighted_part(db, q, policy, first, backend=backend)
    keep = survivor_count(n, policy.k_percent)
    surv = np.sort(_best(stage1, ids, keep))
    stage2 = _weighted_part(db, q, policy, _other(first), idx=surv, backend=backend)
    final = stage1[surv] + stage2
    surv_order = surv[_ranked(final, ids[surv], t)]
    scores = stage1.copy()
    scores[surv] = final
    survived = np.zeros(n, dtype=bool)
    survived[surv] = True
    if full_order:
        rest = np.nonzero(~survived)[0]
        rest = rest[_order(stage1[rest], ids[rest])]
        order = np.concatenate([surv_order, rest])
    else:
        order = surv_order
    return Scored(order, scores, keep, survived)


def rank_full(db: SignatureDatabase, q: Signature, policy: FusionPolicy, backend=None) -> list[RankedCandidate]:
    s = score_protocol(db, q, policy, Protocol.FULL, backend=backend, full_order=False)
    top = s.order[: policy.t]
    return _candidates(db, top, s.scores[top])


def rank_two_stage(
    db: SignatureDatabase, q: Signature, policy: FusionPolicy, first_part: str = TYPE_PART, backend=None
) -> list[RankedCandidate]:
    protocol = Protocol.TWO_STAGE_TYPE_FIRST if first_part == TYPE_PART else Protocol.TWO_STAGE_ANGLE_FIRST
    s = score_protocol(db, q, policy, protocol, backend=backend, full_order=False)
    top = s.order[: policy.t]
    return _candidates(db, top, s.scores[top])


def rank_single(
    db: SignatureDatabase, q: Signature, kind: MetricKind, part: str, t: int = 100,
    weights: EditWeights = UNIT_WEIGHTS, backend=None,
) -> list[RankedCandidate]:
    policy = FusionPolicy(metric_type=kind, metric_angle=kind, t=t, weights=weights)
    s = score_protocol(db, q, policy, Protocol.SINGLE, part=part, backend=backend, full_order=False)
    top = s.order[:t]
    return _candidates(db, top, s.scores[top])


def rank(db, q, policy, protocol: Protocol, part: str = TYPE_PART, backend=None) -> list[RankedCandidate]:
    if protocol is Protocol.FULL:
        return rank_full(db, q, policy, backend=backend)
    if protocol is Protocol.SINGLE:
        return rank_single(db, q, policy.metric(part), part, policy.t, policy.weights, backend=backend)
    return rank_two_stage(db, q, policy, protocol.first_part, backend=backend)


def truth_position(scored: Scored, db: SignatureDatabase, truth_cell: int) -> int:
    """1-based position of ``truth_cell`` in the complete ordering.

    Records pruned at stage one of a two-stage protocol come after every
    survivor, in their stage-one order.
    """
    return scored.position(db.index_of(truth_cell), db.packed.cell_ids)


def ground_truth_rank(
    db: SignatureDatabase,
    q: Signature,
    policy: FusionPolicy,
    truth_cell: int,
    protocol: Protocol,
    part: str = TYPE_PART,
    backend=None,
) -> float:
    """Rank of the true cell as a percentage of the database size."""
    db.index_of(truth_cell)
    s = score_protocol(db, q, policy, protocol, part=part, backend=backend, full_order=False)
    return 100.0 * truth_position(s, db, truth_cell) / len(db)
