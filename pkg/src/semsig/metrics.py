"""Sequence distances used to compare signature parts.

All three metrics return a distance where 0 means identical, so that they
can be fused by a weighted sum and ranked ascending. Jaccard and histogram
are ``1 - similarity`` with the similarity normalized to [0, 1]; the edit
distance is a weighted Levenshtein distance, with a normalized variant for
fusion.

These are the per-pair reference implementations. Database scans go through
:mod:`semsig.kernels`, which must agree with them exactly.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .model import ANGLE_PART, TYPE_PART, Signature


class MetricKind(enum.Enum):
    JACCARD = "jaccard"
    HISTOGRAM = "histogram"
    EDIT = "edit"

    @classmethod
    def parse(cls, text: str) -> "MetricKind":
        aliases = {"hist": "histogram", "lev": "edit", "levenshtein": "edit"}
        key = text.strip().lower()
        return cls(aliases.get(key, key))

    # kernel dispatch code
    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {MetricKind.JACCARD: 0, MetricKind.HISTOGRAM: 1, MetricKind.EDIT: 2}


@dataclass(frozen=True)
class EditWeights:
    w_del: float = 1.0
    w_ins: float = 1.0
    w_sub: float = 1.0

    def __post_init__(self):
        if min(self.w_del, self.w_ins, self.w_sub) < 0:
            raise ValueError("edit weights must be nonnegative")

    @property
    def scale(self) -> float:
        return max(self.w_del, self.w_ins, self.w_sub)


UNIT_WEIGHTS = EditWeights()


def jaccard_distance(x: Sequence, y: Sequence) -> float:
    sx, sy = set(x), set(y)
    union = len(sx | sy)
    if union == 0:
        return 0.0
    return 1.0 - len(sx & sy) / union


def histogram_distance(x: Sequence, y: Sequence) -> float:
    cx, cy = Counter(x), Counter(y)
    classes = cx.keys() | cy.keys()
    if not classes:
        return 0.0
    total = 0.0
    # fixed summation order keeps results bit-identical to the scan kernels
    for c in sorted(classes):
        a, b = cx.get(c, 0), cy.get(c, 0)
        total += min(a, b) / max(a, b)
    return 1.0 - total / len(classes)


def edit_distance(x: Sequence, y: Sequence, w: EditWeights = UNIT_WEIGHTS) -> float:
    """Weighted Levenshtein distance transforming ``y`` into ``x``.

    Rows follow ``y`` (deletions), columns follow ``x`` (insertions). Only two
    DP rows are kept.
    """
    n = len(x)
    prev = [j * w.w_ins for j in range(n + 1)]
    for i, yi in enumerate(y, 1):
        cur = [i * w.w_del] + [0.0] * n
        for j in range(1, n + 1):
            if x[j - 1] == yi:
                cur[j] = prev[j - 1]
            else:
                cur[j] = min(prev[j] + w.w_del, cur[j - 1] + w.w_ins, prev[j - 1] + w.w_sub)
        prev = cur
    return float(prev[n])


def edit_distance_normalized(x: Sequence, y: Sequence, w: EditWeights = UNIT_WEIGHTS) -> float:
    longest = max(len(x), len(y))
    scale = w.scale
    if longest == 0 or scale == 0:
        return 0.0
    return edit_distance(x, y, w) / (longest * scale)


def sequence_distance(kind: MetricKind, x: Sequence, y: Sequence, w: EditWeights = UNIT_WEIGHTS) -> float:
    if kind is MetricKind.JACCARD:
        return jaccard_distance(x, y)
    if kind is MetricKind.HISTOGRAM:
        return histogram_distance(x, y)
    return edit_distance_normalized(x, y, w)


def part_distance(
    kind: MetricKind,
    a: Signature,
    b: Signature,
    part: str,
    w: EditWeights = UNIT_WEIGHTS,
    q_a: int | None = None,
    q_b: int | None = None,
) -> float:
    """Distance between one part of two signatures.

    Angle bins are compared as plain symbols. Pass the quantization levels of
    each signature to have mismatches rejected.
    """
    if part == ANGLE_PART and q_a is not None and q_b is not None and q_a != q_b:
        raise ValueError(f"cannot compare angle parts quantized with Q={q_a} and Q={q_b}")
    if part not in (TYPE_PART, ANGLE_PART):
        raise ValueError(f"unknown signature part {part!r}")
    return sequence_distance(kind, a.part(part), b.part(part), w)
