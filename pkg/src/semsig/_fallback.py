"""Pure-Python (numpy) scan kernels, used when the compiled core is missing.

The edit distance DP is vectorized across records instead of across cells:
for every record row ``i`` and query column ``j`` one numpy operation
updates all records that are at least ``i`` symbols long. Floating-point
operations are performed in the same order as the compiled kernel, so both
backends return bit-identical distances.
"""

from __future__ import annotations

import numpy as np

JACCARD, HISTOGRAM, EDIT = 0, 1, 2


def _gather(flat, offsets, idx):
    offsets = np.asarray(offsets, dtype=np.int64)
    if idx is None:
        starts = offsets[:-1]
        lengths = np.diff(offsets)
    else:
        idx = np.asarray(idx, dtype=np.int64)
        starts = offsets[idx]
        lengths = offsets[idx + 1] - starts
    return starts, lengths


def _counts(flat, starts, lengths, nsym):
    rec = np.repeat(np.arange(len(lengths)), lengths)
    pos = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths) + np.arange(lengths.sum())
    counts = np.zeros((len(lengths), nsym), dtype=np.int64)
    np.add.at(counts, (rec, flat[pos]), 1)
    return counts


def _edit(query, flat, starts, lengths, w_del, w_ins, w_sub):
    n = len(query)
    count = len(lengths)
    prev = np.tile(np.arange(n + 1, dtype=np.float64) * w_ins, (count, 1))
    longest_rec = int(lengths.max()) if count else 0
    q = np.asarray(query)
    for i in range(1, longest_rec + 1):
        active = np.nonzero(lengths >= i)[0]
        yi = flat[starts[active] + i - 1]
        p = prev[active]
        cur = np.empty_like(p)
        cur[:, 0] = i * w_del
        for j in range(1, n + 1):
            alt = np.minimum(np.minimum(p[:, j] + w_del, cur[:, j - 1] + w_ins), p[:, j - 1] + w_sub)
            cur[:, j] = np.where(yi == q[j - 1], p[:, j - 1], alt)
        prev[active] = cur
    return prev[:, n]


def scan(kind, query, flat, offsets, nsym, w_del=1.0, w_ins=1.0, w_sub=1.0, idx=None):
    """Distances from ``query`` to each record (or to records ``idx``)."""
    query = np.asarray(query, dtype=np.uint8)
    flat = np.asarray(flat, dtype=np.uint8)
    starts, lengths = _gather(flat, offsets, idx)
    n = len(query)
    if kind == EDIT:
        scale = max(w_del, w_ins, w_sub)
        longest = np.maximum(lengths, n)
        out = np.zeros(len(lengths), dtype=np.float64)
        if scale == 0.0 or len(lengths) == 0:
            return out
        d = _edit(query, flat, starts, lengths, w_del, w_ins, w_sub)
        nz = longest > 0
        out[nz] = d[nz] / (longest[nz] * scale)
        return out

    rc = _counts(flat, starts, lengths, nsym)
    qc = np.bincount(query, minlength=nsym)[:nsym]
    present = (rc > 0) | (qc > 0)
    classes = present.sum(axis=1)
    if kind == JACCARD:
        inter = ((rc > 0) & (qc > 0)).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 1.0 - inter / classes
    else:
        lo = np.minimum(rc, qc)
        hi = np.maximum(rc, qc)
        total = np.zeros(len(lengths), dtype=np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            for c in range(nsym):
                col = present[:, c]
                total[col] += lo[col, c] / hi[col, c]
            out = 1.0 - total / classes
    out[classes == 0] = 0.0
    return out
