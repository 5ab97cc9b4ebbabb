# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scan kernels: one query part against many packed record parts."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.string cimport memset
from libc.stdint cimport uint64_t

cnp.import_array()

DEF JACCARD = 0
DEF HISTOGRAM = 1
DEF EDIT = 2


cdef inline double _min3(double a, double b, double c) noexcept nogil:
    if b < a:
        a = b
    if c < a:
        a = c
    return a


cdef double _edit(const unsigned char[::1] q, Py_ssize_t n,
                  const unsigned char[::1] flat, Py_ssize_t start, Py_ssize_t m,
                  double w_del, double w_ins, double w_sub,
                  double* prev, double* cur) noexcept nogil:
    # columns follow the query, rows follow the record
    cdef Py_ssize_t i, j
    cdef unsigned char yi
    cdef double* tmp
    for j in range(n + 1):
        prev[j] = j * w_ins
    for i in range(1, m + 1):
        yi = flat[start + i - 1]
        cur[0] = i * w_del
        for j in range(1, n + 1):
            if q[j - 1] == yi:
                cur[j] = prev[j - 1]
            else:
                cur[j] = _min3(prev[j] + w_del, cur[j - 1] + w_ins, prev[j - 1] + w_sub)
        tmp = prev
        prev = cur
        cur = tmp
    return prev[n]


cdef int _edit_unit(const unsigned char[::1] q, Py_ssize_t n,
                   const unsigned char[::1] flat, Py_ssize_t start, Py_ssize_t m,
                   int* prev, int* cur) noexcept nogil:
    # Unit weights. Adjacent DP cells differ by at most one, so the match
    # case d[i-1][j-1] is never above the other two options and the
    # recurrence can be evaluated without a branch on equality.
    cdef Py_ssize_t i, j
    cdef unsigned char yi
    cdef int* tmp
    cdef int best, left, diag, up
    for j in range(n + 1):
        prev[j] = <int> j
    for i in range(1, m + 1):
        yi = flat[start + i - 1]
        left = <int> i
        cur[0] = left
        diag = prev[0]
        for j in range(1, n + 1):
            up = prev[j]
            best = diag + (q[j - 1] != yi)
            if up + 1 < best:
                best = up + 1
            if left + 1 < best:
                best = left + 1
            cur[j] = best
            left = best
            diag = up
        tmp = prev
        prev = cur
        cur = tmp
    return prev[n]


cdef int _edit_bits(const uint64_t* peq, Py_ssize_t n,
                   const unsigned char[::1] flat, Py_ssize_t start, Py_ssize_t m) noexcept nogil:
    # Bit-parallel unit-cost Levenshtein (Myers/Hyyro), query length 1..64.
    # Bit j of the vertical delta vectors tracks row j+1 of the DP column.
    cdef uint64_t pv = ~(<uint64_t> 0)
    cdef uint64_t mv = 0
    cdef uint64_t last = (<uint64_t> 1) << (n - 1)
    cdef uint64_t eq, xv, xh, ph, mh
    cdef int score = <int> n
    cdef Py_ssize_t i
    for i in range(m):
        eq = peq[flat[start + i]]
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | ~(xh | pv)
        mh = pv & xh
        if ph & last:
            score += 1
        if mh & last:
            score -= 1
        ph = (ph << 1) | 1
        mh = mh << 1
        pv = mh | ~(xv | ph)
        mv = ph & xv
    return score


def scan(int kind, const unsigned char[::1] query, const unsigned char[::1] flat,
         const long long[::1] offsets, int nsym,
         double w_del=1.0, double w_ins=1.0, double w_sub=1.0, idx=None):
    """Distances from ``query`` to each record (or to records ``idx``)."""
    cdef Py_ssize_t n = query.shape[0]
    cdef Py_ssize_t nrec = offsets.shape[0] - 1
    cdef const long long[::1] sel
    cdef bint use_idx = idx is not None
    cdef Py_ssize_t count
    if use_idx:
        sel = np.ascontiguousarray(idx, dtype=np.int64)
        count = sel.shape[0]
    else:
        count = nrec
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t k, r, start, m, c, longest
    cdef double scale = w_del
    if w_ins > scale:
        scale = w_ins
    if w_sub > scale:
        scale = w_sub

    cdef int* qcount = <int*> malloc(nsym * sizeof(int))
    cdef int* rcount = <int*> malloc(nsym * sizeof(int))
    cdef double* rows = <double*> malloc(2 * (n + 1) * sizeof(double))
    cdef int* irows = <int*> malloc(2 * (n + 1) * sizeof(int))
    cdef bint unit = w_del == 1.0 and w_ins == 1.0 and w_sub == 1.0
    cdef bint bits = unit and 0 < n <= 64
    cdef uint64_t peq[256]
    cdef int inter, union_, a, b, lo, hi, classes
    cdef double total
    if qcount == NULL or rcount == NULL or rows == NULL or irows == NULL:
        free(qcount); free(rcount); free(rows); free(irows)
        raise MemoryError()
    try:
        memset(qcount, 0, nsym * sizeof(int))
        for k in range(n):
            qcount[query[k]] += 1
        memset(peq, 0, sizeof(peq))
        for k in range(n):
            peq[query[k]] |= (<uint64_t> 1) << k
        with nogil:
            for k in range(count):
                r = sel[k] if use_idx else k
                start = offsets[r]
                m = offsets[r + 1] - start
                if kind == EDIT:
                    longest = m if m > n else n
                    if longest == 0 or scale == 0.0:
                        res[k] = 0.0
                    elif bits:
                        res[k] = (<double> _edit_bits(peq, n, flat, start, m)) / (longest * scale)
                    elif unit:
                        res[k] = (<double> _edit_unit(query, n, flat, start, m, irows, irows + n + 1)) / (longest * scale)
                    else:
                        res[k] = _edit(query, n, flat, start, m, w_del, w_ins, w_sub,
                                       rows, rows + n + 1) / (longest * scale)
                    continue
                memset(rcount, 0, nsym * sizeof(int))
                for c in range(m):
                    rcount[flat[start + c]] += 1
                if kind == JACCARD:
                    inter = 0
                    union_ = 0
                    for c in range(nsym):
                        if qcount[c] > 0 or rcount[c] > 0:
                            union_ += 1
                            if qcount[c] > 0 and rcount[c] > 0:
                                inter += 1
                    res[k] = 0.0 if union_ == 0 else 1.0 - (<double> inter) / union_
                else:
                    total = 0.0
                    classes = 0
                    for c in range(nsym):
                        a = qcount[c]
                        b = rcount[c]
                        if a > 0 or b > 0:
                            classes += 1
                            lo = a if a < b else b
                            hi = b if a < b else a
                            total += (<double> lo) / hi
                    res[k] = 0.0 if classes == 0 else 1.0 - total / classes
    finally:
        free(qcount)
        free(rcount)
        free(rows)
        free(irows)
    return out
