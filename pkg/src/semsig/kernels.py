"""Backend selection and packed database layout for the scan kernels.

The compiled Cython core is used when it imports; otherwise the numpy
fallback is used. Set ``SEMSIG_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import _fallback
from .metrics import UNIT_WEIGHTS, EditWeights, MetricKind
from .model import ANGLE_PART, TYPE_PART, Signature

log = logging.getLogger(__name__)

_pure = os.environ.get("SEMSIG_PURE_PYTHON", "").strip().lower() not in ("", "0", "false", "no")

if _pure:
    _compiled = None
else:
    try:
        from . import _ckernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        log.debug("compiled kernels unavailable, using numpy fallback")
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_BACKENDS = {"python": _fallback.scan}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled.scan


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


@dataclass(frozen=True, eq=False)
class PackedDatabase:
    """Flat arrays over all records: symbol codes, angle bins and offsets."""

    types: np.ndarray
    bins: np.ndarray
    offsets: np.ndarray
    cell_ids: np.ndarray
    x: np.ndarray
    y: np.ndarray
    nsym: int
    q: int
    symbol_codes: dict

    @classmethod
    def from_database(cls, db) -> "PackedDatabase":
        from .geo import project_many

        recs = db.records
        lengths = np.fromiter((r.signature.n for r in recs), dtype=np.int64, count=len(recs))
        offsets = np.zeros(len(recs) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        codes = {c.symbol: db.alphabet.code(c.symbol) for c in db.alphabet}
        table = np.zeros(128, dtype=np.uint8)
        for s, c in codes.items():
            table[ord(s)] = c
        joined = "".join(r.signature.types for r in recs).encode("ascii")
        types = table[np.frombuffer(joined, dtype=np.uint8)] if joined else np.zeros(0, np.uint8)
        bins = np.fromiter(
            (b for r in recs for b in r.signature.angle_bins), dtype=np.uint8, count=int(offsets[-1])
        )
        lon = np.fromiter((r.lon_e7 for r in recs), dtype=np.float64, count=len(recs)) / 1e7
        lat = np.fromiter((r.lat_e7 for r in recs), dtype=np.float64, count=len(recs)) / 1e7
        x, y = project_many(db.origin, lon, lat)
        cell_ids = np.fromiter((r.cell_id for r in recs), dtype=np.int64, count=len(recs))
        return cls(
            types=np.ascontiguousarray(types),
            bins=bins,
            offsets=offsets,
            cell_ids=cell_ids,
            x=x,
            y=y,
            nsym=len(db.alphabet),
            q=db.params.quantization_levels,
            symbol_codes=codes,
        )

    def __len__(self):
        return len(self.cell_ids)

    def encode(self, sig: Signature, part: str) -> np.ndarray:
        if part == TYPE_PART:
            try:
                return np.array([self.symbol_codes[s] for s in sig.types], dtype=np.uint8)
            except KeyError as e:
                raise ValueError(f"symbol {e.args[0]!r} is not in the database alphabet") from None
        if part == ANGLE_PART:
            if any(not 0 <= b < self.q for b in sig.angle_bins):
                raise ValueError(f"query angle bins must lie in [0, {self.q - 1}] for this database")
            return np.array(sig.angle_bins, dtype=np.uint8)
        raise ValueError(f"unknown signature part {part!r}")

    def part_arrays(self, part: str) -> tuple[np.ndarray, int]:
        if part == TYPE_PART:
            return self.types, self.nsym
        return self.bins, self.q


def scan_part(
    packed: PackedDatabase,
    query: Signature,
    kind: MetricKind,
    part: str,
    weights: EditWeights = UNIT_WEIGHTS,
    idx: np.ndarray | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """Distance of one query part to every record (or to records ``idx``)."""
    fn = _BACKENDS[backend or BACKEND]
    flat, nsym = packed.part_arrays(part)
    q = packed.encode(query, part)
    if idx is not None:
        idx = np.ascontiguousarray(idx, dtype=np.int64)
    return fn(kind.code, q, flat, packed.offsets, nsym,
              float(weights.w_del), float(weights.w_ins), float(weights.w_sub), idx)
