"""Signature generation for a viewpoint and grid-sampled database construction."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geo
from .model import (
    ANGLE_PART,
    TYPE_PART,
    Alphabet,
    BuildParams,
    DatabaseRecord,
    GeoPoint,
    SemanticObject,
    Signature,
    SignatureDatabase,
    alphabet_default,
)


def quantize_angle(angle: float, q: int) -> int:
    if not 0.0 <= angle < 360.0:
        raise ValueError(f"angle {angle} outside [0, 360)")
    return int(math.floor(angle / (360.0 / q))) % q


def _quantize_many(az: np.ndarray, q: int) -> np.ndarray:
    return (np.floor(az / (360.0 / q)).astype(np.int64) % q).astype(np.uint8)


def _sweep(dist, az, symbols, ids, q) -> Signature:
    order = sorted(range(len(az)), key=lambda i: (az[i], dist[i], symbols[i], ids[i]))
    bins = _quantize_many(np.asarray([az[i] for i in order], dtype=np.float64), q)
    return Signature("".join(symbols[i] for i in order), tuple(int(b) for b in bins))


def _visible(vx, vy, ox, oy, r):
    dx = ox - vx
    dy = oy - vy
    dist = np.hypot(dx, dy)
    keep = np.nonzero(dist <= r)[0]
    dx, dy, dist = dx[keep], dy[keep], dist[keep]
    # an object on the viewpoint itself has no bearing; treat it as due north
    az = geo.azimuth_many(dx, dy)
    return keep, dist, az


def build_signature(
    viewpoint: GeoPoint,
    objects: Sequence[SemanticObject],
    params: BuildParams,
    origin: GeoPoint,
) -> Signature:
    """Clockwise-from-north sweep over the objects within the visibility range."""
    if not objects:
        return Signature("", ())
    vx, vy = geo.project(origin, viewpoint)
    ox, oy = geo.project_many(
        origin, [o.position.lon for o in objects], [o.position.lat for o in objects]
    )
    keep, dist, az = _visible(vx, vy, ox, oy, params.visibility_range_m)
    symbols = [objects[i].cls.symbol for i in keep]
    ids = [str(objects[i].id) for i in keep]
    return _sweep(dist.tolist(), az.tolist(), symbols, ids, params.quantization_levels)


def objects_origin(objects: Sequence[SemanticObject]) -> GeoPoint:
    """Projection origin: the centroid of the object set in degrees."""
    lon = math.fsum(o.position.lon for o in objects) / len(objects)
    lat = math.fsum(o.position.lat for o in objects) / len(objects)
    return GeoPoint(lon, lat)


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid coordinates from ``lo`` to ``hi`` spaced ``step`` apart."""
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count, dtype=np.float64)


class _Buckets:
    """Uniform grid of square buckets with side ``size`` over planar points."""

    def __init__(self, x: np.ndarray, y: np.ndarray, size: float):
        self.size = size
        self.x0 = float(x.min()) if len(x) else 0.0
        self.y0 = float(y.min()) if len(y) else 0.0
        bx = np.floor((x - self.x0) / size).astype(np.int64)
        by = np.floor((y - self.y0) / size).astype(np.int64)
        self.cells: dict[tuple[int, int], np.ndarray] = {}
        order = np.lexsort((by, bx))
        keys = np.stack([bx[order], by[order]], axis=1)
        if len(order):
            breaks = np.nonzero(np.any(np.diff(keys, axis=0) != 0, axis=1))[0] + 1
            for chunk in np.split(order, breaks):
                self.cells[(int(bx[chunk[0]]), int(by[chunk[0]]))] = np.sort(chunk)

    def near(self, x: float, y: float) -> np.ndarray:
        cx = int(math.floor((x - self.x0) / self.size))
        cy = int(math.floor((y - self.y0) / self.size))
        parts = [
            self.cells[k]
            for k in ((cx + i, cy + j) for i in (-1, 0, 1) for j in (-1, 0, 1))
            if k in self.cells
        ]
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(parts))


@dataclass(frozen=True)
class BBox:
    lon_min: float
    lat_min: float
    lon_max: float
    lat_max: float

    def __post_init__(self):
        if not (self.lon_max > self.lon_min and self.lat_max > self.lat_min):
            raise ValueError("bounding box is degenerate")

    @classmethod
    def parse(cls, text: str) -> "BBox":
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 4:
            raise ValueError("bbox needs LONMIN,LATMIN,LONMAX,LATMAX")
        return cls(*parts)

    def __str__(self):
        return f"{self.lon_min!r},{self.lat_min!r},{self.lon_max!r},{self.lat_max!r}"


def build_database(
    objects: Sequence[SemanticObject],
    params: BuildParams,
    bbox: BBox,
    alphabet: Alphabet | None = None,
    origin: GeoPoint | None = None,
    bucketed: bool = True,
) -> SignatureDatabase:
    """Sample the bbox on an ``s``-meter grid and keep cells with non-empty signatures.

    Cells are numbered row-major (rows south to north, columns west to east)
    over all candidate cells, so ids are stable whether or not empty cells
    are dropped. Cell centers are rounded to 1e-7 degrees before the
    signature is computed, so re-generating a signature from a stored cell
    reproduces it exactly.
    """
    if not objects:
        raise ValueError("cannot build a database from an empty object set")
    alphabet = alphabet or alphabet_default()
    for o in objects:
        if o.cls.symbol not in alphabet:
            raise ValueError(f"object {o.id!r} has class {o.cls.symbol!r} outside the alphabet")
    origin = origin or objects_origin(objects)
    r = params.visibility_range_m
    q = params.quantization_levels

    ox, oy = geo.project_many(
        origin, [o.position.lon for o in objects], [o.position.lat for o in objects]
    )
    symbols = [o.cls.symbol for o in objects]
    ids = [str(o.id) for o in objects]
    buckets = _Buckets(ox, oy, r) if bucketed else None

    sw = geo.project(origin, GeoPoint(bbox.lon_min, bbox.lat_min))
    ne = geo.project(origin, GeoPoint(bbox.lon_max, bbox.lat_max))
    xs = grid_axis(sw.x_east, ne.x_east, params.grid_step_m)
    ys = grid_axis(sw.y_north, ne.y_north, params.grid_step_m)

    records = []
    cell_id = 0
    for gy in ys:
        for gx in xs:
            center = geo.unproject(origin, geo.PlanarPoint(float(gx), float(gy)))
            lon_e7 = int(round(center.lon * 1e7))
            lat_e7 = int(round(center.lat * 1e7))
            vx, vy = geo.project(origin, GeoPoint(lon_e7 / 1e7, lat_e7 / 1e7))
            cand = buckets.near(vx, vy) if bucketed else np.arange(len(objects))
            if len(cand):
                keep, dist, az = _visible(vx, vy, ox[cand], oy[cand], r)
                sel = cand[keep]
                sig = _sweep(dist.tolist(), az.tolist(), [symbols[i] for i in sel],
                             [ids[i] for i in sel], q)
            else:
                sig = Signature("", ())
            if sig.n:
                records.append(DatabaseRecord(cell_id, lon_e7, lat_e7, sig))
            cell_id += 1
    return SignatureDatabase(tuple(records), params, origin, alphabet, drop_empty=True)


@dataclass(frozen=True)
class GroupStats:
    count: int
    mean: float
    std: float
    min: int
    q25: float
    q50: float
    q75: float
    max: int


def group_stats(db: SignatureDatabase, part: str) -> GroupStats:
    """Distribution of group sizes when records are grouped by one signature part."""
    if not len(db):
        raise ValueError("database is empty")
    if part not in (TYPE_PART, ANGLE_PART):
        raise ValueError(f"unknown signature part {part!r}")
    sizes = np.array(
        sorted(Counter(r.signature.part(part) for r in db.records).values()), dtype=np.float64
    )
    q25, q50, q75 = np.percentile(sizes, [25, 50, 75])
    return GroupStats(
        count=len(sizes),
        mean=float(sizes.mean()),
        std=float(sizes.std(ddof=1)) if len(sizes) > 1 else 0.0,
        min=int(sizes.min()),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
        max=int(sizes.max()),
    )
