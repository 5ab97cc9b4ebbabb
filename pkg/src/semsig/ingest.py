"""Object dataset readers, database persistence and synthetic cities.

Database file layout (all integers little-endian)::

    magic      4s   b"SSIG"
    version    B    0x01
    R          d    visibility range, meters
    s          d    grid step, meters
    Q          H    quantization levels
    origin     dd   projection origin lon, lat (degrees)
    flags      B    bit 0: empty cells dropped
    nclasses   B    then per class: symbol (1 byte), numeric id (B),
                    name length (B), UTF-8 name
    count      Q    number of records
    records         cell_id (varint), lon_e7 (i), lat_e7 (i), n (varint),
                    n symbol bytes, n bins packed at ceil(log2 Q) bits each
                    (LSB first, zero-padded to a byte boundary)
    crc32      I    over every preceding byte
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geo
from .model import (
    REFERENCE_AREA_KM2,
    REFERENCE_COUNTS,
    Alphabet,
    BuildParams,
    DatabaseRecord,
    GeoPoint,
    ObjectClass,
    SemanticObject,
    Signature,
    SignatureDatabase,
    alphabet_default,
)

MAGIC = b"SSIG"
VERSION = 1
_HEADER = struct.Struct("<4sBddHddB")


class DatabaseFormatError(Exception):
    """Structural problem in a database file; ``position`` is a byte offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at byte {position}")
        self.position = position


@dataclass
class RowError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass
class IngestResult:
    objects: list[SemanticObject] = field(default_factory=list)
    errors: list[RowError] = field(default_factory=list)

    def __iter__(self):
        return iter(self.objects)

    def __len__(self):
        return len(self.objects)


# -- object readers ---------------------------------------------------------

CSV_HEADER = ["id", "class", "lon", "lat"]


def read_objects_csv(path, alphabet: Alphabet | None = None) -> IngestResult:
    """Read ``id,class,lon,lat`` rows; bad rows are collected, not fatal."""
    alphabet = alphabet or alphabet_default()
    result = IngestResult()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)!r}, got {header!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                result.errors.append(RowError(line, f"expected 4 fields, got {len(row)}"))
                continue
            oid, cls_token, lon, lat = row
            try:
                cls = alphabet.resolve(cls_token)
            except KeyError:
                result.errors.append(RowError(line, f"unknown class {cls_token.strip()!r}"))
                continue
            try:
                pos = GeoPoint(float(lon), float(lat))
            except ValueError as e:
                result.errors.append(RowError(line, f"bad coordinate: {e}"))
                continue
            result.objects.append(SemanticObject(oid.strip(), cls, pos))
    return result


def write_objects_csv(objects: Iterable[SemanticObject], path_or_file) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for o in objects:
            w.writerow([o.id, o.cls.symbol, repr(o.position.lon), repr(o.position.lat)])
    finally:
        if own:
            fh.close()


def _vertex_centroid(geom: dict) -> tuple[float, float]:
    def walk(c):
        if isinstance(c, (list, tuple)) and c and isinstance(c[0], (int, float)):
            yield c
        else:
            for sub in c:
                yield from walk(sub)

    if geom.get("type") == "GeometryCollection":
        pts = [p for g in geom.get("geometries", []) for p in walk(g.get("coordinates", []))]
    else:
        pts = list(walk(geom.get("coordinates", [])))
    if geom.get("type") in ("Polygon", "MultiPolygon"):
        # closed rings repeat their first vertex
        rings = geom["coordinates"] if geom["type"] == "Polygon" else [r for p in geom["coordinates"] for r in p]
        pts = [v for ring in rings for v in (ring[:-1] if len(ring) > 1 and ring[0] == ring[-1] else ring)]
    if not pts:
        raise ValueError("geometry has no vertices")
    return (math.fsum(p[0] for p in pts) / len(pts), math.fsum(p[1] for p in pts) / len(pts))


def read_objects_geojson(path, alphabet: Alphabet | None = None) -> IngestResult:
    """Read a FeatureCollection; non-point geometries use their vertex centroid."""
    alphabet = alphabet or alphabet_default()
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: not a GeoJSON FeatureCollection")
    result = IngestResult()
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        if "class" not in props:
            result.errors.append(RowError(i, "missing 'class' property"))
            continue
        try:
            cls = alphabet.resolve(str(props["class"]))
        except KeyError:
            result.errors.append(RowError(i, f"unknown class {props['class']!r}"))
            continue
        geom = feat.get("geometry")
        try:
            if not geom:
                raise ValueError("missing geometry")
            lon, lat = _vertex_centroid(geom)
            pos = GeoPoint(float(lon), float(lat))
        except (ValueError, TypeError, KeyError, IndexError) as e:
            result.errors.append(RowError(i, f"bad geometry: {e}"))
            continue
        oid = feat.get("id", props.get("id", i))
        result.objects.append(SemanticObject(str(oid), cls, pos))
    return result


def read_objects(path, alphabet: Alphabet | None = None) -> IngestResult:
    suffix = Path(path).suffix.lower()
    if suffix in (".geojson", ".json"):
        return read_objects_geojson(path, alphabet)
    return read_objects_csv(path, alphabet)


# -- binary database --------------------------------------------------------


def _put_varint(buf: bytearray, v: int) -> None:
    if v < 0:
        raise ValueError("varint must be nonnegative")
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            buf.append(b | 0x80)
        else:
            buf.append(b)
            return


def bits_per_bin(q: int) -> int:
    return max(1, (q - 1).bit_length())


def _pack_bins(bins: Sequence[int], width: int) -> bytes:
    acc = 0
    for i, b in enumerate(bins):
        acc |= b << (i * width)
    nbytes = (len(bins) * width + 7) // 8
    return acc.to_bytes(nbytes, "little")


def encode_database(db: SignatureDatabase) -> bytes:
    p = db.params
    buf = bytearray(
        _HEADER.pack(
            MAGIC, VERSION, p.visibility_range_m, p.grid_step_m, p.quantization_levels,
            db.origin.lon, db.origin.lat, 1 if db.drop_empty else 0,
        )
    )
    classes = db.alphabet.classes
    buf.append(len(classes))
    for c in classes:
        name = c.name.encode("utf-8")
        if len(name) > 255 or not 0 <= c.numeric_id <= 255:
            raise ValueError(f"class {c.symbol!r} cannot be stored")
        buf += c.symbol.encode("ascii") + bytes([c.numeric_id, len(name)]) + name
    buf += struct.pack("<Q", len(db.records))
    width = bits_per_bin(p.quantization_levels)
    pack_i = struct.Struct("<ii").pack
    for r in db.records:
        _put_varint(buf, r.cell_id)
        buf += pack_i(r.lon_e7, r.lat_e7)
        sig = r.signature
        _put_varint(buf, sig.n)
        buf += sig.types.encode("ascii")
        buf += _pack_bins(sig.angle_bins, width)
    buf += struct.pack("<I", zlib.crc32(buf) & 0xFFFFFFFF)
    return bytes(buf)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DatabaseFormatError(f"truncated file while reading {what}", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def varint(self, what: str) -> int:
        shift = 0
        v = 0
        while True:
            if self.pos >= len(self.data):
                raise DatabaseFormatError(f"truncated file while reading {what}", self.pos)
            b = self.data[self.pos]
            self.pos += 1
            v |= (b & 0x7F) << shift
            if not b & 0x80:
                return v
            shift += 7
            if shift > 63:
                raise DatabaseFormatError(f"varint too long in {what}", self.pos)


def decode_database(data: bytes) -> SignatureDatabase:
    if len(data) < 5 or data[:4] != MAGIC:
        raise DatabaseFormatError("bad magic, not a signature database", 0)
    if data[4] != VERSION:
        raise DatabaseFormatError(f"unsupported format version {data[4]}", 4)
    if len(data) < _HEADER.size + 4:
        raise DatabaseFormatError("truncated header", len(data))
    body, tail = data[:-4], data[-4:]
    (crc,) = struct.unpack("<I", tail)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise DatabaseFormatError("checksum mismatch", len(body))
    rd = _Reader(body)
    _, _, r, s, q, olon, olat, flags = _HEADER.unpack(rd.take(_HEADER.size, "header"))
    try:
        params = BuildParams(r, s, q)
    except ValueError as e:
        raise DatabaseFormatError(f"invalid build parameters: {e}", 5) from None
    nclasses = rd.take(1, "class count")[0]
    classes = []
    for _ in range(nclasses):
        sym = rd.take(1, "class symbol").decode("ascii")
        num, nlen = rd.take(2, "class entry")
        name = rd.take(nlen, "class name").decode("utf-8")
        classes.append(ObjectClass(sym, name, num))
    alphabet = Alphabet(classes)
    (count,) = struct.unpack("<Q", rd.take(8, "record count"))
    width = bits_per_bin(q)
    mask = (1 << width) - 1
    unpack_i = struct.Struct("<ii").unpack
    records = []
    for _ in range(count):
        start = rd.pos
        cell_id = rd.varint("cell id")
        lon_e7, lat_e7 = unpack_i(rd.take(8, "cell center"))
        n = rd.varint("signature length")
        types = rd.take(n, "type part").decode("ascii", errors="replace")
        raw = int.from_bytes(rd.take((n * width + 7) // 8, "angle part"), "little")
        bins = tuple((raw >> (i * width)) & mask for i in range(n))
        if any(ch not in alphabet for ch in types) or any(b >= q for b in bins):
            raise DatabaseFormatError(f"record {cell_id} holds symbols or bins outside the header", start)
        records.append(DatabaseRecord(cell_id, lon_e7, lat_e7, Signature(types, bins)))
    if rd.pos != len(body):
        raise DatabaseFormatError("trailing bytes after last record", rd.pos)
    try:
        return SignatureDatabase(tuple(records), params, GeoPoint(olon, olat), alphabet, bool(flags & 1))
    except ValueError as e:
        raise DatabaseFormatError(str(e), _HEADER.size) from None


def save_database(db: SignatureDatabase, path) -> int:
    data = encode_database(db)
    Path(path).write_bytes(data)
    return len(data)


def load_database(path) -> SignatureDatabase:
    return decode_database(Path(path).read_bytes())


# -- synthetic cities -------------------------------------------------------

PARIS_ANCHOR = GeoPoint(2.35, 48.85)


def paris_intensities(scale: float = 1.0) -> dict[str, float]:
    """Objects per km² for each class, from the reference city counts."""
    return {sym: scale * n / REFERENCE_AREA_KM2 for sym, n in REFERENCE_COUNTS.items()}


# Scale that brings the mean signature length at R=30 close to 14 objects
# under a homogeneous process (the reference city concentrates objects on
# streets, which a uniform process over the whole area cannot mimic).
STREET_SCALE = 14.0 / (math.pi * 30.0**2 * sum(REFERENCE_COUNTS.values()) / REFERENCE_AREA_KM2 / 1e6)


@dataclass(frozen=True)
class SyntheticCityConfig:
    width_m: float = 1000.0
    height_m: float = 1000.0
    intensities: dict = field(default_factory=paris_intensities)
    seed: int = 0
    anchor: GeoPoint = PARIS_ANCHOR

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0):
            raise ValueError("synthetic city area must be positive")
        if any(v < 0 for v in self.intensities.values()):
            raise ValueError("intensities must be nonnegative")

    @property
    def area_km2(self) -> float:
        return self.width_m * self.height_m / 1e6

    def bbox(self):
        from .siggen import BBox

        ne = geo.unproject(self.anchor, geo.PlanarPoint(self.width_m, self.height_m))
        return BBox(self.anchor.lon, self.anchor.lat, ne.lon, ne.lat)


def generate_synthetic_city(cfg: SyntheticCityConfig, alphabet: Alphabet | None = None) -> list[SemanticObject]:
    """Homogeneous Poisson process per class over a ``width x height`` rectangle.

    The rectangle's south-west corner sits at ``cfg.anchor``. Each class draws
    from its own random substream, so changing one class's intensity leaves
    the others untouched.
    """
    alphabet = alphabet or alphabet_default()
    objects = []
    next_id = 1
    for cls in alphabet:
        lam = cfg.intensities.get(cls.symbol, 0.0)
        rng = np.random.default_rng([cfg.seed, cls.numeric_id])
        n = int(rng.poisson(lam * cfg.area_km2))
        xs = rng.uniform(0.0, cfg.width_m, n)
        ys = rng.uniform(0.0, cfg.height_m, n)
        for x, y in zip(xs, ys):
            p = geo.unproject(cfg.anchor, geo.PlanarPoint(float(x), float(y)))
            objects.append(SemanticObject(str(next_id), cls, p))
            next_id += 1
    return objects


def parse_intensity_profile(text: str, alphabet: Alphabet | None = None) -> dict[str, float]:
    """``paris``, ``paris:SCALE``, ``street`` or ``uniform:N`` (N per km² per class)."""
    alphabet = alphabet or alphabet_default()
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "paris":
        return paris_intensities(float(arg) if arg else 1.0)
    if name == "street":
        return paris_intensities(STREET_SCALE)
    if name == "uniform":
        if not arg:
            raise ValueError("uniform profile needs a density, e.g. uniform:500")
        return {c.symbol: float(arg) for c in alphabet}
    raise ValueError(f"unknown intensity profile {text!r}")


def database_text(db: SignatureDatabase) -> str:
    """Human-readable header summary."""
    p = db.params
    lengths = [r.signature.n for r in db.records]
    out = io.StringIO()
    out.write(f"format_version: {VERSION}\n")
    out.write(f"visibility_range_m: {p.visibility_range_m!r}\n")
    out.write(f"grid_step_m: {p.grid_step_m!r}\n")
    out.write(f"quantization_levels: {p.quantization_levels}\n")
    out.write(f"origin: {db.origin.lon!r},{db.origin.lat!r}\n")
    out.write(f"empty_cells: {'dropped' if db.drop_empty else 'kept'}\n")
    out.write(f"alphabet: {''.join(db.alphabet.symbols)}\n")
    out.write(f"records: {len(db)}\n")
    mean = sum(lengths) / len(lengths) if lengths else 0.0
    out.write(f"mean_signature_length: {mean:.4f}\n")
    return out.getvalue()
