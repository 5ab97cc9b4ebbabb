"""Domain types: object classes, semantic objects, signatures and databases."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

TYPE_PART = "type"
ANGLE_PART = "angle"
PARTS = (TYPE_PART, ANGLE_PART)


class SignatureFormatError(ValueError):
    """Raised when a signature text cannot be parsed.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class ObjectClass:
    symbol: str
    name: str
    numeric_id: int

    def __post_init__(self):
        if len(self.symbol) != 1 or not self.symbol.isupper():
            raise ValueError(f"class symbol must be one uppercase character, got {self.symbol!r}")


# (id, name, count in the reference city, symbol)
_DEFAULT_CLASSES = (
    (1, "Alignment tree", 1752696, "B"),
    (2, "Water fountain", 6713, "C"),
    (3, "Street light", 2299639, "D"),
    (4, "Indicator", 36333, "E"),
    (5, "Traffic light", 102240, "G"),
    (6, "Bike station", 14397, "H"),
    (7, "Automatic WC", 8006, "I"),
    (8, "Autolib (car) station", 4421, "J"),
    (9, "Taxi station", 2537, "K"),
    (10, "Public chair", 135748, "L"),
    (11, "Bus stop", 32320, "M"),
)

#: Object counts per class symbol in the reference city dataset (79 km²).
REFERENCE_COUNTS = {sym: count for _, _, count, sym in _DEFAULT_CLASSES}
REFERENCE_AREA_KM2 = 79.0


class Alphabet:
    """Ordered set of object classes with lookup by symbol and by name.

    Iteration order follows ``numeric_id``; that order also defines the
    integer code of each class in the scan kernels.
    """

    def __init__(self, classes: Iterable[ObjectClass]):
        classes = sorted(classes, key=lambda c: (c.numeric_id, c.symbol))
        symbols = [c.symbol for c in classes]
        if len(set(symbols)) != len(symbols):
            raise ValueError("alphabet symbols must be distinct")
        if not classes:
            raise ValueError("alphabet must not be empty")
        self.classes: tuple[ObjectClass, ...] = tuple(classes)
        self._by_symbol = {c.symbol: c for c in classes}
        self._by_name = {c.name.casefold(): c for c in classes}
        self._code = {c.symbol: i for i, c in enumerate(classes)}

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def __contains__(self, symbol):
        return symbol in self._by_symbol

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.classes == other.classes

    def __hash__(self):
        return hash(self.classes)

    def __repr__(self):
        return f"Alphabet({''.join(self.symbols)})"

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(c.symbol for c in self.classes)

    def by_symbol(self, symbol: str) -> ObjectClass:
        return self._by_symbol[symbol]

    def code(self, symbol: str) -> int:
        return self._code[symbol]

    def resolve(self, token: str) -> ObjectClass:
        """Look up a class by its symbol or by its (case-insensitive) name."""
        token = token.strip()
        if token in self._by_symbol:
            return self._by_symbol[token]
        try:
            return self._by_name[token.casefold()]
        except KeyError:
            raise KeyError(f"unknown class {token!r}") from None


def alphabet_default() -> Alphabet:
    """The eleven street-object classes of the reference dataset."""
    return Alphabet(ObjectClass(sym, name, i) for i, name, _, sym in _DEFAULT_CLASSES)


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate in degrees."""

    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValueError("coordinate must be finite")
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"coordinate out of range: ({self.lon}, {self.lat})")


@dataclass(frozen=True)
class SemanticObject:
    id: str
    cls: ObjectClass
    position: GeoPoint


@dataclass(frozen=True)
class Signature:
    """Type sequence plus quantized angle sequence seen from one viewpoint."""

    types: str
    angle_bins: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.angle_bins, tuple):
            object.__setattr__(self, "angle_bins", tuple(int(b) for b in self.angle_bins))
        if len(self.types) != len(self.angle_bins):
            raise ValueError(
                f"type part has {len(self.types)} symbols but angle part has {len(self.angle_bins)} bins"
            )
        if any(b < 0 for b in self.angle_bins):
            raise ValueError("angle bins must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.types)

    def __len__(self):
        return len(self.types)

    def part(self, which: str) -> Sequence:
        if which == TYPE_PART:
            return self.types
        if which == ANGLE_PART:
            return self.angle_bins
        raise ValueError(f"unknown signature part {which!r}")

    def is_sweep_ordered(self) -> bool:
        b = self.angle_bins
        return all(b[i] <= b[i + 1] for i in range(len(b) - 1))

    def check(self, alphabet: Alphabet, q: int) -> None:
        """Raise ValueError unless every symbol and bin is legal."""
        for i, s in enumerate(self.types):
            if s not in alphabet:
                raise ValueError(f"symbol {s!r} at index {i} is not in the alphabet")
        for i, b in enumerate(self.angle_bins):
            if not 0 <= b < q:
                raise ValueError(f"angle bin {b} at index {i} outside [0, {q - 1}]")

    def __str__(self):
        return signature_to_string(self)


EMPTY_SIGNATURE = Signature("", ())


def signature_to_string(sig: Signature) -> str:
    return sig.types + "|" + ";".join(str(b) for b in sig.angle_bins)


def signature_from_string(text: str) -> Signature:
    """Parse the ``TYPES|b1;b2;...`` form produced by :func:`signature_to_string`."""
    bar = text.find("|")
    if bar < 0:
        raise SignatureFormatError("missing '|' separator", len(text))
    if text.count("|") > 1:
        raise SignatureFormatError("more than one '|' separator", text.index("|", bar + 1))
    types = text[:bar]
    for i, ch in enumerate(types):
        if len(ch) != 1 or not ch.isupper():
            raise SignatureFormatError(f"invalid class symbol {ch!r}", i)
    bins: list[int] = []
    rest = text[bar + 1:]
    if rest:
        pos = bar + 1
        for tok in rest.split(";"):
            if not tok.isdigit():
                raise SignatureFormatError(f"invalid angle bin {tok!r}", pos)
            bins.append(int(tok))
            pos += len(tok) + 1
    if len(bins) != len(types):
        raise SignatureFormatError(
            f"{len(types)} class symbols but {len(bins)} angle bins", bar
        )
    return Signature(types, tuple(bins))


@dataclass(frozen=True)
class BuildParams:
    visibility_range_m: float = 30.0
    grid_step_m: float = 10.0
    quantization_levels: int = 16

    def __post_init__(self):
        if not self.visibility_range_m > 0:
            raise ValueError("visibility range must be positive")
        if not self.grid_step_m > 0:
            raise ValueError("grid step must be positive")
        if int(self.quantization_levels) != self.quantization_levels or self.quantization_levels < 2:
            raise ValueError("quantization levels must be an integer >= 2")
        if self.quantization_levels > 255:
            raise ValueError("quantization levels above 255 are not supported")


@dataclass(frozen=True)
class DatabaseRecord:
    cell_id: int
    lon_e7: int
    lat_e7: int
    signature: Signature

    @property
    def cell_center(self) -> GeoPoint:
        return GeoPoint(self.lon_e7 / 1e7, self.lat_e7 / 1e7)


@dataclass(frozen=True, eq=False)
class SignatureDatabase:
    """Immutable collection of cell records sharing one set of build parameters.

    ``origin`` is the projection origin used to compute planar coordinates;
    queries must use the same origin to reproduce the signatures exactly.
    """

    records: tuple[DatabaseRecord, ...]
    params: BuildParams
    origin: GeoPoint
    alphabet: Alphabet
    drop_empty: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.records, tuple):
            object.__setattr__(self, "records", tuple(self.records))
        ids = [r.cell_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("cell ids must be unique")

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, SignatureDatabase):
            return NotImplemented
        return (
            self.records == other.records
            and self.params == other.params
            and self.origin == other.origin
            and self.alphabet == other.alphabet
            and self.drop_empty == other.drop_empty
        )

    __hash__ = None

    def index_of(self, cell_id: int) -> int:
        idx = self._cache.get("index")
        if idx is None:
            idx = {r.cell_id: i for i, r in enumerate(self.records)}
            self._cache["index"] = idx
        try:
            return idx[cell_id]
        except KeyError:
            raise KeyError(f"unknown cell id {cell_id}") from None

    def record(self, cell_id: int) -> DatabaseRecord:
        return self.records[self.index_of(cell_id)]

    @property
    def packed(self):
        """Flat array view used by the scan kernels (built lazily, cached)."""
        p = self._cache.get("packed")
        if p is None:
            from .kernels import PackedDatabase

            p = PackedDatabase.from_database(self)
            self._cache["packed"] = p
        return p
