import pytest
from hypothesis import given
from hypothesis import strategies as st

from semsig.model import (
    ANGLE_PART,
    EMPTY_SIGNATURE,
    TYPE_PART,
    Alphabet,
    BuildParams,
    DatabaseRecord,
    GeoPoint,
    ObjectClass,
    Signature,
    SignatureDatabase,
    SignatureFormatError,
    alphabet_default,
    signature_from_string,
    signature_to_string,
)

TABLE = {
    "B": "Alignment tree", "C": "Water fountain", "D": "Street light", "E": "Indicator",
    "G": "Traffic light", "H": "Bike station", "I": "Automatic WC", "J": "Autolib (car) station",
    "K": "Taxi station", "L": "Public chair", "M": "Bus stop",
}


@st.composite
def signatures(draw, q=16, max_size=20):
    n = draw(st.integers(0, max_size))
    types = draw(st.text(alphabet="BCDEGHIJKLM", min_size=n, max_size=n))
    bins = draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    return Signature(types, tuple(bins))


class TestAlphabet:
    def test_default_has_eleven_classes(self):
        a = alphabet_default()
        assert len(a) == 11
        assert set(a.symbols) == set("BCDEGHIJKLM")
        assert {c.symbol: c.name for c in a} == TABLE

    def test_examples(self):
        a = alphabet_default()
        assert a.by_symbol("B").name == "Alignment tree"
        assert a.by_symbol("M").name == "Bus stop"

    def test_resolve_symbol_or_name(self):
        a = alphabet_default()
        assert a.resolve("M").symbol == "M"
        assert a.resolve("bus STOP").symbol == "M"
        assert a.resolve(" Street light ").symbol == "D"
        with pytest.raises(KeyError, match="unknown class"):
            a.resolve("Z")

    def test_symbols_distinct(self):
        with pytest.raises(ValueError, match="distinct"):
            Alphabet([ObjectClass("B", "x", 1), ObjectClass("B", "y", 2)])

    def test_custom_alphabet_codes_follow_numeric_id(self):
        a = Alphabet([ObjectClass("Q", "queue", 7), ObjectClass("P", "post", 3)])
        assert a.symbols == ("P", "Q")
        assert a.code("P") == 0 and a.code("Q") == 1

    def test_symbol_must_be_single_uppercase(self):
        for bad in ("b", "BB", "", "1"):
            with pytest.raises(ValueError):
                ObjectClass(bad, "x", 1)

    @given(st.lists(st.sampled_from("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), min_size=1, max_size=26, unique=True))
    def test_any_distinct_symbol_set_is_accepted(self, syms):
        a = Alphabet(ObjectClass(s, s.lower(), i) for i, s in enumerate(syms))
        assert len(set(a.symbols)) == len(a.symbols) == len(syms)


class TestSignatureText:
    def test_render(self):
        assert signature_to_string(Signature("BD", (0, 4))) == "BD|0;4"
        assert signature_to_string(EMPTY_SIGNATURE) == "|"

    def test_parse(self):
        assert signature_from_string("BD|0;4") == Signature("BD", (0, 4))
        assert signature_from_string("|") == EMPTY_SIGNATURE

    @pytest.mark.parametrize(
        "text, position",
        [("BD0;4", 5), ("BD|0;x", 5), ("Bd|0;4", 1), ("BD|0", 2), ("B|0|1", 3), ("BD|0;;4", 5)],
    )
    def test_errors_carry_position(self, text, position):
        with pytest.raises(SignatureFormatError) as exc:
            signature_from_string(text)
        assert exc.value.position == position

    @given(signatures())
    def test_round_trip(self, sig):
        assert signature_from_string(signature_to_string(sig)) == sig


class TestSignature:
    def test_parts_must_match(self):
        with pytest.raises(ValueError):
            Signature("BD", (0,))

    def test_part_access(self):
        s = Signature("BD", (0, 4))
        assert s.part(TYPE_PART) == "BD"
        assert s.part(ANGLE_PART) == (0, 4)
        assert s.n == len(s) == 2

    def test_list_bins_are_frozen(self):
        assert Signature("B", [3]).angle_bins == (3,)

    def test_check(self):
        a = alphabet_default()
        Signature("BM", (0, 15)).check(a, 16)
        with pytest.raises(ValueError, match="alphabet"):
            Signature("Z", (0,)).check(a, 16)
        with pytest.raises(ValueError, match="outside"):
            Signature("B", (16,)).check(a, 16)

    @given(signatures())
    def test_sorted_bins_are_sweep_ordered(self, sig):
        ordered = Signature(sig.types, tuple(sorted(sig.angle_bins)))
        assert ordered.is_sweep_ordered()
        assert sig.is_sweep_ordered() == (list(sig.angle_bins) == sorted(sig.angle_bins))


class TestGeoPoint:
    @pytest.mark.parametrize("lon, lat", [(181, 0), (0, -91), (float("nan"), 0), (0, float("inf"))])
    def test_invalid(self, lon, lat):
        with pytest.raises(ValueError):
            GeoPoint(lon, lat)

    def test_bounds_inclusive(self):
        GeoPoint(-180, -90)
        GeoPoint(180, 90)


class TestBuildParams:
    def test_defaults(self):
        p = BuildParams()
        assert (p.visibility_range_m, p.grid_step_m, p.quantization_levels) == (30.0, 10.0, 16)

    @pytest.mark.parametrize("kw", [dict(visibility_range_m=0), dict(grid_step_m=-1), dict(quantization_levels=1),
                                    dict(quantization_levels=2.5), dict(quantization_levels=256)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BuildParams(**kw)


class TestDatabase:
    def _db(self, records):
        return SignatureDatabase(records, BuildParams(), GeoPoint(2.35, 48.85), alphabet_default())

    def test_unique_cell_ids(self):
        r = DatabaseRecord(1, 23500000, 488500000, Signature("B", (0,)))
        with pytest.raises(ValueError, match="unique"):
            self._db([r, r])

    def test_lookup(self):
        recs = [DatabaseRecord(i * 3, 23500000 + i, 488500000, Signature("B", (i,))) for i in range(4)]
        db = self._db(recs)
        assert db.index_of(6) == 2
        assert db.record(9).signature.angle_bins == (3,)
        assert db.record(9).cell_center == GeoPoint(2.3500003, 48.85)
        with pytest.raises(KeyError):
            db.index_of(4)

    def test_is_immutable(self):
        db = self._db([])
        with pytest.raises(AttributeError):
            db.records = ()
        assert isinstance(db.records, tuple)

    def test_equality_ignores_cache(self):
        recs = [DatabaseRecord(0, 23500000, 488500000, Signature("B", (0,)))]
        a, b = self._db(recs), self._db(list(recs))
        a.packed
        assert a == b
