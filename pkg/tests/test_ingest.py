import io
import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semsig.ingest import (
    STREET_SCALE,
    DatabaseFormatError,
    SyntheticCityConfig,
    bits_per_bin,
    decode_database,
    encode_database,
    generate_synthetic_city,
    load_database,
    paris_intensities,
    parse_intensity_profile,
    read_objects,
    read_objects_csv,
    read_objects_geojson,
    save_database,
    write_objects_csv,
)
from semsig.model import (
    Alphabet,
    BuildParams,
    DatabaseRecord,
    GeoPoint,
    ObjectClass,
    Signature,
    SignatureDatabase,
    alphabet_default,
)

ALPHA = alphabet_default()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestCsv:
    def test_examples(self, tmp_path):
        p = write(tmp_path, "o.csv", "id,class,lon,lat\n1,B,2.35,48.85\n2,Bus stop,2.36,48.86\n3,Z,0,0\n")
        res = read_objects_csv(p)
        assert [(o.id, o.cls.symbol, o.position) for o in res.objects] == [
            ("1", "B", GeoPoint(2.35, 48.85)), ("2", "M", GeoPoint(2.36, 48.86))]
        assert len(res.errors) == 1
        assert res.errors[0].line == 4 and "unknown class" in res.errors[0].message

    def test_malformed_rows_are_collected(self, tmp_path):
        p = write(tmp_path, "o.csv", "id,class,lon,lat\n1,B,2.35\n2,D,east,48.8\n3,D,200,48.8\n\n4,d,2.3,48.8\n")
        res = read_objects_csv(p)
        assert len(res.objects) == 0
        assert [e.line for e in res.errors] == [2, 3, 4, 6]

    def test_bad_header_is_fatal(self, tmp_path):
        with pytest.raises(ValueError, match="header"):
            read_objects_csv(write(tmp_path, "o.csv", "a,b,c,d\n"))

    def test_missing_file_is_fatal(self, tmp_path):
        with pytest.raises(OSError):
            read_objects_csv(tmp_path / "absent.csv")

    @given(st.lists(st.tuples(st.text("abc123", min_size=1, max_size=6), st.sampled_from(ALPHA.symbols),
                              st.floats(-180, 180), st.floats(-90, 90)), max_size=30))
    def test_reemission_preserves_rows(self, rows):
        buf = io.StringIO()
        buf.write("id,class,lon,lat\n")
        for oid, sym, lon, lat in rows:
            buf.write(f"{oid},{ALPHA.by_symbol(sym).name},{lon!r},{lat!r}\n")
        import tempfile, os

        with tempfile.TemporaryDirectory() as d:
            src = os.path.join(d, "a.csv")
            with open(src, "w") as fh:
                fh.write(buf.getvalue())
            first = read_objects_csv(src).objects
            dst = os.path.join(d, "b.csv")
            write_objects_csv(first, dst)
            second = read_objects_csv(dst).objects
        assert [(o.id, o.cls.symbol, o.position.lon, o.position.lat) for o in first] == [
            (i, s, lon, lat) for i, s, lon, lat in rows]
        assert first == second


class TestGeoJson:
    def test_features(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [
            {"type": "Feature", "id": "p", "properties": {"class": "D"},
             "geometry": {"type": "Point", "coordinates": [2.35, 48.85]}},
            {"type": "Feature", "properties": {"class": "Bus stop", "id": 7},
             "geometry": {"type": "Polygon", "coordinates": [[[2.0, 48.0], [2.2, 48.0], [2.2, 48.4], [2.0, 48.4]]]}},
            {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [0, 0]}},
        ]}
        p = write(tmp_path, "o.geojson", json.dumps(doc))
        res = read_objects(p)
        assert [o.cls.symbol for o in res.objects] == ["D", "M"]
        assert res.objects[0].id == "p" and res.objects[1].id == "7"
        c = res.objects[1].position
        assert c.lon == pytest.approx(2.1) and c.lat == pytest.approx(48.2)
        assert len(res.errors) == 1 and "class" in res.errors[0].message

    def test_empty_collection(self, tmp_path):
        p = write(tmp_path, "o.json", '{"type": "FeatureCollection", "features": []}')
        assert len(read_objects_geojson(p)) == 0

    def test_not_a_collection(self, tmp_path):
        with pytest.raises(ValueError):
            read_objects_geojson(write(tmp_path, "o.json", '{"type": "Feature"}'))


@st.composite
def databases(draw):
    q = draw(st.sampled_from([2, 3, 8, 16, 24, 32, 255]))
    n = draw(st.integers(0, 25))
    ids = draw(st.lists(st.integers(0, 2**40), min_size=n, max_size=n, unique=True))
    recs = []
    for cid in ids:
        k = draw(st.integers(0, 30))
        types = draw(st.text(alphabet="BCDEGHIJKLM", min_size=k, max_size=k))
        bins = tuple(draw(st.lists(st.integers(0, q - 1), min_size=k, max_size=k)))
        lon = draw(st.integers(-1_800_000_000, 1_800_000_000))
        lat = draw(st.integers(-900_000_000, 900_000_000))
        recs.append(DatabaseRecord(cid, lon, lat, Signature(types, bins)))
    params = BuildParams(draw(st.floats(1, 200)), draw(st.floats(1, 50)), q)
    origin = GeoPoint(draw(st.floats(-180, 180)), draw(st.floats(-90, 90)))
    return SignatureDatabase(tuple(recs), params, origin, ALPHA, draw(st.booleans()))


class TestDatabaseFile:
    @given(databases())
    def test_round_trip(self, db):
        data = encode_database(db)
        back = decode_database(data)
        assert back == db
        assert [r.cell_id for r in back.records] == [r.cell_id for r in db.records]
        assert encode_database(back) == data

    def test_custom_alphabet_round_trip(self):
        a = Alphabet([ObjectClass("P", "Poteau é", 40), ObjectClass("Q", "queue", 3)])
        db = SignatureDatabase((DatabaseRecord(1, 0, 0, Signature("PQ", (1, 0))),), BuildParams(), GeoPoint(0, 0), a)
        assert decode_database(encode_database(db)) == db

    def test_empty_database(self, tmp_path):
        db = SignatureDatabase((), BuildParams(), GeoPoint(2.35, 48.85), ALPHA)
        size = save_database(db, tmp_path / "e.ssig")
        assert size == (tmp_path / "e.ssig").stat().st_size
        back = load_database(tmp_path / "e.ssig")
        assert len(back) == 0 and back == db

    def test_header(self):
        db = SignatureDatabase((), BuildParams(), GeoPoint(2.35, 48.85), ALPHA)
        data = encode_database(db)
        assert data[:4] == b"SSIG" and data[4] == 1
        assert struct.unpack_from("<ddH", data, 5) == (30.0, 10.0, 16)

    def test_bin_width(self):
        assert [bits_per_bin(q) for q in (2, 3, 4, 8, 16, 17, 32, 255)] == [1, 2, 2, 3, 4, 5, 5, 8]

    def _sample(self):
        recs = [DatabaseRecord(i, 23500000 + i, 488500000, Signature("BDG", (0, 5, 15))) for i in range(5)]
        return encode_database(SignatureDatabase(tuple(recs), BuildParams(), GeoPoint(2.35, 48.85), ALPHA))

    def test_checksum(self):
        data = bytearray(self._sample())
        data[60] ^= 0x01
        with pytest.raises(DatabaseFormatError, match="checksum") as exc:
            decode_database(bytes(data))
        assert exc.value.position == len(data) - 4

    def test_version(self):
        data = bytearray(self._sample())
        data[4] = 2
        with pytest.raises(DatabaseFormatError, match="version") as exc:
            decode_database(bytes(data))
        assert exc.value.position == 4

    def test_magic(self):
        with pytest.raises(DatabaseFormatError, match="magic"):
            decode_database(b"PK\x03\x04" + self._sample()[4:])

    @pytest.mark.parametrize("cut", [3, 20, 80, 120])
    def test_truncation(self, cut):
        import zlib

        body = self._sample()[:cut]
        data = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(DatabaseFormatError) as exc:
            decode_database(data)
        assert exc.value.position <= len(data)

    def test_trailing_bytes(self):
        import zlib

        body = self._sample()[:-4] + b"\x00"
        with pytest.raises(DatabaseFormatError, match="trailing"):
            decode_database(body + struct.pack("<I", zlib.crc32(body)))


class TestSynthetic:
    def test_reference_intensities(self):
        lam = paris_intensities()
        assert lam["B"] == pytest.approx(22186, abs=1)
        assert lam["D"] == pytest.approx(29109, abs=1)
        assert len(lam) == 11
        # proportional to the reference counts
        assert lam["D"] / lam["B"] == pytest.approx(2299639 / 1752696)

    def test_zero_intensity(self):
        cfg = SyntheticCityConfig(500, 500, {s: 0.0 for s in ALPHA.symbols}, seed=1)
        assert generate_synthetic_city(cfg) == []

    def test_invalid(self):
        with pytest.raises(ValueError):
            SyntheticCityConfig(0, 100)
        with pytest.raises(ValueError):
            SyntheticCityConfig(100, 100, {"B": -1.0})

    def test_same_seed_same_city(self):
        cfg = SyntheticCityConfig(300, 200, paris_intensities(0.05), seed=9)
        a, b = generate_synthetic_city(cfg), generate_synthetic_city(cfg)
        assert a == b
        assert [o.id for o in a] == [str(i) for i in range(1, len(a) + 1)]

    def test_objects_inside_area(self):
        cfg = SyntheticCityConfig(300, 200, paris_intensities(0.05), seed=2)
        box = cfg.bbox()
        for o in generate_synthetic_city(cfg):
            assert box.lon_min <= o.position.lon <= box.lon_max
            assert box.lat_min <= o.position.lat <= box.lat_max

    def test_counts_within_four_sigma(self):
        lam = {"B": 400.0, "M": 25.0}
        cfg_area = 0.5 * 0.4
        for sym, rate in lam.items():
            mean = rate * cfg_area
            counts = []
            for seed in range(40):
                objs = generate_synthetic_city(SyntheticCityConfig(500, 400, lam, seed=seed))
                counts.append(sum(1 for o in objs if o.cls.symbol == sym))
            # the average of 40 draws is within 4 standard errors of the mean
            assert abs(np.mean(counts) - mean) <= 4 * math.sqrt(mean / 40)
            assert all(abs(c - mean) <= 6 * math.sqrt(mean) for c in counts)

    @given(st.integers(0, 2**32), st.floats(0.0, 300.0))
    def test_class_substreams_are_independent(self, seed, other_rate):
        base = {"B": 200.0, "D": 100.0}
        changed = {"B": 200.0, "D": other_rate}
        a = generate_synthetic_city(SyntheticCityConfig(200, 200, base, seed=seed))
        b = generate_synthetic_city(SyntheticCityConfig(200, 200, changed, seed=seed))
        assert [o.position for o in a if o.cls.symbol == "B"] == [o.position for o in b if o.cls.symbol == "B"]
        assert generate_synthetic_city(SyntheticCityConfig(200, 200, base, seed=seed)) == a

    def test_profiles(self):
        assert parse_intensity_profile("paris") == paris_intensities()
        assert parse_intensity_profile("paris:0.5")["B"] == pytest.approx(paris_intensities()["B"] / 2)
        assert parse_intensity_profile("street") == paris_intensities(STREET_SCALE)
        assert set(parse_intensity_profile("uniform:12").values()) == {12.0}
        for bad in ("uniform", "manhattan"):
            with pytest.raises(ValueError):
                parse_intensity_profile(bad)

    def test_street_scale_gives_mean_length_fourteen(self):
        total = sum(paris_intensities(STREET_SCALE).values())
        assert total * math.pi * 30.0**2 / 1e6 == pytest.approx(14.0)
