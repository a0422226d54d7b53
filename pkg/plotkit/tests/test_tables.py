"""Table parsing and the goodput-identity saturation derivation."""

from pathlib import Path

import pytest

from plotkit import EXPECTED_HEADER, TableError, parse_table, saturation_level

FIXTURE = Path(__file__).parent / "data" / "fixture_results.csv"


def test_fixture_parses():
    rows = parse_table(FIXTURE.read_text(), source="fixture")
    assert {r.scheme for r in rows} == {"gs", "nrx-cp", "lmmse"}
    assert {r.speed_kmh for r in rows} == {3.6, 36.0}
    assert all(0.0 <= r.ber <= 1.0 for r in rows)


def test_empty_table_rejected():
    with pytest.raises(TableError, match="empty"):
        parse_table("", source="t")
    with pytest.raises(TableError, match="no rows"):
        parse_table(",".join(EXPECTED_HEADER), source="t")


def test_missing_column_named():
    broken = "scheme,speed_kmh,esn0_db,ebn0_db,frames,bit_errors,ber,seed\n" \
             "gs,3.6,4.0,0.0,10,5,0.1,7\n"
    with pytest.raises(TableError, match="goodput"):
        parse_table(broken, source="t")


def test_reordered_header_rejected():
    cols = list(EXPECTED_HEADER)
    cols[0], cols[1] = cols[1], cols[0]
    with pytest.raises(TableError, match="order"):
        parse_table(",".join(cols) + "\ngs,3.6,4,0,1,0,0,2.6,7\n", source="t")


def test_bad_field_count_and_types():
    head = ",".join(EXPECTED_HEADER)
    with pytest.raises(TableError, match="fields"):
        parse_table(head + "\ngs,3.6,4.0\n", source="t")
    with pytest.raises(TableError, match=":2:"):
        parse_table(head + "\ngs,fast,4.0,0.0,10,5,0.1,2.0,7\n", source="t")


def test_saturation_from_goodput_identity():
    rows = parse_table(FIXTURE.read_text(), source="fixture")
    gs = [r for r in rows if r.scheme == "gs"]
    nrx = [r for r in rows if r.scheme == "nrx-cp"]
    r_code, m = 683 / 1024, 4
    assert saturation_level(gs) == pytest.approx(r_code * 1.0 * m, abs=1e-12)
    assert saturation_level(nrx) == pytest.approx(r_code * (81 / 91) * m, abs=1e-12)


def test_saturation_rejects_inconsistent_rows():
    rows = parse_table(FIXTURE.read_text(), source="fixture")
    clone = rows[0].__class__(**{**rows[0].__dict__, "goodput": rows[0].goodput * 1.5})
    with pytest.raises(TableError, match="inconsistent"):
        saturation_level([rows[0], clone])
