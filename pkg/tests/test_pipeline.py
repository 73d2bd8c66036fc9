import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hhineq import (Couples, EarningsTopCoder, HhIneqError, PreprocessConfig,
                    clean_earnings, form_couples, ingest, validate,
                    weighted_quantile, women_share)
from hhineq.pipeline import (COLUMNS, InconsistentReportingError,
                             MalformedRowError, iter_records, prepare_datasets)

import oracles

HEADER = ",".join(COLUMNS) + "\n"


def csv_bytes(*rows):
    return (HEADER + "".join(r + "\n" for r in rows)).encode("utf-8")


def test_ingest_well_formed():
    data = csv_bytes(
        "DE,1994,h1,p1,head,male,40,30000,1.5,net",
        "DE,1994,h1,p2,partner,female,38,,1.5,net",
        "DE,1994,h1,p3,other,female,12,0,1.5,net",
        "DE,1994,h2,p4,head,female,,100,2,net",
    )
    records, metas = ingest(io.BytesIO(data))
    assert len(records) == 4
    meta = metas[("DE", 1994)]
    assert (meta.raw, meta.reporting) == (4, "net")
    assert np.isnan(records["earnings"].iloc[1])
    assert np.isnan(records["age"].iloc[3])
    rec = list(iter_records(records))
    assert rec[0].earnings == 30000.0 and rec[1].earnings is None
    assert rec[3].age is None and rec[3].role == "head"


def test_ingest_accepts_path_and_text(tmp_path):
    path = tmp_path / "p.csv"
    path.write_bytes(csv_bytes("DE,1994,h1,p1,head,male,40,1,1,net"))
    assert len(ingest(str(path))[0]) == 1
    assert len(ingest(io.StringIO(path.read_text()))[0]) == 1


@pytest.mark.parametrize("row, line, fragment", [
    ("DE,1994,h1,p2,partner,female,abc,1,1,net", 3, "age"),
    ("DE,1994,h1,p2,partner,female,40,1,1", 3, "fields"),
    ("DE,1994,h1,p2,partner,female,40,1,1,net,extra", 3, "fields"),
    ("DE,1994,h1,p2,spouse,female,40,1,1,net", 3, "role"),
    ("DE,1994,h1,p2,partner,other,40,1,1,net", 3, "sex"),
    ("DE,1994,h1,p2,partner,female,40,1,1,NET", 3, "reporting"),
    ("DE,1994,h1,p2,partner,female,40,x,1,net", 3, "earnings"),
    ("DE,1994,h1,p2,partner,female,40,1,,net", 3, "weight"),
    ("DE,1994,h1,p2,partner,female,40,1,-1,net", 3, "weight"),
    ("DE,1850,h1,p2,partner,female,40,1,1,net", 3, "year"),
    ("DE,1994,h1,p2,partner,female,140,1,1,net", 3, "age"),
    ("DE,1994,h1,p2,partner,female,40.5,1,1,net", 3, "age"),
])
def test_ingest_malformed_rows(row, line, fragment):
    data = csv_bytes("DE,1994,h1,p1,head,male,40,1,1,net", row)
    with pytest.raises(MalformedRowError) as err:
        ingest(io.BytesIO(data))
    assert err.value.line == line
    assert fragment in str(err.value)
    assert f"line {line}" in str(err.value)


def test_ingest_quoted_field_count_checked():
    data = csv_bytes('"D,E",1994,h1,p1,head,male,40,1,1,net',
                     '"D,E",1994,h1,p2,partner,female,40,1,net')
    with pytest.raises(MalformedRowError) as err:
        ingest(io.BytesIO(data))
    assert err.value.line == 3
    records, _ = ingest(io.BytesIO(csv_bytes('"D,E",1994,h1,p1,head,male,40,1,1,net')))
    assert records["country"].iloc[0] == "D,E"


def test_ingest_bad_header():
    with pytest.raises(MalformedRowError):
        ingest(io.BytesIO(b"country,year\nDE,1994\n"))


def test_ingest_inconsistent_reporting():
    data = csv_bytes("DE,1994,h1,p1,head,male,40,1,1,net",
                     "DE,1994,h1,p2,partner,female,40,1,1,gross")
    with pytest.raises(InconsistentReportingError):
        ingest(io.BytesIO(data))


def test_validate():
    data = csv_bytes("AA,2000,h,p,head,male,40,1,1,net",
                     "BB,2000,h,p,head,male,40,1,1,mixed",
                     "CC,2000,h,p,head,male,40,1,1,gross")
    _, metas = ingest(io.BytesIO(data))
    assert validate(metas[("AA", 2000)]).ok
    mixed = validate(metas[("BB", 2000)])
    assert not mixed and "mixed" in mixed.reason
    gross = validate(metas[("CC", 2000)])
    assert not gross and "out of scope" in gross.reason


def _block(*rows):
    records, metas = ingest(io.BytesIO(csv_bytes(*rows)))
    (meta,) = metas.values()
    return records, meta


def test_form_couples_rules():
    records, meta = _block(
        "DE,2000,h1,a,head,male,40,30000,1,net",
        "DE,2000,h1,b,partner,female,38,20000,1,net",
        "DE,2000,h1,c,other,male,10,50,1,net",
        "DE,2000,h2,a,head,male,40,1,1,net",
        "DE,2000,h2,b,partner,male,42,1,1,net",
        "DE,2000,h3,a,head,male,70,1,1,net",
        "DE,2000,h3,b,partner,female,60,1,1,net",
        "DE,2000,h4,a,head,female,30,,2,net",
        "DE,2000,h4,b,partner,male,31,500,2,net",
        "DE,2000,h5,a,head,male,30,1,1,net",
        "DE,2000,h6,a,head,male,30,1,1,net",
        "DE,2000,h6,b,head,female,30,1,1,net",
        "DE,2000,h7,a,head,male,30,1,1,net",
        "DE,2000,h7,b,partner,female,30,1,1,net",
        "DE,2000,h7,c,partner,female,30,1,1,net",
        "DE,2000,h8,a,head,male,30,1,0,net",
        "DE,2000,h8,b,partner,female,30,1,0,net",
        "DE,2000,h9,a,partner,male,30,1,1,net",
        "DE,2000,h10,a,head,male,17,1,1,net",
        "DE,2000,h10,b,partner,female,30,1,1,net",
    )
    couples = form_couples(records, PreprocessConfig(), meta)
    assert list(couples.hid) == ["h1", "h4"]
    assert list(couples) [0][1:4] == (30000.0, 20000.0, 1.0)
    h4 = list(couples)[1]
    assert (h4.male_earnings, h4.female_earnings, h4.weight) == (500.0, 0.0, 2.0)
    assert meta.dropped == {
        "same_sex": 1, "age": 2, "orphan_head": 1, "multiple_heads": 1,
        "multiple_partners": 1, "weight": 1, "no_head": 1,
        "missing_earnings_zeroed": 1,
    }
    assert meta.retained == 2 and meta.raw >= meta.retained


def test_form_couples_custom_ages():
    records, meta = _block("DE,2000,h3,a,head,male,70,1,1,net",
                           "DE,2000,h3,b,partner,female,60,1,1,net")
    assert len(form_couples(records, PreprocessConfig(age_max=70), meta)) == 1


@given(st.lists(st.tuples(st.sampled_from(["male", "female"]),
                          st.sampled_from(["male", "female"]),
                          st.integers(10, 80), st.integers(10, 80),
                          st.sampled_from([0.0, 1.0, 3.0])),
                min_size=1, max_size=25))
@settings(max_examples=60, deadline=None)
def test_form_couples_never_violates_rules(households):
    rows = []
    for i, (s1, s2, a1, a2, w) in enumerate(households):
        rows.append(f"XX,2001,h{i},1,head,{s1},{a1},10,{w},net")
        rows.append(f"XX,2001,h{i},2,partner,{s2},{a2},5,{w},net")
    records, meta = _block(*rows)
    couples = form_couples(records, PreprocessConfig(), meta)
    expected = sum(1 for s1, s2, a1, a2, w in households
                   if s1 != s2 and 18 <= a1 <= 65 and 18 <= a2 <= 65 and w > 0)
    assert len(couples) == expected
    assert np.all(couples.weight > 0)


# -- cleaning ----------------------------------------------------------------

def test_weighted_quantile_examples():
    assert weighted_quantile([4.2], [3.0], 0.3) == 4.2
    assert weighted_quantile(np.arange(1, 101), np.ones(100), 0.99) == 99
    assert weighted_quantile([1, 2], [3, 1], 0.5) == 1
    with pytest.raises(HhIneqError):
        weighted_quantile([], [], 0.5)


@given(st.lists(st.tuples(st.integers(-5, 50), st.integers(1, 4)), min_size=1, max_size=40),
       st.floats(0.01, 0.99))
@settings(max_examples=200, deadline=None)
def test_weighted_quantile_matches_rank_oracle(rows, p):
    v, w = map(list, zip(*rows))
    assert weighted_quantile(v, w, p) == oracles.nearest_rank_quantile(v, w, p)


def test_clean_earnings_rules():
    couples = Couples.from_pairs([(-500, 10), (np.nan, 20)])
    out = clean_earnings(couples)
    assert out.male[0] == 0 and out.male[1] == 0
    same = Couples.from_pairs([(7, 7), (7, 7)])
    np.testing.assert_array_equal(clean_earnings(same).incomes(), same.incomes())


def test_topcoding_caps_top_percentile():
    # 100 persons with earnings 1..100 -> 50 unit-weight couples
    earnings = np.arange(1, 101, dtype=float)
    couples = Couples(male=earnings[0::2], female=earnings[1::2])
    out = clean_earnings(couples, PreprocessConfig(topcode_p=0.99))
    persons = np.sort(out.incomes().ravel())
    np.testing.assert_array_equal(persons, np.r_[np.arange(1, 100), 99.0])


def test_clean_earnings_idempotent_and_order_insensitive():
    rng = np.random.default_rng(4)
    pairs = rng.lognormal(5, 2, (300, 2)) - 20
    w = rng.integers(1, 9, 300).astype(float)
    couples = Couples.from_pairs(pairs, weights=w)
    once = clean_earnings(couples)
    twice = clean_earnings(once)
    np.testing.assert_array_equal(once.incomes(), twice.incomes())
    assert once.incomes().min() >= 0
    perm = rng.permutation(300)
    shuffled = clean_earnings(couples.subset(perm))
    np.testing.assert_array_equal(shuffled.incomes(), once.incomes()[perm])
    vstar = oracles.nearest_rank_quantile(
        np.maximum(pairs, 0).ravel().tolist(), np.repeat(w, 2).tolist(), 0.99)
    assert once.incomes().max() == vstar


def test_topcoder_estimator():
    coder = EarningsTopCoder(p=0.5).fit([[1, 2], [3, 4]])
    assert coder.threshold_ == 2.0
    np.testing.assert_array_equal(coder.transform([[-1, 10]]), [[0, 2]])
    assert coder.get_params() == {"p": 0.5}


def test_women_share():
    assert women_share(Couples.from_pairs([(0, 5), (0, 1)])) == 100.0
    pairs = Couples.from_pairs([(3, 1), (1, 1)], weights=[1, 2])
    assert women_share(pairs) == pytest.approx(37.5, rel=1e-15)
    assert women_share(Couples.from_pairs([(2, 3), (3, 2)])) == 50.0
    # per-couple shares 25% and 50%, weights 1 and 2
    assert women_share(pairs, "mean_of_shares") == pytest.approx(125 / 3, rel=1e-15)
    with pytest.raises(HhIneqError):
        women_share(Couples.from_pairs([(0, 0)]))


def test_women_share_invariances():
    rng = np.random.default_rng(10)
    pairs = rng.lognormal(0, 1, (40, 2))
    couples = Couples.from_pairs(pairs)
    base = women_share(couples)
    assert women_share(Couples.from_pairs(pairs * 7.5)) == pytest.approx(base, rel=1e-12)
    assert women_share(Couples.from_pairs(np.vstack([pairs, pairs]))) == pytest.approx(
        base, rel=1e-12)


def test_prepare_datasets_skips_rejected():
    data = csv_bytes("AA,2000,h,p,head,male,40,5,1,net",
                     "AA,2000,h,q,partner,female,40,3,1,net",
                     "BB,2000,h,p,head,male,40,1,1,mixed",
                     "BB,2000,h,q,partner,female,40,3,1,mixed")
    out = list(prepare_datasets(*ingest(io.BytesIO(data))))
    assert [(m.country, v.ok, c is not None) for m, v, c in out] == [
        ("AA", True, True), ("BB", False, False)]


def test_ingest_rejects_invalid_utf8():
    data = csv_bytes("DE,1994,h1,p1,head,male,40,1,1,net") + b"D\xff,1994,h,p,head,male,40,1,1,net\n"
    with pytest.raises(MalformedRowError) as err:
        ingest(io.BytesIO(data))
    assert err.value.line == 3


def test_ingest_strips_bom_and_crlf():
    data = b"\xef\xbb\xbf" + csv_bytes("DE,1994,h1,p1,head,male,40,1,1,net").replace(b"\n", b"\r\n")
    records, _ = ingest(io.BytesIO(data))
    assert records["reporting"].iloc[0] == "net"


def test_ingest_header_only():
    records, metas = ingest(io.BytesIO(HEADER.encode()))
    assert len(records) == 0 and metas == {}
