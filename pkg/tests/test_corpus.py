import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sciline import corpus as corpus_mod
from sciline.corpus import (
    DuplicatePaperIdError,
    SchemaVersionError,
    UnknownFieldError,
    dedupe_by_doi,
    load_corpus,
    read_embeddings,
    write_embeddings,
)

from conftest import build_corpus, record, write_ndjson


def test_empty_file(tmp_path):
    path = tmp_path / "empty.ndjson"
    path.write_text("")
    corpus = load_corpus([path])
    assert len(corpus) == 0
    assert corpus.rejects == ()


def test_missing_year_rejected_with_line_number(tmp_path):
    records = [record(f"p{i}", 2000) for i in range(3)]
    bad = {"paper_id": "p9", "fields_l1": ["field_a"]}
    path = write_ndjson(tmp_path / "c.ndjson", records + [bad])
    corpus = load_corpus([path])
    assert len(corpus) == 3
    assert len(corpus.rejects) == 1
    assert corpus.rejects[0].line == 4
    assert corpus.rejects[0].reason == "missing_field:year"


def test_duplicate_paper_id_is_hard_error(tmp_path):
    path = write_ndjson(
        tmp_path / "c.ndjson", [record("dup", 2000), record("dup", 2001)]
    )
    with pytest.raises(DuplicatePaperIdError, match="dup"):
        load_corpus([path])


def test_schema_version_mismatch(tmp_path):
    path = write_ndjson(tmp_path / "c.ndjson", [record("p1", 2000)])
    with pytest.raises(SchemaVersionError):
        load_corpus([path], schema_version="99")


@pytest.mark.parametrize(
    "bad,reason",
    [
        ({"paper_id": "x", "year": 1500}, "year_below_minimum"),
        ({"paper_id": "x", "year": 2000, "reference_ids": ["x"]}, "self_reference"),
        ({"paper_id": "x", "year": 2000, "submitted": "not-a-date",
          "accepted": "2000-01-01"}, "bad_date"),
        ({"paper_id": "x", "year": 2000, "submitted": "2000-05-01",
          "accepted": "2000-01-01"}, "accepted_before_submitted"),
        ({"year": 2000}, "missing_field:paper_id"),
        ({"paper_id": "x", "year": 2000, "fields_l1": "oops"}, "bad_field:fields_l1"),
    ],
)
def test_reject_reasons(tmp_path, bad, reason):
    path = write_ndjson(tmp_path / "c.ndjson", [bad])
    corpus = load_corpus([path])
    assert len(corpus) == 0
    assert corpus.rejects[0].reason == reason


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "c.ndjson"
    path.write_text('{"paper_id": "p1", "year": 2000}\n{oops\n')
    corpus = load_corpus([path])
    assert len(corpus) == 1
    assert corpus.rejects[0].reason == "invalid_json"
    assert corpus.rejects[0].line == 2


def test_dates_parsed_to_days(tmp_path):
    corpus = build_corpus(
        tmp_path,
        [record("p1", 2020, submitted="2020-01-01", accepted="2020-03-01")],
    )
    history = corpus["p1"].history
    assert history.accepted - history.submitted == 60


def test_dedupe_all_sharers_removed(tmp_path):
    records = [record(f"p{i}", 2000, doi="10.1/shared") for i in range(5)]
    corpus = build_corpus(tmp_path, records)
    deduped, removed = dedupe_by_doi(corpus)
    assert removed == 5
    assert len(deduped) == 0


def test_dedupe_distinct_dois_untouched(tmp_path):
    records = [record(f"p{i}", 2000, doi=f"10.1/{i}") for i in range(4)]
    corpus = build_corpus(tmp_path, records)
    deduped, removed = dedupe_by_doi(corpus)
    assert removed == 0
    assert len(deduped) == 4


def test_dedupe_mixed(tmp_path):
    records = [
        record("s1", 2000, doi="10.1/dup"),
        record("s2", 2000, doi="10.1/dup"),
        record("u1", 2000, doi="10.1/a"),
        record("u2", 2000, doi="10.1/b"),
        record("u3", 2000),  # no DOI
    ]
    corpus = build_corpus(tmp_path, records)
    deduped, removed = dedupe_by_doi(corpus)
    assert removed == 2
    assert deduped.paper_ids() == ["u1", "u2", "u3"]


@settings(max_examples=50, deadline=None)
@given(
    dois=st.lists(st.integers(min_value=0, max_value=5), min_size=0, max_size=20)
)
def test_dedupe_closed_under_doi_sharing(tmp_path_factory, dois):
    tmp = tmp_path_factory.mktemp("dedupe")
    records = [
        record(f"p{i}", 2000, doi=f"10.1/{d}" if d > 0 else None)
        for i, d in enumerate(dois)
    ]
    corpus = build_corpus(tmp, records)
    deduped, removed = dedupe_by_doi(corpus)
    seen = {}
    for p in deduped.papers():
        if p.doi:
            assert p.doi not in seen, "a shared DOI survived dedupe"
            seen[p.doi] = p.paper_id
    assert removed + len(deduped) == len(corpus)


def _embedded_fixture(tmp_path):
    records = [
        record("a1", 1964, fields_l1=["dft"]),
        record("a2", 1964, fields_l1=["dft"]),
        record("a3", 1964, fields_l1=["dft"]),
        record("a4", 1964, fields_l1=["dft"]),
        record("b1", 1964, fields_l1=["chemistry"]),
        record("m1", 1964, fields_l1=["dft", "chemistry"]),
        record("n1", 1964, fields_l1=["dft"]),  # no embedding
    ]
    vectors = {
        pid: np.eye(8)[i] for i, pid in enumerate(["a1", "a2", "a3", "a4", "b1", "m1"])
    }
    return build_corpus(tmp_path, records, vectors)


def test_cohort_view_counts(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    cohort = corpus.cohort_view(1964, "dft")
    # four a* papers plus the multi-field one; n1 lacks an embedding
    assert cohort.members == ("a1", "a2", "a3", "a4", "m1")
    assert len(corpus.cohort_view(1964, "chemistry")) == 2


def test_cohort_view_empty_year(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    assert corpus.cohort_view(1999, "dft").members == ()


def test_cohort_view_unknown_field(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    with pytest.raises(UnknownFieldError):
        corpus.cohort_view(1964, "astrology")


def test_multi_field_paper_in_both_cohorts(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    assert "m1" in corpus.cohort_view(1964, "dft").members
    assert "m1" in corpus.cohort_view(1964, "chemistry").members


def test_cohort_union_covers_embedded_papers(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    multiplicity = {}
    for cohort in corpus.cohorts():
        for pid in cohort.members:
            multiplicity[pid] = multiplicity.get(pid, 0) + 1
    expected = {
        pid: len(corpus[pid].fields_l1) for pid in corpus.embedded_ids()
    }
    assert multiplicity == expected


def test_field_size(tmp_path):
    records = [record(f"p{i}", 2001, fields_l1=["big"]) for i in range(7)]
    records.append(record("q", 2001, fields_l1=["big", "small"]))
    corpus = build_corpus(tmp_path, records)
    assert corpus.field_size(2001, "big") == 8
    assert corpus.field_size(2001, "small") == 1
    assert corpus.field_size(1990, "big") == 0
    with pytest.raises(UnknownFieldError):
        corpus.field_size(2001, "nope")


def test_load_idempotent_index_dump(tmp_path):
    records = [record(f"p{i}", 2000 + i % 3, doi=f"10.1/{i}") for i in range(10)]
    path = write_ndjson(tmp_path / "c.ndjson", records)
    first = load_corpus([path]).index_dump()
    second = load_corpus([path]).index_dump()
    assert first == second


def test_missing_embedding_count(tmp_path):
    corpus = _embedded_fixture(tmp_path)
    assert corpus.missing_embedding_count() == 1


def test_embeddings_roundtrip(tmp_path):
    vectors = {"a": np.arange(4, dtype=np.float32), "b": np.ones(4, dtype=np.float32)}
    path = tmp_path / "emb.bin"
    write_embeddings(path, vectors)
    store = read_embeddings(path)
    assert store.dim == 4
    assert set(store.row_index) == {"a", "b"}
    np.testing.assert_array_equal(store.get("a"), np.arange(4, dtype=np.float32))


def test_embeddings_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE!" + b"\x00" * 16)
    with pytest.raises(corpus_mod.EmbeddingFormatError):
        read_embeddings(path)


def test_embeddings_nonfinite_rejected(tmp_path):
    path = tmp_path / "emb.bin"
    write_embeddings(path, {"a": np.array([np.nan, 1.0], dtype=np.float32)})
    with pytest.raises(corpus_mod.EmbeddingFormatError):
        read_embeddings(path)


def test_rejects_csv(tmp_path):
    path = write_ndjson(
        tmp_path / "c.ndjson", [record("p1", 2000), {"paper_id": "p2"}]
    )
    corpus = load_corpus([path])
    out = tmp_path / "rejects.csv"
    corpus_mod.write_rejects_csv(corpus.rejects, out)
    assert out.read_text().splitlines() == ["line,reason", "2,missing_field:year"]
