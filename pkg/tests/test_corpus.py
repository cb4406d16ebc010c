import io

import pytest

from stabeval import corpus
from stabeval.corpus import ColumnMapping, Severity, bucket_layout, ingest, ingest_lines, stats
from stabeval.errors import (
    IncompleteRatings,
    InconsistentBuckets,
    MissingColumn,
    ParseError,
    ScoreMismatch,
)

from conftest import tiny_tsv_rows


def test_ingest_tiny_fixture(tiny_tsv):
    ds = ingest(tiny_tsv)
    assert len(ds.buckets) == 1
    assert len(ds.ratings) == 12
    assert ds.language_pair == "xx-yy"
    rated = ds.rating("doc1", 0, "sysA", "r1")
    assert rated.score == 5.0  # one Major error at default weight
    assert rated.annotations[0].severity is Severity.MAJOR
    assert rated.annotations[0].span == (0, 4)
    assert ds.rating("doc2", 0, "sysB", "r3").score == 0.0


def test_stats_tiny_fixture(tiny_tsv):
    s = stats(ingest(tiny_tsv))
    assert s.n_documents == 2
    assert s.n_systems == 2
    assert s.n_raters == 3
    assert s.n_segments == 2
    assert s.bucket_doc_counts == {"b1": 2}


def test_bucket_layout_single_bucket(tiny_tsv):
    layout = bucket_layout(ingest(tiny_tsv))
    assert layout == [("b1", ("r1", "r2", "r3"), 2)]


def test_invalid_severity_rejected(tiny_tsv):
    rows = tiny_tsv_rows()
    rows[1] = rows[1].replace("Major", "Critical")
    with pytest.raises(ParseError, match="severity"):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_severity_error_carries_line_number():
    rows = tiny_tsv_rows()
    rows[4] = rows[4].replace("\t\t\t\t\t\t", "\tCritical\tFluency\t\t\t\t")
    with pytest.raises(ParseError, match="line 5"):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_incomplete_ratings_detected():
    rows = [r for r in tiny_tsv_rows() if "\tdoc2\t0\tsysB\tr3\t" not in r]
    with pytest.raises(IncompleteRatings, match="doc2"):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_missing_required_column():
    with pytest.raises(MissingColumn, match="rater_id"):
        ingest_lines(io.StringIO("doc_id\tseg_index\tsystem_id\n"))


def test_score_mismatch_detected():
    rows = tiny_tsv_rows()
    # attach a wrong precomputed score to an error row
    rows[1] = rows[1].replace("\t0\t4\t\t", "\t0\t4\t3.0\t")
    with pytest.raises(ScoreMismatch):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_conflicting_explicit_buckets():
    rows = tiny_tsv_rows()
    rows[-1] = rows[-1].replace("\tb1\t", "\tb2\t")
    with pytest.raises(InconsistentBuckets):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_ingest_row_order_invariant(tiny_tsv):
    rows = tiny_tsv_rows()
    shuffled = [rows[0]] + list(reversed(rows[1:]))
    a = ingest(tiny_tsv)
    b = ingest_lines(io.StringIO("\n".join(shuffled)))
    assert corpus.datasets_equal(a, b)


def test_roundtrip_export_ingest(tiny_tsv):
    ds = ingest(tiny_tsv)
    again = ingest_lines(io.StringIO(corpus.export_tsv(ds)))
    assert corpus.datasets_equal(ds, again, tol=1e-12)
    assert corpus.fingerprint(ds) == corpus.fingerprint(again)


def test_bucket_inference_matches_explicit_column(tiny_tsv):
    rows = tiny_tsv_rows()
    header = rows[0].split("\t")
    bucket_col = header.index("bucket_id")
    stripped = [rows[0]]
    for row in rows[1:]:
        cells = row.split("\t")
        cells[bucket_col] = ""
        stripped.append("\t".join(cells))
    explicit = ingest(tiny_tsv)
    inferred = ingest_lines(io.StringIO("\n".join(stripped)))
    assert {b.doc_ids for b in explicit.buckets} == {b.doc_ids for b in inferred.buckets}
    assert {b.rater_ids for b in explicit.buckets} == {b.rater_ids for b in inferred.buckets}


def test_column_mapping_renames(tmp_path):
    rows = tiny_tsv_rows()
    header = rows[0].replace("doc_id", "document").replace("rater_id", "annotator")
    path = tmp_path / "renamed.tsv"
    path.write_text("\n".join([header] + rows[1:]) + "\n")
    mapping_path = tmp_path / "mapping.cfg"
    mapping_path.write_text(
        "[columns]\n"
        "doc_id = document\n"
        "seg_index = seg_index\n"
        "system_id = system_id\n"
        "rater_id = annotator\n"
        "severity = severity\n"
        "category = category\n"
        "bucket_id = bucket_id\n"
        "lang_pair = lang_pair\n"
        "score = score\n"
    )
    ds = ingest(path, mapping=ColumnMapping.from_file(mapping_path))
    assert len(ds.ratings) == 12


def test_span_exceeding_target_rejected():
    rows = tiny_tsv_rows()
    rows[1] = rows[1].replace("\t0\t4\t", "\t0\t400\t")
    with pytest.raises(ParseError, match="span"):
        ingest_lines(io.StringIO("\n".join(rows)))


def test_score_only_ingestion():
    lines = ["doc_id\tseg_index\tsystem_id\trater_id\tscore"]
    for doc in ("d1", "d2"):
        for system in ("a", "b"):
            for rater in ("r1", "r2"):
                lines.append(f"{doc}\t0\t{system}\t{rater}\t1.5")
    ds = ingest_lines(io.StringIO("\n".join(lines)))
    assert all(r.annotations is None for r in ds.ratings.values())
    assert all(r.score == 1.5 for r in ds.ratings.values())
