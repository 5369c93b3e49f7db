import pytest

from amdbench.features import (
    EXTERNAL_API,
    INTERNAL,
    CorpusReadError,
    GraphNode,
    Label,
    ProgramGraph,
    SensitiveApiCatalog,
    query,
    read_records,
    validate_corpus,
    validate_record,
    write_records,
)

from conftest import make_record


def test_validate_dangling_edge(catalog):
    rec = make_record(
        nodes=(GraphNode(0, INTERNAL),),
        edges=((0, 5),),
    )
    violations = validate_record(rec, catalog)
    assert any("dangling edge" in v for v in violations)


def test_validate_opcode_out_of_range(catalog):
    rec = make_record(opcodes=(3, 300))
    violations = validate_record(rec, catalog, opcode_vocab_size=256)
    assert any("out of range" in v for v in violations)


def test_validate_well_formed_empty_graph_ok(catalog):
    rec = make_record(permissions=("android.permission.X",))
    assert validate_record(rec, catalog) == []


def test_validate_sensitive_flag_needs_catalog(catalog):
    rec = make_record(
        nodes=(GraphNode(0, EXTERNAL_API, api_name="not.in.catalog", sensitive=True),),
    )
    violations = validate_record(rec, catalog)
    assert any("not in catalog" in v for v in violations)


def test_validate_label_vt_consistency(catalog):
    rec = make_record(label=Label.BENIGN, vt=7)
    assert any("inconsistent" in v for v in validate_record(rec, catalog))
    ok = make_record(label=Label.MALICIOUS, vt=7)
    assert validate_record(ok, catalog) == []


def test_validate_duplicate_node_ids(catalog):
    rec = make_record(nodes=(GraphNode(0, INTERNAL), GraphNode(0, INTERNAL)))
    assert any("duplicate node_ids" in v for v in validate_record(rec, catalog))


def test_write_read_round_trip(tmp_path):
    records = [
        make_record(app_id=f"a{i}", permissions=(f"p{i}", "shared"), opcodes=(1, 2, 3))
        for i in range(3)
    ]
    path = tmp_path / "features.jsonl"
    write_records(records, path)
    assert read_records(path) == records


def test_write_empty_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_records([], path)
    assert read_records(path) == []


def test_write_non_utf8_name_errors(tmp_path):
    rec = make_record(permissions=("ok", "bad\udc80name"))  # lone surrogate
    with pytest.raises(UnicodeEncodeError):
        write_records([rec], tmp_path / "x.jsonl")


def test_read_missing_file():
    with pytest.raises(FileNotFoundError):
        read_records("/nonexistent/features.jsonl")


def test_read_corrupted_line_reports_number(tmp_path):
    records = [make_record(app_id=f"a{i}") for i in range(10)]
    path = tmp_path / "features.jsonl"
    write_records(records, path)
    lines = path.read_text().splitlines()
    lines[6] = '{"v": 1, "broken": tru'
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusReadError) as err:
        read_records(path)
    assert err.value.line_number == 7


def test_query_filters():
    records = [
        make_record(app_id="a", year=2011, label=Label.MALICIOUS, vt=5),
        make_record(app_id="b", year=2011, label=Label.BENIGN, vt=0),
        make_record(app_id="c", year=2012, label=Label.MALICIOUS, vt=5),
    ]
    hits = query(records, year_range=(2011, 2011), label=Label.MALICIOUS)
    assert [r.app_id for r in hits] == ["a"]


def test_query_empty_filter_is_identity():
    records = [make_record(app_id=f"a{i}") for i in range(4)]
    assert query(records) == records


def test_query_inverted_range_errors():
    with pytest.raises(ValueError, match="inverted"):
        query([], year_range=(2020, 2011))


def test_query_conjunction_equals_sequential():
    records = [
        make_record(app_id=f"a{i}", year=2010 + i % 3, month=1 + i % 12,
                    label=Label.MALICIOUS if i % 4 == 0 else Label.BENIGN,
                    vt=5 if i % 4 == 0 else 0)
        for i in range(30)
    ]
    both = query(records, year_range=(2010, 2011), label=Label.BENIGN)
    sequential = query(query(records, year_range=(2010, 2011)), label=Label.BENIGN)
    assert both == sequential


def test_catalog_file_round_trip(tmp_path):
    cat = SensitiveApiCatalog(names=("a.B.c", "d.E.f"), version="v9")
    path = tmp_path / "sensitive_apis.txt"
    cat.to_file(path)
    loaded = SensitiveApiCatalog.from_file(path, version="v9")
    assert loaded.names == cat.names
    assert "a.B.c" in loaded
    assert loaded.index() == {"a.B.c": 0, "d.E.f": 1}


def test_catalog_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        SensitiveApiCatalog(names=("x", "x"))


def test_validate_corpus_duplicate_ids():
    records = [make_record(app_id="same"), make_record(app_id="same")]
    assert validate_corpus(records) == ["duplicate app_id 'same'"]
