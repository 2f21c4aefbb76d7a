import json
from pathlib import Path

import pytest

from corpusforge import (
    CsvParseError,
    EncodingError,
    IoError,
    SchemaError,
)
from corpusforge.io import (
    data_ingestion___csv___load,
    data_ingestion___jsonl___load,
)

from conftest import all_documents


def ingest_jsonl(path, **kw):
    # ctx is unused by the file loaders
    return list(data_ingestion___jsonl___load(None, str(path), **kw))


def ingest_csv(path, **kw):
    return list(data_ingestion___csv___load(None, str(path), **kw))


class TestJsonlLoad:
    def test_basic_fields(self, write_jsonl):
        path = write_jsonl(
            "in.jsonl",
            [
                {"text": "hello", "source": "webcrawl", "meta": {"lang": "en"}},
                {"text": "plain"},
            ],
        )
        docs = ingest_jsonl(path)
        assert [d.text for d in docs] == ["hello", "plain"]
        assert docs[0].source == "webcrawl"
        assert docs[0].meta == {"lang": "en"}
        # no source key: falls back to the file name
        assert docs[1].source == "in.jsonl"
        assert docs[1].meta == {}

    def test_id_dropped_and_extras_merged(self, write_jsonl):
        path = write_jsonl(
            "in.jsonl",
            [
                {
                    "text": "t",
                    "id": 999,
                    "score": 0.5,
                    "ok": True,
                    "skipme": None,
                    "nested": {"b": 2, "a": [1, None]},
                }
            ],
        )
        (doc,) = ingest_jsonl(path)
        assert doc.id == 0  # ids are reassigned downstream
        assert doc.meta["score"] == 0.5
        assert doc.meta["ok"] is True
        assert "skipme" not in doc.meta
        # nested values become canonical JSON strings
        assert doc.meta["nested"] == '{"a":[1,null],"b":2}'

    def test_source_tag_beats_record_source(self, write_jsonl):
        path = write_jsonl("in.jsonl", [{"text": "t", "source": "original"}])
        (doc,) = ingest_jsonl(path, source_tag="tagged")
        assert doc.source == "tagged"

    def test_custom_text_field(self, write_jsonl):
        path = write_jsonl("in.jsonl", [{"body": "the text", "text": "not this"}])
        (doc,) = ingest_jsonl(path, text_field="body")
        assert doc.text == "the text"
        # the literal "text" key is just another extra now
        assert doc.meta["text"] == "not this"

    def test_non_dict_meta_value_stringified(self, write_jsonl):
        path = write_jsonl("in.jsonl", [{"text": "t", "meta": [1, 2]}])
        (doc,) = ingest_jsonl(path)
        assert doc.meta == {"meta": "[1,2]"}

    def test_bad_meta_scalar_rejected(self, write_jsonl):
        path = write_jsonl("in.jsonl", [{"text": "t", "meta": {"x": [1]}}])
        with pytest.raises(SchemaError, match=r"in\.jsonl:1"):
            ingest_jsonl(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text('{"text":"a"}\n\n   \n{"text":"b"}\n', encoding="utf-8")
        assert [d.text for d in ingest_jsonl(path)] == ["a", "b"]

    def test_directory_reads_files_in_lexicographic_order(self, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / "b.jsonl").write_text('{"text":"second"}\n', encoding="utf-8")
        (corpus / "a.jsonl").write_text('{"text":"first"}\n', encoding="utf-8")
        docs = ingest_jsonl(corpus)
        assert [d.text for d in docs] == ["first", "second"]
        # fallback source is the path argument's basename, i.e. the directory
        assert {d.source for d in docs} == {"corpus"}

    @pytest.mark.parametrize(
        ("line", "match"),
        [
            ('{"text": 5}', "must be a string"),
            ('{"meta": {}}', "missing field 'text'"),
            ("[1, 2]", "JSON object"),
            ('{"text": "unterminated', "invalid JSON"),
        ],
    )
    def test_schema_errors_carry_location(self, tmp_path, line, match):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"text":"fine"}\n' + line + "\n", encoding="utf-8")
        with pytest.raises(SchemaError, match=match) as err:
            ingest_jsonl(path)
        assert "bad.jsonl:2" in str(err.value)

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_bytes(b'{"text":"\xff\xfe"}\n')
        with pytest.raises(EncodingError):
            ingest_jsonl(path)

    def test_missing_path(self):
        with pytest.raises(IoError):
            ingest_jsonl("/no/such/file.jsonl")

    def test_empty_directory(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(IoError):
            ingest_jsonl(empty)

    def test_empty_text_field_arg(self, write_jsonl):
        path = write_jsonl("in.jsonl", [{"text": "t"}])
        with pytest.raises(SchemaError):
            ingest_jsonl(path, text_field="")


class TestCsvLoad:
    def test_basic(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text(
            'text,lang,stars\n"quoted, with comma",en,5\nplain,de,1\n', encoding="utf-8"
        )
        docs = ingest_csv(path)
        assert [d.text for d in docs] == ["quoted, with comma", "plain"]
        # non-text columns arrive as string meta
        assert docs[0].meta == {"lang": "en", "stars": "5"}
        assert docs[0].source == "in.csv"

    def test_multiline_quoted_field(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text('text\n"line one\nline two"\n', encoding="utf-8")
        (doc,) = ingest_csv(path)
        assert doc.text == "line one\nline two"

    def test_source_tag(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("text\nx\n", encoding="utf-8")
        (doc,) = ingest_csv(path, source_tag="reviews")
        assert doc.source == "reviews"

    def test_missing_header(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(SchemaError, match="header"):
            ingest_csv(path)

    def test_missing_text_column(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="column 'text'"):
            ingest_csv(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("text,lang\nok,en\nonly_one_field\n", encoding="utf-8")
        with pytest.raises(CsvParseError, match="row 3"):
            ingest_csv(path)

    def test_missing_path(self):
        with pytest.raises(IoError):
            ingest_csv("/no/such/file.csv")


class TestSave:
    def test_concatenated_output_and_manifest(self, run, tmp_path):
        out = tmp_path / "out"
        shards, report = run(
            [
                {"name": "data_ingestion___test___generate_fake_data", "args": {"count": 25}},
                {"name": "data_saving___jsonl___save", "args": {"path": str(out)}},
            ],
            shard_size=10,
        )
        data = out / "data.jsonl"
        assert data.exists()
        blob = b"".join(Path(s.path).read_bytes() for s in shards.shards)
        assert data.read_bytes() == blob

        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["records"] == 25
        assert manifest["shards"] == 3
        assert manifest["stages"] == [
            "data_ingestion___test___generate_fake_data",
            "data_saving___jsonl___save",
        ]
        assert isinstance(manifest["config_hash"], str) and manifest["config_hash"]
        assert report.outputs == [str(data), str(out / "manifest.json")]

    def test_sharded_output(self, run, tmp_path):
        out = tmp_path / "out"
        shards, report = run(
            [
                {"name": "data_ingestion___test___generate_fake_data", "args": {"count": 25}},
                {
                    "name": "data_saving___jsonl___save",
                    "args": {"path": str(out), "shard_output": True},
                },
            ],
            shard_size=10,
        )
        parts = sorted(p.name for p in out.glob("part-*.jsonl"))
        assert parts == ["part-00000.jsonl", "part-00001.jsonl", "part-00002.jsonl"]
        for shard, part in zip(shards.shards, sorted(out.glob("part-*.jsonl"))):
            assert part.read_bytes() == Path(shard.path).read_bytes()
        assert report.outputs[-1] == str(out / "manifest.json")

    def test_save_then_ingest_round_trip(self, run, tmp_path):
        out = tmp_path / "out"
        first, _ = run(
            [
                {"name": "data_ingestion___test___generate_fake_data", "args": {"count": 40}},
                {"name": "data_saving___jsonl___save", "args": {"path": str(out)}},
            ],
            shard_size=9,
        )
        second, _ = run(
            [
                {
                    "name": "data_ingestion___jsonl___load",
                    "args": {"path": str(out / "data.jsonl")},
                }
            ],
            shard_size=9,
        )

        def essence(shard_set):
            return sorted(
                (d.text, d.source, tuple(sorted(d.meta.items())))
                for d in all_documents(shard_set)
            )

        assert essence(first) == essence(second)
        # ids restart from zero on re-ingest
        assert [d.id for d in all_documents(second)][:3] == [0, 1, 2]

    def test_unwritable_path(self, run, tmp_path):
        victim = tmp_path / "blocker"
        victim.write_text("i am a file, not a directory", encoding="utf-8")
        with pytest.raises(IoError):
            run(
                [
                    {"name": "data_ingestion___test___generate_fake_data", "args": {"count": 5}},
                    {
                        "name": "data_saving___jsonl___save",
                        "args": {"path": str(victim / "out")},
                    },
                ]
            )
