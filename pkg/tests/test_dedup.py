import json

import pytest
from hypothesis import given, strategies as st

from corpusforge import EmptyInput
from corpusforge.dedup import (
    MERSENNE_61,
    UnionFind,
    banding_keys,
    jaccard,
    make_permutation_params,
    minhash_signature,
    shingle_set,
)

from conftest import all_documents, read_lines


class TestShingles:
    def test_window_count(self):
        # 5 distinct words, trigrams: 3 windows
        assert len(shingle_set("alpha beta gamma delta epsilon", 3)) == 3

    def test_normalization_applies(self):
        assert shingle_set("Alpha  BETA gamma", 3) == shingle_set("alpha beta gamma", 3)

    def test_short_text_falls_back_to_whole_hash(self):
        short = shingle_set("two words", 3)
        assert len(short) == 1
        assert shingle_set("", 3)  # never empty

    def test_bad_ngram(self):
        with pytest.raises(ValueError):
            shingle_set("text", 0)


class TestMinHash:
    def test_permutation_param_ranges(self):
        a_params, b_params = make_permutation_params(7, 64)
        assert len(a_params) == len(b_params) == 64
        assert all(1 <= a < MERSENNE_61 for a in a_params)
        assert all(0 <= b < MERSENNE_61 for b in b_params)
        assert make_permutation_params(7, 64) == (a_params, b_params)
        assert make_permutation_params(8, 64) != (a_params, b_params)

    def test_empty_shingles_rejected(self):
        a_params, b_params = make_permutation_params(0, 4)
        with pytest.raises(EmptyInput):
            minhash_signature(set(), a_params, b_params)

    @given(
        st.sets(st.integers(min_value=0, max_value=2**64 - 1), min_size=1, max_size=20),
        st.sets(st.integers(min_value=0, max_value=2**64 - 1), min_size=1, max_size=20),
        st.integers(min_value=0, max_value=2**32),
    )
    def test_union_is_elementwise_min(self, left, right, seed):
        a_params, b_params = make_permutation_params(seed, 8)
        sig_union = minhash_signature(left | right, a_params, b_params)
        sig_left = minhash_signature(left, a_params, b_params)
        sig_right = minhash_signature(right, a_params, b_params)
        assert sig_union == [min(x, y) for x, y in zip(sig_left, sig_right)]

    def test_banding_keys_shape(self):
        a_params, b_params = make_permutation_params(1, 16)
        sig = minhash_signature({1, 2, 3}, a_params, b_params)
        keys = banding_keys(sig, bands=4, rows=4)
        assert len(keys) == 4
        # band position participates in the key
        assert banding_keys(sig[::-1], bands=4, rows=4) != keys

    def test_banding_shape_mismatch(self):
        with pytest.raises(ValueError):
            banding_keys([1, 2, 3], bands=2, rows=2)


class TestJaccard:
    def test_examples(self):
        assert jaccard({1, 2}, {1, 2}) == 1.0
        assert jaccard({1, 2}, {3, 4}) == 0.0
        assert jaccard({1, 2, 3}, {2, 3, 4}) == pytest.approx(0.5)
        assert jaccard(set(), set()) == 1.0
        assert jaccard({1}, set()) == 0.0


class TestUnionFind:
    def test_groups(self):
        uf = UnionFind()
        uf.union(1, 2)
        uf.union(2, 3)
        uf.union(10, 11)
        uf.find(99)
        groups = {tuple(sorted(v)) for v in uf.groups().values()}
        assert groups == {(1, 2, 3), (10, 11), (99,)}


def _words(n, offset=0):
    return " ".join(f"word{i + offset:02}" for i in range(n))


class TestExactDedupStage:
    def test_case_and_whitespace_variants_collide(self, run, write_jsonl):
        path = write_jsonl(
            "in.jsonl",
            [
                {"text": "Hello   World"},
                {"text": "hello world"},
                {"text": "HELLO\tWORLD"},
                {"text": "something else"},
            ],
        )
        shards, report = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {"name": "deduplication___exact___fnv"},
            ]
        )
        docs = all_documents(shards)
        assert [d.id for d in docs] == [0, 3]
        # smallest id keeps its original casing
        assert docs[0].text == "Hello   World"
        assert report.stages[1].dropped_by_reason == {"exact_duplicate": 2}

    def test_smallest_id_survives_across_shards(self, run, write_jsonl):
        rows = [{"text": f"unique {i}"} for i in range(10)]
        rows[9] = {"text": "unique 0"}  # duplicate of the first record
        path = write_jsonl("in.jsonl", rows)
        shards, _ = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {"name": "deduplication___exact___fnv"},
            ],
            shard_size=3,
        )
        ids = [d.id for d in all_documents(shards)]
        assert 0 in ids
        assert (3 << 40) + 0 not in ids  # record 9 (shard 3) is the loser
        assert len(ids) == 9

    def test_per_source_scope(self, run, write_jsonl):
        path = write_jsonl(
            "in.jsonl",
            [
                {"text": "shared text", "source": "a"},
                {"text": "shared text", "source": "b"},
                {"text": "shared text", "source": "a"},
            ],
        )
        etl = [
            {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
            {"name": "deduplication___exact___fnv", "args": {"scope": "per_source"}},
        ]
        shards, report = run(etl)
        # one survivor per source
        assert [d.source for d in all_documents(shards)] == ["a", "b"]
        assert report.stages[1].dropped_by_reason == {"exact_duplicate": 1}

    def test_drop_log_rows(self, run, write_jsonl, tmp_path):
        path = write_jsonl(
            "in.jsonl", [{"text": "dup"}, {"text": "dup"}, {"text": "dup"}]
        )
        log_path = tmp_path / "drops.jsonl"
        run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {
                    "name": "deduplication___exact___fnv",
                    "args": {"drop_log": str(log_path)},
                },
            ]
        )
        rows = [json.loads(line) for line in read_lines(log_path)]
        assert rows == [
            {"dropped_id": 1, "kept_id": 0, "mode": "exact"},
            {"dropped_id": 2, "kept_id": 0, "mode": "exact"},
        ]


class TestMinHashDedupStage:
    # rows=1 makes any slot agreement a candidate pair, so candidacy is
    # certain for similar texts and the Jaccard verification does the work
    MINHASH_ARGS = {
        "ngram": 3,
        "num_perm": 16,
        "bands": 16,
        "rows": 1,
        "jaccard_threshold": 0.8,
    }

    def _corpus(self):
        base = _words(40)
        near = base.replace("word20", "changed")
        far = _words(40, offset=100)
        return base, near, far

    def test_constructed_similarities(self):
        base, near, far = self._corpus()
        assert jaccard(shingle_set(base, 3), shingle_set(near, 3)) >= 0.8
        assert jaccard(shingle_set(base, 3), shingle_set(far, 3)) < 0.8

    def test_near_duplicate_dropped_smallest_id_kept(self, run, write_jsonl, tmp_path):
        base, near, far = self._corpus()
        path = write_jsonl(
            "in.jsonl", [{"text": base}, {"text": near}, {"text": far}]
        )
        log_path = tmp_path / "drops.jsonl"
        shards, report = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {
                    "name": "deduplication___minhash___lsh",
                    "args": dict(self.MINHASH_ARGS, drop_log=str(log_path)),
                },
            ]
        )
        docs = all_documents(shards)
        assert [d.id for d in docs] == [0, 2]
        assert report.stages[1].dropped_by_reason == {"near_duplicate": 1}

        (row,) = [json.loads(line) for line in read_lines(log_path)]
        assert row["dropped_id"] == 1
        assert row["kept_id"] == 0
        assert row["mode"] == "fuzzy"
        assert row["jaccard"] >= 0.8

    def test_below_threshold_pair_survives_verification(self, run, write_jsonl):
        # half-shared texts are near-certain LSH candidates at rows=1 but
        # fail Jaccard verification, so nothing may be dropped
        left = _words(12)
        right = _words(6) + " " + _words(6, offset=50)
        similarity = jaccard(shingle_set(left, 3), shingle_set(right, 3))
        assert 0.0 < similarity < 0.5
        path = write_jsonl("in.jsonl", [{"text": left}, {"text": right}])
        shards, report = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {
                    "name": "deduplication___minhash___lsh",
                    "args": dict(self.MINHASH_ARGS, jaccard_threshold=0.5),
                },
            ]
        )
        assert len(all_documents(shards)) == 2
        assert report.stages[1].dropped_by_reason == {}

    def test_cross_shard_candidates_verified(self, run, write_jsonl):
        base, near, far = self._corpus()
        fillers = [{"text": _words(10, offset=200 + 20 * i)} for i in range(4)]
        rows = [{"text": base}, *fillers[:2], {"text": near}, *fillers[2:], {"text": far}]
        path = write_jsonl("in.jsonl", rows)
        shards, report = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {"name": "deduplication___minhash___lsh", "args": self.MINHASH_ARGS},
            ],
            shard_size=2,
        )
        ids = [d.id for d in all_documents(shards)]
        # the near copy (record 3, shard 1) is gone; the base (id 0) stays
        assert 0 in ids
        assert (1 << 40) + 1 not in ids
        assert report.stages[1].dropped_by_reason == {"near_duplicate": 1}

    def test_identical_empty_texts_collapse(self, run, write_jsonl):
        path = write_jsonl("in.jsonl", [{"text": ""}, {"text": ""}, {"text": "full"}])
        shards, report = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {"name": "deduplication___minhash___lsh", "args": self.MINHASH_ARGS},
            ]
        )
        assert [d.id for d in all_documents(shards)] == [0, 2]
        assert report.stages[1].dropped_by_reason == {"near_duplicate": 1}

    def test_per_source_scope_limits_buckets(self, run, write_jsonl):
        base, near, _ = self._corpus()
        path = write_jsonl(
            "in.jsonl",
            [{"text": base, "source": "a"}, {"text": near, "source": "b"}],
        )
        shards, _ = run(
            [
                {"name": "data_ingestion___jsonl___load", "args": {"path": path}},
                {
                    "name": "deduplication___minhash___lsh",
                    "args": dict(self.MINHASH_ARGS, scope="per_source"),
                },
            ]
        )
        assert len(all_documents(shards)) == 2
