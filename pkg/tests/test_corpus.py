"""Tests for the FFI corpus generator.

Covers:
- gen_corpus size and expected-verdict split, at most 60 instructions per case
- feasibility matrix (heap pairs, stack variants, no global deallocation)
- deterministic output
- write_corpus / load_corpus manifest round trip
"""

import json
from collections import Counter

from safeir.harness import Invalidation, Site, gen_corpus, load_corpus, write_corpus
from safeir.harness.corpus import MANIFEST_NAME
from safeir.runtime import Verdict


class TestGenCorpus:

    def test_size_and_split(self, corpus):
        assert len(corpus) == 45
        verdicts = Counter(case.expected for case in corpus)
        assert verdicts[Verdict.VIOLATION] == 35
        assert verdicts[Verdict.CLEAN_EXIT] == 10

    def test_ids_are_unique(self, corpus):
        ids = [case.id for case in corpus]
        assert len(ids) == len(set(ids))

    def test_invalidation_counts(self, corpus):
        counts = Counter(case.invalidation for case in corpus)
        assert counts[Invalidation.NONE] == 10
        assert counts[Invalidation.ARITHMETIC_OOB] == 10
        assert counts[Invalidation.CRAFTED_PTR] == 10
        assert counts[Invalidation.DEALLOC] == 15

    def test_benign_cases_are_clean(self, corpus):
        for case in corpus:
            assert (case.invalidation is Invalidation.NONE) == (
                case.expected is Verdict.CLEAN_EXIT
            ), case.id

    def test_dealloc_matrix(self, corpus):
        dealloc = [case for case in corpus if case.invalidation is Invalidation.DEALLOC]
        pairs = Counter((case.alloc_site, case.dealloc_site) for case in dealloc)
        heap = (Site.C_HEAP, Site.RUST_HEAP)
        for alloc in heap:
            for free in heap:
                assert pairs[(alloc, free)] == 3
        assert pairs[(Site.RUST_STACK, Site.RUST_STACK)] == 2
        assert pairs[(Site.C_STACK, Site.C_STACK)] == 1
        assert not any(case.alloc_site is Site.GLOBAL for case in dealloc)

    def test_free_during_scope_cases(self, corpus):
        during = [case for case in corpus if case.free_during_scope]
        assert len(during) == 8
        assert all(case.alloc_site in (Site.C_HEAP, Site.RUST_HEAP) for case in during)
        assert all(case.permutation > 0 for case in during)

    def test_invalidation_before_cast_cases(self, corpus):
        before = [case for case in corpus if case.invalidation_before_cast]
        assert len(before) == 16
        assert all(case.expected is Verdict.VIOLATION for case in before)

    def test_programs_have_main(self, corpus):
        for case in corpus:
            main = case.program.function("main")
            assert main is not None and not main.is_declaration, case.id

    def test_cases_are_small(self, corpus):
        for case in corpus:
            assert case.program.instruction_count() <= 60, case.id

    def test_deterministic(self, corpus):
        again = gen_corpus()
        assert [c.id for c in again] == [c.id for c in corpus]
        assert [c.text for c in again] == [c.text for c in corpus]


class TestCorpusFiles:

    def test_write_and_load(self, corpus, tmp_path):
        manifest = write_corpus(corpus, tmp_path / "corpus")
        assert manifest.name == MANIFEST_NAME
        assert len(list((tmp_path / "corpus").glob("*.sir"))) == 45

        loaded = load_corpus(tmp_path / "corpus")
        assert [c.to_dict() for c in loaded] == [c.to_dict() for c in corpus]
        assert [c.program for c in loaded] == [c.program for c in corpus]

    def test_manifest_contents(self, corpus, tmp_path):
        manifest = write_corpus(corpus, tmp_path)
        entries = json.loads(manifest.read_text())["cases"]
        assert entries[0]["id"] == corpus[0].id
        assert {"alloc_site", "expected", "free_during_scope"} <= set(entries[0])
