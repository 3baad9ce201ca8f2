"""Rephrase generation: prompt plumbing, retry outcomes, resume, and
the quality report."""

from __future__ import annotations

import pytest

from axiobench.bench import RunConfig, build_manifest, build_plan
from axiobench.corpus import KIND_REPHRASE, Corpus, TaskSpec
from fixdata import TASK_CG, TASK_OF, TASK_SPECS
from ingest.archive import load_merge_map, read_archive, select_papers
from ingest.config import IngestConfig
from ingest.embed import HashEncoder
from ingest.net import HttpError, JsonClient
from ingest.refs import attach_references
from ingest.rephrase import (
    REPHRASE_PROMPT,
    excerpt_for,
    generate_rephrases,
    request_rephrase,
)
from stubservers import RefsStub, StubHttpServer

FOCALS = {
    TASK_CG: ("cg-2024-08", "cg-2025-09"),
    TASK_OF: ("of-2024-08", "of-2025-09"),
}


@pytest.fixture(scope="module")
def prepared(archive_fixture):
    """A referenced corpus and a two-focal-per-task plan over it."""
    merge_map = load_merge_map(archive_fixture.merge_map_path)
    papers = select_papers(
        read_archive(archive_fixture.archive_path, merge_map), [TASK_CG, TASK_OF]
    )
    refs = RefsStub(archive_fixture.papers)
    try:
        client = JsonClient(refs.url, interval=0.0, retries=2, backoff=0.0, timeout=10.0)
        papers = attach_references(papers, FOCALS, client)
    finally:
        refs.close()
    corpus = Corpus(papers=tuple(papers))
    config = RunConfig(
        tasks=tuple(TaskSpec(**s) for s in TASK_SPECS),
        metrics=("yin",),
        checks=("Ax1", "Ax2"),
        focals_per_task=2,
        min_pool=10,
    )
    plan = build_plan(corpus, config, FOCALS)
    return corpus, plan


@pytest.fixture
def manifest(prepared):
    corpus, plan = prepared
    return build_manifest(corpus, plan, "corpus.jsonl", {"abstract-embed": "abs.npz"})


def _config(**overrides) -> IngestConfig:
    defaults = dict(archive="unused.jsonl", retries=1, backoff=0.0, chat_model="stub-model")
    defaults.update(overrides)
    return IngestConfig(**defaults)


def _chat_client(stub) -> JsonClient:
    return JsonClient(stub.url, retries=1, backoff=0.0, timeout=10.0)


def _rephrase_entries(manifest):
    return {v: e for v, e in manifest.registry.items() if e.kind == KIND_REPHRASE}


class TestExcerptFor:
    def test_title_becomes_its_own_sentence(self):
        assert excerpt_for("A title", "The abstract.") == "A title.\n\nThe abstract."

    def test_existing_terminator_is_kept(self):
        assert excerpt_for("Why bother?", "Body.") == "Why bother?\n\nBody."

    def test_either_part_may_be_missing(self):
        assert excerpt_for("Only a title", "") == "Only a title."
        assert excerpt_for("", "Only a body.") == "Only a body."


class TestRequestRephrase:
    def test_sends_the_verbatim_system_prompt(self, chat_stub):
        request_rephrase(_chat_client(chat_stub), "stub-model", "Some excerpt.")
        payload = chat_stub.requests[-1]
        assert payload["model"] == "stub-model"
        assert payload["messages"][0] == {"role": "system", "content": REPHRASE_PROMPT}
        assert payload["messages"][1] == {"role": "user", "content": "Some excerpt."}

    def test_malformed_response_is_an_http_error(self):
        server = StubHttpServer(lambda m, p, q, b: (200, {"bogus": 1}))
        try:
            with pytest.raises(HttpError, match="no message content"):
                request_rephrase(_chat_client(server), "stub-model", "x")
        finally:
            server.close()


class TestGenerateRephrases:
    def test_fills_every_blank_entry(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        encoder = HashEncoder(dim=64)
        before = _rephrase_entries(manifest)
        assert len(before) == 4
        assert all(not e.text for e in before.values())

        report = generate_rephrases(manifest, corpus, _config(), encoder.encode, _chat_client(chat_stub))

        after = _rephrase_entries(manifest)
        for vid, entry in after.items():
            base = corpus.get(entry.base_id)
            assert entry.text.strip()
            assert entry.text != base.abstract
        doc = report.to_doc()
        assert doc["total"] == doc["filled"] == 4
        assert doc["skipped_existing"] == 0
        assert doc["failed"] == []
        assert 0 < doc["means"]["rouge1"] < 1
        assert 0 < doc["means"]["cosine"] < 1
        assert {o["variant_id"] for o in doc["outcomes"]} == set(after)

    def test_filled_entries_are_not_redone(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        encoder = HashEncoder(dim=64)
        client = _chat_client(chat_stub)
        generate_rephrases(manifest, corpus, _config(), encoder.encode, client)
        calls = len(chat_stub.requests)

        report = generate_rephrases(manifest, corpus, _config(), encoder.encode, client)
        assert len(chat_stub.requests) == calls
        assert report.skipped_existing == 4
        assert report.outcomes == ()
        assert report.to_doc()["total"] == 4

    def test_echoing_model_leaves_entries_blank(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        chat_stub.mode = "echo"
        report = generate_rephrases(
            manifest, corpus, _config(), HashEncoder(dim=64).encode, _chat_client(chat_stub)
        )
        assert all(o.failed for o in report.outcomes)
        assert {o.reason for o in report.outcomes} == {"echo of the source"}
        assert {o.attempts for o in report.outcomes} == {2}  # retries + 1
        assert all(not e.text for e in _rephrase_entries(manifest).values())

    def test_empty_response_is_a_failure(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        chat_stub.mode = "empty"
        report = generate_rephrases(
            manifest, corpus, _config(), HashEncoder(dim=64).encode, _chat_client(chat_stub)
        )
        assert {o.reason for o in report.outcomes} == {"empty response"}

    def test_endpoint_failure_is_a_failure(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        chat_stub.mode = "fail"
        report = generate_rephrases(
            manifest, corpus, _config(), HashEncoder(dim=64).encode, _chat_client(chat_stub)
        )
        assert all(o.failed and o.reason.startswith("endpoint:") for o in report.outcomes)

    def test_transient_failure_succeeds_on_retry(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        chat_stub.fail_first = 1
        report = generate_rephrases(
            manifest, corpus, _config(), HashEncoder(dim=64).encode, _chat_client(chat_stub)
        )
        assert report.to_doc()["failed"] == []
        # the client retried inside the first request, so every outcome
        # still reports a single attempt
        assert {o.attempts for o in report.outcomes} == {1}

    def test_rerun_after_failure_fills_the_gaps(self, prepared, manifest, chat_stub):
        corpus, _ = prepared
        encoder = HashEncoder(dim=64)
        chat_stub.mode = "fail"
        generate_rephrases(manifest, corpus, _config(), encoder.encode, _chat_client(chat_stub))
        assert all(not e.text for e in _rephrase_entries(manifest).values())

        chat_stub.mode = "normal"
        report = generate_rephrases(
            manifest, corpus, _config(), encoder.encode, _chat_client(chat_stub)
        )
        assert report.skipped_existing == 0
        assert len(report.succeeded) == 4
        assert all(e.text for e in _rephrase_entries(manifest).values())

    def test_needs_an_endpoint_when_no_client_given(self, prepared, manifest):
        corpus, _ = prepared
        with pytest.raises(HttpError, match="no chat endpoint configured"):
            generate_rephrases(manifest, corpus, _config(), HashEncoder(dim=64).encode)
