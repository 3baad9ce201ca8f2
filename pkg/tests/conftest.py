"""Shared fixtures: a small synthetic dataset reused by the pipeline tests."""

from __future__ import annotations

import pytest

from axiobench.corpus import Corpus, TaskSpec
from axiobench.synth import build_dataset, generate

from synthcase import SMALL_CFG, SMALL_CHECKS, SMALL_METRICS, make_paper


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """Generated dataset on disk plus the paths build_dataset reports."""
    out = tmp_path_factory.mktemp("small-synth")
    paths = build_dataset(SMALL_CFG, out, metrics=SMALL_METRICS, checks=SMALL_CHECKS)
    return {"dir": out, **paths}


@pytest.fixture(scope="session")
def small_data():
    """The same small dataset kept in memory (corpus, focals, vectors)."""
    return generate(SMALL_CFG)


@pytest.fixture
def hand_corpus():
    """Ten papers over two tasks with controlled years and references."""
    papers = [
        make_paper("a1", task="t1", year=2010),
        make_paper("a2", task="t1", year=2012, refs=("a1",)),
        make_paper("a3", task="t1", year=2014, refs=("a1", "a2")),
        make_paper("a4", task="t1", year=2016, refs=("a2", "b1")),
        make_paper("a5", task="t1", year=2016, refs=("a3",)),
        make_paper("a6", task="t1", year=2018, refs=("a4", "a5", "b2")),
        make_paper("b1", task="t2", year=2011),
        make_paper("b2", task="t2", year=2013, refs=("b1",)),
        make_paper("b3", task="t2", year=2015, refs=("b1", "b2")),
        make_paper("r1", task="t1", year=2012, ref_only=True),
    ]
    return Corpus(papers=tuple(papers))


@pytest.fixture
def hand_specs():
    return {
        "t1": TaskSpec(task="t1", domain="d1", distant_task="t2", distant_domain="d2"),
        "t2": TaskSpec(task="t2", domain="d2", distant_task="t1", distant_domain="d1"),
    }
