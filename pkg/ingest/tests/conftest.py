"""Shared fixtures for the ingestion tests: the synthetic archive on
disk and one service double of each kind."""

from __future__ import annotations

import pytest

from fixdata import build_archive
from stubservers import ChatStub, RefsStub


@pytest.fixture(scope="session")
def archive_fixture(tmp_path_factory):
    return build_archive(tmp_path_factory.mktemp("fixture-archive"))


@pytest.fixture
def refs_stub(archive_fixture):
    stub = RefsStub(archive_fixture.papers)
    yield stub
    stub.close()


@pytest.fixture
def chat_stub():
    stub = ChatStub()
    yield stub
    stub.close()
