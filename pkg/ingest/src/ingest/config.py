"""Run configuration for the ingestion pipeline.

Everything model- or network-dependent lives here: where the archive and
the task merge map sit, which endpoints serve references, chat
completions, and embeddings, and the hyperparameters of the title
embedder.  The config is a JSON object loaded with strict key checking
so a typo in an endpoint name fails loudly instead of silently falling
back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from axiobench import InputError
from axiobench.util import read_json


@dataclass(frozen=True)
class TitleTrainConfig:
    """Hyperparameters of the subword title embedder.

    Defaults follow common fastText settings, except min_count which is
    1 so that words appearing in a single short title still get a
    learned vector instead of falling back to their character n-grams.
    """

    dim: int = 100
    min_count: int = 1
    min_n: int = 3
    max_n: int = 6
    window: int = 5
    epochs: int = 5
    negatives: int = 5
    lr: float = 0.05
    buckets: int = 1 << 16
    seed: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InputError("title trainer: dim must be >= 1")
        if self.min_count < 1:
            raise InputError("title trainer: min_count must be >= 1")
        if not 0 < self.min_n <= self.max_n:
            raise InputError("title trainer: need 0 < min_n <= max_n")
        if self.window < 1:
            raise InputError("title trainer: window must be >= 1")
        if self.epochs < 1:
            raise InputError("title trainer: epochs must be >= 1")
        if self.negatives < 0:
            raise InputError("title trainer: negatives must be >= 0")
        if self.lr <= 0:
            raise InputError("title trainer: lr must be positive")
        if self.buckets < 1:
            raise InputError("title trainer: buckets must be >= 1")


@dataclass(frozen=True)
class IngestConfig:
    """One pipeline run: sources, endpoints, and model settings.

    The chat model and abstract embedding model are recorded as plain
    identifiers; the pipeline does not insist on any particular vendor.
    An empty endpoint disables the corresponding network stage
    (build-corpus then emits a corpus without fetched references, and
    "hash-v1" embeds abstracts with the built-in deterministic encoder).
    """

    archive: str
    merge_map: str = ""
    refs_endpoint: str = ""
    refs_key: str = ""
    refs_interval: float = 1.0
    chat_endpoint: str = ""
    chat_model: str = "gpt-5-nano"
    chat_key: str = ""
    abstract_model: str = "hash-v1"
    abstract_dim: int = 256
    embed_endpoint: str = ""
    embed_key: str = ""
    retries: int = 3
    backoff: float = 2.0
    timeout: float = 30.0
    title: TitleTrainConfig = TitleTrainConfig()

    def __post_init__(self) -> None:
        if not self.archive:
            raise InputError("config: archive path must be set")
        if self.refs_interval < 0:
            raise InputError("config: refs_interval must be >= 0")
        if self.retries < 0:
            raise InputError("config: retries must be >= 0")
        if self.backoff < 0:
            raise InputError("config: backoff must be >= 0")
        if self.timeout <= 0:
            raise InputError("config: timeout must be positive")
        if self.abstract_dim < 1:
            raise InputError("config: abstract_dim must be >= 1")


def _from_mapping(cls: type, doc: Mapping[str, Any], context: str) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InputError(f"{context}: unknown keys {unknown}")
    return doc


def load_config(path: str | Path) -> IngestConfig:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a JSON object")
    _from_mapping(IngestConfig, doc, str(path))
    kwargs = dict(doc)
    title_doc = kwargs.pop("title", {})
    if not isinstance(title_doc, dict):
        raise InputError(f"{path}: 'title' must be a JSON object")
    _from_mapping(TitleTrainConfig, title_doc, f"{path}: title")
    try:
        title = TitleTrainConfig(**title_doc)
        return IngestConfig(title=title, **kwargs)
    except TypeError as exc:
        raise InputError(f"{path}: {exc}") from None
