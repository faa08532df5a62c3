"""
Shared fixtures: tiny models and toy corpora.
"""
from pathlib import Path

import pytest
import torch

from app.schemas.corpus import Corpus, Origin, TaggedSentencePair
from app.schemas.model import ModelConfig
from app.training import init_model


def tiny_config(**overrides) -> ModelConfig:
    values = dict(
        source_vocab_size=20, target_vocab_size=18, d_model=32, layers=2, heads=4, ffn_dim=64,
        dropout=0.0, label_smoothing=0.0, seed=1,
    )
    values.update(overrides)
    return ModelConfig(**values)


def write_text(path: Path, lines) -> Path:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def toy_corpus(n: int = 6, origin: Origin = Origin.CLEAN_PARALLEL, source_lang: str = "fr",
               target_lang: str = "en") -> Corpus:
    pairs = tuple(
        TaggedSentencePair((f"s{i}", f"w{i % 3}"), (f"t{i}", f"v{i % 2}"), None, origin)
        for i in range(n)
    )
    return Corpus(pairs, source_lang, target_lang)


@pytest.fixture
def config() -> ModelConfig:
    return tiny_config()


@pytest.fixture
def model(config):
    return init_model(config)


@pytest.fixture(autouse=True)
def single_thread():
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    yield
    torch.set_num_threads(threads)
