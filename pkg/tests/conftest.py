from __future__ import annotations

import random
from pathlib import Path

import pytest

from sselab import corpus, experiment, store


def write_corpus(directory: Path, files: dict[str, str]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        target = directory / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    return directory


# The worked inverted-index example used throughout: "invoice" appears in
# doc1/doc3/doc7, "contract" in doc2/doc4.
PAPER_FILES = {
    "doc1": "invoice for services",
    "doc2": "contract attached",
    "doc3": "second invoice copy",
    "doc4": "signed contract scan",
    "doc5": "unrelated note about lunch",
    "doc6": "meeting agenda items",
    "doc7": "final invoice reminder",
}


@pytest.fixture
def paper_corpus(tmp_path: Path) -> Path:
    return write_corpus(tmp_path / "corpus", PAPER_FILES)


@pytest.fixture
def paper_docs(paper_corpus: Path) -> list[corpus.Document]:
    return corpus.load_corpus(paper_corpus)


@pytest.fixture
def paper_index(paper_docs: list[corpus.Document]) -> corpus.InvertedIndex:
    return corpus.build_inverted_index(paper_docs)


def random_corpus_files(rng: random.Random, n_docs: int, vocab_size: int) -> dict[str, str]:
    """Random small corpus: each doc holds a random subset of a synthetic vocabulary."""
    vocab = [f"word{i:02d}" for i in range(vocab_size)]
    files = {}
    for j in range(n_docs):
        count = rng.randint(0, min(vocab_size, 8))
        words = rng.sample(vocab, count)
        files[f"doc{j:03d}.txt"] = " ".join(words)
    return files


@pytest.fixture
def built_store(paper_corpus: Path, tmp_path: Path):
    """Encrypted store over the worked-example corpus plus its ground truth."""
    result = experiment.ingest(paper_corpus, seed=42, out_dir=tmp_path / "out")
    return result


@pytest.fixture
def loaded_store(built_store) -> store.Store:
    return store.Store(built_store.store_dir)
