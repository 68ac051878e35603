"""Plaintext corpus ingestion, keyword extraction, and the inverted index.

Both sides of the experiment consume this module: the data owner builds the
index it will encrypt, and the attacker loads the same structure (possibly
restricted to a known subset) as auxiliary knowledge.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .errors import CorpusError

logger = logging.getLogger(__name__)

# Maximal runs of Unicode alphanumerics; underscore is a boundary.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_MIN_TOKEN_LENGTH = 3

# Compact English stopword list; override via TokenizerConfig.
DEFAULT_STOPWORDS = frozenset(
    """
    the and for are but not you all any can had her was one our out day get
    has him his how man new now old see two way who boy did its let put say
    she too use that with have this will your from they know want been good
    much some time very when come here just like long make many more only
    over such than them well were what
    """.split()
)


@dataclass(frozen=True)
class TokenizerConfig:
    """Normalization rule for keyword extraction."""

    min_length: int = DEFAULT_MIN_TOKEN_LENGTH
    stopwords: frozenset[str] = DEFAULT_STOPWORDS


DEFAULT_TOKENIZER = TokenizerConfig()


def _validate_filename(name: str) -> None:
    if not name:
        raise CorpusError("document filename must be non-empty")
    parts = PurePosixPath(name).parts
    if name.startswith("/") or ".." in parts:
        raise CorpusError(f"document filename {name!r} contains path traversal segments")


@dataclass(frozen=True)
class Document:
    """One corpus file: relative filename plus raw body bytes."""

    filename: str
    body: bytes

    def __post_init__(self) -> None:
        _validate_filename(self.filename)


@dataclass(frozen=True)
class InvertedIndex:
    """Map from normalized keyword to the set of filenames containing it.

    Posting sets are never empty; rebuilding from the same corpus yields an
    identical structure (all serialization is canonically sorted).
    """

    postings: dict[str, frozenset[str]] = field(default_factory=dict)

    def keywords(self) -> list[str]:
        return sorted(self.postings)

    def documents(self) -> set[str]:
        out: set[str] = set()
        for files in self.postings.values():
            out |= files
        return out

    def size_of(self, keyword: str) -> int:
        return len(self.postings.get(keyword, frozenset()))

    def to_json(self) -> str:
        """Canonical serialization: sorted keys, sorted filename arrays."""
        payload = {w: sorted(files) for w, files in self.postings.items()}
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "InvertedIndex":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise CorpusError("index JSON must be an object of keyword -> [filenames]")
        postings: dict[str, frozenset[str]] = {}
        for keyword, files in raw.items():
            if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
                raise CorpusError(f"posting list for {keyword!r} must be a list of strings")
            if not files:
                raise CorpusError(f"posting list for {keyword!r} is empty")
            postings[keyword] = frozenset(files)
        return cls(postings)


def extract_keywords(doc: Document, tokenizer: TokenizerConfig = DEFAULT_TOKENIZER) -> set[str]:
    """Extract the deduplicated set of normalized keywords from a document body.

    Bytes are decoded permissively (invalid sequences dropped). A token
    survives if it meets the minimum length, contains at least one letter,
    and is not a stopword.
    """
    text = doc.body.decode("utf-8", errors="ignore").lower()
    keywords: set[str] = set()
    for token in _TOKEN_RE.findall(text):
        if len(token) < tokenizer.min_length:
            continue
        if not any(ch.isalpha() for ch in token):
            continue
        if token in tokenizer.stopwords:
            continue
        keywords.add(token)
    return keywords


def load_corpus(directory: str | Path) -> list[Document]:
    """Load every regular file under ``directory`` as a Document.

    Filenames are paths relative to ``directory`` (posix separators), and the
    returned list is sorted by filename so downstream builds are
    deterministic. Unreadable individual files are skipped with a warning;
    an unreadable directory is fatal.
    """
    root = Path(directory)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {root} does not exist or is not a directory")
    try:
        candidates = sorted(
            p for p in root.rglob("*") if not p.is_dir() and (p.is_file() or p.is_symlink())
        )
    except OSError as exc:
        raise CorpusError(f"cannot enumerate corpus directory {root}: {exc}") from exc

    documents: list[Document] = []
    for path in candidates:
        rel = path.relative_to(root).as_posix()
        try:
            body = path.read_bytes()
        except OSError as exc:
            logger.warning("skipping unreadable corpus file %s: %s", rel, exc)
            continue
        documents.append(Document(rel, body))
    return documents


def build_inverted_index(
    docs: list[Document], tokenizer: TokenizerConfig = DEFAULT_TOKENIZER
) -> InvertedIndex:
    """Build the keyword -> filenames map over a corpus.

    Duplicate filenames are fatal (the filename is the document identity).
    Keywords that match no document are simply absent: no empty postings.
    """
    seen: set[str] = set()
    duplicates: set[str] = set()
    for doc in docs:
        if doc.filename in seen:
            duplicates.add(doc.filename)
        seen.add(doc.filename)
    if duplicates:
        raise CorpusError(f"duplicate document filenames: {sorted(duplicates)}")

    accum: dict[str, set[str]] = {}
    for doc in docs:
        for keyword in extract_keywords(doc, tokenizer):
            accum.setdefault(keyword, set()).add(doc.filename)
    return InvertedIndex({w: frozenset(files) for w, files in accum.items()})


def write_index_json(index: InvertedIndex, path: str | Path) -> None:
    Path(path).write_text(index.to_json(), encoding="utf-8")


def read_index_json(path: str | Path) -> InvertedIndex:
    return InvertedIndex.from_json(Path(path).read_text(encoding="utf-8"))
