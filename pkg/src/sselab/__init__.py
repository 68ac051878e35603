"""Searchable-symmetric-encryption leakage laboratory.

Builds an encrypted document store, serves searches that really touch the
filesystem, captures which ciphertext files each query opens, and runs
frequency-matching query-recovery attacks with and without that file-access
signal.
"""

from .attacks import AuxKnowledge, AttackResult, MatchStatus, QueryObservation, efma, fma, score
from .corpus import Document, InvertedIndex, build_inverted_index, extract_keywords, load_corpus
from .sse import (
    CiphertextDocument,
    KeyMaterial,
    LeakageRecord,
    OpKind,
    SseClient,
    decrypt_document,
    encrypt_document,
    encrypt_index,
    keygen,
    trapdoor,
)
from .trace import FileAccessEvent, ObservedFileSet, QueryTraceWindow, correlate

__version__ = "0.1.0"

__all__ = [
    "AuxKnowledge",
    "AttackResult",
    "MatchStatus",
    "QueryObservation",
    "efma",
    "fma",
    "score",
    "Document",
    "InvertedIndex",
    "build_inverted_index",
    "extract_keywords",
    "load_corpus",
    "CiphertextDocument",
    "KeyMaterial",
    "LeakageRecord",
    "OpKind",
    "SseClient",
    "decrypt_document",
    "encrypt_document",
    "encrypt_index",
    "keygen",
    "trapdoor",
    "FileAccessEvent",
    "ObservedFileSet",
    "QueryTraceWindow",
    "correlate",
    "__version__",
]
