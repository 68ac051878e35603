"""Encrypted store layout on disk and the server-side mutable view.

Layout:
    <store>/index.bin        length-prefixed records: 16-byte token,
                             4-byte LE blob length, blob
    <store>/docs/<filename>  one ciphertext file per document, under the
                             ORIGINAL plaintext filename (the deliberate
                             leakage surface)
"""

from __future__ import annotations

import struct
import threading
from pathlib import Path
from typing import Iterable

from .errors import StoreError
from .sse import (
    TOKEN_LENGTH,
    CiphertextDocument,
    DeletionToken,
    EncryptedIndex,
    IndexUpdate,
    LeakageRecord,
    OpKind,
)

INDEX_FILENAME = "index.bin"
DOCS_DIRNAME = "docs"

_LEN = struct.Struct("<I")


def docs_dir(store_dir: str | Path) -> Path:
    return Path(store_dir) / DOCS_DIRNAME


def _index_bytes(index: EncryptedIndex) -> bytes:
    chunks: list[bytes] = []
    for token in sorted(index.entries):
        blob = index.entries[token]
        chunks.append(token)
        chunks.append(_LEN.pack(len(blob)))
        chunks.append(blob)
    return b"".join(chunks)


def write_index(store_dir: str | Path, index: EncryptedIndex) -> None:
    (Path(store_dir) / INDEX_FILENAME).write_bytes(_index_bytes(index))


def read_index(store_dir: str | Path) -> EncryptedIndex:
    path = Path(store_dir) / INDEX_FILENAME
    if not path.is_file():
        raise StoreError(f"missing encrypted index at {path}")
    raw = path.read_bytes()
    entries: dict[bytes, bytes] = {}
    offset = 0
    while offset < len(raw):
        if offset + TOKEN_LENGTH + _LEN.size > len(raw):
            raise StoreError(f"truncated index record at offset {offset} in {path}")
        token = raw[offset : offset + TOKEN_LENGTH]
        offset += TOKEN_LENGTH
        (blob_len,) = _LEN.unpack_from(raw, offset)
        offset += _LEN.size
        if offset + blob_len > len(raw):
            raise StoreError(f"truncated posting blob at offset {offset} in {path}")
        entries[token] = raw[offset : offset + blob_len]
        offset += blob_len
    return EncryptedIndex(entries)


def write_store(
    store_dir: str | Path,
    index: EncryptedIndex,
    ciphertexts: Iterable[CiphertextDocument],
) -> None:
    """Lay out a fresh encrypted store (index.bin plus docs/)."""
    root = Path(store_dir)
    root.mkdir(parents=True, exist_ok=True)
    docs = docs_dir(root)
    docs.mkdir(parents=True, exist_ok=True)
    for cdoc in ciphertexts:
        target = docs / cdoc.filename
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(cdoc.blob)
    write_index(root, index)


class Store:
    """Server-side store: encrypted index in memory, ciphertexts on disk.

    Updates are serialized behind a lock (single writer); searches read the
    current index snapshot.
    """

    def __init__(self, store_dir: str | Path) -> None:
        self.root = Path(store_dir)
        self.docs_root = docs_dir(self.root)
        if not self.docs_root.is_dir():
            raise StoreError(f"missing ciphertext directory {self.docs_root}")
        self._index = read_index(self.root)
        self._lock = threading.Lock()
        self.leakage_log: list[LeakageRecord] = []

    @property
    def index(self) -> EncryptedIndex:
        return self._index

    def document_path(self, filename: str) -> Path:
        return self.docs_root / filename

    def list_documents(self) -> list[str]:
        return sorted(
            p.relative_to(self.docs_root).as_posix()
            for p in self.docs_root.rglob("*")
            if p.is_file()
        )

    def apply_updates(self, updates: Iterable[IndexUpdate]) -> LeakageRecord:
        """Install index-entry changes; leaks the number of entries touched."""
        updates = list(updates)
        with self._lock:
            entries = dict(self._index.entries)
            for update in updates:
                if update.blob is None:
                    entries.pop(update.token, None)
                else:
                    entries[update.token] = update.blob
            self._index = EncryptedIndex(entries)
            write_index(self.root, self._index)
        record = LeakageRecord(OpKind.UPDATE, len(updates))
        self.leakage_log.append(record)
        return record

    def add_document(self, cdoc: CiphertextDocument, updates: Iterable[IndexUpdate]) -> None:
        target = self.document_path(cdoc.filename)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(cdoc.blob)
        self.apply_updates(updates)

    def remove_document(self, deletion: DeletionToken) -> None:
        target = self.document_path(deletion.filename)
        if target.is_file():
            target.unlink()
        self.apply_updates(deletion.updates)
