"""The SSE scheme: keys, trapdoors, index and document encryption, updates.

Deliberately response-revealing: posting blobs are encrypted under material
derived from the search token itself, so index lookup hands the server the
matching filenames. Ciphertext files keep their original plaintext filenames.
Both choices are the leakage surface the attack side of this package studies.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
from dataclasses import dataclass
from enum import Enum

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .corpus import Document, InvertedIndex, TokenizerConfig, DEFAULT_TOKENIZER, extract_keywords
from .errors import (
    DuplicateDocumentError,
    IntegrityError,
    ProtocolError,
    TokenCollisionError,
    UnknownDocumentError,
)

TOKEN_LENGTH = 16
KEY_LENGTH = 32
NONCE_LENGTH = 12
MAX_SEED = 2**64

_KEYGEN_SALT = b"sselab/keygen/v1"

# SearchToken is an opaque 16-byte PRF output; plain bytes keep it hashable
# and directly usable as a dict key and on the wire.
SearchToken = bytes


class OpKind(str, Enum):
    ADD = "add"
    UPDATE = "update"
    DELETE = "delete"
    SEARCH = "search"


@dataclass(frozen=True)
class LeakageRecord:
    """What one operation reveals: its kind and a single count."""

    op_kind: OpKind
    magnitude: int

    def __post_init__(self) -> None:
        if self.magnitude < 0:
            raise ValueError("leakage magnitude must be >= 0")


@dataclass(frozen=True)
class KeyMaterial:
    """Secrets derived deterministically from a 64-bit experiment seed."""

    token_key: bytes
    enc_key: bytes
    seed: int


@dataclass(frozen=True)
class CiphertextDocument:
    """AEAD blob of the body; the filename is left unchanged on purpose."""

    filename: str
    blob: bytes


@dataclass(frozen=True)
class EncryptedIndex:
    """Token -> encrypted posting blob. No plaintext keywords stored."""

    entries: dict[SearchToken, bytes]

    def lookup(self, token: SearchToken) -> bytes | None:
        return self.entries.get(token)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class IndexUpdate:
    """One encrypted-index entry change; blob=None removes the entry."""

    token: SearchToken
    blob: bytes | None


@dataclass(frozen=True)
class DeletionToken:
    """Opaque instruction set the client ships to remove one document."""

    filename: str
    updates: tuple[IndexUpdate, ...]


def keygen(seed: int) -> KeyMaterial:
    """Derive distinct token and encryption keys from a 64-bit seed."""
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ikm = seed.to_bytes(8, "big")

    def derive(info: bytes) -> bytes:
        kdf = HKDF(algorithm=hashes.SHA256(), length=KEY_LENGTH, salt=_KEYGEN_SALT, info=info)
        return kdf.derive(ikm)

    return KeyMaterial(token_key=derive(b"token-prf"), enc_key=derive(b"document-aead"), seed=seed)


def trapdoor(keys: KeyMaterial, keyword: str) -> SearchToken:
    """Deterministic 16-byte search token for a normalized keyword."""
    mac = hmac.new(keys.token_key, keyword.encode("utf-8"), hashlib.sha256)
    return mac.digest()[:TOKEN_LENGTH]


def require_token(token: bytes) -> SearchToken:
    if not isinstance(token, (bytes, bytearray)) or len(token) != TOKEN_LENGTH:
        raise ProtocolError(f"search token must be {TOKEN_LENGTH} bytes")
    return bytes(token)


def _posting_key(token: SearchToken) -> bytes:
    return hmac.new(token, b"posting-key", hashlib.sha256).digest()


def _posting_nonce(token: SearchToken, payload: bytes) -> bytes:
    # Deterministic nonce: each token encrypts exactly one payload per index
    # build, and determinism keeps index.bin byte-identical across runs.
    return hmac.new(token, b"posting-nonce" + payload, hashlib.sha256).digest()[:NONCE_LENGTH]


def encode_posting_blob(token: SearchToken, filenames: set[str] | frozenset[str]) -> bytes:
    payload = json.dumps(sorted(filenames), separators=(",", ":")).encode("utf-8")
    nonce = _posting_nonce(token, payload)
    return nonce + AESGCM(_posting_key(token)).encrypt(nonce, payload, token)


def decode_posting_blob(token: SearchToken, blob: bytes) -> list[str]:
    """Recover the sorted filename list; the token itself is the key material."""
    if len(blob) < NONCE_LENGTH:
        raise IntegrityError("posting blob too short")
    nonce, ciphertext = blob[:NONCE_LENGTH], blob[NONCE_LENGTH:]
    try:
        payload = AESGCM(_posting_key(token)).decrypt(nonce, ciphertext, token)
    except InvalidTag as exc:
        raise IntegrityError("posting blob failed authentication") from exc
    names = json.loads(payload.decode("utf-8"))
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise IntegrityError("posting blob payload is not a filename list")
    return names


def encrypt_index(keys: KeyMaterial, index: InvertedIndex) -> EncryptedIndex:
    """Encrypt every posting list under its keyword's token."""
    entries: dict[SearchToken, bytes] = {}
    token_to_keyword: dict[SearchToken, str] = {}
    for keyword in sorted(index.postings):
        token = trapdoor(keys, keyword)
        if token in entries:
            raise TokenCollisionError(
                f"token collision between keywords {token_to_keyword[token]!r} and {keyword!r}"
            )
        entries[token] = encode_posting_blob(token, index.postings[keyword])
        token_to_keyword[token] = keyword
    return EncryptedIndex(entries)


def encrypt_document(keys: KeyMaterial, doc: Document) -> CiphertextDocument:
    """AES-256-GCM with a fresh random nonce; the filename is authenticated."""
    nonce = os.urandom(NONCE_LENGTH)
    ciphertext = AESGCM(keys.enc_key).encrypt(nonce, doc.body, doc.filename.encode("utf-8"))
    return CiphertextDocument(doc.filename, nonce + ciphertext)


def decrypt_document(keys: KeyMaterial, cdoc: CiphertextDocument) -> Document:
    if len(cdoc.blob) < NONCE_LENGTH:
        raise IntegrityError(f"ciphertext blob for {cdoc.filename!r} too short")
    nonce, ciphertext = cdoc.blob[:NONCE_LENGTH], cdoc.blob[NONCE_LENGTH:]
    try:
        body = AESGCM(keys.enc_key).decrypt(nonce, ciphertext, cdoc.filename.encode("utf-8"))
    except InvalidTag as exc:
        raise IntegrityError(f"ciphertext for {cdoc.filename!r} failed authentication") from exc
    return Document(cdoc.filename, body)


class SseClient:
    """Data-owner state: secret keys plus the local plaintext inverted index.

    add/delete are implemented just far enough to emit the formal leakage
    counts and produce the encrypted-index updates a server would apply;
    forward privacy is explicitly out of scope.
    """

    def __init__(
        self,
        keys: KeyMaterial,
        tokenizer: TokenizerConfig = DEFAULT_TOKENIZER,
        index: InvertedIndex | None = None,
        stored: set[str] | None = None,
    ) -> None:
        self.keys = keys
        self.tokenizer = tokenizer
        self._postings: dict[str, set[str]] = (
            {w: set(files) for w, files in index.postings.items()} if index else {}
        )
        if stored is not None:
            self._stored = set(stored)
        else:
            self._stored = set()
            for files in self._postings.values():
                self._stored |= files

    @property
    def stored_filenames(self) -> frozenset[str]:
        return frozenset(self._stored)

    def current_index(self) -> InvertedIndex:
        return InvertedIndex({w: frozenset(files) for w, files in self._postings.items()})

    def trapdoor(self, keyword: str) -> SearchToken:
        return trapdoor(self.keys, keyword)

    def add_document(
        self, doc: Document
    ) -> tuple[CiphertextDocument, list[IndexUpdate], LeakageRecord]:
        """Encrypt a new document and compute the index-entry updates.

        Leaks the number of distinct keywords in the document.
        """
        if doc.filename in self._stored:
            raise DuplicateDocumentError(f"document {doc.filename!r} already stored")
        keywords = extract_keywords(doc, self.tokenizer)
        updates: list[IndexUpdate] = []
        for keyword in sorted(keywords):
            files = self._postings.setdefault(keyword, set())
            files.add(doc.filename)
            token = trapdoor(self.keys, keyword)
            updates.append(IndexUpdate(token, encode_posting_blob(token, files)))
        self._stored.add(doc.filename)
        record = LeakageRecord(OpKind.ADD, len(keywords))
        return encrypt_document(self.keys, doc), updates, record

    def delete_document(self, filename: str) -> tuple[DeletionToken, LeakageRecord]:
        """Produce the deletion token for a stored document.

        Leaks the number of index entries removed (one per keyword whose
        posting list contained the file).
        """
        if filename not in self._stored:
            raise UnknownDocumentError(f"document {filename!r} is not stored")
        updates: list[IndexUpdate] = []
        affected = sorted(w for w, files in self._postings.items() if filename in files)
        for keyword in affected:
            files = self._postings[keyword]
            files.discard(filename)
            token = trapdoor(self.keys, keyword)
            if files:
                updates.append(IndexUpdate(token, encode_posting_blob(token, files)))
            else:
                del self._postings[keyword]
                updates.append(IndexUpdate(token, None))
        self._stored.discard(filename)
        record = LeakageRecord(OpKind.DELETE, len(affected))
        return DeletionToken(filename, tuple(updates)), record
