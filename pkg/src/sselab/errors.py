"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2,
ProviderUnavailableError -> 4, any other SselabError -> 3.
"""


class SselabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SselabError):
    """Invalid configuration or infeasible parameters."""


class CorpusError(SselabError):
    """Corpus ingestion failure (unreadable directory, duplicate filenames)."""


class IntegrityError(SselabError):
    """Authenticated decryption failed: wrong key or tampered ciphertext."""


class TokenCollisionError(SselabError):
    """Two distinct keywords produced the same search token."""


class DuplicateDocumentError(SselabError):
    """Attempt to add a document whose filename is already stored."""


class UnknownDocumentError(SselabError):
    """Attempt to delete a document that is not stored."""


class StoreError(SselabError):
    """Encrypted store layout is missing or corrupt."""


class ProtocolError(SselabError):
    """Malformed wire frame or payload."""


class ServerError(SselabError):
    """The server answered with an error frame."""


class TraceError(SselabError):
    """Trace capture or correlation failure (e.g. non-correlatable feed)."""


class ProviderUnavailableError(SselabError):
    """The requested trace provider cannot run in this environment."""
