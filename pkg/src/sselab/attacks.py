"""Frequency Matching Attack and its file-access-enhanced variant.

FMA matches observed result sizes against the size distribution of an
auxiliary plaintext index; ties stay unresolved. The enhanced attack then
compares the exact file set each query touched against the auxiliary posting
sets, which breaks ties whenever posting sets differ.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import InvertedIndex
from .errors import ConfigError
from .sse import SearchToken


class MatchStatus(str, Enum):
    MATCHED_UNIQUE_FREQUENCY = "matched_unique_frequency"
    MATCHED_FILE_SET = "matched_file_set"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class AuxKnowledge:
    """The attacker's (possibly partial) plaintext index.

    ``known_docs`` is the document subset the attacker has seen; when absent
    it defaults to the union of the posting sets (equivalent at full
    coverage). Observed file sets are restricted to it before comparison.
    """

    plain_index: dict[str, frozenset[str]]
    coverage: float = 1.0
    known_docs: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.coverage <= 1.0:
            raise ConfigError(f"attacker coverage must be in (0, 1], got {self.coverage}")
        for keyword, files in self.plain_index.items():
            if not files:
                raise ConfigError(f"auxiliary posting set for {keyword!r} is empty")

    def known_document_set(self) -> frozenset[str]:
        if self.known_docs is not None:
            return self.known_docs
        union: set[str] = set()
        for files in self.plain_index.values():
            union |= files
        return frozenset(union)


@dataclass(frozen=True)
class QueryObservation:
    """Attacker's view of one query."""

    token: SearchToken
    result_size: int
    file_set: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.file_set is not None and len(self.file_set) != self.result_size:
            raise ValueError(
                f"observation inconsistent: result_size {self.result_size} "
                f"but {len(self.file_set)} observed files"
            )


@dataclass(frozen=True)
class TokenGuess:
    keyword: str | None
    status: MatchStatus


@dataclass
class AttackResult:
    """Recovered token -> keyword mapping; accuracy is filled in by scoring."""

    mapping: dict[SearchToken, TokenGuess]
    accuracy: float | None = None

    def counts(self) -> Counter:
        return Counter(guess.status for guess in self.mapping.values())


def build_frequency_profile(aux: AuxKnowledge) -> dict[int, frozenset[str]]:
    """Group auxiliary keywords by their posting-set size."""
    by_size: dict[int, set[str]] = {}
    for keyword, files in aux.plain_index.items():
        by_size.setdefault(len(files), set()).add(keyword)
    return {size: frozenset(words) for size, words in by_size.items()}


def _observed_tokens(
    observations: Sequence[QueryObservation],
) -> tuple[dict[SearchToken, int], dict[SearchToken, frozenset[str] | None]]:
    """Collapse repeated queries of the same token; sizes must agree."""
    sizes: dict[SearchToken, int] = {}
    file_sets: dict[SearchToken, frozenset[str] | None] = {}
    for obs in observations:
        if obs.token in sizes and sizes[obs.token] != obs.result_size:
            raise ValueError(
                f"token {obs.token.hex()} observed with result sizes "
                f"{sizes[obs.token]} and {obs.result_size}"
            )
        sizes[obs.token] = obs.result_size
        if obs.file_set is not None:
            previous = file_sets.get(obs.token)
            if previous is not None and previous != obs.file_set:
                raise ValueError(f"token {obs.token.hex()} observed with differing file sets")
            file_sets[obs.token] = obs.file_set
        else:
            file_sets.setdefault(obs.token, None)
    return sizes, file_sets


def fma(observations: Sequence[QueryObservation], aux: AuxKnowledge) -> AttackResult:
    """Baseline attack: match on result size alone.

    A token is matched only when its result size names exactly one auxiliary
    keyword AND no other observed token shares that size; any ambiguity in
    either direction leaves it unresolved.
    """
    profile = build_frequency_profile(aux)
    sizes, _ = _observed_tokens(observations)
    tokens_per_size = Counter(sizes.values())
    mapping: dict[SearchToken, TokenGuess] = {}
    for token, size in sizes.items():
        candidates = profile.get(size, frozenset())
        if len(candidates) == 1 and tokens_per_size[size] == 1:
            mapping[token] = TokenGuess(next(iter(candidates)), MatchStatus.MATCHED_UNIQUE_FREQUENCY)
        else:
            mapping[token] = TokenGuess(None, MatchStatus.UNRESOLVED)
    return AttackResult(mapping)


def efma(observations: Sequence[QueryObservation], aux: AuxKnowledge) -> AttackResult:
    """Enhanced attack: resolve frequency ties by exact file-set equality.

    Stage 1 runs the baseline. Stage 2 takes each still-unresolved token
    with an observed file set, restricts that set to the attacker's known
    documents, and assigns the keyword whose auxiliary posting set equals it
    exactly. Tokens whose restricted set matches zero or several keywords
    stay unresolved; tokens without a file set keep their baseline status.
    """
    result = fma(observations, aux)
    _, file_sets = _observed_tokens(observations)
    known = aux.known_document_set()
    # Invert aux postings once; keywords sharing a posting set can never be
    # told apart by this rule.
    by_posting: dict[frozenset[str], list[str]] = {}
    for keyword, files in aux.plain_index.items():
        by_posting.setdefault(files, []).append(keyword)
    for token, guess in result.mapping.items():
        if guess.status is not MatchStatus.UNRESOLVED:
            continue
        observed = file_sets.get(token)
        if observed is None:
            continue
        restricted = frozenset(observed & known)
        keywords = by_posting.get(restricted, [])
        if len(keywords) == 1:
            result.mapping[token] = TokenGuess(keywords[0], MatchStatus.MATCHED_FILE_SET)
    return result


def score(result: AttackResult, ground_truth: Mapping[SearchToken, str]) -> float:
    """Exact-match fraction over all observed tokens; unresolved counts wrong."""
    missing = [t for t in result.mapping if t not in ground_truth]
    if missing:
        raise ValueError(f"ground truth missing for {len(missing)} observed token(s)")
    if not result.mapping:
        warnings.warn("scoring an empty observation list: vacuously 1.0", stacklevel=2)
        return 1.0
    correct = sum(
        1
        for token, guess in result.mapping.items()
        if guess.keyword is not None and guess.keyword == ground_truth[token]
    )
    return correct / len(result.mapping)


def aux_from_index(
    index: InvertedIndex,
    coverage: float = 1.0,
    known_docs: Iterable[str] | None = None,
) -> AuxKnowledge:
    """Build attacker knowledge from a plaintext index.

    With ``known_docs`` given, posting sets are restricted to those documents
    (keywords left with no known document disappear from the profile).
    """
    if known_docs is None:
        return AuxKnowledge(
            plain_index=dict(index.postings),
            coverage=coverage,
            known_docs=frozenset(index.documents()),
        )
    known = frozenset(known_docs)
    restricted = {
        w: files & known for w, files in index.postings.items() if files & known
    }
    return AuxKnowledge(plain_index=restricted, coverage=coverage, known_docs=known)


def write_observations(observations: Sequence[QueryObservation], path: str | Path) -> None:
    rows = []
    for obs in observations:
        row: dict[str, object] = {"token": obs.token.hex(), "result_size": obs.result_size}
        if obs.file_set is not None:
            row["files"] = sorted(obs.file_set)
        rows.append(row)
    Path(path).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_observations(path: str | Path) -> list[QueryObservation]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    observations = []
    for row in rows:
        files = row.get("files")
        observations.append(
            QueryObservation(
                token=bytes.fromhex(row["token"]),
                result_size=row["result_size"],
                file_set=frozenset(files) if files is not None else None,
            )
        )
    return observations


def write_attack_result(
    result: AttackResult,
    path: str | Path,
    ground_truth: Mapping[SearchToken, str] | None = None,
) -> None:
    """Persist per-token outcomes; correctness flags need ground truth."""
    tokens = []
    for token, guess in result.mapping.items():
        correct = None
        if ground_truth is not None and token in ground_truth:
            correct = guess.keyword == ground_truth[token]
        tokens.append(
            {
                "token": token.hex(),
                "guessed_keyword": guess.keyword,
                "status": guess.status.value,
                "correct": correct,
            }
        )
    payload = {"accuracy": result.accuracy, "tokens": tokens}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
