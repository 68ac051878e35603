"""End-to-end experiment orchestration: ingest, serve, query, trace, attack.

Reproduces the query-recovery experiment at desk scale: encrypt a corpus,
run every workload keyword through the live server while capturing file
accesses, then score the baseline and enhanced attacks against ground truth.
"""

from __future__ import annotations

import csv
import json
import logging
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import attacks, corpus, sse, store, trace
from .errors import ConfigError, ProviderUnavailableError, TraceError
from .server import CspServer, SearchClient

logger = logging.getLogger(__name__)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROVIDERS = ("simulated", "syscall")

STORE_DIRNAME = "store"
PLAIN_INDEX_FILENAME = "plain_index.json"
MARKERS_FILENAME = "markers.log"
TRACE_DIRNAME = "trace"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
RUNTIME_JSON = "runtime.json"
OBSERVATIONS_FILENAME = "observations.json"


@dataclass
class ExperimentConfig:
    corpus_dir: Path
    output_dir: Path
    seed: int
    query_keywords: list[str]
    provider: str = "simulated"
    attacker_coverage: float = 1.0
    endpoint: str = "tcp:127.0.0.1:0"
    probe_feed: Path | None = None

    def __post_init__(self) -> None:
        self.corpus_dir = Path(self.corpus_dir)
        self.output_dir = Path(self.output_dir)
        if self.probe_feed is not None:
            self.probe_feed = Path(self.probe_feed)
        if not 0 <= self.seed < sse.MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.provider not in PROVIDERS:
            raise ConfigError(f"provider must be one of {PROVIDERS}, got {self.provider!r}")
        if not 0.0 < self.attacker_coverage <= 1.0:
            raise ConfigError(
                f"attacker_coverage must be in (0, 1], got {self.attacker_coverage}"
            )
        if not self.query_keywords:
            raise ConfigError("query_keywords must not be empty")


def load_config_file(path: str | Path) -> dict:
    try:
        with Path(path).open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc


@dataclass
class IngestResult:
    documents: list[corpus.Document]
    index: corpus.InvertedIndex
    keys: sse.KeyMaterial
    store_dir: Path


def ingest(corpus_dir: str | Path, seed: int, out_dir: str | Path) -> IngestResult:
    """Build the encrypted store and the plaintext index dump for a corpus."""
    documents = corpus.load_corpus(corpus_dir)
    if not documents:
        raise ConfigError(f"empty corpus: no readable files under {corpus_dir}")
    index = corpus.build_inverted_index(documents)
    keys = sse.keygen(seed)
    encrypted_index = sse.encrypt_index(keys, index)
    ciphertexts = [sse.encrypt_document(keys, doc) for doc in documents]

    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    store_dir = out_root / STORE_DIRNAME
    store.write_store(store_dir, encrypted_index, ciphertexts)
    corpus.write_index_json(index, out_root / PLAIN_INDEX_FILENAME)
    return IngestResult(documents, index, keys, store_dir)


def sample_known_documents(documents: list[str], coverage: float, seed: int) -> frozenset[str]:
    """Seeded subsample of the corpus for partial attacker knowledge."""
    ordered = sorted(documents)
    if coverage >= 1.0:
        return frozenset(ordered)
    count = max(1, round(coverage * len(ordered)))
    rng = random.Random(seed ^ 0x5EED_C0FF)
    return frozenset(rng.sample(ordered, count))


@dataclass
class TokenOutcome:
    label: str
    token_hex: str
    true_keyword: str
    result_size: int
    fma_guess: str | None
    fma_status: str
    fma_correct: bool
    efma_guess: str | None
    efma_status: str
    efma_correct: bool


@dataclass
class ExperimentReport:
    seed: int
    provider: str
    attacker_coverage: float
    n_documents: int
    n_keywords: int
    query_keywords: list[str]
    fma_accuracy: float
    efma_accuracy: float
    outcomes: list[TokenOutcome]
    outcome_counts: dict[str, dict[str, int]]
    leakage_summary: dict[str, dict[str, int]]
    trace_noise_events: int
    fidelity_ok: bool
    provider_equivalence: bool | None
    runtime: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        # runtime is deliberately absent: report bytes must be reproducible.
        return {
            "config": {
                "seed": self.seed,
                "provider": self.provider,
                "attacker_coverage": self.attacker_coverage,
                "query_keywords": self.query_keywords,
            },
            "corpus": {"n_documents": self.n_documents, "n_keywords": self.n_keywords},
            "accuracy": {"fma": self.fma_accuracy, "efma": self.efma_accuracy},
            "outcome_counts": self.outcome_counts,
            "tokens": [
                {
                    "label": o.label,
                    "token": o.token_hex,
                    "true_keyword": o.true_keyword,
                    "result_size": o.result_size,
                    "fma": {"guess": o.fma_guess, "status": o.fma_status, "correct": o.fma_correct},
                    "efma": {
                        "guess": o.efma_guess,
                        "status": o.efma_status,
                        "correct": o.efma_correct,
                    },
                }
                for o in self.outcomes
            ],
            "leakage_summary": self.leakage_summary,
            "trace": {
                "noise_events": self.trace_noise_events,
                "fidelity_ok": self.fidelity_ok,
                "provider_equivalence": self.provider_equivalence,
            },
        }

    def write(self, out_dir: str | Path) -> None:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        (root / REPORT_JSON).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        with (root / REPORT_CSV).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "label",
                    "token",
                    "true_keyword",
                    "result_size",
                    "fma_guess",
                    "fma_status",
                    "fma_correct",
                    "efma_guess",
                    "efma_status",
                    "efma_correct",
                ]
            )
            for o in self.outcomes:
                writer.writerow(
                    [
                        o.label,
                        o.token_hex,
                        o.true_keyword,
                        o.result_size,
                        o.fma_guess or "",
                        o.fma_status,
                        o.fma_correct,
                        o.efma_guess or "",
                        o.efma_status,
                        o.efma_correct,
                    ]
                )
        (root / RUNTIME_JSON).write_text(
            json.dumps(self.runtime, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _leakage_summary(records: list[sse.LeakageRecord]) -> dict[str, dict[str, int]]:
    summary: dict[str, dict[str, int]] = {}
    for record in records:
        bucket = summary.setdefault(record.op_kind.value, {"count": 0, "total_magnitude": 0})
        bucket["count"] += 1
        bucket["total_magnitude"] += record.magnitude
    return {kind: summary[kind] for kind in sorted(summary)}


def _outcome_counts(result: attacks.AttackResult, truth: dict[bytes, str]) -> dict[str, int]:
    matched = wrong = unresolved = 0
    for token, guess in result.mapping.items():
        if guess.keyword is None:
            unresolved += 1
        elif guess.keyword == truth[token]:
            matched += 1
        else:
            wrong += 1
    return {"matched": matched, "wrong": wrong, "unresolved": unresolved}


def _read_probe_feed(config: ExperimentConfig, docs_root: Path) -> trace.IngestStats:
    import os

    if config.probe_feed is None:
        raise ProviderUnavailableError(
            "syscall provider needs a probe event feed: run the kernel probe and pass "
            "--probe-feed, or rerun with --provider simulated"
        )
    if not config.probe_feed.is_file():
        raise ProviderUnavailableError(
            f"probe feed {config.probe_feed} not found; is the kernel probe running? "
            "(use --provider simulated if no probe is available)"
        )
    with config.probe_feed.open("r", encoding="utf-8") as fh:
        stats = trace.syscall_provider_ingest(fh, target_pid=os.getpid(), docs_root=docs_root)
    if stats.non_correlatable:
        raise TraceError(
            "probe feed timestamps reordered beyond tolerance; run is non-correlatable"
        )
    return stats


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Execute the full pipeline and write all artifacts under output_dir."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    ingest_result = ingest(config.corpus_dir, config.seed, config.output_dir)
    index = ingest_result.index
    keys = ingest_result.keys
    missing = [w for w in config.query_keywords if w not in index.postings]
    if missing:
        raise ConfigError(f"query keywords not present in the index: {missing}")
    timings["ingest_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    docs_root = store.docs_dir(ingest_result.store_dir)
    provider = trace.SimulatedProvider(docs_root)
    markers_path = config.output_dir / MARKERS_FILENAME
    markers_path.unlink(missing_ok=True)

    observations: list[attacks.QueryObservation] = []
    ground_truth: dict[bytes, str] = {}
    token_of: dict[int, bytes] = {}
    query_order: list[tuple[int, bytes, str]] = []

    server = CspServer(
        ingest_result.store_dir,
        endpoint=config.endpoint,
        open_hook=provider.hook,
        markers_path=markers_path,
    )
    with server:
        with SearchClient(server.endpoint) as client:
            for keyword in config.query_keywords:
                token = sse.trapdoor(keys, keyword)
                query_id, documents = client.search(token)
                for cdoc in documents:
                    sse.decrypt_document(keys, cdoc)  # client-side round-trip check
                ground_truth[token] = keyword
                token_of[query_id] = token
                query_order.append((query_id, token, keyword))
                observations.append(
                    attacks.QueryObservation(
                        token=token,
                        result_size=len(documents),
                        file_set=None,  # bound after correlation
                    )
                )
    timings["serve_query_s"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    windows = server.engine.windows
    simulated_observed, simulated_noise = trace.correlate(provider.events, windows, token_of)

    provider_equivalence: bool | None = None
    if config.provider == "syscall":
        feed_stats = _read_probe_feed(config, docs_root)
        observed, noise = trace.correlate(feed_stats.events, windows, token_of)
        by_query = {o.query_id: o.files for o in simulated_observed}
        provider_equivalence = all(o.files == by_query[o.query_id] for o in observed)
        events_used = feed_stats.events
    else:
        observed, noise = simulated_observed, simulated_noise
        events_used = provider.events

    observed_by_query = {o.query_id: o for o in observed}
    bound: list[attacks.QueryObservation] = []
    for (query_id, token, _keyword), obs in zip(query_order, observations):
        bound.append(
            attacks.QueryObservation(
                token=token,
                result_size=obs.result_size,
                file_set=observed_by_query[query_id].files,
            )
        )
    observations = bound

    fidelity_ok = all(
        observed_by_query[qid].files == index.postings[keyword]
        for qid, _token, keyword in query_order
    )
    trace.write_trace_archive(
        config.output_dir / TRACE_DIRNAME, events_used, windows, observed
    )
    timings["trace_s"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    known = sample_known_documents(
        sorted({d.filename for d in ingest_result.documents}),
        config.attacker_coverage,
        config.seed,
    )
    aux = attacks.aux_from_index(index, coverage=config.attacker_coverage, known_docs=known)

    fma_result = attacks.fma(observations, aux)
    efma_result = attacks.efma(observations, aux)
    fma_result.accuracy = attacks.score(fma_result, ground_truth)
    efma_result.accuracy = attacks.score(efma_result, ground_truth)

    attacks.write_observations(observations, config.output_dir / OBSERVATIONS_FILENAME)
    attacks.write_attack_result(fma_result, config.output_dir / "attack_fma.json", ground_truth)
    attacks.write_attack_result(efma_result, config.output_dir / "attack_efma.json", ground_truth)
    timings["attack_s"] = time.perf_counter() - t3

    outcomes = []
    for position, (query_id, token, keyword) in enumerate(query_order, start=1):
        fma_guess = fma_result.mapping[token]
        efma_guess = efma_result.mapping[token]
        outcomes.append(
            TokenOutcome(
                label=f"T{position}",
                token_hex=token.hex(),
                true_keyword=keyword,
                result_size=index.size_of(keyword),
                fma_guess=fma_guess.keyword,
                fma_status=fma_guess.status.value,
                fma_correct=fma_guess.keyword == keyword,
                efma_guess=efma_guess.keyword,
                efma_status=efma_guess.status.value,
                efma_correct=efma_guess.keyword == keyword,
            )
        )

    leakage = _leakage_summary(server.store.leakage_log + server.engine.leakage_log)
    timings["total_s"] = time.perf_counter() - t0

    report = ExperimentReport(
        seed=config.seed,
        provider=config.provider,
        attacker_coverage=config.attacker_coverage,
        n_documents=len(ingest_result.documents),
        n_keywords=len(index.postings),
        query_keywords=list(config.query_keywords),
        fma_accuracy=fma_result.accuracy,
        efma_accuracy=efma_result.accuracy,
        outcomes=outcomes,
        outcome_counts={
            "fma": _outcome_counts(fma_result, ground_truth),
            "efma": _outcome_counts(efma_result, ground_truth),
        },
        leakage_summary=leakage,
        trace_noise_events=len(noise),
        fidelity_ok=fidelity_ok,
        provider_equivalence=provider_equivalence,
        runtime=timings,
    )
    report.write(config.output_dir)
    return report


def make_tie_corpus(
    n_tokens: int,
    tie_group: int,
    tie_size: int,
    out_dir: str | Path,
    tie_positions: list[int] | None = None,
) -> list[str]:
    """Generate a synthetic corpus with a controlled frequency-tie structure.

    Exactly ``tie_group`` keywords share posting size ``tie_size`` with
    pairwise-distinct posting sets; every other keyword gets its own unique
    size. Documents go to ``<out>/corpus/`` and the query workload (keyword
    per line, in token order) to ``<out>/queries.txt``. Returns the workload.
    """
    if n_tokens < 1:
        raise ConfigError(f"n_tokens must be >= 1, got {n_tokens}")
    if not 1 <= tie_group <= n_tokens:
        raise ConfigError(f"tie_group must be in [1, {n_tokens}], got {tie_group}")
    if tie_size < 1:
        raise ConfigError(f"tie_size must be >= 1, got {tie_size}")

    if tie_positions is None:
        tie_positions = list(range(n_tokens - tie_group + 1, n_tokens + 1))
    if len(tie_positions) != tie_group:
        raise ConfigError(f"need exactly {tie_group} tie positions, got {len(tie_positions)}")
    if len(set(tie_positions)) != tie_group or not all(1 <= p <= n_tokens for p in tie_positions):
        raise ConfigError(f"tie positions must be distinct values in [1, {n_tokens}]")

    n_unique = n_tokens - tie_group
    unique_sizes: list[int] = []
    size = 1
    while len(unique_sizes) < n_unique:
        if size != tie_size:
            unique_sizes.append(size)
        size += 1

    n_docs = max(tie_size + tie_group - 1, max(unique_sizes, default=0))
    doc_names = [f"doc{i:03d}.txt" for i in range(n_docs)]

    keywords = [f"term{p:02d}" for p in range(1, n_tokens + 1)]
    postings: dict[str, list[str]] = {}
    tie_set = set(tie_positions)
    tie_rank = 0
    unique_rank = 0
    for position, keyword in enumerate(keywords, start=1):
        if position in tie_set:
            postings[keyword] = doc_names[tie_rank : tie_rank + tie_size]
            tie_rank += 1
        else:
            postings[keyword] = doc_names[: unique_sizes[unique_rank]]
            unique_rank += 1

    bodies: dict[str, list[str]] = {name: [] for name in doc_names}
    for keyword in keywords:
        for name in postings[keyword]:
            bodies[name].append(keyword)

    root = Path(out_dir)
    corpus_dir = root / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for name in doc_names:
        (corpus_dir / name).write_text("\n".join(bodies[name]) + "\n", encoding="utf-8")
    (root / "queries.txt").write_text("\n".join(keywords) + "\n", encoding="utf-8")

    audit_tie_corpus(corpus_dir, keywords, tie_group, tie_size)
    return keywords


def audit_tie_corpus(
    corpus_dir: str | Path, keywords: list[str], tie_group: int, tie_size: int
) -> None:
    """Independent recount of the generated corpus structure."""
    index = corpus.build_inverted_index(corpus.load_corpus(corpus_dir))
    sizes = {w: index.size_of(w) for w in keywords}
    if set(index.postings) != set(keywords):
        raise ConfigError("tie corpus audit failed: stray or missing keywords")
    tied = [w for w, s in sizes.items() if s == tie_size]
    if len(tied) != tie_group:
        raise ConfigError(
            f"tie corpus audit failed: {len(tied)} keywords at size {tie_size}, wanted {tie_group}"
        )
    tie_sets = {index.postings[w] for w in tied}
    if len(tie_sets) != tie_group:
        raise ConfigError("tie corpus audit failed: tie-group posting sets not pairwise distinct")
    others = [s for w, s in sizes.items() if w not in tied]
    if len(set(others)) != len(others):
        raise ConfigError("tie corpus audit failed: non-tie sizes not unique")
