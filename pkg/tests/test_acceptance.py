"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines on the terminal.
"""

from __future__ import annotations

import json
import random
import time
from contextlib import contextmanager

import pytest

from sselab import corpus, sse
from sselab.attacks import aux_from_index, efma, fma, score, QueryObservation
from sselab.corpus import Document, build_inverted_index, load_corpus
from sselab.errors import IntegrityError
from sselab.experiment import ExperimentConfig, ingest, make_tie_corpus, run_experiment
from sselab.server import SearchEngine
from sselab.store import Store
from sselab.trace import SimulatedProvider, correlate

from conftest import random_corpus_files, write_corpus


@contextmanager
def criterion(name: str):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    else:
        print(f"ACCEPTANCE {name}: PASS")


@pytest.fixture(scope="module")
def tie_experiment(tmp_path_factory):
    root = tmp_path_factory.mktemp("tie")
    started = time.perf_counter()
    keywords = make_tie_corpus(18, 4, 12, root, tie_positions=[12, 13, 17, 18])
    config = ExperimentConfig(
        corpus_dir=root / "corpus",
        output_dir=root / "out",
        seed=42,
        query_keywords=keywords,
        provider="simulated",
    )
    report = run_experiment(config)
    elapsed = time.perf_counter() - started
    return keywords, config, report, elapsed


@pytest.fixture(scope="module")
def hundred_doc_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("hundred")
    rng = random.Random(2024)
    files = random_corpus_files(rng, n_docs=100, vocab_size=60)
    # Every document must be reachable: give empty ones a filler keyword.
    files = {
        name: text if text.strip() else "fillerterm"
        for name, text in files.items()
    }
    write_corpus(root / "corpus", files)
    return root / "corpus"


def test_table_1_reproduction(tie_experiment):
    """Tie corpus: FMA exactly 14/18 = 77.8%, eFMA exactly 100%, < 10 s."""
    with criterion("table-1-accuracy-pair"):
        _, _, report, elapsed = tie_experiment
        assert report.fma_accuracy == 14 / 18
        assert round(report.fma_accuracy * 100, 1) == 77.8
        assert report.efma_accuracy == 1.0
        assert elapsed < 10.0, f"end-to-end took {elapsed:.2f}s"


def test_fig_1_per_token_outcomes(tie_experiment):
    """Exactly the 4 tie-group tokens unresolved under FMA and file-set
    matched under eFMA; every unique-frequency token matched by both."""
    with criterion("fig-1-per-token"):
        keywords, _, report, _ = tie_experiment
        tied_labels = {"T12", "T13", "T17", "T18"}
        for outcome in report.outcomes:
            if outcome.label in tied_labels:
                assert outcome.result_size == 12
                assert outcome.fma_status == "unresolved"
                assert not outcome.fma_correct
                assert outcome.efma_status == "matched_file_set"
                assert outcome.efma_correct
            else:
                assert outcome.fma_status == "matched_unique_frequency"
                assert outcome.efma_status == "matched_unique_frequency"
                assert outcome.fma_correct and outcome.efma_correct


def test_sse_correctness_suite(hundred_doc_corpus, tmp_path):
    """Exhaustive search correctness plus AEAD round-trip/tamper checks on a
    100-document corpus, in under 5 s."""
    with criterion("sse-correctness"):
        started = time.perf_counter()
        result = ingest(hundred_doc_corpus, seed=7, out_dir=tmp_path / "out")
        assert len(result.documents) == 100
        engine = SearchEngine(Store(result.store_dir))
        for keyword, files in result.index.postings.items():
            token = sse.trapdoor(result.keys, keyword)
            response = engine.handle_search(token)
            assert {c.filename for c in response.ciphertexts} == set(files), keyword

        for doc in result.documents:
            cdoc = sse.encrypt_document(result.keys, doc)
            assert sse.decrypt_document(result.keys, cdoc) == doc
        sample = sse.encrypt_document(result.keys, result.documents[0])
        tampered = bytearray(sample.blob)
        tampered[len(tampered) // 2] ^= 0x80
        with pytest.raises(IntegrityError):
            sse.decrypt_document(
                result.keys, sse.CiphertextDocument(sample.filename, bytes(tampered))
            )
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"correctness suite took {elapsed:.2f}s"


def test_file_access_fidelity(tie_experiment, hundred_doc_corpus, tmp_path):
    """Observed file set equals ground-truth postings for every query, in
    both the tie run and an exhaustive all-keyword run. Zero tolerance."""
    with criterion("file-access-fidelity"):
        _, config, report, _ = tie_experiment
        assert report.fidelity_ok
        assert report.trace_noise_events == 0
        observed = json.loads(
            (config.output_dir / "trace" / "observed_sets.json").read_text()
        )
        index = build_inverted_index(load_corpus(config.corpus_dir))
        for qid, keyword in zip(sorted(observed, key=int), config.query_keywords):
            assert set(observed[qid]) == set(index.postings[keyword])

        # Exhaustive run: every keyword of the 100-document corpus.
        result = ingest(hundred_doc_corpus, seed=11, out_dir=tmp_path / "out")
        store = Store(result.store_dir)
        provider = SimulatedProvider(store.docs_root)
        engine = SearchEngine(store, open_hook=provider.hook)
        keywords = sorted(result.index.postings)
        for keyword in keywords:
            engine.handle_search(sse.trapdoor(result.keys, keyword))
        observed_sets, noise = correlate(provider.events, engine.windows, engine.token_of)
        assert noise == []
        for observed_set, keyword in zip(observed_sets, keywords):
            assert observed_set.files == result.index.postings[keyword], keyword


def test_dominance_property():
    """200 seeded random corpora/workloads: eFMA never below FMA, and eFMA
    is total whenever posting sets are pairwise distinct at full coverage."""
    with criterion("dominance-200-trials"):
        dominant = 0
        for trial in range(200):
            rng = random.Random(10_000 + trial)
            files = random_corpus_files(
                rng, n_docs=rng.randint(2, 30), vocab_size=rng.randint(2, 20)
            )
            docs = [Document(n, t.encode()) for n, t in sorted(files.items())]
            index = build_inverted_index(docs)
            if not index.postings:
                dominant += 1  # vacuous: no keywords to query
                continue
            keys = sse.keygen(trial)
            keywords = sorted(index.postings)
            workload = rng.sample(keywords, rng.randint(1, len(keywords)))
            observations = []
            truth = {}
            for keyword in workload:
                token = sse.trapdoor(keys, keyword)
                posting = index.postings[keyword]
                observations.append(QueryObservation(token, len(posting), posting))
                truth[token] = keyword

            coverage = rng.choice([1.0, 1.0, 1.0, 0.6])
            if coverage < 1.0:
                universe = sorted({d.filename for d in docs})
                known = rng.sample(universe, max(1, round(coverage * len(universe))))
                aux = aux_from_index(index, coverage=coverage, known_docs=known)
            else:
                aux = aux_from_index(index)

            fma_acc = score(fma(observations, aux), truth)
            efma_acc = score(efma(observations, aux), truth)
            assert efma_acc >= fma_acc, f"trial {trial}: {efma_acc} < {fma_acc}"
            dominant += 1

            postings = list(index.postings.values())
            pairwise_distinct = len(set(postings)) == len(postings)
            if coverage == 1.0 and pairwise_distinct:
                assert efma_acc == 1.0, f"trial {trial}: distinct postings but {efma_acc}"
        assert dominant == 200


def test_leakage_count_checks(tmp_path):
    """L_add, L_delete, L_search equal brute-force recounts on small corpora."""
    with criterion("leakage-counts"):
        for seed in range(5):
            rng = random.Random(seed)
            files = random_corpus_files(rng, n_docs=rng.randint(2, 20), vocab_size=10)
            docs = [Document(n, t.encode()) for n, t in sorted(files.items())]
            keys = sse.keygen(seed)

            client = sse.SseClient(keys)
            for doc in docs:
                _, _, record = client.add_document(doc)
                assert record.magnitude == len(corpus.extract_keywords(doc))

            index = build_inverted_index(docs)
            out = tmp_path / f"run{seed}"
            write_corpus(out / "corpus", files)
            result = ingest(out / "corpus", seed=seed, out_dir=out)
            engine = SearchEngine(Store(result.store_dir))
            for keyword, posting in sorted(index.postings.items()):
                engine.handle_search(sse.trapdoor(result.keys, keyword))
                assert engine.leakage_log[-1].magnitude == len(posting)

            victims = rng.sample([d.filename for d in docs], min(3, len(docs)))
            for victim in victims:
                expected = sum(
                    1
                    for posting in client.current_index().postings.values()
                    if victim in posting
                )
                _, record = client.delete_document(victim)
                assert record.magnitude == expected


def test_determinism_byte_identical_reports(tmp_path):
    """Identical config and seed produce byte-identical report artifacts."""
    with criterion("report-determinism"):
        keywords = make_tie_corpus(8, 2, 4, tmp_path / "tie")
        blobs = []
        for name in ("a", "b"):
            config = ExperimentConfig(
                corpus_dir=tmp_path / "tie" / "corpus",
                output_dir=tmp_path / name,
                seed=99,
                query_keywords=keywords,
            )
            run_experiment(config)
            blobs.append(
                (
                    (tmp_path / name / "report.json").read_bytes(),
                    (tmp_path / name / "report.csv").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]
