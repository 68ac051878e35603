"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 trace provider unavailable.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import attacks, corpus, experiment, sse, store, trace
from .errors import ConfigError, ProviderUnavailableError, SselabError
from .server import CspServer, SearchClient

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_PROVIDER = 4


@click.group()
@click.option("--verbose", is_flag=True, help="Enable info-level logging.")
def cli(verbose: bool) -> None:
    """Searchable-encryption leakage laboratory."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False))
def ingest(corpus_dir: str, seed: int, output_dir: str) -> None:
    """Encrypt a corpus into a store and dump the plaintext index."""
    result = experiment.ingest(corpus_dir, seed, output_dir)
    click.echo(
        f"ingested {len(result.documents)} documents, "
        f"{len(result.index.postings)} keywords -> {result.store_dir}"
    )


@cli.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--endpoint", default="tcp:127.0.0.1:4460", show_default=True)
@click.option("--markers", type=click.Path(dir_okay=False), default=None,
              help="File receiving QUERY BEGIN/END marker lines.")
def serve(store_dir: str, endpoint: str, markers: str | None) -> None:
    """Run the CSP server until interrupted."""
    server = CspServer(store_dir, endpoint=endpoint, markers_path=markers)
    click.echo(f"serving {store_dir} on {server.endpoint} (pid {os.getpid()})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


@cli.command()
@click.option("--endpoint", required=True)
@click.option("--seed", required=True, type=int)
@click.option("--keywords", default=None, help="Comma-separated query keywords.")
@click.option("--queries", "queries_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="File with one query keyword per line.")
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False))
def query(endpoint: str, seed: int, keywords: str | None, queries_file: str | None,
          output_dir: str) -> None:
    """Issue searches against a running server; write observations + ground truth."""
    if keywords is None and queries_file is None:
        raise ConfigError("need --keywords or --queries")
    workload: list[str] = []
    if queries_file is not None:
        workload += [w.strip() for w in Path(queries_file).read_text().splitlines() if w.strip()]
    if keywords is not None:
        workload += [w.strip() for w in keywords.split(",") if w.strip()]
    if not workload:
        raise ConfigError("query workload is empty")

    keys = sse.keygen(seed)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    observations = []
    truth = {}
    query_ids = {}
    with SearchClient(endpoint) as client:
        for keyword in workload:
            token = sse.trapdoor(keys, keyword)
            query_id, documents = client.search(token)
            observations.append(attacks.QueryObservation(token, len(documents)))
            truth[token.hex()] = keyword
            query_ids[str(query_id)] = token.hex()
    attacks.write_observations(observations, out / experiment.OBSERVATIONS_FILENAME)
    (out / "ground_truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "query_tokens.json").write_text(
        json.dumps(query_ids, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(f"issued {len(workload)} queries -> {out}")


@cli.command(name="trace")
@click.option("--feed", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Probe event feed (JSON lines).")
@click.option("--markers", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pid", required=True, type=int, help="Server process id to filter on.")
@click.option("--query-tokens", "query_tokens_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="query_id -> token hex map written by the query command.")
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False))
def trace_cmd(feed: str, markers: str, store_dir: str, pid: int,
              query_tokens_file: str, output_dir: str) -> None:
    """Correlate a probe feed into per-query observed file sets."""
    with open(feed, encoding="utf-8") as fh:
        stats = trace.syscall_provider_ingest(fh, target_pid=pid,
                                              docs_root=store.docs_dir(store_dir))
    if stats.non_correlatable:
        raise SselabError("probe feed reordered beyond tolerance; run is non-correlatable")
    windows = trace.parse_marker_lines(Path(markers).read_text().splitlines())
    token_of = {
        int(qid): bytes.fromhex(tok)
        for qid, tok in json.loads(Path(query_tokens_file).read_text()).items()
    }
    observed, noise = trace.correlate(stats.events, windows, token_of)
    trace.write_trace_archive(output_dir, stats.events, windows, observed)
    click.echo(
        f"correlated {len(stats.events)} events into {len(observed)} queries "
        f"({len(noise)} noise, {stats.malformed_count} malformed lines) -> {output_dir}"
    )


@cli.command()
@click.option("--observations", "observations_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--aux", "aux_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Plaintext index JSON (attacker knowledge).")
@click.option("--file-sets", "file_sets_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="observed_sets.json plus query_tokens.json join (dir of trace archive).")
@click.option("--query-tokens", "query_tokens_file", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--truth", "truth_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--method", type=click.Choice(["fma", "efma"]), default="efma", show_default=True)
@click.option("--output", "output_file", required=True, type=click.Path(dir_okay=False))
def attack(observations_file: str, aux_file: str, file_sets_file: str | None,
           query_tokens_file: str | None, truth_file: str | None, method: str,
           output_file: str) -> None:
    """Run FMA or eFMA over recorded observations.

    The aux index file IS the attacker's knowledge; partial knowledge means
    supplying a partial index.
    """
    observations = attacks.read_observations(observations_file)
    if file_sets_file is not None:
        if query_tokens_file is None:
            raise ConfigError("--file-sets needs --query-tokens to join on tokens")
        sets = json.loads(Path(file_sets_file).read_text())
        token_of = json.loads(Path(query_tokens_file).read_text())
        files_by_token = {token_of[qid]: frozenset(files) for qid, files in sets.items()}
        observations = [
            attacks.QueryObservation(
                obs.token, obs.result_size, files_by_token.get(obs.token.hex(), obs.file_set)
            )
            for obs in observations
        ]
    aux = attacks.aux_from_index(corpus.read_index_json(aux_file))
    result = attacks.fma(observations, aux) if method == "fma" else attacks.efma(observations, aux)
    truth = None
    if truth_file is not None:
        truth = {
            bytes.fromhex(tok): keyword
            for tok, keyword in json.loads(Path(truth_file).read_text()).items()
        }
        result.accuracy = attacks.score(result, truth)
    attacks.write_attack_result(result, output_file, truth)
    counts = result.counts()
    click.echo(
        f"{method}: {len(result.mapping)} tokens, "
        f"{counts.get(attacks.MatchStatus.UNRESOLVED, 0)} unresolved"
        + (f", accuracy {result.accuracy:.3f}" if result.accuracy is not None else "")
    )


@cli.command(name="experiment")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_dir", type=click.Path(file_okay=False), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--keywords", default=None, help="Comma-separated query keywords.")
@click.option("--queries", "queries_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--provider", type=click.Choice(["simulated", "syscall"]), default=None)
@click.option("--coverage", type=float, default=None)
@click.option("--probe-feed", type=click.Path(dir_okay=False), default=None)
@click.option("--output", "output_dir", type=click.Path(file_okay=False), default=None)
def experiment_cmd(config_file: str | None, corpus_dir: str | None, seed: int | None,
                   keywords: str | None, queries_file: str | None, provider: str | None,
                   coverage: float | None, probe_feed: str | None,
                   output_dir: str | None) -> None:
    """Run the end-to-end experiment and write the accuracy report."""
    settings: dict = {}
    if config_file is not None:
        settings.update(experiment.load_config_file(config_file))
    if corpus_dir is not None:
        settings["corpus_dir"] = corpus_dir
    if seed is not None:
        settings["seed"] = seed
    if keywords is not None:
        settings["query_keywords"] = [w.strip() for w in keywords.split(",") if w.strip()]
    if queries_file is not None:
        settings["query_keywords"] = [
            w.strip() for w in Path(queries_file).read_text().splitlines() if w.strip()
        ]
    if provider is not None:
        settings["provider"] = provider
    if coverage is not None:
        settings["attacker_coverage"] = coverage
    if probe_feed is not None:
        settings["probe_feed"] = probe_feed
    if output_dir is not None:
        settings["output_dir"] = output_dir

    for required in ("corpus_dir", "output_dir", "seed", "query_keywords"):
        if required not in settings:
            raise ConfigError(f"missing required setting {required!r} (flag or config file)")
    try:
        config = experiment.ExperimentConfig(**settings)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    report = experiment.run_experiment(config)
    click.echo(
        f"fma accuracy {report.fma_accuracy:.3f}, efma accuracy {report.efma_accuracy:.3f} "
        f"({report.n_documents} docs, {len(report.outcomes)} tokens) -> {config.output_dir}"
    )


@cli.command(name="make-tie-corpus")
@click.option("--tokens", "n_tokens", required=True, type=int)
@click.option("--tie-group", required=True, type=int)
@click.option("--tie-size", required=True, type=int)
@click.option("--tie-positions", default=None,
              help="Comma-separated 1-based workload positions for the tied keywords.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def make_tie_corpus_cmd(n_tokens: int, tie_group: int, tie_size: int,
                        tie_positions: str | None, out_dir: str) -> None:
    """Generate a synthetic corpus with a controlled frequency tie."""
    positions = None
    if tie_positions is not None:
        positions = [int(p) for p in tie_positions.split(",") if p.strip()]
    keywords = experiment.make_tie_corpus(n_tokens, tie_group, tie_size, out_dir,
                                          tie_positions=positions)
    click.echo(f"wrote {len(keywords)}-keyword tie corpus under {out_dir}")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_CONFIG)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ProviderUnavailableError as exc:
        click.echo(f"provider unavailable: {exc}", err=True)
        sys.exit(EXIT_PROVIDER)
    except SselabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    main()
