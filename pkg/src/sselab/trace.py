"""Capture of the file-access leakage vector.

Two providers feed the same correlation step: an in-process hook on the
server (always available, deterministic) and an external kernel-probe feed
of JSON lines. Correlation bins events into per-query file sets using the
server's BEGIN/END query markers.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import TraceError
from .sse import SearchToken

# Feed events may arrive out of order by up to this much before the run is
# declared non-correlatable.
REORDER_TOLERANCE_NS = 10_000_000

EVENTS_FILENAME = "events.jsonl"
WINDOWS_FILENAME = "windows.jsonl"
OBSERVED_SETS_FILENAME = "observed_sets.json"

_MARKER_RE = re.compile(r"^QUERY (\d+) (BEGIN|END) (\d+)$")


@dataclass(frozen=True)
class FileAccessEvent:
    timestamp_ns: int
    pid: int
    op: str  # "open" or "read"
    path: str


@dataclass(frozen=True)
class QueryTraceWindow:
    query_id: int
    begin_ns: int
    end_ns: int

    def __post_init__(self) -> None:
        if self.begin_ns >= self.end_ns:
            raise TraceError(f"query {self.query_id}: window begin must precede end")

    def contains(self, timestamp_ns: int) -> bool:
        return self.begin_ns <= timestamp_ns <= self.end_ns


@dataclass(frozen=True)
class ObservedFileSet:
    """The file-access leakage of one query: exactly which files it touched."""

    query_id: int
    token: SearchToken
    files: frozenset[str]


class SimulatedProvider:
    """Deterministic stand-in for the kernel probe.

    Plugs into the server's open hook and records one ``open`` event per
    ciphertext file, with paths normalized to store-relative form.
    """

    def __init__(self, docs_root: str | Path) -> None:
        self.docs_root = Path(docs_root)
        self.events: list[FileAccessEvent] = []
        self._lock = threading.Lock()

    def hook(self, path: str) -> None:
        rel = Path(path).relative_to(self.docs_root).as_posix()
        event = FileAccessEvent(time.monotonic_ns(), os.getpid(), "open", rel)
        with self._lock:
            self.events.append(event)


@dataclass
class IngestStats:
    events: list[FileAccessEvent] = field(default_factory=list)
    malformed_count: int = 0
    dropped_pid: int = 0
    dropped_path: int = 0
    reordered_count: int = 0
    non_correlatable: bool = False


def syscall_provider_ingest(
    lines: Iterable[str],
    target_pid: int,
    docs_root: str | Path,
    tolerance_ns: int = REORDER_TOLERANCE_NS,
) -> IngestStats:
    """Parse a probe feed of JSON lines into normalized file-access events.

    Keeps only events from ``target_pid`` on paths under ``docs_root`` and
    rewrites paths to store-relative form. Malformed lines are skipped and
    counted. Events arriving out of order within the tolerance are re-sorted;
    a larger inversion marks the whole run non-correlatable.
    """
    root = os.path.normpath(os.path.abspath(str(docs_root)))
    prefix = root + os.sep
    stats = IngestStats()
    max_seen = None
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
            ts = raw["ts_ns"]
            pid = raw["pid"]
            op = raw["op"]
            path = raw["path"]
            if not (
                isinstance(ts, int)
                and isinstance(pid, int)
                and op in ("open", "read")
                and isinstance(path, str)
            ):
                raise ValueError("bad field types")
        except (ValueError, KeyError, TypeError):
            stats.malformed_count += 1
            continue
        if pid != target_pid:
            stats.dropped_pid += 1
            continue
        normalized = os.path.normpath(path)
        if not normalized.startswith(prefix):
            stats.dropped_path += 1
            continue
        if max_seen is not None and ts < max_seen:
            stats.reordered_count += 1
            if max_seen - ts > tolerance_ns:
                stats.non_correlatable = True
        max_seen = ts if max_seen is None else max(max_seen, ts)
        rel = Path(normalized[len(prefix) :]).as_posix()
        stats.events.append(FileAccessEvent(ts, pid, op, rel))
    stats.events.sort(key=lambda e: e.timestamp_ns)
    return stats


def _check_disjoint(windows: list[QueryTraceWindow]) -> list[QueryTraceWindow]:
    ordered = sorted(windows, key=lambda w: w.begin_ns)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.begin_ns <= prev.end_ns:
            raise TraceError(
                f"query windows {prev.query_id} and {cur.query_id} overlap in time"
            )
    return ordered


def correlate(
    events: Iterable[FileAccessEvent],
    windows: list[QueryTraceWindow],
    token_of: Mapping[int, SearchToken],
) -> tuple[list[ObservedFileSet], list[FileAccessEvent]]:
    """Bin events into per-query file sets; events outside every window are noise.

    Every window yields an ObservedFileSet, empty when the query touched no
    files. Duplicate accesses of one file within a window collapse (set
    semantics); ``open`` and ``read`` contribute to the same set.
    """
    ordered = _check_disjoint(windows)
    for window in ordered:
        if window.query_id not in token_of:
            raise TraceError(f"no token known for query {window.query_id}")
    files_by_query: dict[int, set[str]] = {w.query_id: set() for w in ordered}
    noise: list[FileAccessEvent] = []
    for event in events:
        hits = [w for w in ordered if w.contains(event.timestamp_ns)]
        assert len(hits) <= 1, "disjoint windows cannot share an event"
        if hits:
            files_by_query[hits[0].query_id].add(event.path)
        else:
            noise.append(event)
    observed = [
        ObservedFileSet(w.query_id, token_of[w.query_id], frozenset(files_by_query[w.query_id]))
        for w in ordered
    ]
    return observed, noise


def format_marker(query_id: int, kind: str, timestamp_ns: int) -> str:
    return f"QUERY {query_id} {kind} {timestamp_ns}"


def parse_marker_lines(lines: Iterable[str]) -> list[QueryTraceWindow]:
    """Rebuild query windows from the server's marker channel."""
    begins: dict[int, int] = {}
    windows: list[QueryTraceWindow] = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        match = _MARKER_RE.match(line)
        if not match:
            raise TraceError(f"malformed marker line: {line!r}")
        query_id, kind, ts = int(match.group(1)), match.group(2), int(match.group(3))
        if kind == "BEGIN":
            if query_id in begins:
                raise TraceError(f"duplicate BEGIN for query {query_id}")
            begins[query_id] = ts
        else:
            if query_id not in begins:
                raise TraceError(f"END without BEGIN for query {query_id}")
            windows.append(QueryTraceWindow(query_id, begins.pop(query_id), ts))
    if begins:
        raise TraceError(f"queries without END markers: {sorted(begins)}")
    return windows


def write_trace_archive(
    out_dir: str | Path,
    events: Iterable[FileAccessEvent],
    windows: Iterable[QueryTraceWindow],
    observed: Iterable[ObservedFileSet],
) -> None:
    """Persist one run's trace: events.jsonl, windows.jsonl, observed_sets.json."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    with (root / EVENTS_FILENAME).open("w", encoding="utf-8") as fh:
        for e in events:
            fh.write(
                json.dumps(
                    {"ts_ns": e.timestamp_ns, "pid": e.pid, "op": e.op, "path": e.path},
                    separators=(",", ":"),
                )
                + "\n"
            )
    with (root / WINDOWS_FILENAME).open("w", encoding="utf-8") as fh:
        for w in windows:
            fh.write(
                json.dumps(
                    {"query_id": w.query_id, "begin_ns": w.begin_ns, "end_ns": w.end_ns},
                    separators=(",", ":"),
                )
                + "\n"
            )
    sets = {str(o.query_id): sorted(o.files) for o in observed}
    with (root / OBSERVED_SETS_FILENAME).open("w", encoding="utf-8") as fh:
        json.dump(sets, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


MarkerSink = Callable[[str], None]
OpenHook = Callable[[str], None]
