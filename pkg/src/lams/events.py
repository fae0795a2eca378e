"""Versioned JSONL event log shared by the harness and the session service.

The log is the source of truth for metrics and replay: it carries full prompts,
completions and world snapshots at every switch point. Serialization is
canonical (sorted keys, fixed separators) so identical runs produce identical
bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterable

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "meta", "layout", "input", "pause", "auto_switch", "manual_switch",
    "manual_settle", "grouped_cycle", "example", "rule_gen",
    "llm_request", "llm_response", "stage", "error", "end",
)


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class EventLog:
    """Append-only event collector with an optional JSONL file sink."""

    def __init__(self, path: str | Path | None = None, keep_in_memory: bool = True):
        self.path = Path(path) if path else None
        self.records: list[dict] = [] if keep_in_memory else None
        self._file: IO[str] | None = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = self.path.open("w", encoding="utf-8")

    def append(self, kind: str, **payload) -> dict:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        record = {"kind": kind, **payload}
        if self.records is not None:
            self.records.append(record)
        if self._file:
            self._file.write(canonical_json(record) + "\n")
            self._file.flush()
        return record

    def close(self):
        if self._file:
            self._file.close()
            self._file = None

    def dumps(self) -> str:
        if self.records is None:
            raise RuntimeError("log was not kept in memory")
        return "".join(canonical_json(r) + "\n" for r in self.records)


def read_log(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def iter_kind(records: Iterable[dict], kind: str) -> Iterable[dict]:
    return (r for r in records if r["kind"] == kind)
