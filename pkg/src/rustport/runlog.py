"""Append-only JSONL run log for rule outcomes and pipeline events."""

from __future__ import annotations

import json
from pathlib import Path


class RunLog:
    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def emit(self, record: dict) -> None:
        self.records.append(record)
        if self.path:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def rule_outcome(self, fragment_id: str, rule_id: str, attempt: int,
                     verdict: str, violations: list[str]) -> None:
        self.emit(
            {
                "fragment_id": fragment_id,
                "rule_id": rule_id,
                "attempt": attempt,
                "verdict": verdict,
                "violations": violations,
            }
        )
