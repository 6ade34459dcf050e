"""Translation providers behind one query interface, with full record/replay.

Every interaction (prompt, response, wall time) is appended to an
interaction log keyed by a prompt hash, so a recorded pipeline run can be
replayed byte-for-byte without any live model. Provider preference for
tests is replay > scripted > fallback > live.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ProviderUnavailable, ReplayExhausted, ReplayMismatch


@dataclass
class BackendRequest:
    prompt: str
    fragment_id: str
    attempt: int
    temperature: float = 0.2


def prompt_sha(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class InteractionLog:
    """Append-only (request, response, ms) records with per-entry prompt hashes."""

    entries: list[dict] = field(default_factory=list)

    def append(self, request: BackendRequest, response: str, ms: int) -> dict:
        entry = {
            "fragment_id": request.fragment_id,
            "attempt": request.attempt,
            "prompt_sha256": prompt_sha(request.prompt),
            "response": response,
            "ms": ms,
        }
        self.entries.append(entry)
        return entry

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    @staticmethod
    def load(path: str | Path) -> "InteractionLog":
        log = InteractionLog()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.entries.append(json.loads(line))
        return log


def extract_code(response: str) -> str:
    """Candidate code from a provider response: longest fenced block, else all."""
    fences = []
    lines = response.splitlines()
    open_idx = None
    for i, line in enumerate(lines):
        if line.lstrip().startswith("```"):
            if open_idx is None:
                open_idx = i
            else:
                fences.append("\n".join(lines[open_idx + 1 : i]))
                open_idx = None
    if fences:
        return max(fences, key=len)
    return response


class ReplayProvider:
    """Answers queries from a recorded log, in order, hash-verified."""

    def __init__(self, log: InteractionLog):
        self.log = log
        self.cursor = 0

    def skip_completed(self, fragment_ids: set[str]) -> None:
        """Resume support: jump past interactions of already-completed fragments."""
        while (
            self.cursor < len(self.log.entries)
            and self.log.entries[self.cursor]["fragment_id"] in fragment_ids
        ):
            self.cursor += 1

    def query(self, request: BackendRequest) -> str:
        if self.cursor >= len(self.log.entries):
            raise ReplayExhausted(f"replay log exhausted at interaction {self.cursor}")
        entry = self.log.entries[self.cursor]
        got = prompt_sha(request.prompt)
        if entry["prompt_sha256"] != got:
            raise ReplayMismatch(entry["prompt_sha256"], got)
        self.cursor += 1
        return entry["response"]


class ScriptedProvider:
    """Answers from a fixed script; used to exercise requery and repair paths.

    `answers` maps a fragment id to its answer sequence; the '*' key serves
    any fragment without its own entry. With `repeat_last`, an exhausted
    sequence keeps returning its final answer (a permanently bad provider).
    """

    def __init__(self, answers: dict[str, list[str]], repeat_last: bool = False):
        self.answers = {k: list(v) for k, v in answers.items()}
        self.repeat_last = repeat_last
        self.served: dict[str, int] = {}

    def query(self, request: BackendRequest) -> str:
        key = request.fragment_id if request.fragment_id in self.answers else "*"
        seq = self.answers.get(key)
        if not seq:
            raise ProviderUnavailable(f"no scripted answer for {request.fragment_id}")
        idx = self.served.get(key, 0)
        if idx >= len(seq):
            if not self.repeat_last:
                raise ProviderUnavailable(f"scripted answers exhausted for {request.fragment_id}")
            idx = len(seq) - 1
        self.served[key] = idx + 1
        return seq[idx]


class LiveProvider:
    """External model hook: pipes the prompt to the command named by
    RUSTPORT_LIVE_CMD and reads the completion from stdout. Credentials
    stay in the subprocess environment and are never logged."""

    ENV_CMD = "RUSTPORT_LIVE_CMD"

    def __init__(self, command: str | None = None):
        self.command = command or os.environ.get(self.ENV_CMD, "")

    def query(self, request: BackendRequest) -> str:
        if not self.command:
            raise ProviderUnavailable(f"{self.ENV_CMD} is not configured")
        proc = subprocess.run(
            self.command,
            shell=True,
            input=request.prompt.encode("utf-8"),
            capture_output=True,
        )
        if proc.returncode != 0:
            raise ProviderUnavailable(proc.stderr.decode("utf-8", "replace")[:400])
        return proc.stdout.decode("utf-8")


class Backend:
    """Recording front door: queries the provider, logs, strips code fences."""

    def __init__(self, provider, log: InteractionLog | None = None, temperature: float = 0.2):
        self.provider = provider
        self.log = log if log is not None else InteractionLog()
        self.temperature = temperature

    def query(self, request: BackendRequest) -> str:
        started = time.monotonic()
        response = self.provider.query(request)
        ms = int((time.monotonic() - started) * 1000)
        self.log.append(request, response, ms)
        return extract_code(response)

    def ask(self, fragment_id: str, prompt: str, attempt: int) -> str:
        return self.query(BackendRequest(prompt, fragment_id, attempt, self.temperature))
