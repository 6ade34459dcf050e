"""Target-side codecs realized as tiny compiled probe programs.

A probe reads one canonical JSON value on stdin, deserializes it into one
target type, re-serializes, and prints the result (exit 1 with a reason on
stderr when deserialization rejects the value). Each probe embeds only the
struct definitions its type transitively references, so probes are keyed
by (type text, relevant definitions) and compiled once per key.
"""

from __future__ import annotations

import hashlib
import os
import subprocess
from pathlib import Path

from .errors import ProbeBuildFailure, ToolchainMissing

PROBE_MAIN = """use std::io::Read;

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).expect("read stdin");
    let value: Result<PROBE_TYPE, _> = serde_json::from_str(input.trim());
    match value {
        Ok(v) => {
            let out = serde_json::to_string(&v).expect("encode");
            println!("{}", out);
        }
        Err(e) => {
            eprintln!("{}", e);
            std::process::exit(1);
        }
    }
}
"""

PROBE_MANIFEST = """[package]
name = "NAME"
version = "0.1.0"
edition = "2021"

[dependencies]
serde = { version = "=1.0.229", features = ["derive"] }
serde_json = "=1.0.151"

[profile.dev]
debug = false
"""


def default_cache_dir() -> Path:
    override = os.environ.get("RUSTPORT_PROBE_DIR")
    if override:
        return Path(override)
    return Path.home() / ".cache" / "rustport" / "probes"


def _identifiers(text: str) -> set[str]:
    from . import rustsrc

    return {t.text for t in rustsrc.tokenize_rust(text) if t.kind == "ident"}


class ProbeRunner:
    """Builds and runs probe binaries for target value types."""

    def __init__(self, struct_defs: dict[str, str] | None = None,
                 cache_dir: str | Path | None = None, offline: bool = False):
        self.struct_defs = dict(struct_defs or {})
        self.cache_dir = Path(cache_dir) if cache_dir else default_cache_dir()
        self.offline = offline
        self._binaries: dict[str, Path] = {}

    def prelude_for(self, type_text: str) -> str:
        """Struct definitions the type transitively references, id-ordered."""
        needed: set[str] = set()
        frontier = _identifiers(type_text) & set(self.struct_defs)
        while frontier:
            needed |= frontier
            nxt: set[str] = set()
            for name in frontier:
                nxt |= _identifiers(self.struct_defs[name]) & set(self.struct_defs)
            frontier = nxt - needed
        return "\n\n".join(self.struct_defs[n] for n in sorted(needed))

    def probe_name(self, type_text: str) -> str:
        prelude = self.prelude_for(type_text)
        digest = hashlib.sha256((prelude + "\0" + type_text).encode()).hexdigest()[:16]
        return f"probe_{digest}"

    def binary_for(self, type_text: str) -> Path:
        name = self.probe_name(type_text)
        if name in self._binaries:
            return self._binaries[name]
        import shutil

        if shutil.which("cargo") is None:
            raise ToolchainMissing("cargo is not on PATH")
        crate = self.cache_dir / name
        target_dir = Path(os.environ.get("RUSTPORT_TARGET_DIR") or (self.cache_dir / "target"))
        binary = target_dir / "debug" / name
        if not binary.exists():
            (crate / "src").mkdir(parents=True, exist_ok=True)
            (crate / "Cargo.toml").write_text(PROBE_MANIFEST.replace("NAME", name), encoding="utf-8")
            main = (
                "#![allow(nonstandard_style, dead_code)]\n"
                + self.prelude_for(type_text)
                + "\n"
                + PROBE_MAIN.replace("PROBE_TYPE", type_text)
            )
            (crate / "src" / "main.rs").write_text(main, encoding="utf-8")
            cmd = ["cargo", "build", "--quiet"]
            if self.offline:
                cmd.append("--offline")
            env = dict(os.environ)
            env["CARGO_TARGET_DIR"] = str(target_dir)
            proc = subprocess.run(cmd, cwd=crate, capture_output=True, text=True, env=env)
            if proc.returncode != 0 or not binary.exists():
                raise ProbeBuildFailure(f"{type_text}: {proc.stderr[-1500:]}")
        self._binaries[name] = binary
        return binary

    def run(self, type_text: str, canonical_value: str) -> tuple[bool, str]:
        """One probe round: value text in, (accepted, stdout-or-reason) out."""
        binary = self.binary_for(type_text)
        proc = subprocess.run(
            [str(binary)], input=canonical_value, capture_output=True, text=True
        )
        if proc.returncode == 0:
            return True, proc.stdout.strip()
        return False, proc.stderr.strip().splitlines()[0] if proc.stderr.strip() else "rejected"


def struct_defs_from(translations: dict) -> dict[str, str]:
    """Struct name -> definition text over the current translations map."""
    from . import rustsrc

    defs: dict[str, str] = {}
    for fid in sorted(translations):
        target = translations[fid]
        try:
            items = rustsrc.parse_items(target.code)
        except rustsrc.ParseViolation:
            continue
        for item in items:
            if item.kind == "struct":
                defs.setdefault(item.name, item.text)
    return defs
