"""Materialize translations into a cargo project, compile, and repair.

The emitted tree mirrors the source layout one-to-one (file stem becomes
module name) and is a pure function of the translations map, so identical
inputs hash to identical trees. The compile check drives cargo in JSON
diagnostics mode; diagnostics are attributed back to fragments through the
emission layout map.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import rustsrc
from .depgraph import DependencyGraph
from .errors import NoMapping, RepairExhausted, ToolchainMissing, UnresolvedItem
from .fragments import STRUCT_DEF, SourceProject

TRANSLATED = "Translated"
MOCKED = "Mocked"
VALIDATED = "Validated"
INEQUIVALENT = "Inequivalent"

# pinned support crates: lazy statics, the unified error type, and the
# marshaling pair used by probes, mocks and equivalence tests
PINNED_DEPENDENCIES = (
    ("anyhow", "=1.0.104"),
    ("once_cell", "=1.21.4"),
    ("serde", "=1.0.229"),
    ("serde_json", "=1.0.151"),
)

# Go standard library imports with no required external crate (None) or a
# known crate mapping; anything else goes to the backend.
STD_IMPORT_TABLE: dict[str, tuple[str, str] | None] = {
    "errors": None,
    "fmt": None,
    "math": None,
    "os": None,
    "sort": None,
    "strconv": None,
    "strings": None,
    "unicode": None,
    "unicode/utf8": None,
    "regexp": ("regex", "1"),
    "math/rand": ("rand", "0.8"),
    "time": ("chrono", "0.4"),
}


@dataclass
class TargetFragment:
    fragment_id: str
    code: str
    target_file: str
    status: str = TRANSLATED
    frozen_signature: str = ""
    imports_internal: list[str] = field(default_factory=list)
    imports_external: list[tuple[str, str]] = field(default_factory=list)
    exported_items: list[str] = field(default_factory=list)
    extra_deps: list[str] = field(default_factory=list)  # target-level deps (sub-traits)
    trait_items: list[tuple[str, str]] = field(default_factory=list)  # (owner id, sub-trait)
    attempts: int = 0

    def __post_init__(self):
        if self.status == MOCKED and not self.frozen_signature:
            raise ValueError(f"{self.fragment_id}: mocked fragments need a frozen signature")

    def primary_fn(self) -> rustsrc.RustFn | None:
        return rustsrc.find_fn(self.code)


@dataclass
class Diagnostic:
    level: str
    code: str
    message: str
    file: str
    span: tuple[int, int]
    rendered: str


@dataclass
class EmittedProject:
    root: Path
    layout: dict[str, tuple[str, int, int]]  # fragment id -> (rel file, line start, line end)
    tree_hash: str


def target_file_for(source_file: str) -> str:
    stem = Path(source_file).with_suffix("").as_posix()
    return stem + ".rs"


def module_path(target_file: str) -> str:
    return "crate::" + Path(target_file).with_suffix("").as_posix().replace("/", "::").replace("-", "_")


def crate_name_for(project: SourceProject) -> str:
    name = Path(project.root).name.lower().replace("-", "_")
    return name if name and name[0].isalpha() else f"p_{name}"


def _use_items(code: str) -> tuple[list[str], str]:
    """Split (use paths, remaining code)."""
    items = rustsrc.parse_items(code)
    uses = [i for i in items if i.kind == "use"]
    rest = code
    for item in sorted(uses, key=lambda i: -i.start):
        rest = rest[: item.start] + rest[item.end :]
    return [u.name for u in uses], rest.strip()


def effective_deps(
    fragment_id: str,
    graph: DependencyGraph,
    translations: dict[str, TargetFragment],
) -> list[str]:
    """Graph dependencies plus target-level ones (sub-trait owners reached
    through called methods)."""
    target = translations[fragment_id]
    deps = set(graph.dependencies(fragment_id)) | set(target.extra_deps)
    for dep_id in list(deps):
        dep = translations.get(dep_id)
        if dep is None:
            continue
        for owner, _item in dep.trait_items:
            deps.add(owner)
    deps.discard(fragment_id)
    return sorted(deps)


def _interface_ids(project: SourceProject) -> set[str]:
    from .fragments import INTERFACE_DEF

    return {f.id for f in project.fragments if f.kind == INTERFACE_DEF}


def synthesize_imports(
    fragment_id: str,
    graph: DependencyGraph,
    translations: dict[str, TargetFragment],
    project: SourceProject,
) -> TargetFragment:
    """Amend one fragment with use-declarations for its cross-file dependencies.

    Each referenced item of a dependency living in another target file gets
    exactly one `use` line; items the code never names produce nothing.
    Trait-method dispatch is invisible to a token scan, so a referenced
    interface pulls in its sub-traits, and calling an interface-implementing
    method pulls in that method's sub-trait.
    """
    target = translations[fragment_id]
    deps = effective_deps(fragment_id, graph, translations)
    if not deps:
        return target
    iface_ids = _interface_ids(project)
    idents = {t.text for t in rustsrc.tokenize_rust(target.code) if t.kind in ("ident",)}
    wanted: list[str] = []
    for dep_id in deps:
        dep = translations.get(dep_id)
        if dep is None:
            raise UnresolvedItem(dep_id)
        if dep.target_file == target.target_file:
            continue
        referenced = [item for item in dep.exported_items if item in idents]
        if referenced and dep_id in iface_ids:
            referenced = list(dep.exported_items)  # trait use implies its sub-traits
        for item in referenced:
            wanted.append(f"{module_path(dep.target_file)}::{item}")
    for dep_id in graph.dependencies(fragment_id):
        dep = translations.get(dep_id)
        if dep is None:
            continue
        for owner, item in dep.trait_items:
            owner_target = translations.get(owner)
            if owner_target is None or owner_target.target_file == target.target_file:
                continue
            wanted.append(f"{module_path(owner_target.target_file)}::{item}")
    if not wanted:
        return target
    existing, _ = _use_items(target.code)
    existing_norm = {rustsrc.normalize_rust(e) for e in existing}
    lines = [f"use {path};" for path in sorted(set(wanted))
             if rustsrc.normalize_rust(path) not in existing_norm]
    if not lines:
        return target
    amended = replace(target, code="\n".join(lines) + "\n" + target.code,
                      imports_internal=sorted(set(target.imports_internal) | set(wanted)))
    return amended


def set_visibility(
    translations: dict[str, TargetFragment],
    graph: DependencyGraph,
    project: SourceProject,
) -> dict[str, TargetFragment]:
    """Visibility pass: exported Go names become `pub`; items used from
    another target file become `pub(crate)`; everything else stays private."""
    out: dict[str, TargetFragment] = {}
    used_cross_file: dict[str, set[str]] = {fid: set() for fid in translations}
    for fid, target in translations.items():
        deps = effective_deps(fid, graph, translations)
        idents = {t.text for t in rustsrc.tokenize_rust(target.code) if t.kind == "ident"}
        for dep_id in deps:
            dep = translations.get(dep_id)
            if dep is None or dep.target_file == target.target_file:
                continue
            for item in dep.exported_items:
                if item in idents:
                    used_cross_file[dep_id].add(item)
    for fid, target in translations.items():
        code = target.code
        try:
            frag = project.by_id(fid)
            go_exported = frag.name[:1].isupper()
            is_struct = frag.kind == STRUCT_DEF
        except KeyError:
            go_exported = False
            is_struct = False
        for item in target.exported_items:
            vis = None
            if go_exported:
                vis = "pub"
            elif item in used_cross_file.get(fid, set()):
                vis = "pub(crate)"
            if vis:
                code = rustsrc.set_item_visibility(code, item, vis, public_fields=is_struct)
        out[fid] = replace(target, code=code) if code != target.code else target
    return out


def amend_translations(
    translations: dict[str, TargetFragment],
    graph: DependencyGraph,
    project: SourceProject,
) -> dict[str, TargetFragment]:
    """Imports plus visibility, ready for emission."""
    amended = {}
    for fid in translations:
        amended[fid] = synthesize_imports(fid, graph, translations, project)
    return set_visibility(amended, graph, project)


def resolve_external(source_import: str, backend=None, cache: dict | None = None):
    """Map a Go import path to a (crate, version) requirement, or None when
    the Rust standard library suffices. Unknown paths consult the backend
    once and cache the answer for the run."""
    if source_import in STD_IMPORT_TABLE:
        return STD_IMPORT_TABLE[source_import]
    if cache is not None and source_import in cache:
        return cache[source_import]
    if backend is None:
        raise NoMapping(source_import)
    from .backend import BackendRequest

    prompt = (
        "Name the Rust crate that most closely provides the functionality of the Go "
        f"package {source_import!r}. Answer exactly one line: crate=<name> version=<semver>, "
        "or the single word none when the Rust standard library is enough."
    )
    reply = backend.query(BackendRequest(prompt, f"import:{source_import}", 1)).strip()
    result = None
    if reply.lower() != "none":
        fields = dict(p.split("=", 1) for p in reply.split() if "=" in p)
        if "crate" not in fields:
            raise NoMapping(source_import)
        result = (fields["crate"], fields.get("version", "*"))
    if cache is not None:
        cache[source_import] = result
    return result


MOCKCTL_RS = '''//! Test-time support: per-thread mock table and the oracle client.

use std::cell::RefCell;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

thread_local! {
    static MOCKED: RefCell<HashSet<String>> = RefCell::new(HashSet::new());
}

pub fn set_mocked(ids: &[&str]) {
    MOCKED.with(|m| {
        let mut m = m.borrow_mut();
        m.clear();
        for id in ids {
            m.insert((*id).to_string());
        }
    });
}

pub fn is_mocked(id: &str) -> bool {
    MOCKED.with(|m| m.borrow().contains(id))
}

pub fn call_oracle(id: &str, inputs: Vec<serde_json::Value>) -> (Vec<serde_json::Value>, bool, String) {
    let addr = std::env::var("ORACLE_ADDR").expect("ORACLE_ADDR not set");
    let stream = TcpStream::connect(&addr).expect("oracle connect failed");
    let mut writer = stream.try_clone().expect("oracle stream clone failed");
    let req = serde_json::json!({"id": id, "in": inputs});
    let mut line = serde_json::to_string(&req).expect("oracle request encode");
    line.push('\\n');
    writer.write_all(line.as_bytes()).expect("oracle write failed");
    writer.flush().expect("oracle flush failed");
    let mut reader = BufReader::new(stream);
    let mut reply = String::new();
    reader.read_line(&mut reply).expect("oracle read failed");
    let v: serde_json::Value = serde_json::from_str(&reply).expect("oracle reply decode");
    let out = v.get("out").and_then(|o| o.as_array()).cloned().unwrap_or_default();
    let err_flag = v.pointer("/err/flag").and_then(|f| f.as_bool()).unwrap_or(false);
    let msg = v.pointer("/err/msg").and_then(|m| m.as_str()).unwrap_or("").to_string();
    (out, err_flag, msg)
}

/// Canonical JSON text of a serde value: objects keyed in sorted order,
/// compact separators (serde_json's BTreeMap-backed default already sorts).
pub fn canonical(value: &serde_json::Value) -> String {
    serde_json::to_string(value).expect("canonical encode")
}
'''


def emit_project(
    translations: dict[str, TargetFragment],
    out_dir: str | Path,
    project: SourceProject,
    extra_external: list[tuple[str, str]] | None = None,
    dispatch: dict[str, str] | None = None,
    test_module: str | None = None,
) -> EmittedProject:
    """Write the target tree: crate manifest, module root, one module per
    source file with its fragments in source order. Deterministic: the tree
    is a pure function of the arguments."""
    out = Path(out_dir)
    src = out / "src"
    if src.exists():
        shutil.rmtree(src)
    src.mkdir(parents=True)

    order: dict[str, tuple] = {f.id: (f.file, f.span[0]) for f in project.fragments}
    by_file: dict[str, list[TargetFragment]] = {}
    for target in translations.values():
        by_file.setdefault(target.target_file, []).append(target)

    file_for_fragment: dict[str, tuple[str, int, int]] = {}
    module_names: list[str] = []
    for target_file in sorted(by_file):
        frags = sorted(by_file[target_file], key=lambda t: order.get(t.fragment_id, ("", 0)))
        uses: list[str] = []
        bodies: list[tuple[str, str]] = []
        for t in frags:
            code = dispatch[t.fragment_id] if dispatch and t.fragment_id in dispatch else t.code
            u, rest = _use_items(code)
            uses.extend(u)
            bodies.append((t.fragment_id, rest))
        lines: list[str] = []
        for u in sorted(dict.fromkeys(uses)):
            lines.append(f"use {u};")
        if lines:
            lines.append("")
        rel = Path("src") / target_file
        for fid, body in bodies:
            start_line = len(lines) + 1
            lines.extend(body.splitlines())
            file_for_fragment[fid] = (rel.as_posix(), start_line, len(lines))
            lines.append("")
        rel_abs = out / rel
        rel_abs.parent.mkdir(parents=True, exist_ok=True)
        rel_abs.write_text("\n".join(lines).rstrip() + "\n", encoding="utf-8")
        module_names.append(Path(target_file).with_suffix("").as_posix().replace("-", "_"))

    root_lines = ["#![allow(nonstandard_style)]", ""]
    for name in sorted(module_names):
        if "/" in name:
            continue  # nested modules are declared by their parent mod.rs
        root_lines.append(f"pub mod {name};")
    nested = sorted({n.split("/", 1)[0] for n in module_names if "/" in n})
    for parent in nested:
        root_lines.append(f"pub mod {parent};")
        children = sorted({n.split("/", 1)[1] for n in module_names if n.startswith(parent + "/")})
        mod_rs = src / parent / "mod.rs"
        mod_rs.parent.mkdir(parents=True, exist_ok=True)
        mod_rs.write_text("".join(f"pub mod {c};\n" for c in children), encoding="utf-8")
    root_lines.append("pub mod mockctl;")
    (src / "mockctl.rs").write_text(MOCKCTL_RS, encoding="utf-8")
    if test_module is not None:
        (src / "io_equiv.rs").write_text(test_module, encoding="utf-8")
        root_lines.append("#[cfg(test)]")
        root_lines.append("mod io_equiv;")
    (src / "lib.rs").write_text("\n".join(root_lines) + "\n", encoding="utf-8")

    deps: dict[str, str] = {name: ver for name, ver in PINNED_DEPENDENCIES}
    for target in translations.values():
        for name, ver in target.imports_external:
            deps.setdefault(name, ver)
    for name, ver in extra_external or []:
        deps.setdefault(name, ver)
    manifest = [
        "[package]",
        f'name = "{crate_name_for(project)}"',
        'version = "0.1.0"',
        'edition = "2021"',
        "",
        "[dependencies]",
    ]
    for name in sorted(deps):
        if name == "serde":
            manifest.append(f'serde = {{ version = "{deps[name]}", features = ["derive"] }}')
        else:
            manifest.append(f'{name} = "{deps[name]}"')
    manifest += ["", "[profile.dev]", "debug = false", ""]
    (out / "Cargo.toml").write_text("\n".join(manifest), encoding="utf-8")

    return EmittedProject(root=out, layout=file_for_fragment, tree_hash=tree_hash(out))


def tree_hash(root: str | Path) -> str:
    """Hash of the emitted project proper (manifest plus src tree)."""
    root = Path(root)
    h = hashlib.sha256()
    files = [root / "Cargo.toml"] if (root / "Cargo.toml").exists() else []
    files += sorted(p for p in (root / "src").rglob("*") if p.is_file())
    for p in files:
        h.update(p.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(p.read_bytes())
        h.update(b"\0")
    return h.hexdigest()


def cargo_available() -> bool:
    return shutil.which("cargo") is not None


def _cargo_env(project_root: Path) -> dict:
    env = dict(os.environ)
    cache = os.environ.get("RUSTPORT_TARGET_DIR")
    if cache:
        env["CARGO_TARGET_DIR"] = cache
    return env


def compile_check(project_root: str | Path, offline: bool = False,
                  all_targets: bool = False) -> list[Diagnostic]:
    """Run the target compiler with JSON diagnostics; returns level=error
    diagnostics (empty list means the project compiles)."""
    root = Path(project_root)
    if not cargo_available():
        raise ToolchainMissing("cargo is not on PATH")
    cmd = ["cargo", "check", "--message-format=json", "--quiet"]
    if all_targets:
        cmd.append("--all-targets")
    if offline:
        cmd.append("--offline")
    proc = subprocess.run(cmd, cwd=root, capture_output=True, text=True, env=_cargo_env(root))
    diags = parse_cargo_json(proc.stdout)
    errors = [d for d in diags if d.level == "error"]
    if proc.returncode != 0 and not errors:
        errors.append(
            Diagnostic("error", "cargo", proc.stderr.strip()[:2000], "Cargo.toml", (0, 0),
                       proc.stderr.strip()[:2000])
        )
    return errors


def cargo_test(project_root: str | Path, *, env: dict | None = None, offline: bool = False,
               test_filter: str = "") -> subprocess.CompletedProcess:
    root = Path(project_root)
    if not cargo_available():
        raise ToolchainMissing("cargo is not on PATH")
    cmd = ["cargo", "test", "--quiet"]
    if offline:
        cmd.append("--offline")
    if test_filter:
        cmd += [test_filter, "--", "--exact"]
    run_env = _cargo_env(root)
    if env:
        run_env.update(env)
    return subprocess.run(cmd, cwd=root, capture_output=True, text=True, env=run_env)


def parse_cargo_json(stdout: str) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for line in stdout.splitlines():
        line = line.strip()
        if not line.startswith("{"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            continue
        if obj.get("reason") != "compiler-message":
            continue
        msg = obj.get("message", {})
        level = msg.get("level", "")
        if level not in ("error", "warning"):
            continue
        text = msg.get("message", "")
        if level == "error" and text.startswith("aborting due to"):
            continue
        code = (msg.get("code") or {}).get("code", "") or ""
        file = ""
        span = (0, 0)
        for s in msg.get("spans", []):
            if s.get("is_primary"):
                file = s.get("file_name", "")
                span = (s.get("line_start", 0), s.get("line_end", 0))
                break
        diags.append(Diagnostic(level, code, text, file, span, msg.get("rendered") or text))
    return diags


def attribute_diagnostics(
    diagnostics: list[Diagnostic],
    layout: dict[str, tuple[str, int, int]],
) -> dict[str | None, list[Diagnostic]]:
    """Map diagnostics onto fragments by file and span containment; unmatched
    diagnostics key on None (treated as belonging to the newest fragment)."""
    out: dict[str | None, list[Diagnostic]] = {}
    for diag in diagnostics:
        owner = None
        for fid, (file, start, end) in layout.items():
            if diag.file == file and start <= diag.span[0] <= end:
                owner = fid
                break
        out.setdefault(owner, []).append(diag)
    return out


def repair(
    fragment_id: str,
    diagnostics: list[Diagnostic],
    translations: dict[str, TargetFragment],
    *,
    backend,
    graph: DependencyGraph,
    project: SourceProject,
    rule_ids: list[str],
    out_dir: str | Path,
    fragment=None,
    registry=None,
    freeze_signature: bool = False,
    max_tries: int = 15,
    validated_ids: frozenset = frozenset(),
    dispatch: dict[str, str] | None = None,
    test_module: str | None = None,
    offline: bool = False,
) -> tuple[dict[str, TargetFragment], list[Diagnostic]]:
    """Localized compile repair: requery until the project compiles, changing
    only the named fragment. Edits that surface diagnostics inside already-
    validated fragments are rejected and requeried. Returns the updated
    translations and the final diagnostics (empty on success)."""
    from . import rules as rules_mod
    from .backend import BackendRequest

    if not diagnostics:
        return translations, []
    current = dict(translations)
    frozen_text = current[fragment_id].frozen_signature
    diags = diagnostics
    for attempt in range(1, max_tries + 1):
        prompt = render_repair_prompt(
            current[fragment_id].code, diags, frozen_text if freeze_signature else ""
        )
        code = backend.query(BackendRequest(prompt, fragment_id, attempt))
        violations = []
        for rid in rule_ids:
            violations += rules_mod.check_conclusion(rid, code, fragment=fragment, registry=registry)
        if freeze_signature and not violations:
            fn = rustsrc.find_fn(code)
            if fn is None or frozen_text and fn.normalized_signature() != frozen_text:
                violations.append("frozen signature changed")
        if violations:
            continue
        candidate = dict(current)
        candidate[fragment_id] = replace(candidate[fragment_id], code=code)
        amended = amend_translations(candidate, graph, project)
        emitted = emit_project(amended, out_dir, project, dispatch=dispatch, test_module=test_module)
        new_diags = compile_check(emitted.root, offline=offline)
        if not new_diags:
            return candidate, []
        owners = attribute_diagnostics(new_diags, emitted.layout)
        out_of_scope = [fid for fid in owners if fid is not None and fid != fragment_id and fid in validated_ids]
        if out_of_scope:
            # the edit leaked into validated fragments: reject it and requery
            continue
        current = candidate
        diags = [d for owner, ds in owners.items() for d in ds]
    raise RepairExhausted(f"{fragment_id}: {len(diags)} diagnostics after {max_tries} repair tries")


def render_repair_prompt(code: str, diagnostics: list[Diagnostic], frozen_signature: str = "") -> str:
    rendered = "\n".join(d.rendered for d in diagnostics)
    parts = [
        "The following Rust code fragment fails to compile inside a larger project.",
        code.rstrip(),
        "",
        "Compiler diagnostics:",
        rendered.rstrip(),
        "",
        "Return a corrected version of this fragment only; every other part of the "
        "project must stay unchanged.",
    ]
    if frozen_signature:
        parts.append("The signature is frozen and must be reproduced exactly: " + frozen_signature)
    return "\n".join(parts) + "\n"
