"""Execution snapshots: instrumentation, collection, storage, projection.

A snapshot is one recorded call of a source function during the source
project's own test suite: canonical-JSON inputs (receiver first for
methods), extended outputs (returns, then receiver post-state, then
pointer-argument post-states), and an error flag. Snapshot files are JSON
Lines so concurrent test writers can append whole records atomically.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from . import canonjson
from .errors import DecodeError, InstrumentationFailure, TestSuiteFailure, ToolchainMissing
from .fragments import GLOBAL_VAR, METHOD, SourceFragment, SourceProject
from .golang import code_tokens, tokenize

SHIM_IMPORT = "snapshim"
DEFAULT_SHIM_MODULE = "rustport.local/goruntime"


@dataclass(frozen=True)
class Snapshot:
    fragment_id: str
    inputs: tuple
    outputs: tuple
    err: bool = False
    err_msg: str = ""
    test_name: str = ""

    def key(self) -> tuple:
        return (
            self.fragment_id,
            canonjson.dumps(list(self.inputs)),
            canonjson.dumps(list(self.outputs)),
            self.err,
        )

    def to_json(self) -> dict:
        return {
            "id": self.fragment_id,
            "test": self.test_name,
            "in": list(self.inputs),
            "out": list(self.outputs),
            "err": {"flag": self.err, "msg": self.err_msg},
        }

    @staticmethod
    def from_json(obj: dict) -> "Snapshot":
        err = obj.get("err") or {}
        return Snapshot(
            fragment_id=obj["id"],
            inputs=tuple(obj.get("in", [])),
            outputs=tuple(obj.get("out", [])),
            err=bool(err.get("flag", False)),
            err_msg=err.get("msg", "") or "",
            test_name=obj.get("test", ""),
        )


@dataclass
class SnapshotStore:
    by_fragment: dict[str, list[Snapshot]] = field(default_factory=dict)

    @property
    def coverage(self) -> set[str]:
        return {fid for fid, snaps in self.by_fragment.items() if snaps}

    def add(self, snap: Snapshot) -> bool:
        bucket = self.by_fragment.setdefault(snap.fragment_id, [])
        key = snap.key()
        if any(s.key() == key for s in bucket):
            return False
        bucket.append(snap)
        return True

    def lookup(self, fragment_id: str) -> list[Snapshot]:
        return self.by_fragment.get(fragment_id, [])

    def all_snapshots(self) -> list[Snapshot]:
        return [s for fid in sorted(self.by_fragment) for s in self.by_fragment[fid]]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for snap in self.all_snapshots():
                fh.write(canonjson.dumps(snap.to_json()) + "\n")

    def is_nondeterministic(self, fragment_id: str) -> bool:
        """Two snapshots with equal inputs but different outputs."""
        seen: dict[str, tuple] = {}
        for s in self.lookup(fragment_id):
            key = canonjson.dumps(list(s.inputs))
            out = (canonjson.dumps(list(s.outputs)), s.err)
            if key in seen and seen[key] != out:
                return True
            seen[key] = out
        return False


def load_store(path: str | Path) -> SnapshotStore:
    store = SnapshotStore()
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                store.add(Snapshot.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DecodeError(i, str(exc))
    return store


# ---------------------------------------------------------------------------
# instrumentation (source-text rewriting)


def _named_results(sig_results: list[str]) -> str:
    named = [f"__r{i} {t}" for i, t in enumerate(sig_results)]
    return "(" + ", ".join(named) + ")"


def _instrumentable(frag: SourceFragment) -> bool:
    if frag.kind == METHOD and (not frag.receiver_name or frag.receiver_name == "_"):
        return False
    if any(not pname or pname == "_" for pname, _ in frag.signature.params):
        return False  # unnamed parameters cannot be serialized by name
    return not _has_named_results(frag)


def _has_named_results(frag: SourceFragment) -> bool:
    """True for `func f() (n int, err error)` style signatures: renaming the
    results would break body references, so those functions are skipped."""
    if not frag.signature.results:
        return False
    close = _params_close_offset(frag.source_text)
    toks = code_tokens(tokenize(frag.source_text[close:]))
    if not toks or toks[0].text != "(":
        return False
    if len(toks) < 3 or toks[1].kind != "ident":
        return False
    return toks[2].kind in ("ident", "keyword") or toks[2].text in ("*", "[")


def _instrument_function(frag: SourceFragment) -> str:
    """Wrap one function/method body with entry/exit logging.

    Results become named (__r0, ...) so the deferred exit hook can read the
    final values; inputs serialize at entry, outputs (returns, receiver
    post-state, pointer-arg post-states) at exit.
    """
    text = frag.source_text
    toks = code_tokens(tokenize(text))
    depth = 0
    body_open = None
    for t in toks:
        if t.text in ("(", "["):
            depth += 1
        elif t.text in (")", "]"):
            depth -= 1
        elif t.text == "{" and depth == 0:
            body_open = t
            break
    if body_open is None:
        raise InstrumentationFailure(frag.file, f"{frag.id}: no body")
    header = text[: body_open.offset].rstrip()
    body = text[body_open.offset :]

    sig = frag.signature
    results = list(sig.results)
    if results:
        # rewrite the result list into named form
        params_close = _params_close_offset(text)
        rest = text[params_close:body_open.offset].strip()
        header = text[:params_close] + " " + _named_results(results)

    inputs = []
    posts = []
    if frag.kind == METHOD:
        recv = frag.receiver_name or "__recv"
        inputs.append(recv)
        posts.append(recv)
    for i, (pname, ptype) in enumerate(sig.params):
        name = pname or f"__p{i}"
        inputs.append(name)
        if ptype.startswith("*"):
            posts.append(name)
    returns = [f"__r{i}" for i, t in enumerate(results) if t != "error" or i < len(results) - 1]
    err_expr = "nil"
    if sig.returns_error:
        err_expr = f"__r{len(results) - 1}"
        returns = [f"__r{i}" for i in range(len(results) - 1)]
    enter_args = ", ".join([f"{json.dumps(frag.id)}"] + inputs)
    ret_slice = "[]any{" + ", ".join(returns) + "}"
    post_slice = "[]any{" + ", ".join(posts) + "}"
    hook = (
        f"\n\t__snap := {SHIM_IMPORT}.Enter({enter_args})"
        f"\n\tdefer func() {{ {SHIM_IMPORT}.Exit(__snap, {ret_slice}, {post_slice}, {err_expr}) }}()"
    )
    return header + " {" + hook + body[1:]


def _params_close_offset(text: str) -> int:
    """End offset of the parameter list: the paren group right after the
    function name (receivers contribute an earlier group)."""
    toks = code_tokens(tokenize(text))
    i = 0
    while i < len(toks) and toks[i].text != "func":
        i += 1
    i += 1
    if i < len(toks) and toks[i].text == "(":  # receiver group
        depth = 0
        while i < len(toks):
            if toks[i].text == "(":
                depth += 1
            elif toks[i].text == ")":
                depth -= 1
                if depth == 0:
                    i += 1
                    break
            i += 1
    if i < len(toks) and toks[i].kind == "ident":
        i += 1
    if i >= len(toks) or toks[i].text != "(":
        raise InstrumentationFailure("<src>", "cannot find parameter list")
    depth = 0
    while i < len(toks):
        if toks[i].text == "(":
            depth += 1
        elif toks[i].text == ")":
            depth -= 1
            if depth == 0:
                return toks[i].end
        i += 1
    raise InstrumentationFailure("<src>", "unterminated parameter list")


def _instrument_global(frag: SourceFragment) -> str:
    if not frag.var_init:
        return frag.source_text
    text = frag.source_text
    idx = text.rfind(frag.var_init)
    wrapped = f"{SHIM_IMPORT}.Init({json.dumps(frag.id)}, {frag.var_init})"
    return text[:idx] + wrapped + text[idx + len(frag.var_init):]


_TEST_FN_RE = re.compile(r"(func\s+(Test\w+)\s*\(\s*(\w+)\s+\*testing\.T\s*\)\s*\{)")


def _instrument_test_file(source: str) -> str:
    def repl(m: re.Match) -> str:
        t_name = m.group(3)
        return m.group(1) + f"\n\tdefer {SHIM_IMPORT}.Test({t_name}.Name())()"

    return _TEST_FN_RE.sub(repl, source)


def _add_import(source: str, module: str) -> str:
    line = f'import {SHIM_IMPORT} "{module}/{SHIM_IMPORT}"'
    m = re.search(r"^package\s+\w+\s*$", source, flags=re.M)
    if not m:
        raise InstrumentationFailure("<src>", "no package clause")
    insert_at = m.end()
    return source[:insert_at] + "\n\n" + line + source[insert_at:]


def instrument(
    project: SourceProject,
    shim_module: str = DEFAULT_SHIM_MODULE,
    out_dir: str | Path = "",
    shim_path: str | Path = "",
) -> Path:
    """Write an instrumented copy of the source project.

    Every function/method logs its inputs and extended outputs through the
    shim; global initializers log their forced value; test functions tell
    the shim which test is running. Original semantics are untouched, the
    hooks only observe.
    """
    out = Path(out_dir)
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)
    frags_by_file: dict[str, list[SourceFragment]] = {}
    for f in project.fragments:
        frags_by_file.setdefault(f.file, []).append(f)

    for rel, source in project.files.items():
        frags = sorted(frags_by_file.get(rel, []), key=lambda f: -f.span[0])
        new_source = source
        hooked = False
        for frag in frags:
            if frag.kind == GLOBAL_VAR:
                if frag.is_const:
                    continue  # const initializers must stay compile-time
                replacement = _instrument_global(frag)
            elif frag.is_function_like:
                if not _instrumentable(frag):
                    continue  # unnamed parameters cannot be serialized by name
                replacement = _instrument_function(frag)
            else:
                continue
            idx = new_source.find(frag.source_text)
            if idx < 0:
                raise InstrumentationFailure(rel, f"{frag.id}: source text not found")
            new_source = new_source[:idx] + replacement + new_source[idx + len(frag.source_text):]
            hooked = hooked or replacement != frag.source_text
        if hooked:
            new_source = _add_import(new_source, shim_module)
        dest = out / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(new_source, encoding="utf-8")

    for rel, source in project.test_files.items():
        instrumented_tests = _instrument_test_file(source)
        if instrumented_tests != source:
            instrumented_tests = _add_import(instrumented_tests, shim_module)
        dest = out / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(instrumented_tests, encoding="utf-8")

    pkg = next(iter(project.files.values())).split()[1]
    go_mod = [
        f"module instrumented.local/{pkg}",
        "",
        "go 1.21",
        "",
        f"require {shim_module} v0.0.0",
    ]
    if shim_path:
        go_mod.append(f"replace {shim_module} => {Path(shim_path).resolve().as_posix()}")
    (out / "go.mod").write_text("\n".join(go_mod) + "\n", encoding="utf-8")
    (out / "oracle_main_gen.go").write_text(generate_oracle_registrations(project, pkg, shim_module),
                                            encoding="utf-8")
    return out


def generate_oracle_registrations(project: SourceProject, pkg: str, shim_module: str) -> str:
    """Go source registering one oracle handler per function-like fragment.

    Each handler decodes canonical inputs into the declared types, calls
    the original function, and returns the extended outputs; methods
    reconstruct the receiver from the first input slot.
    """
    lines = [
        f"package {pkg}",
        "",
        f'import oracle "{shim_module}/oracle"',
        "",
        "func OracleRegistrations() map[string]oracle.Handler {",
        "\treturn map[string]oracle.Handler{",
    ]
    for frag in project.fragments:
        if not frag.is_function_like:
            continue
        if any(_is_iface_type(project, t) for _, t in frag.signature.params):
            continue  # interface-typed inputs have no decode
        lines.append(f"\t\t{json.dumps(frag.id)}: func(in []oracle.Raw) ([]any, error) {{")
        decode = []
        args = []
        idx = 0
        if frag.kind == METHOD:
            decode.append(f"\t\t\tvar recv {frag.receiver_type}")
            decode.append(f"\t\t\toracle.MustDecode(in[{idx}], &recv)")
            idx += 1
        for i, (pname, ptype) in enumerate(frag.signature.params):
            go_t = ptype.lstrip("*")
            var = f"a{i}"
            decode.append(f"\t\t\tvar {var} {go_t}")
            decode.append(f"\t\t\toracle.MustDecode(in[{idx}], &{var})")
            args.append("&" + var if ptype.startswith("*") else var)
            idx += 1
        callee = f"recv.{frag.name}" if frag.kind == METHOD else frag.name
        results = list(frag.signature.results)
        rets = [f"r{i}" for i in range(len(results))]
        call = f"{callee}({', '.join(args)})"
        if rets:
            decode.append(f"\t\t\t{', '.join(rets)} := {call}")
        else:
            decode.append(f"\t\t\t{call}")
        out_slots = []
        err_expr = "nil"
        if frag.signature.returns_error:
            err_expr = rets[-1]
            out_slots = rets[:-1]
        else:
            out_slots = rets
        if frag.kind == METHOD:
            out_slots = out_slots + ["recv"]
        for i, (pname, ptype) in enumerate(frag.signature.params):
            if ptype.startswith("*"):
                out_slots.append(f"a{i}")
        decode.append(f"\t\t\treturn []any{{{', '.join(out_slots)}}}, {err_expr}")
        lines.extend(decode)
        lines.append("\t\t},")
    lines.append("\t}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _is_iface_type(project: SourceProject, type_text: str) -> bool:
    base = type_text.lstrip("*[]")
    return any(f.kind == "InterfaceDef" and f.name == base for f in project.fragments)


def collect(
    instrumented_dir: str | Path,
    snapshot_path: str | Path,
) -> SnapshotStore:
    """Run the instrumented project's tests and parse the snapshot file.

    The source tests must pass unmodified; a failing suite aborts
    collection.
    """
    if shutil.which("go") is None:
        raise ToolchainMissing("go is not on PATH")
    snap = Path(snapshot_path)
    if snap.exists():
        snap.unlink()
    env = {"SNAPSHOT_PATH": str(snap)}
    import os

    full_env = dict(os.environ)
    full_env.update(env)
    proc = subprocess.run(
        ["go", "test", "./..."],
        cwd=instrumented_dir,
        capture_output=True,
        text=True,
        env=full_env,
    )
    if proc.returncode != 0:
        raise TestSuiteFailure(proc.stdout[-2000:] + proc.stderr[-2000:])
    return load_store(snap)


# ---------------------------------------------------------------------------
# feasible-value projection


def slot_types(frag: SourceFragment) -> tuple[list[str], list[str]]:
    """Declared source types of the input slots and extended output slots."""
    inputs: list[str] = []
    outputs: list[str] = []
    if frag.kind == GLOBAL_VAR:
        return [], [frag.var_type or ""]
    sig = frag.signature
    if frag.kind == METHOD:
        inputs.append(frag.receiver_type)
    inputs.extend(t for _, t in sig.params)
    results = list(sig.results)
    if sig.returns_error:
        results = results[:-1]
    outputs.extend(results)
    if frag.kind == METHOD:
        outputs.append(frag.receiver_type)
    outputs.extend(t for _, t in sig.params if t.startswith("*"))
    return inputs, outputs


def feasible_values(store: SnapshotStore, project: SourceProject, type_text: str) -> list:
    """Every snapshot value observed at a slot declared as `type_text`.

    Pointer occurrences (*T) contribute their non-null values to T as well.
    Uncovered types produce the empty list (checks pass vacuously).
    """
    wanted = type_text.strip()
    values: list = []
    seen: set[str] = set()

    def take(v):
        key = canonjson.dumps(v)
        if key not in seen:
            seen.add(key)
            values.append(v)

    for frag in project.fragments:
        if frag.kind == GLOBAL_VAR:
            in_types, out_types = [], [frag.var_type]
        elif frag.is_function_like:
            in_types, out_types = slot_types(frag)
        else:
            continue
        for snap in store.lookup(frag.id):
            for tlist, vlist in ((in_types, snap.inputs), (out_types, snap.outputs)):
                for t, v in zip(tlist, vlist):
                    if t == wanted:
                        take(v)
                    elif t == "*" + wanted and v is not None:
                        take(v)
    return values


def feasible_values_for_slot(store: SnapshotStore, fragment_id: str, side: str, index: int) -> list:
    """Values seen at one (fragment, slot) position; side is 'in' or 'out'."""
    values: list = []
    seen: set[str] = set()
    for snap in store.lookup(fragment_id):
        vlist = snap.inputs if side == "in" else snap.outputs
        if snap.err and side == "out":
            continue
        if index < len(vlist):
            key = canonjson.dumps(vlist[index])
            if key not in seen:
                seen.add(key)
                values.append(vlist[index])
    return values
