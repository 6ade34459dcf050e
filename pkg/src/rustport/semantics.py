"""Semantics-driven phase: mocks, generated equivalence tests, frozen repair.

Every function-like fragment gets a dispatcher that consults a per-thread
mock table: unmocked calls run the translated body, mocked calls delegate
to the oracle endpoint with serialized inputs, exactly the composition a
mock body uses. Generated unit tests replay each fragment's snapshots with
its callees mocked and compare canonical extended outputs; a fragment with
no snapshots gets a test that always fails.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from . import rustsrc
from .assembler import (
    INEQUIVALENT,
    MOCKED,
    VALIDATED,
    TargetFragment,
    cargo_test,
    module_path,
)
from .errors import HarnessCrash, UnmarshalableSlot
from .fragments import GLOBAL_VAR, METHOD, SourceFragment, SourceProject
from .snapshots import SnapshotStore

EQUIVALENT = "equivalent"
INEQUIV = "inequivalent"
UNTESTED = "untested"
NONDETERMINISTIC = "untestable-nondeterministic"


@dataclass
class EquivalenceReport:
    fragment_id: str
    verdict: str
    results: list[dict] = field(default_factory=list)  # per-snapshot outcomes
    detail: str = ""


@dataclass
class HarnessInfo:
    """Everything codegen needs to call one translated fragment."""

    fragment: SourceFragment
    target: TargetFragment
    fn: rustsrc.RustFn | None
    impl_type: str = ""
    trait_path: str = ""
    is_display: bool = False

    @property
    def module(self) -> str:
        return module_path(self.target.target_file)

    @property
    def value_param_types(self) -> list[str]:
        out = []
        for _, t in (self.fn.params if self.fn else []):
            out.append(_value_type(t))
        return out

    @property
    def param_is_ref(self) -> list[bool]:
        return [t.strip().startswith("&") for _, t in (self.fn.params if self.fn else [])]

    @property
    def param_is_mut_ref(self) -> list[bool]:
        return [t.strip().startswith("&mut") for _, t in (self.fn.params if self.fn else [])]

    @property
    def returns(self) -> tuple[list[str], bool]:
        """(value return types, is_result)"""
        from .typecheck import _result_parts

        if self.fn is None or not self.fn.ret:
            return [], False
        return _result_parts(self.fn.ret)

    @property
    def ptr_param_indices(self) -> list[int]:
        sig = self.fragment.signature
        return [i for i, (_, t) in enumerate(sig.params) if t.startswith("*")]


def _value_type(t: str) -> str:
    t = t.strip()
    for prefix in ("&mut ", "&"):
        if t.startswith(prefix):
            return t[len(prefix):].strip()
    return t


def harness_info(fragment: SourceFragment, target: TargetFragment) -> HarnessInfo:
    fn = rustsrc.find_fn(target.code)
    impl_type = ""
    trait_path = ""
    is_display = False
    for item in rustsrc.parse_items(target.code):
        if item.kind == "impl" and item.fns:
            if rustsrc.normalize_rust(item.trait_path) in (
                "Display", "fmt::Display", "std::fmt::Display",
            ):
                is_display = True
                impl_type = item.impl_type
                continue
            if item.trait_path and rustsrc.normalize_rust(item.trait_path) in (
                "Debug", "fmt::Debug", "std::fmt::Debug",
                "Error", "error::Error", "std::error::Error",
            ):
                continue
            impl_type = item.impl_type
            trait_path = item.trait_path
            fn = item.fns[0]
    if is_display and fn is not None and fn.name == "fmt":
        fn = None
    return HarnessInfo(fragment, target, fn, impl_type, trait_path, is_display)


# ---------------------------------------------------------------------------
# mock bodies and dispatchers


def mock_body(info: HarnessInfo, indent: str = "    ") -> str:
    """Oracle-delegating body for a function with this (frozen) signature:
    serialize inputs, round-trip through the oracle, deserialize the reply
    into the return slots (error flag becomes the Result error arm)."""
    frag = info.fragment
    fn = info.fn
    if fn is None:
        raise UnmarshalableSlot(f"{frag.id}: no function to mock")
    lines: list[str] = []
    inputs = []
    if frag.kind == METHOD:
        inputs.append("serde_json::to_value(&*self).expect(\"mock encode\")")
    for (pname, ptype), is_ref in zip(fn.params, info.param_is_ref):
        expr = pname if is_ref else f"&{pname}"
        inputs.append(f"serde_json::to_value({expr}).expect(\"mock encode\")")
    lines.append(f"let (__out, __err, __msg) = crate::mockctl::call_oracle({json.dumps(frag.id)}, vec![{', '.join(inputs)}]);")
    rets, is_result = info.returns
    if is_result:
        lines.append("if __err {")
        lines.append("    return Err(anyhow::anyhow!(__msg));")
        lines.append("}")
    else:
        lines.append("let _ = (__err, __msg);")
    slot = 0
    ret_names = []
    for i, t in enumerate(rets):
        lines.append(
            f"let __r{i}: {t} = serde_json::from_value(__out[{slot}].clone()).expect(\"mock decode\");"
        )
        ret_names.append(f"__r{i}")
        slot += 1
    if frag.kind == METHOD:
        if fn.self_param == "&mut self":
            lines.append(f"*self = serde_json::from_value(__out[{slot}].clone()).expect(\"mock decode\");")
        slot += 1
    for i, (pname, ptype) in enumerate(fn.params):
        if i in info.ptr_param_indices:
            if info.param_is_mut_ref[i]:
                lines.append(f"*{pname} = serde_json::from_value(__out[{slot}].clone()).expect(\"mock decode\");")
            slot += 1
    value = "()" if not ret_names else (ret_names[0] if len(ret_names) == 1 else f"({', '.join(ret_names)})")
    if is_result:
        lines.append(f"return Ok({value});")
    elif ret_names:
        lines.append(f"return {value};")
    else:
        lines.append("return;")
    return "\n".join(indent + l for l in lines)


def gen_mock(fragment: SourceFragment, target: TargetFragment) -> str:
    """Full mock code for a fragment: the frozen signature with an oracle-
    delegating body, preserving the item shape (free fn or impl)."""
    info = harness_info(fragment, target)
    fn = info.fn
    if fn is None:
        raise UnmarshalableSlot(f"{fragment.id}: cannot mock without a function")
    body = "{\n" + mock_body(info) + "\n}"
    header = fn.header.strip()
    if info.impl_type:
        trait = f"{info.trait_path} for " if info.trait_path else ""
        return f"impl {trait}{info.impl_type} {{\n    {header} {body}\n}}\n"
    return f"{header} {body}\n"


def dispatch_code(info: HarnessInfo) -> str | None:
    """Rewritten fragment code where the public function consults the mock
    table and either delegates to the oracle or calls the original body
    (renamed __impl_*, byte-stable)."""
    frag = info.fragment
    if not frag.is_function_like or info.is_display or info.fn is None:
        return None
    if info.target.status == MOCKED:
        return None
    if any("dyn " in t for _, t in info.fn.params):
        return None  # trait-object slots have no codec, so no mock path
    fn = info.fn
    impl_name = f"__impl_{fn.name}"
    args = ", ".join(pname for pname, _ in fn.params)
    if frag.kind == METHOD:
        call = f"self.{impl_name}({args})"
    else:
        call = f"{impl_name}({args})"
    guard = (
        f"    if crate::mockctl::is_mocked({json.dumps(frag.id)}) {{\n"
        + mock_body(info, indent="    " * 2)
        + "\n    }\n"
    )
    header = fn.header.strip()
    if frag.kind == METHOD and not info.trait_path and not header.startswith("pub"):
        header = "pub(crate) " + header  # the generated test module calls it
    dispatcher_fn = f"{header} {{\n{guard}    {call}\n}}"
    impl_header = re.sub(rf"\bfn\s+{re.escape(fn.name)}\b", f"fn {impl_name}", header, count=1)
    impl_header = impl_header.replace("pub(crate) ", "").replace("pub ", "")
    impl_fn = f"{impl_header} {fn.body}"

    code = info.target.code
    item_span = None
    for item in rustsrc.parse_items(code):
        if item.kind == "fn" and item.fn and item.fn.name == fn.name:
            item_span = (item.start, item.end, None)
            break
        if item.kind == "impl" and item.fns and item.fns[0].name == fn.name:
            item_span = (item.start, item.end, item)
            break
    if item_span is None:
        return None
    start, end, impl_item = item_span
    if impl_item is None:
        replacement = dispatcher_fn + "\n" + impl_fn
    else:
        trait = f"{impl_item.trait_path} for " if impl_item.trait_path else ""
        replacement = (
            f"impl {trait}{impl_item.impl_type} {{\n    "
            + dispatcher_fn.replace("\n", "\n    ")
            + "\n}\n"
            + f"impl {impl_item.impl_type} {{\n    "
            + impl_fn.replace("\n", "\n    ")
            + "\n}"
        )
    return code[:start] + replacement + code[end:]


def build_dispatch(
    project: SourceProject,
    translations: dict[str, TargetFragment],
) -> dict[str, str]:
    out: dict[str, str] = {}
    for frag in project.fragments:
        target = translations.get(frag.id)
        if target is None:
            continue
        code = dispatch_code(harness_info(frag, target))
        if code is not None:
            out[frag.id] = code
    return out


# ---------------------------------------------------------------------------
# generated unit tests


TEST_MODULE_HEADER = '''//! Generated I/O-equivalence tests: one test per fragment, replaying the
//! recorded execution snapshots with callees mocked.

pub struct Snap {
    pub inputs: Vec<serde_json::Value>,
    pub outputs: Vec<serde_json::Value>,
    pub err: bool,
    pub test: String,
}

pub fn load_snapshots(id: &str) -> Vec<Snap> {
    let path = std::env::var("RUSTPORT_SNAPSHOTS").expect("RUSTPORT_SNAPSHOTS not set");
    let text = std::fs::read_to_string(&path).expect("read snapshot file");
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).expect("snapshot line");
        if v.get("id").and_then(|x| x.as_str()) != Some(id) {
            continue;
        }
        out.push(Snap {
            inputs: v.get("in").and_then(|x| x.as_array()).cloned().unwrap_or_default(),
            outputs: v.get("out").and_then(|x| x.as_array()).cloned().unwrap_or_default(),
            err: v.pointer("/err/flag").and_then(|x| x.as_bool()).unwrap_or(false),
            test: v.get("test").and_then(|x| x.as_str()).unwrap_or("").to_string(),
        });
    }
    out
}

pub fn canon(values: &[serde_json::Value]) -> String {
    crate::mockctl::canonical(&serde_json::Value::Array(values.to_vec()))
}
'''


def test_fn_name(fragment_id: str) -> str:
    return "equiv_" + re.sub(r"[^A-Za-z0-9]", "_", fragment_id).lower()


def gen_unit_test(
    fragment: SourceFragment,
    target: TargetFragment,
    store: SnapshotStore,
    mocked_ids: list[str],
    struct_paths: dict[str, str],
) -> str:
    """One #[test] that replays every snapshot and panics with an
    IO-INEQUIVALENT witness list on any mismatch; fragments with no
    snapshots get an unconditionally failing test."""
    name = test_fn_name(fragment.id)
    snaps = store.lookup(fragment.id)
    lines = ["#[test]", f"fn {name}() {{"]
    if not snaps:
        lines.append(
            f'    panic!("IO-UNTESTED {{}}", {json.dumps(fragment.id)});'
        )
        lines.append("}")
        return "\n".join(lines)
    mocked = ", ".join(json.dumps(m) for m in mocked_ids)
    lines.append(f"    crate::mockctl::set_mocked(&[{mocked}]);")
    lines.append(f"    let snaps = load_snapshots({json.dumps(fragment.id)});")
    lines.append("    let mut failures: Vec<String> = Vec::new();")
    lines.append("    for (i, snap) in snaps.iter().enumerate() {")
    body = _per_snapshot_body(fragment, target, struct_paths)
    lines.extend("        " + l for l in body)
    lines.append("    }")
    lines.append("    if !failures.is_empty() {")
    lines.append(
        f'        panic!("IO-INEQUIVALENT fragment={{}} witnesses=[{{}}]", {json.dumps(fragment.id)}, failures.join(", "));'
    )
    lines.append("    }")
    lines.append("}")
    return "\n".join(lines)


def _per_snapshot_body(
    fragment: SourceFragment,
    target: TargetFragment,
    struct_paths: dict[str, str],
) -> list[str]:
    info = harness_info(fragment, target)
    lines: list[str] = []
    if fragment.kind == GLOBAL_VAR:
        item_name = target.exported_items[0]
        lines.append(f"let forced = &*{info.module}::{item_name};")
        lines.append("let actual = vec![serde_json::to_value(forced).expect(\"encode\")];")
        lines.append("let expected = snap.outputs.clone();")
        lines.extend(_compare_lines(fragment.id))
        return lines
    if info.is_display:
        recv_ty = struct_paths.get(fragment.receiver_type, fragment.receiver_type)
        lines.append(
            f"let recv: {recv_ty} = serde_json::from_value(snap.inputs[0].clone()).expect(\"decode receiver\");"
        )
        lines.append('let msg = format!("{}", recv);')
        lines.append("let actual = vec![serde_json::to_value(&msg).expect(\"encode\"), "
                     "serde_json::to_value(&recv).expect(\"encode\")];")
        lines.append("let expected = snap.outputs.clone();")
        lines.extend(_compare_lines(fragment.id))
        return lines

    fn = info.fn
    slot = 0
    if fragment.kind == METHOD:
        recv_ty = struct_paths.get(fragment.receiver_type, fragment.receiver_type)
        mut = "mut " if fn.self_param == "&mut self" else ""
        lines.append(
            f"let {mut}recv: {recv_ty} = serde_json::from_value(snap.inputs[{slot}].clone()).expect(\"decode receiver\");"
        )
        slot += 1
    arg_exprs = []
    for i, ((pname, ptype), vt) in enumerate(zip(fn.params, info.value_param_types)):
        vt_path = struct_paths.get(vt, vt)
        mut = "mut " if info.param_is_mut_ref[i] else ""
        lines.append(
            f"let {mut}a{i}: {vt_path} = serde_json::from_value(snap.inputs[{slot}].clone()).expect(\"decode arg\");"
        )
        slot += 1
        if info.param_is_mut_ref[i]:
            arg_exprs.append(f"&mut a{i}")
        elif info.param_is_ref[i]:
            arg_exprs.append(f"&a{i}")
        else:
            arg_exprs.append(f"a{i}")
    if fragment.kind == METHOD:
        call_expr = f"recv.{fn.name}({', '.join(arg_exprs)})"
        if info.trait_path:
            # trait methods dispatch via fully-qualified syntax (no use lines)
            trait_fq = f"{info.module}::{info.trait_path}" if "::" not in info.trait_path else info.trait_path
            trait_fq = _trait_fq(info, struct_paths)
            recv_ref = "&mut recv" if fn.self_param == "&mut self" else "&recv"
            call_expr = f"{trait_fq}::{fn.name}({', '.join([recv_ref] + arg_exprs)})"
    else:
        call_expr = f"{info.module}::{fn.name}({', '.join(arg_exprs)})"
    rets, is_result = info.returns
    lines.append(f"let __res = {call_expr};")
    push_posts = []
    if fragment.kind == METHOD:
        push_posts.append("serde_json::to_value(&recv).expect(\"encode\")")
    for i in info.ptr_param_indices:
        push_posts.append(f"serde_json::to_value(&a{i}).expect(\"encode\")")
    if is_result:
        lines.append("if snap.err {")
        lines.append("    if __res.is_ok() {")
        lines.append(
            '        failures.push(format!("{{\\"snapshot\\":{},\\"test\\":{:?},\\"detail\\":\\"expected the error arm, got success\\"}}", i, snap.test));'
        )
        lines.append("    }")
        lines.append("    continue;")
        lines.append("}")
        lines.append("let __vals = match __res {")
        lines.append("    Ok(v) => v,")
        lines.append("    Err(e) => {")
        lines.append(
            '        failures.push(format!("{{\\"snapshot\\":{},\\"test\\":{:?},\\"detail\\":\\"expected success, got error {}\\"}}", i, snap.test, e));'
        )
        lines.append("        continue;")
        lines.append("    }")
        lines.append("};")
        ret_exprs = _ret_exprs("__vals", rets)
    else:
        lines.append("if snap.err { continue; }")
        ret_exprs = _ret_exprs("__res", rets)
    lines.append("let mut actual: Vec<serde_json::Value> = Vec::new();")
    for expr in ret_exprs:
        lines.append(f"actual.push(serde_json::to_value({expr}).expect(\"encode\"));")
    for expr in push_posts:
        lines.append(f"actual.push({expr});")
    lines.append("let expected = snap.outputs.clone();")
    lines.extend(_compare_lines(fragment.id))
    return lines


def _trait_fq(info: HarnessInfo, struct_paths: dict[str, str]) -> str:
    """Fully-qualified path of the trait an impl-interface fragment targets."""
    name = info.trait_path
    if "::" in name:
        return name
    owner_path = struct_paths.get(("trait", name))
    return owner_path or name


def _ret_exprs(var: str, rets: list[str]) -> list[str]:
    if not rets:
        return []
    if len(rets) == 1:
        return [f"&{var}"]
    return [f"&{var}.{i}" for i in range(len(rets))]


def _compare_lines(fragment_id: str) -> list[str]:
    return [
        "let got = canon(&actual);",
        "let want = canon(&expected);",
        "if got != want {",
        '    failures.push(format!("{{\\"snapshot\\":{},\\"test\\":{:?},\\"expected\\":{:?},\\"actual\\":{:?}}}", i, snap.test, want, got));',
        "}",
    ]


def build_test_module(
    project: SourceProject,
    translations: dict[str, TargetFragment],
    store: SnapshotStore,
    graph,
) -> str:
    """The whole generated test module, one test per testable fragment."""
    struct_paths = {}
    for frag in project.fragments:
        t = translations.get(frag.id)
        if t is None:
            continue
        if frag.kind == "StructDef" and t.exported_items:
            struct_paths[frag.name] = f"{module_path(t.target_file)}::{t.exported_items[0]}"
        if frag.kind == "InterfaceDef":
            for item in t.exported_items:
                struct_paths[("trait", item)] = f"{module_path(t.target_file)}::{item}"
    parts = [TEST_MODULE_HEADER]
    for frag in project.fragments:
        target = translations.get(frag.id)
        if target is None:
            continue
        if not (frag.is_function_like or frag.kind == GLOBAL_VAR):
            continue
        if _is_unharnessable(frag, project):
            continue
        mocked = mocked_callees(frag, graph, project, translations)
        parts.append(gen_unit_test(frag, target, store, mocked, struct_paths))
    return "\n\n".join(parts) + "\n"


def _is_unharnessable(frag: SourceFragment, project: SourceProject) -> bool:
    """Interface-typed parameters cannot be deserialized; such fragments get
    no generated test (they stay uncovered)."""
    if not frag.is_function_like:
        return False
    iface_names = {f.name for f in project.fragments if f.kind == "InterfaceDef"}
    return any(t.lstrip("*") in iface_names for _, t in frag.signature.params)


def mocked_callees(
    frag: SourceFragment,
    graph,
    project: SourceProject,
    translations: dict[str, TargetFragment],
) -> list[str]:
    """Direct function-like dependencies that can delegate to the oracle."""
    out = []
    for dep_id in graph.dependencies(frag.id):
        if dep_id == frag.id:
            continue
        try:
            dep = project.by_id(dep_id)
        except KeyError:
            continue
        if not dep.is_function_like:
            continue
        target = translations.get(dep_id)
        if target is None:
            continue
        info = harness_info(dep, target)
        if info.is_display or info.fn is None:
            continue
        if any("dyn " in t for _, t in info.fn.params):
            continue
        out.append(dep_id)
    return sorted(out)


def _matched_rules(frag, translate_ctx):
    from . import rules as rules_mod

    return rules_mod.match_rules(frag, translate_ctx.interface_sigs)


def upgrade_for_harness(translations: dict[str, TargetFragment]) -> dict[str, TargetFragment]:
    """Semantic-phase working copy: primary items become at least crate-public
    so the generated test module can reach them (the crate's outward API is
    unchanged)."""
    from dataclasses import replace

    out = {}
    for fid, target in translations.items():
        code = target.code
        for item in target.exported_items:
            code = rustsrc.set_item_visibility(code, item, "pub(crate)", public_fields=True)
        out[fid] = replace(target, code=code) if code != target.code else target
    return out


def parse_test_outcome(fragment_id: str, proc) -> EquivalenceReport:
    """Classify one cargo-test run: pass, marked inequivalence, untested
    marker, or a harness crash (anything unexplained)."""
    text = proc.stdout + "\n" + proc.stderr
    name = test_fn_name(fragment_id)
    if proc.returncode == 0 and re.search(r"\btest result: ok\b", text) and "0 passed" not in text.split("test result:")[-1]:
        return EquivalenceReport(fragment_id, EQUIVALENT)
    if "IO-UNTESTED" in text:
        return EquivalenceReport(fragment_id, UNTESTED, detail="no snapshots recorded")
    if "IO-INEQUIVALENT" in text:
        results = []
        for line in text.splitlines():
            if "IO-INEQUIVALENT" not in line:
                continue
            m = re.search(r"witnesses=\[(.*)\]\s*$", line)
            if m:
                try:
                    results = json.loads("[" + m.group(1).strip() + "]")
                except json.JSONDecodeError:
                    results = [{"detail": m.group(1)[:400]}]
            break
        return EquivalenceReport(fragment_id, INEQUIV, results=results)
    if proc.returncode == 0:
        # the filter matched no test (e.g. unharnessable fragment)
        return EquivalenceReport(fragment_id, UNTESTED, detail="no generated test")
    raise HarnessCrash(f"{fragment_id}: {text[-1500:]}")


def check_fn_equiv(
    fragment_id: str,
    project_root,
    snapshot_path: str,
    oracle_addr: str = "",
    offline: bool = False,
) -> EquivalenceReport:
    """Run the fragment's generated unit test and classify the outcome."""
    env = {"RUSTPORT_SNAPSHOTS": str(snapshot_path)}
    if oracle_addr:
        env["ORACLE_ADDR"] = oracle_addr
    proc = cargo_test(
        project_root,
        env=env,
        offline=offline,
        test_filter=f"io_equiv::{test_fn_name(fragment_id)}",
    )
    return parse_test_outcome(fragment_id, proc)


@dataclass
class SemanticOutcome:
    reports: dict[str, EquivalenceReport]
    translations: dict[str, TargetFragment]

    def validated(self) -> set[str]:
        return {fid for fid, r in self.reports.items() if r.verdict == EQUIVALENT}


def semantic_phase(
    project: SourceProject,
    graph,
    translations: dict[str, TargetFragment],
    store: SnapshotStore,
    *,
    out_dir,
    translate_ctx=None,
    semantic_max_tries: int = 5,
    requery_budget: int = 10,
    oracle_addr: str = "",
    snapshot_path: str = "",
    offline: bool = False,
    runlog=None,
) -> SemanticOutcome:
    """Per fragment in schedule order: check I/O equivalence with callees
    mocked; on failure regenerate the body with the signature frozen and
    re-check until equivalence or budget exhaustion. Signatures and types
    never change in this phase."""
    from .assembler import amend_translations, compile_check, emit_project, repair
    from .errors import RepairExhausted
    from .translate import translate_fragment

    reports: dict[str, EquivalenceReport] = {}
    current = dict(translations)

    def emit_harness(trans):
        amended = upgrade_for_harness(amend_translations(trans, graph, project))
        dispatch = build_dispatch(project, amended)
        test_module = build_test_module(project, amended, store, graph)
        emitted = emit_project(amended, out_dir, project, dispatch=dispatch, test_module=test_module)
        return compile_check(emitted.root, offline=offline, all_targets=True)

    def emit_and_compile(trans):
        diags = emit_harness(trans)
        if diags:
            raise HarnessCrash(f"semantic emission does not compile: {diags[0].message}")

    emit_and_compile(current)
    order = [fid for grp in graph.groups for fid in grp]
    for fid in order:
        frag = project.by_id(fid)
        target = current.get(fid)
        if target is None or not (frag.is_function_like or frag.kind == GLOBAL_VAR):
            continue
        info = harness_info(frag, target)
        if _is_unharnessable(frag, project):
            reports[fid] = EquivalenceReport(fid, UNTESTED, detail="interface-typed inputs")
            continue
        if not store.lookup(fid):
            reports[fid] = EquivalenceReport(fid, UNTESTED, detail="no snapshots recorded")
            continue
        if store.is_nondeterministic(fid):
            reports[fid] = EquivalenceReport(fid, NONDETERMINISTIC,
                                             detail="equal inputs with differing outputs")
            continue
        budget = semantic_max_tries
        validated_ids = frozenset(
            k for k, t in current.items() if t.status == VALIDATED
        )
        report = check_fn_equiv(fid, out_dir, snapshot_path, oracle_addr, offline)
        while report.verdict == INEQUIV and budget > 0 and translate_ctx is not None \
                and frag.is_function_like:
            budget -= 1
            if runlog is not None:
                runlog.emit({"event": "semantic-retry", "fragment_id": fid,
                             "witnesses": report.results[:3]})
            try:
                regenerated = translate_fragment(frag, translate_ctx, current,
                                                 requery_budget=requery_budget,
                                                 freeze_signature=True)
            except Exception as exc:  # budget exhausted or postprocess failure
                if runlog is not None:
                    runlog.emit({"event": "semantic-regen-failed", "fragment_id": fid,
                                 "error": str(exc)[:300]})
                break
            from dataclasses import replace as dc_replace

            previous = current[fid]
            current[fid] = dc_replace(target, code=regenerated.code,
                                      frozen_signature=regenerated.frozen_signature)
            diags = emit_harness(current)
            if diags:
                try:
                    rule_ids = [r for r, _ in _matched_rules(frag, translate_ctx)]
                    current, final = repair(
                        fid, diags, current,
                        backend=translate_ctx.backend, graph=graph, project=project,
                        rule_ids=rule_ids, out_dir=out_dir, fragment=frag,
                        registry=translate_ctx.registry, freeze_signature=True,
                        max_tries=max(budget, 1), validated_ids=validated_ids,
                        offline=offline,
                    )
                    if final:
                        raise RepairExhausted(fid)
                except RepairExhausted:
                    # keep the project compiling: fall back to the last good body
                    current[fid] = previous
                emit_and_compile(current)
            report = check_fn_equiv(fid, out_dir, snapshot_path, oracle_addr, offline)
        reports[fid] = report
        if frag.is_function_like or frag.kind == GLOBAL_VAR:
            from dataclasses import replace as dc_replace

            if report.verdict == EQUIVALENT and current[fid].status != MOCKED:
                current[fid] = dc_replace(current[fid], status=VALIDATED)
            elif report.verdict == INEQUIV:
                current[fid] = dc_replace(current[fid], status=INEQUIVALENT)
    return SemanticOutcome(reports, current)
