"""Pipeline orchestration: configuration, run state, both phases, metrics.

The type-driven phase walks the schedule translating, compiling/repairing
and compatibility-checking each fragment, mocking fragments that exhaust
their budget with a compatible signature and aborting (resumably) when
even the signature cannot be made compatible. The semantics-driven phase
then validates I/O equivalence per fragment with callees mocked, never
touching a signature.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import rules, rustsrc, semantics
from .assembler import (
    MOCKED,
    TargetFragment,
    amend_translations,
    attribute_diagnostics,
    compile_check,
    emit_project,
    repair,
    tree_hash,
)
from .backend import Backend, InteractionLog, LiveProvider, ReplayProvider, ScriptedProvider
from .depgraph import build_dependency_graph, schedule_fragments
from .errors import (
    BudgetExhausted,
    RepairExhausted,
    ToolchainMissing,
    TranslationAborted,
)
from .fallback import FallbackProvider
from .fragments import SourceProject, interface_methods, parse_project
from .oracle import OracleServer
from .probes import ProbeRunner, struct_defs_from
from .runlog import RunLog
from .semantics import EQUIVALENT, gen_mock, semantic_phase
from .snapshots import SnapshotStore, load_store
from .translate import TranslateContext, translate_fragment
from .typecheck import (
    VACUOUS,
    CompatReport,
    SourceCodec,
    check_global_compat,
    check_project_compat,
    check_signature_compat,
    check_struct_compat,
)

PHASE_PARTITIONED = "Partitioned"
PHASE_TYPE = "TypeDriven"
PHASE_SEMANTICS = "SemanticsDriven"
PHASE_DONE = "Done"

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_TOOLCHAIN = 3


@dataclass
class RunConfig:
    source_root: str
    out_dir: str
    provider: str = "fallback"  # replay | scripted | fallback | live
    replay_log: str = ""
    snapshots_path: str = ""
    no_snapshots: bool = False
    requery_budget: int = 10
    type_max_tries: int = 15
    semantic_max_tries: int = 5
    temperature: float = 0.2
    phase: str = "all"  # all | type | semantics
    oracle_addr: str = ""
    offline: bool = False
    provider_instance: object = None  # direct injection for tests
    scripted_answers: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.requery_budget, self.type_max_tries, self.semantic_max_tries) < 1:
            raise ValueError("all budgets must be at least 1")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")


def _target_to_json(t: TargetFragment) -> dict:
    return {
        "fragment_id": t.fragment_id,
        "code": t.code,
        "target_file": t.target_file,
        "status": t.status,
        "frozen_signature": t.frozen_signature,
        "imports_internal": t.imports_internal,
        "imports_external": [list(x) for x in t.imports_external],
        "exported_items": t.exported_items,
        "extra_deps": t.extra_deps,
        "trait_items": [list(x) for x in t.trait_items],
        "attempts": t.attempts,
    }


def _target_from_json(obj: dict) -> TargetFragment:
    return TargetFragment(
        fragment_id=obj["fragment_id"],
        code=obj["code"],
        target_file=obj["target_file"],
        status=obj["status"],
        frozen_signature=obj.get("frozen_signature", ""),
        imports_internal=list(obj.get("imports_internal", [])),
        imports_external=[tuple(x) for x in obj.get("imports_external", [])],
        exported_items=list(obj.get("exported_items", [])),
        extra_deps=list(obj.get("extra_deps", [])),
        trait_items=[tuple(x) for x in obj.get("trait_items", [])],
        attempts=obj.get("attempts", 0),
    )


class RunState:
    """Crash-safe progress: one JSON file, written atomically after each
    fragment; restoring it resumes the run without re-querying."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.phase = PHASE_PARTITIONED
        self.fragments: dict[str, dict] = {}
        self.translations: dict[str, TargetFragment] = {}
        self.registry_json: dict = {}

    def mark(self, target: TargetFragment, attempts: int):
        self.translations[target.fragment_id] = target
        self.fragments[target.fragment_id] = {
            "status": target.status,
            "attempts": attempts,
            "updated_at": time.time(),
        }

    def save(self, registry: rules.GadgetRegistry | None = None):
        if registry is not None:
            self.registry_json = registry.to_json()
        payload = {
            "phase": self.phase,
            "fragments": self.fragments,
            "translations": {fid: _target_to_json(t) for fid, t in self.translations.items()},
            "registry": self.registry_json,
        }
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")
        os.replace(tmp, self.path)

    @staticmethod
    def load(path: str | Path) -> "RunState":
        state = RunState(path)
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        state.phase = obj.get("phase", PHASE_PARTITIONED)
        state.fragments = obj.get("fragments", {})
        state.translations = {
            fid: _target_from_json(t) for fid, t in obj.get("translations", {}).items()
        }
        state.registry_json = obj.get("registry", {})
        return state


def make_provider(config: RunConfig, project: SourceProject):
    if config.provider_instance is not None:
        return config.provider_instance
    if config.provider == "replay":
        log = InteractionLog.load(config.replay_log)
        return ReplayProvider(log)
    if config.provider == "scripted":
        return ScriptedProvider(config.scripted_answers)
    if config.provider == "fallback":
        return FallbackProvider(project)
    if config.provider == "live":
        return LiveProvider()
    raise ValueError(f"unknown provider {config.provider!r}")


@dataclass
class PhaseTools:
    project: SourceProject
    graph: object
    ctx: TranslateContext
    store: SnapshotStore
    codec: SourceCodec
    state: RunState
    runlog: RunLog
    config: RunConfig
    externals_by_file: dict = field(default_factory=dict)

    def probes(self, translations) -> ProbeRunner:
        return ProbeRunner(struct_defs_from(translations), offline=self.config.offline)


def _compat_for(frag, target, tools: PhaseTools, translations) -> CompatReport:
    from .errors import ProbeBuildFailure

    if tools.config.no_snapshots:
        return CompatReport(frag.id, VACUOUS, detail="snapshot checks disabled")
    probes = tools.probes(translations)
    try:
        if frag.kind == "StructDef":
            return check_struct_compat(frag, target.code, tools.store, tools.project, tools.codec, probes)
        if frag.kind == "GlobalVar":
            return check_global_compat(frag, target.code, tools.store, tools.codec, probes)
        if frag.is_function_like:
            return check_signature_compat(frag, target.code, tools.store, tools.codec, probes)
    except ProbeBuildFailure as exc:
        # incompatible-unknown: the budget loop will retry and ultimately abort
        return CompatReport(frag.id, "incompatible", detail=f"probe build failed: {exc}")
    return CompatReport(frag.id, VACUOUS)


def resolve_project_externals(tools: PhaseTools) -> dict[str, list[tuple[str, str]]]:
    """Map every source import through the external-dependency table; misses
    consult the backend once and NoMapping is recorded, not fatal. Returns
    crate requirements per source file."""
    from .assembler import resolve_external
    from .errors import NoMapping

    cache: dict = {}
    by_file: dict[str, list[tuple[str, str]]] = {}
    for rel in sorted(tools.project.imports):
        mappings: list[tuple[str, str]] = []
        for path in tools.project.imports[rel]:
            try:
                mapping = resolve_external(path, backend=tools.ctx.backend, cache=cache)
            except NoMapping:
                tools.runlog.emit({"event": "no-mapping", "import": path, "file": rel})
                continue
            if mapping is not None:
                mappings.append(mapping)
                tools.runlog.emit({"event": "external-mapping", "import": path,
                                   "crate": mapping[0], "version": mapping[1]})
        if mappings:
            by_file[rel] = sorted(set(mappings))
    return by_file


def type_driven_phase(tools: PhaseTools) -> dict[str, TargetFragment]:
    """Per schedule group: translate, compile and repair, then check
    compatibility; on budget exhaustion, mock when the signature is
    compatible and abort otherwise."""
    config = tools.config
    translations: dict[str, TargetFragment] = dict(tools.state.translations)
    out_dir = Path(config.out_dir)
    for group in schedule_fragments(tools.project, tools.graph):
        for frag in group:
            if frag.id in translations:
                continue  # resumed
            budget = config.type_max_tries
            while True:
                try:
                    target = translate_fragment(
                        frag, tools.ctx, translations, requery_budget=config.requery_budget
                    )
                except BudgetExhausted as exc:
                    tools.state.save(tools.ctx.registry)
                    raise TranslationAborted(frag.id, f"feature mapping never satisfied: {exc.violations[:2]}")
                externals = tools.externals_by_file.get(frag.file)
                if externals:
                    target = replace(target, imports_external=list(externals))
                translations[frag.id] = target
                amended = amend_translations(translations, tools.graph, tools.project)
                emitted = emit_project(amended, out_dir, tools.project)
                compiled = True
                try:
                    diags = compile_check(emitted.root, offline=config.offline)
                except ToolchainMissing:
                    tools.runlog.emit({"event": "unverified-compile", "fragment_id": frag.id})
                    diags = []
                    compiled = rustsrc.parses(target.code)
                if diags:
                    owners = attribute_diagnostics(diags, emitted.layout)
                    frag_diags = owners.get(frag.id, []) + owners.get(None, [])
                    try:
                        translations, final = repair(
                            frag.id, frag_diags or diags, translations,
                            backend=tools.ctx.backend, graph=tools.graph,
                            project=tools.project,
                            rule_ids=[r for r, _ in rules.match_rules(frag, tools.ctx.interface_sigs)],
                            out_dir=out_dir, fragment=frag, registry=tools.ctx.registry,
                            max_tries=config.type_max_tries, offline=config.offline,
                        )
                        compiled = not final
                    except RepairExhausted:
                        compiled = False
                compat = _compat_for(frag, translations[frag.id], tools, translations)
                tools.runlog.emit(
                    {"event": "type-check", "fragment_id": frag.id,
                     "compiled": compiled, "compat": compat.verdict}
                )
                if compiled and compat.ok:
                    tools.state.mark(translations[frag.id], translations[frag.id].attempts)
                    tools.state.save(tools.ctx.registry)
                    break
                budget -= 1
                if budget <= 0:
                    if compat.ok:
                        mock_code = gen_mock(frag, translations[frag.id])
                        fn = rustsrc.find_fn(translations[frag.id].code)
                        mocked = replace(
                            translations[frag.id], code=mock_code, status=MOCKED,
                            frozen_signature=fn.normalized_signature() if fn else "frozen",
                        )
                        translations[frag.id] = mocked
                        tools.state.mark(mocked, mocked.attempts)
                        tools.state.save(tools.ctx.registry)
                        tools.runlog.emit({"event": "mocked", "fragment_id": frag.id})
                        break
                    tools.state.save(tools.ctx.registry)
                    raise TranslationAborted(frag.id, "budget exhausted without a compatible signature")
    return translations


@dataclass
class RunSummary:
    fragments: int
    function_fragments: int
    compiled_lines: int
    total_lines: int
    pct_compiled: float
    equivalent: int
    pct_equivalent: float
    mocked: int
    statuses: dict[str, str]
    verdicts: dict[str, str]
    tree_hash: str = ""
    exit_code: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("fragments", self.fragments),
            ("function fragments", self.function_fragments),
            ("% compiled", f"{self.pct_compiled:.1f}"),
            ("% equivalent", f"{self.pct_equivalent:.1f}"),
            ("mocked", self.mocked),
            ("tree hash", self.tree_hash[:16]),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def compute_summary(
    project: SourceProject,
    translations: dict[str, TargetFragment],
    reports: dict[str, semantics.EquivalenceReport],
    emitted_hash: str = "",
) -> RunSummary:
    """%compiled is compiled source lines over total source lines; %equivalent
    is equivalent function fragments over all function fragments, uncovered
    fragments counting as not equivalent."""
    total_lines = sum(f.line_count for f in project.fragments)
    compiled_lines = 0
    for frag in project.fragments:
        target = translations.get(frag.id)
        if target is not None and target.status != MOCKED:
            compiled_lines += frag.line_count
    fn_frags = [f for f in project.fragments if f.is_function_like]
    equivalent = sum(
        1 for f in fn_frags if reports.get(f.id) is not None and reports[f.id].verdict == EQUIVALENT
    )
    return RunSummary(
        fragments=len(project.fragments),
        function_fragments=len(fn_frags),
        compiled_lines=compiled_lines,
        total_lines=total_lines,
        pct_compiled=100.0 * compiled_lines / total_lines if total_lines else 0.0,
        equivalent=equivalent,
        pct_equivalent=100.0 * equivalent / len(fn_frags) if fn_frags else 0.0,
        mocked=sum(1 for t in translations.values() if t.status == MOCKED),
        statuses={fid: t.status for fid, t in sorted(translations.items())},
        verdicts={fid: r.verdict for fid, r in sorted(reports.items())},
        tree_hash=emitted_hash,
    )


def run_pipeline(config: RunConfig) -> RunSummary:
    """Partition, collect snapshots, run both phases, summarize."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runlog = RunLog(out_dir / "run_log.jsonl")
    project = parse_project(config.source_root)
    (out_dir / "fragments.json").write_text(project.manifest(), encoding="utf-8")
    graph = build_dependency_graph(project)

    if config.no_snapshots:
        store = SnapshotStore()
    elif config.snapshots_path:
        store = load_store(config.snapshots_path)
    else:
        from .snapshots import collect, instrument

        instrumented = instrument(project, out_dir=out_dir / "instrumented")
        store = collect(instrumented, out_dir / "snapshots.jsonl")
    snapshot_path = out_dir / "store.jsonl"
    store.save(snapshot_path)

    provider = make_provider(config, project)
    backend = Backend(provider, temperature=config.temperature)
    state_path = out_dir / "state.json"
    state = RunState.load(state_path) if state_path.exists() else RunState(state_path)
    if isinstance(provider, ReplayProvider) and state.translations:
        provider.skip_completed(set(state.translations))
    registry = (
        rules.GadgetRegistry.from_json(state.registry_json)
        if state.registry_json
        else rules.GadgetRegistry()
    )
    ctx = TranslateContext(
        backend=backend,
        graph=graph,
        project=project,
        interface_sigs=interface_methods(project),
        registry=registry,
        runlog=runlog,
    )
    tools = PhaseTools(project, graph, ctx, store, SourceCodec(project), state, runlog, config)
    tools.externals_by_file = resolve_project_externals(tools)

    reports: dict[str, semantics.EquivalenceReport] = {}
    state.phase = PHASE_TYPE
    translations = type_driven_phase(tools)
    emitted = emit_project(
        amend_translations(translations, graph, project), out_dir, project
    )

    if config.phase == "type":
        # the phase gate ends on the full project-compatibility report
        try:
            compile_ok = not compile_check(emitted.root, offline=config.offline)
        except ToolchainMissing:
            compile_ok = True
        compat = check_project_compat(
            project, translations, store, tools.codec,
            tools.probes(translations), compile_ok,
        )
        (out_dir / "project_compat.json").write_text(
            json.dumps(
                {
                    "ok": compat.ok,
                    "types": {k: r.verdict for k, r in compat.type_reports.items()},
                    "signatures": {k: r.verdict for k, r in compat.signature_reports.items()},
                    "compile_ok": compat.compile_ok,
                },
                sort_keys=True, indent=1,
            ),
            encoding="utf-8",
        )

    if config.phase != "type":
        state.phase = PHASE_SEMANTICS
        state.save(registry)
        oracle_ctx = None
        oracle_addr = config.oracle_addr or os.environ.get("ORACLE_ADDR", "")
        if not oracle_addr:
            oracle_ctx = OracleServer(store)
            oracle_ctx.__enter__()
            oracle_addr = oracle_ctx.address
        try:
            outcome = semantic_phase(
                project, graph, translations, store,
                out_dir=out_dir,
                translate_ctx=ctx,
                semantic_max_tries=config.semantic_max_tries,
                requery_budget=config.requery_budget,
                oracle_addr=oracle_addr,
                snapshot_path=str(snapshot_path),
                offline=config.offline,
                runlog=runlog,
            )
        finally:
            if oracle_ctx is not None:
                oracle_ctx.__exit__(None, None, None)
        translations = outcome.translations
        reports = outcome.reports
        for fid, target in translations.items():
            state.mark(target, target.attempts)
        emitted = emit_project(
            amend_translations(translations, graph, project), out_dir, project
        )

    state.phase = PHASE_DONE
    state.save(registry)
    backend.log.save(out_dir / "interactions.jsonl")
    summary = compute_summary(project, translations, reports, emitted.tree_hash)
    (out_dir / "summary.json").write_text(
        json.dumps(summary.to_json(), sort_keys=True, indent=1), encoding="utf-8"
    )
    runlog.emit({"event": "done", "pct_compiled": summary.pct_compiled,
                 "pct_equivalent": summary.pct_equivalent})
    return summary
