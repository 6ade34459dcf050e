from dataclasses import replace

import pytest

from rustport import semantics
from rustport.assembler import amend_translations, compile_check, emit_project
from rustport.errors import HarnessCrash
from rustport.oracle import OracleServer
from rustport.semantics import (
    EQUIVALENT,
    INEQUIV,
    UNTESTED,
    build_dispatch,
    build_test_module,
    check_fn_equiv,
    gen_mock,
    harness_info,
    mocked_callees,
    upgrade_for_harness,
)


@pytest.fixture(scope="module")
def sem_env(ledger_project, ledger_graph, ledger_translations, ledger_snapshots, tmp_path_factory, cargo):
    """Ledger corpus emitted in semantic-harness form with a live stub oracle."""
    _, translations = ledger_translations
    out = tmp_path_factory.mktemp("sem") / "proj"
    snap_path = tmp_path_factory.mktemp("sem_snaps") / "store.jsonl"
    ledger_snapshots.save(snap_path)

    def emit(trans):
        amended = upgrade_for_harness(amend_translations(trans, ledger_graph, ledger_project))
        dispatch = build_dispatch(ledger_project, amended)
        module = build_test_module(ledger_project, amended, ledger_snapshots, ledger_graph)
        emitted = emit_project(amended, out, ledger_project, dispatch=dispatch, test_module=module)
        diags = compile_check(emitted.root, all_targets=True)
        assert diags == [], diags and diags[0].rendered
        return emitted

    emit(dict(translations))
    server = OracleServer(ledger_snapshots)
    server.__enter__()
    yield {
        "translations": dict(translations),
        "emit": emit,
        "out": out,
        "snap_path": str(snap_path),
        "oracle": server.address,
    }
    server.__exit__(None, None, None)


def _check(env, fid):
    return check_fn_equiv(fid, env["out"], env["snap_path"], env["oracle"])


def test_correct_translations_are_equivalent(sem_env):
    for fid in ("Validate", "maxEntry", "Batch.Validate", "specialNumber", "BatchError.Error"):
        report = _check(sem_env, fid)
        assert report.verdict == EQUIVALENT, (fid, report.results)


def test_any_is_some_mutation_caught_with_null_witness(sem_env, ledger_translations):
    """The running-example mistranslation: checking every element instead of
    slice presence; the nil-field snapshot is the witness."""
    _, translations = ledger_translations
    mutated = dict(sem_env["translations"])
    bad_code = translations["Validate"].code.replace(
        "entry.addenda05.is_some()",
        "entry.addenda05.as_deref().unwrap_or(&[]).iter().all(|x| *x != 0)",
    )
    assert bad_code != translations["Validate"].code
    mutated["Validate"] = replace(translations["Validate"], code=bad_code)
    sem_env["emit"](mutated)
    try:
        report = _check(sem_env, "Validate")
        assert report.verdict == INEQUIV
        assert report.results, "expected a snapshot witness"
        assert any(r.get("test") == "TestValidate" for r in report.results)
    finally:
        sem_env["emit"](sem_env["translations"])


def test_error_arm_clause(sem_env, ledger_translations):
    """err=true snapshot plus a translation that returns success -> inequivalent."""
    _, translations = ledger_translations
    mutated = dict(sem_env["translations"])
    bad = translations["maxEntry"].code.replace(
        'return Err(anyhow::anyhow!("no entries"));', "return Ok(0);"
    )
    assert bad != translations["maxEntry"].code
    mutated["maxEntry"] = replace(translations["maxEntry"], code=bad)
    sem_env["emit"](mutated)
    try:
        report = _check(sem_env, "maxEntry")
        assert report.verdict == INEQUIV
        assert any("error arm" in r.get("detail", "") for r in report.results)
    finally:
        sem_env["emit"](sem_env["translations"])


def test_isolation_under_mocks(sem_env, ledger_translations):
    """Flipping a callee's body while the caller mocks it leaves the caller's
    verdict unchanged; the callee's own verdict flips."""
    _, translations = ledger_translations
    mutated = dict(sem_env["translations"])
    bad = translations["sumEntries"].code.replace("return total;", "return total + 1;")
    assert bad != translations["sumEntries"].code
    mutated["sumEntries"] = replace(translations["sumEntries"], code=bad)
    sem_env["emit"](mutated)
    try:
        assert _check(sem_env, "Batch.Total").verdict == EQUIVALENT  # caller unaffected
        assert _check(sem_env, "sumEntries").verdict == INEQUIV  # callee caught
    finally:
        sem_env["emit"](sem_env["translations"])


def test_untested_fragment_reports_untested(sem_env):
    assert _check(sem_env, "CheckWith").verdict == UNTESTED


def test_mocked_callees_are_function_like_deps(ledger_project, ledger_graph, ledger_translations):
    _, translations = ledger_translations
    mocked = mocked_callees(ledger_project.by_id("Batch.Validate"), ledger_graph,
                            ledger_project, translations)
    assert "Batch.EntryCount" in mocked
    assert "Batch.OverLimit" in mocked
    assert "EntryDetail" not in mocked  # types are never mocked
    assert "Batch.Validate" not in mocked  # never mock the fragment itself


def test_gen_mock_shape(ledger_project, ledger_translations):
    _, translations = ledger_translations
    frag = ledger_project.by_id("maxEntry")
    code = gen_mock(frag, translations["maxEntry"])
    assert "crate::mockctl::call_oracle(\"maxEntry\"" in code
    assert "return Err(anyhow::anyhow!(__msg));" in code
    assert "fn max_entry(entries: Option<Vec<i64>>) -> Result<i64, anyhow::Error>" in code


def test_gen_mock_zero_arg(ledger_project, ledger_translations):
    _, translations = ledger_translations
    code = gen_mock(ledger_project.by_id("setupSpecialNumber"), translations["setupSpecialNumber"])
    assert "vec![]" in code  # empty inputs
    assert "let __r0: i64" in code


def test_dispatcher_preserves_body_bytes(ledger_project, ledger_translations):
    _, translations = ledger_translations
    frag = ledger_project.by_id("sumEntries")
    info = harness_info(frag, translations["sumEntries"])
    code = semantics.dispatch_code(info)
    body = info.fn.body
    assert body in code  # original body verbatim inside __impl_*
    assert "fn __impl_sum_entries" in code
    assert 'crate::mockctl::is_mocked("sumEntries")' in code


def test_signature_hashes_stable_through_semantic_phase(
    ledger_project, ledger_graph, ledger_translations, ledger_snapshots, tmp_path, cargo
):
    from rustport import rustsrc

    ctx, translations = ledger_translations

    def sig_hashes(trans):
        out = {}
        for fid, target in trans.items():
            fn = rustsrc.find_fn(target.code)
            if fn is not None:
                out[fid] = fn.normalized_signature()
        return out

    before = sig_hashes(translations)
    snap_path = tmp_path / "s.jsonl"
    ledger_snapshots.save(snap_path)
    with OracleServer(ledger_snapshots) as server:
        outcome = semantics.semantic_phase(
            ledger_project, ledger_graph, dict(translations), ledger_snapshots,
            out_dir=tmp_path / "proj", translate_ctx=ctx,
            oracle_addr=server.address, snapshot_path=str(snap_path),
        )
    after = sig_hashes(outcome.translations)
    assert before == after
    assert all(r.verdict == EQUIVALENT for fid, r in outcome.reports.items()
               if fid != "CheckWith")


def test_nondeterministic_fragment_not_inequivalent(ledger_project, ledger_graph,
                                                    ledger_translations, tmp_path, cargo):
    from rustport.snapshots import Snapshot, SnapshotStore

    ctx, translations = ledger_translations
    store = SnapshotStore()
    store.add(Snapshot("sumEntries", ([1],), (1,)))
    store.add(Snapshot("sumEntries", ([1],), (2,)))  # same inputs, new outputs
    snap_path = tmp_path / "nd.jsonl"
    store.save(snap_path)
    outcome = semantics.semantic_phase(
        ledger_project, ledger_graph, dict(translations), store,
        out_dir=tmp_path / "proj", translate_ctx=None,
        snapshot_path=str(snap_path),
    )
    assert outcome.reports["sumEntries"].verdict == semantics.NONDETERMINISTIC


def test_wrong_then_right_body_validates_after_one_retry(
    ledger_project, ledger_graph, ledger_translations, ledger_snapshots, tmp_path, cargo
):
    """A seeded wrong body triggers regeneration with the signature frozen;
    the regenerated body fails to compile once, compile repair fixes it, and
    the re-check validates the fragment."""
    from rustport.backend import Backend, ScriptedProvider
    from rustport.fragments import interface_methods
    from rustport.rules import GadgetRegistry
    from rustport.runlog import RunLog
    from rustport.translate import TranslateContext

    ctx, translations = ledger_translations
    good = translations["sumEntries"].code
    wrong = good.replace("return total;", "return total + 1;")
    noncompiling = (
        "fn sum_entries(entries: Option<Vec<i64>>) -> i64 {\n    undefined_helper(entries)\n}\n"
    )
    start = dict(translations)
    start["sumEntries"] = replace(start["sumEntries"], code=wrong)

    scripted_ctx = TranslateContext(
        backend=Backend(ScriptedProvider({"sumEntries": [noncompiling, good]})),
        graph=ledger_graph,
        project=ledger_project,
        interface_sigs=interface_methods(ledger_project),
        registry=GadgetRegistry.from_json(ctx.registry.to_json()),
        runlog=RunLog(),
    )
    snap_path = tmp_path / "s.jsonl"
    ledger_snapshots.save(snap_path)
    with OracleServer(ledger_snapshots) as server:
        outcome = semantics.semantic_phase(
            ledger_project, ledger_graph, start, ledger_snapshots,
            out_dir=tmp_path / "proj", translate_ctx=scripted_ctx,
            oracle_addr=server.address, snapshot_path=str(snap_path),
        )
    assert outcome.reports["sumEntries"].verdict == EQUIVALENT
    assert outcome.translations["sumEntries"].code.strip().startswith("fn sum_entries")
    assert "undefined_helper" not in outcome.translations["sumEntries"].code
    assert outcome.translations["sumEntries"].status == "Validated"
