import pytest

from rustport import canonjson, fragments, snapshots
from rustport.errors import DecodeError
from rustport.golang import parse_go_file
from rustport.snapshots import Snapshot, SnapshotStore, load_store

from corpus_model import CORPUS_PACKAGES
from conftest import corpus_path, store_path


def test_store_round_trip(tmp_path, ledger_snapshots):
    path = tmp_path / "snaps.jsonl"
    ledger_snapshots.save(path)
    again = load_store(path)
    assert {fid: len(v) for fid, v in again.by_fragment.items()} == {
        fid: len(v) for fid, v in ledger_snapshots.by_fragment.items()
    }


def test_duplicate_calls_dedup():
    store = SnapshotStore()
    snap = Snapshot("f", (1, 2), (3,), test_name="T")
    for _ in range(100):
        store.add(snap)
    assert len(store.lookup("f")) == 1


def test_lookup_outside_coverage_is_empty(ledger_snapshots):
    assert ledger_snapshots.lookup("no-such-fragment") == []


def test_decode_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id":"a","in":[],"out":[],"err":{"flag":false,"msg":""}}\nnot json\n')
    with pytest.raises(DecodeError) as err:
        load_store(path)
    assert "line 2" in str(err.value)


def test_nondeterminism_detection():
    store = SnapshotStore()
    store.add(Snapshot("f", (1,), (2,)))
    store.add(Snapshot("f", (1,), (3,)))
    store.add(Snapshot("g", (1,), (2,)))
    store.add(Snapshot("g", (2,), (3,)))
    assert store.is_nondeterministic("f")
    assert not store.is_nondeterministic("g")


def test_canonical_fixed_point_on_all_bundled_snapshots():
    for name in CORPUS_PACKAGES:
        store = load_store(store_path(name))
        for snap in store.all_snapshots():
            line = canonjson.dumps(snap.to_json())
            assert canonjson.recanonicalize(line) == line


def test_arity_agreement_store_wide(ledger_project, ledger_snapshots):
    """Every stored snapshot's input arity matches the parsed signature."""
    for frag in ledger_project.fragments:
        expected = None
        if frag.is_function_like:
            expected = len(frag.signature.params) + (1 if frag.kind == "Method" else 0)
        elif frag.kind == "GlobalVar":
            expected = 0
        for snap in ledger_snapshots.lookup(frag.id):
            assert len(snap.inputs) == expected, frag.id


def test_bundled_stores_match_reference_models():
    """The committed fixtures are exactly what the reference models produce."""
    for name, build in CORPUS_PACKAGES.items():
        regenerated = [canonjson.dumps(s.to_json()) for s in build().all_snapshots()]
        committed = [line.strip() for line in store_path(name).read_text().splitlines() if line.strip()]
        assert regenerated == committed, f"{name} store fixture is stale"


def test_feasible_values_from_bundled_suite(ledger_project, ledger_snapshots):
    values = snapshots.feasible_values(ledger_snapshots, ledger_project, "EntryDetail")
    assert any(v["Addenda05"] is None for v in values)  # the nil-slice instance
    ints = snapshots.feasible_values(ledger_snapshots, ledger_project, "int")
    assert set(map(type, ints)) == {int}
    assert snapshots.feasible_values(ledger_snapshots, ledger_project, "Uncovered") == []


def test_feasible_values_for_slot(ledger_snapshots):
    lengths = snapshots.feasible_values_for_slot(ledger_snapshots, "Validate", "in", 1)
    assert sorted(lengths) == [0, 2, 3]


# ---------------------------------------------------------------------------
# instrumentation


@pytest.fixture(scope="module")
def instrumented(tmp_path_factory):
    project = fragments.parse_project(corpus_path("ledger"))
    out = tmp_path_factory.mktemp("instr")
    return project, snapshots.instrument(project, out_dir=out / "copy")


def test_instrumented_files_parse(instrumented):
    project, out = instrumented
    for rel in project.files:
        source = (out / rel).read_text()
        gofile = parse_go_file(source, rel)
        assert gofile.package == "ledger"


def test_function_hooks_inserted(instrumented):
    project, out = instrumented
    validator = (out / "validator.go").read_text()
    assert 'snapshim.Enter("Validate", entry, length)' in validator
    assert "defer func() { snapshim.Exit(__snap" in validator
    # results renamed so the exit hook reads final values
    assert "(__r0 bool)" in validator
    assert "[]any{entry}" in validator  # pointer-arg post-state slot


def test_method_hooks_carry_receiver(instrumented):
    _, out = instrumented
    batch = (out / "batch.go").read_text()
    assert 'snapshim.Enter("Batch.Validate", b)' in batch
    assert "[]any{b}" in batch


def test_error_results_split_into_flag(instrumented):
    _, out = instrumented
    validator = (out / "validator.go").read_text()
    assert "(__r0 int, __r1 error)" in validator
    assert ", __r1) }()" in validator


def test_global_initializer_wrapped(instrumented):
    _, out = instrumented
    globals_go = (out / "globals.go").read_text()
    assert 'snapshim.Init("specialNumber", setupSpecialNumber())' in globals_go


def test_test_files_register_test_names(instrumented):
    _, out = instrumented
    test_src = (out / "ledger_test.go").read_text()
    assert "defer snapshim.Test(t.Name())()" in test_src
    assert test_src.count("defer snapshim.Test") == test_src.count("func Test")


def test_original_statements_preserved(instrumented):
    project, out = instrumented
    for rel, original in project.files.items():
        instrumented_src = (out / rel).read_text()
        for frag in project.fragments:
            if frag.file != rel or not frag.is_function_like:
                continue
            # every original body line survives verbatim
            body = frag.source_text.split("{", 1)[1]
            for line in body.splitlines():
                if line.strip():
                    assert line in instrumented_src, f"{frag.id}: lost {line!r}"


def test_oracle_registrations_generated(instrumented):
    _, out = instrumented
    gen = (out / "oracle_main_gen.go").read_text()
    assert "func OracleRegistrations() map[string]oracle.Handler" in gen
    assert '"Validate": func(in []oracle.Raw)' in gen
    assert "return []any{r0, a0}, nil" in gen  # returns + pointer post-state
    assert '"CheckWith"' not in gen  # interface-typed inputs are not registered


def test_slot_types(ledger_project):
    ins, outs = snapshots.slot_types(ledger_project.by_id("Validate"))
    assert ins == ["*EntryDetail", "int"]
    assert outs == ["bool", "*EntryDetail"]
    ins, outs = snapshots.slot_types(ledger_project.by_id("Batch.Validate"))
    assert ins == ["Batch"]
    assert outs == ["Batch"]  # error slot excluded, receiver post included
