import pytest

from rustport import fragments
from rustport.errors import EmptyProject
from rustport.golang import normalize_type, parse_go_file

GLOBALS_GO = """package demo

var specialNumber int = setupSpecialNumber()

func setupSpecialNumber() int {
\treturn 7
}
"""

TYPES_GO = """package demo

// EntryDetail models one ledger entry.
type EntryDetail struct {
\tAddenda05 []int
\tTraceId   string
}
"""

VALIDATOR_GO = """package demo

func Validate(entry *EntryDetail, length int) bool {
\tif entry.Addenda05 != nil {
\t\tif len(entry.Addenda05) != length {
\t\t\treturn false
\t\t}
\t\tfor _, r := range entry.Addenda05 {
\t\t\tif r == specialNumber {
\t\t\t\treturn true
\t\t\t}
\t\t}
\t\treturn false
\t}
\treturn false
}
"""


@pytest.fixture
def overview_project(tmp_path):
    (tmp_path / "globals.go").write_text(GLOBALS_GO)
    (tmp_path / "types.go").write_text(TYPES_GO)
    (tmp_path / "validator.go").write_text(VALIDATOR_GO)
    return fragments.parse_project(tmp_path)


def test_overview_project_has_four_fragments(overview_project):
    kinds = {(f.name, f.kind) for f in overview_project.fragments}
    assert kinds == {
        ("specialNumber", fragments.GLOBAL_VAR),
        ("setupSpecialNumber", fragments.FREE_FUNCTION),
        ("EntryDetail", fragments.STRUCT_DEF),
        ("Validate", fragments.FREE_FUNCTION),
    }


def test_fragment_source_texts_are_verbatim_slices(overview_project):
    for frag in overview_project.fragments:
        assert frag.source_text in overview_project.files[frag.file]


def test_global_var_initializer_is_recognized_as_call(overview_project):
    g = overview_project.by_id("specialNumber")
    assert g.var_type == "int"
    assert g.var_init == "setupSpecialNumber()"
    assert g.var_init_is_call


def test_validate_signature(overview_project):
    v = overview_project.by_id("Validate")
    assert v.signature.params == (("entry", "*EntryDetail"), ("length", "int"))
    assert v.signature.results == ("bool",)
    assert not v.signature.returns_error


def test_struct_fields(overview_project):
    s = overview_project.by_id("EntryDetail")
    assert s.struct_fields == (("Addenda05", "[]int"), ("TraceId", "string"))


def test_empty_project(tmp_path):
    (tmp_path / "empty.go").write_text("package demo\n")
    with pytest.raises(EmptyProject):
        fragments.parse_project(tmp_path)


def test_method_fragment_carries_receiver(tmp_path):
    (tmp_path / "m.go").write_text(
        "package demo\n\n"
        "type Counter struct {\n\tN int\n}\n\n"
        "func (c *Counter) Add(delta int) {\n\tc.N = c.N + delta\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    assert len(project.fragments) == 2
    m = project.by_id("Counter.Add")
    assert m.kind == fragments.METHOD
    assert m.receiver_type == "Counter"
    assert m.receiver_is_pointer
    assert m.receiver_name == "c"


def test_partition_completeness(overview_project):
    # fragments plus retained metadata cover every non-whitespace byte once
    for rel, source in overview_project.files.items():
        pieces = [f.source_text for f in overview_project.fragments if f.file == rel]
        pieces += overview_project.metadata[rel]
        total = "".join(sorted(pieces, key=source.index))
        assert "".join(total.split()) == "".join(source.split())


def test_reparse_of_fragment_text_yields_one_declaration(overview_project):
    for frag in overview_project.fragments:
        gofile = parse_go_file("package demo\n" + frag.source_text, frag.file)
        assert len(gofile.decls) == 1


def test_error_signature_detection():
    gofile = parse_go_file(
        "package demo\n\nfunc mustPositive(n int) (int, error) {\n\treturn n, nil\n}\n"
    )
    sig = gofile.decls[0].signature
    assert sig.results == ["int", "error"]
    assert sig.returns_error


def test_grouped_and_shared_param_forms():
    gofile = parse_go_file(
        "package demo\n\nfunc f(a, b int, s string) bool {\n\treturn a+b > len(s)\n}\n"
    )
    sig = gofile.decls[0].signature
    assert sig.params == [("a", "int"), ("b", "int"), ("s", "string")]


def test_interface_methods_dedup(tmp_path):
    (tmp_path / "i.go").write_text(
        "package demo\n\n"
        "type BatchHeader struct {\n\tId int\n}\n\n"
        "type Batcher interface {\n\tSetHeader(h *BatchHeader)\n\tValidate() error\n}\n\n"
        "type canValidate interface {\n\tValidate() error\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    sigs = fragments.interface_methods(project)
    assert {name for name, _ in sigs} == {"SetHeader", "Validate"}
    assert len(sigs) == 2  # shared Validate() error appears once


def test_interface_methods_empty(tmp_path):
    (tmp_path / "a.go").write_text("package demo\n\nfunc f() int {\n\treturn 1\n}\n")
    project = fragments.parse_project(tmp_path)
    assert fragments.interface_methods(project) == set()


def test_normalize_type():
    assert normalize_type("[] int") == "[]int"
    assert normalize_type("* EntryDetail") == "*EntryDetail"
    assert normalize_type("map[string] int") == "map[string]int"


def test_var_and_const_groups(tmp_path):
    (tmp_path / "g.go").write_text(
        "package demo\n\n"
        "const (\n\tlimit = 10\n\tscale = 2\n)\n\n"
        "var names []string = seedNames()\n\n"
        "func seedNames() []string {\n\treturn nil\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    ids = set(project.ids())
    assert {"limit", "scale", "names", "seedNames"} <= ids
    lim = project.by_id("limit")
    assert lim.kind == fragments.GLOBAL_VAR and lim.is_const and lim.in_group


def test_manifest_is_deterministic(overview_project):
    assert overview_project.manifest() == overview_project.manifest()
    assert overview_project.manifest().startswith('[{"')


def test_parse_error_has_position(tmp_path):
    (tmp_path / "bad.go").write_text('package demo\n\nvar s = "unterminated\n')
    with pytest.raises(fragments.ParseError):
        fragments.parse_project(tmp_path)


def test_interface_methods_matches_brute_force_on_generated_projects(tmp_path):
    """interface_methods equals the union computed naively, over generated
    projects with up to 5 interfaces."""
    import random

    rng = random.Random(5)
    method_pool = [
        ("Ping", "() int"),
        ("Name", "() string"),
        ("Validate", "() error"),
        ("Scale", "(f float64) float64"),
        ("Tag", "(s string)"),
    ]
    for trial in range(20):
        root = tmp_path / f"p{trial}"
        root.mkdir()
        n_ifaces = rng.randint(0, 5)
        lines = ["package gen", ""]
        for i in range(n_ifaces):
            chosen = rng.sample(method_pool, rng.randint(0, len(method_pool)))
            lines.append(f"type I{i} interface {{")
            for name, sig in chosen:
                lines.append(f"\t{name}{sig}")
            lines.append("}")
            lines.append("")
        lines.append("func anchor() int {\n\treturn 1\n}")
        (root / "gen.go").write_text("\n".join(lines) + "\n")
        project = fragments.parse_project(root)
        got = fragments.interface_methods(project)
        brute = set()
        for frag in project.fragments:
            if frag.kind == fragments.INTERFACE_DEF:
                for name, sig in frag.interface_methods:
                    brute.add((name, sig.key()))
        assert got == brute
