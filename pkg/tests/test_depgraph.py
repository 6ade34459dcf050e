import random

import pytest

from rustport import fragments
from rustport.depgraph import (
    DependencyGraph,
    build_dependency_graph,
    strongly_connected_components,
    translation_order,
)

from test_go_parsing import GLOBALS_GO, TYPES_GO, VALIDATOR_GO


@pytest.fixture
def overview(tmp_path):
    (tmp_path / "globals.go").write_text(GLOBALS_GO)
    (tmp_path / "types.go").write_text(TYPES_GO)
    (tmp_path / "validator.go").write_text(VALIDATOR_GO)
    project = fragments.parse_project(tmp_path)
    return project, build_dependency_graph(project)


def test_overview_edges(overview):
    _, graph = overview
    assert graph.edges == {
        ("specialNumber", "setupSpecialNumber"),
        ("Validate", "EntryDetail"),
        ("Validate", "specialNumber"),
    }


def test_overview_schedule(overview):
    _, graph = overview
    order = [fid for grp in graph.groups for fid in grp]
    assert order.index("setupSpecialNumber") < order.index("specialNumber")
    assert order.index("EntryDetail") < order.index("Validate")
    assert order.index("specialNumber") < order.index("Validate")


def test_no_cross_references_gives_singletons_in_file_order(tmp_path):
    (tmp_path / "b.go").write_text("package p\n\nfunc B() int {\n\treturn 2\n}\n")
    (tmp_path / "a.go").write_text(
        "package p\n\nfunc A() int {\n\treturn 1\n}\n\nfunc C() int {\n\treturn 3\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    graph = build_dependency_graph(project)
    assert graph.edges == set()
    assert graph.groups == [("A",), ("C",), ("B",)]  # (file, start line) order


def test_mutual_recursion_forms_one_group(tmp_path):
    (tmp_path / "m.go").write_text(
        "package p\n\n"
        "func isEven(n int) bool {\n\tif n == 0 {\n\t\treturn true\n\t}\n\treturn isOdd(n - 1)\n}\n\n"
        "func isOdd(n int) bool {\n\tif n == 0 {\n\t\treturn false\n\t}\n\treturn isEven(n - 1)\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    graph = build_dependency_graph(project)
    # brute-force oracle on the 2-node graph: mutual reachability
    nodes = ["isEven", "isOdd"]
    reach = {(a, b) for a in nodes for b in nodes if _reaches(graph.edges, a, b)}
    assert ("isEven", "isOdd") in reach and ("isOdd", "isEven") in reach
    assert graph.groups == [("isEven", "isOdd")]


def _reaches(edges, a, b, seen=None):
    if a == b:
        return True
    seen = seen or set()
    for x, y in edges:
        if x == a and y not in seen:
            seen.add(y)
            if _reaches(edges, y, b, seen):
                return True
    return False


def test_chain_translates_leaf_first():
    graph = DependencyGraph(nodes=["A", "B", "C"], edges={("A", "B"), ("B", "C")})
    assert translation_order(graph) == [("C",), ("B",), ("A",)]


def test_method_and_interface_edges(tmp_path):
    (tmp_path / "i.go").write_text(
        "package p\n\n"
        "type Batch struct {\n\tId int\n}\n\n"
        "type BatchHeader struct {\n\tName string\n}\n\n"
        "type Batcher interface {\n\tSetHeader(h *BatchHeader)\n\tValidate() error\n}\n\n"
        "type canValidate interface {\n\tValidate() error\n}\n\n"
        "func (b *Batch) SetHeader(h *BatchHeader) {\n\tb.Id = 1\n}\n\n"
        "func (b *Batch) Validate() error {\n\treturn nil\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    graph = build_dependency_graph(project)
    assert ("Batcher", "canValidate") in graph.edges  # structural subset
    assert ("Batch.Validate", "canValidate") in graph.edges
    assert ("Batch.Validate", "Batcher") in graph.edges
    assert ("Batch.Validate", "Batch") in graph.edges
    assert ("Batch.SetHeader", "Batcher") in graph.edges
    assert ("Batch.SetHeader", "BatchHeader") in graph.edges
    # interfaces schedule before the methods that implement them
    idx = {fid: i for i, grp in enumerate(graph.groups) for fid in grp}
    assert idx["canValidate"] < idx["Batcher"] < idx["Batch.Validate"]


def test_unresolved_names_become_external_refs(tmp_path):
    (tmp_path / "x.go").write_text(
        'package p\n\nimport "strings"\n\n'
        "func Shout(s string) string {\n\treturn strings.ToUpper(s)\n}\n"
    )
    project = fragments.parse_project(tmp_path)
    graph = build_dependency_graph(project)
    assert graph.edges == set()
    assert "strings" in graph.external_refs.get("Shout", [])


def test_determinism_on_reparse(tmp_path, overview):
    project1, graph1 = overview
    project2 = fragments.parse_project(project1.root)
    graph2 = build_dependency_graph(project2)
    assert project1.manifest() == project2.manifest()
    assert graph1.edges == graph2.edges
    assert graph1.groups == graph2.groups


def _random_graph(rng: random.Random, n: int) -> DependencyGraph:
    nodes = [f"n{i}" for i in range(n)]
    edges = set()
    if n >= 2:
        for _ in range(rng.randint(0, n * 2)):
            a, b = rng.sample(nodes, 2)
            edges.add((a, b))
    # inject a cycle about half the time
    if n >= 3 and rng.random() < 0.5:
        cyc = rng.sample(nodes, rng.randint(2, min(n, 4)))
        for i, x in enumerate(cyc):
            edges.add((x, cyc[(i + 1) % len(cyc)]))
    return DependencyGraph(nodes=nodes, edges=edges)


def test_schedule_sound_on_random_graphs():
    rng = random.Random(11)
    for _ in range(100):
        graph = _random_graph(rng, rng.randint(1, 12))
        groups = translation_order(graph)
        # groups partition nodes
        flat = [fid for grp in groups for fid in grp]
        assert sorted(flat) == sorted(graph.nodes)
        # each group is a maximal SCC
        sccs = {frozenset(c) for c in strongly_connected_components(graph.nodes, graph.edges)}
        assert {frozenset(g) for g in groups} == sccs
        # every edge leaving a group points to an earlier group
        idx = {fid: i for i, grp in enumerate(groups) for fid in grp}
        for a, b in graph.edges:
            assert idx[b] <= idx[a]
