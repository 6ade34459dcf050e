"""Fragment dependency graph and the condensed translation schedule.

Edges point from user to used. The schedule is the strongly-connected-
component condensation ordered so that every group is translated after
everything it depends on; ties between incomparable groups break on
(file path, start line) of the group's earliest fragment, which makes
runs reproducible and replay logs stable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .fragments import (
    GLOBAL_VAR,
    INTERFACE_DEF,
    METHOD,
    STRUCT_DEF,
    SourceFragment,
    SourceProject,
    interface_methods,
)
from .golang import identifier_uses, selector_uses, tokenize, code_tokens


@dataclass
class DependencyGraph:
    nodes: list[str]
    edges: set[tuple[str, str]]
    groups: list[tuple[str, ...]] = field(default_factory=list)
    external_refs: dict[str, list[str]] = field(default_factory=dict)

    def dependencies(self, fragment_id: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == fragment_id)

    def dependents(self, fragment_id: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == fragment_id)

    def group_index(self) -> dict[str, int]:
        return {fid: i for i, grp in enumerate(self.groups) for fid in grp}


def _type_idents(type_text: str) -> list[str]:
    return [t.text for t in code_tokens(tokenize(type_text)) if t.kind == "ident"]


def _scan_uses(frag: SourceFragment) -> tuple[list[str], list[str]]:
    """(package-scope identifier uses, selector-position uses) for one fragment."""
    if frag.kind == STRUCT_DEF:
        idents: list[str] = []
        for _, ty in frag.struct_fields:
            idents.extend(_type_idents(ty))
        return idents, []
    if frag.kind == INTERFACE_DEF:
        idents = []
        for _, sig in frag.interface_methods:
            for _, ty in sig.params:
                idents.extend(_type_idents(ty))
            for ty in sig.results:
                idents.extend(_type_idents(ty))
        return idents, []
    if frag.kind == GLOBAL_VAR:
        idents = _type_idents(frag.var_type) if frag.var_type else []
        if frag.var_init:
            idents.extend(identifier_uses(frag.var_init))
        return idents, selector_uses(frag.var_init) if frag.var_init else []
    return identifier_uses(frag.source_text), selector_uses(frag.source_text)


def build_dependency_graph(project: SourceProject) -> DependencyGraph:
    """Usage edges between fragments plus the condensed schedule.

    Name resolution is package-scoped and syntactic: identifiers match
    declared fragment names in the same package directory; identifiers in
    selector position match method names only. Unresolved names are
    recorded as external references, never edges.
    """
    frags = project.fragments
    by_pkg_name: dict[tuple[str, str], list[SourceFragment]] = {}
    methods_by_pkg_name: dict[tuple[str, str], list[SourceFragment]] = {}
    for f in frags:
        pkg_dir = _pkg_dir(f)
        if f.kind == METHOD:
            methods_by_pkg_name.setdefault((pkg_dir, f.name), []).append(f)
        else:
            by_pkg_name.setdefault((pkg_dir, f.name), []).append(f)

    iface_sigs: dict[tuple[str, tuple], list[SourceFragment]] = {}
    for f in frags:
        if f.kind == INTERFACE_DEF:
            for name, sig in f.interface_methods:
                iface_sigs.setdefault((name, sig.key()), []).append(f)

    edges: set[tuple[str, str]] = set()
    external: dict[str, list[str]] = {}
    for f in frags:
        pkg_dir = _pkg_dir(f)
        idents, selectors = _scan_uses(f)
        unresolved: set[str] = set()
        for name in idents:
            if name == f.name:
                continue
            targets = by_pkg_name.get((pkg_dir, name))
            if targets:
                for t in targets:
                    if t.id != f.id:
                        edges.add((f.id, t.id))
            elif name[0].isupper() or name.islower():
                unresolved.add(name)
        for name in selectors:
            for t in methods_by_pkg_name.get((pkg_dir, name), []):
                if t.id != f.id:
                    edges.add((f.id, t.id))
        if f.kind == METHOD:
            recv = by_pkg_name.get((pkg_dir, f.receiver_type))
            for t in recv or []:
                edges.add((f.id, t.id))
            # implementing an interface method makes the interface a dependency
            if f.signature is not None:
                for iface in iface_sigs.get((f.name, f.signature.key()), []):
                    if _pkg_dir(iface) == pkg_dir:
                        edges.add((f.id, iface.id))
        if f.kind == INTERFACE_DEF:
            # structural sub-interfacing: a superset interface depends on its subsets
            mine = {(n, s.key()) for n, s in f.interface_methods}
            for g in frags:
                if g.kind != INTERFACE_DEF or g.id == f.id or _pkg_dir(g) != pkg_dir:
                    continue
                theirs = {(n, s.key()) for n, s in g.interface_methods}
                if theirs and theirs < mine:
                    edges.add((f.id, g.id))
        if unresolved:
            external[f.id] = sorted(unresolved)

    graph = DependencyGraph(nodes=[f.id for f in frags], edges=edges, external_refs=external)
    graph.groups = translation_order(graph, _order_key(project))
    return graph


def _pkg_dir(frag: SourceFragment) -> str:
    return frag.id.rsplit("/", 1)[0] if "/" in frag.id else "."


def _order_key(project: SourceProject):
    pos = {f.id: (f.file, f.span[0], f.id) for f in project.fragments}
    return lambda fid: pos.get(fid, ("", 0, fid))


def strongly_connected_components(nodes: list[str], edges: set[tuple[str, str]]) -> list[set[str]]:
    """Tarjan's algorithm, iterative. Components come back in emission order."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        if a in adj and b in adj:
            adj[a].append(b)
    for n in adj:
        adj[n].sort()

    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    components: list[set[str]] = []
    counter = 0

    for start in nodes:
        if start in index:
            continue
        work = [(start, 0)]
        while work:
            node, ei = work[-1]
            if ei == 0:
                index[node] = lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            succs = adj[node]
            while ei < len(succs):
                succ = succs[ei]
                ei += 1
                if succ not in index:
                    work[-1] = (node, ei)
                    work.append((succ, 0))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if advanced:
                continue
            work.pop()
            if lowlink[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                components.append(comp)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return components


def translation_order(graph: DependencyGraph, order_key=None) -> list[tuple[str, ...]]:
    """Condensed post-order schedule: every group after all groups it uses.

    `order_key(fragment_id)` breaks ties among incomparable groups; the
    default is lexicographic fragment id.
    """
    if order_key is None:
        order_key = lambda fid: fid  # noqa: E731
    comps = strongly_connected_components(graph.nodes, graph.edges)
    comp_of: dict[str, int] = {}
    for i, comp in enumerate(comps):
        for n in comp:
            comp_of[n] = i

    # condensation edge a->b means group(a) needs group(b) scheduled first
    needs: dict[int, set[int]] = {i: set() for i in range(len(comps))}
    feeds: dict[int, set[int]] = {i: set() for i in range(len(comps))}
    for a, b in graph.edges:
        if a not in comp_of or b not in comp_of:
            continue
        ca, cb = comp_of[a], comp_of[b]
        if ca != cb:
            needs[ca].add(cb)
            feeds[cb].add(ca)

    group_key = {i: min(order_key(n) for n in comp) for i, comp in enumerate(comps)}
    pending = {i: len(needs[i]) for i in range(len(comps))}
    ready = [(group_key[i], i) for i, cnt in pending.items() if cnt == 0]
    heapq.heapify(ready)
    ordered: list[tuple[str, ...]] = []
    while ready:
        _, ci = heapq.heappop(ready)
        members = sorted(comps[ci], key=order_key)
        ordered.append(tuple(members))
        for dependent in feeds[ci]:
            pending[dependent] -= 1
            if pending[dependent] == 0:
                heapq.heappush(ready, (group_key[dependent], dependent))
    if len(ordered) != len(comps):
        raise AssertionError("condensation is cyclic; SCC computation is broken")
    return ordered


def schedule_fragments(project: SourceProject, graph: DependencyGraph) -> list[list[SourceFragment]]:
    by_id = {f.id: f for f in project.fragments}
    return [[by_id[fid] for fid in grp] for grp in graph.groups]
