"""Source project model: fragments, signatures, and the JSON manifest."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from . import canonjson
from .errors import EmptyProject, ParseError
from .golang import GoDecl, GoFile, GoSignature, parse_go_file

GLOBAL_VAR = "GlobalVar"
STRUCT_DEF = "StructDef"
INTERFACE_DEF = "InterfaceDef"
FREE_FUNCTION = "FreeFunction"
METHOD = "Method"

_KIND_FROM_DECL = {
    "global": GLOBAL_VAR,
    "struct": STRUCT_DEF,
    "interface": INTERFACE_DEF,
    "func": FREE_FUNCTION,
    "method": METHOD,
}


@dataclass(frozen=True)
class SourceSignature:
    params: tuple[tuple[str, str], ...] = ()
    results: tuple[str, ...] = ()

    @property
    def returns_error(self) -> bool:
        return bool(self.results) and self.results[-1] == "error"

    def key(self) -> tuple:
        """Identity for interface-method dedup: types only, names ignored."""
        return (tuple(ty for _, ty in self.params), self.results)

    @staticmethod
    def from_go(sig: GoSignature) -> "SourceSignature":
        return SourceSignature(tuple((n, t) for n, t in sig.params), tuple(sig.results))

    def to_json(self) -> dict:
        return {
            "params": [[n, t] for n, t in self.params],
            "results": list(self.results),
            "returns_error": self.returns_error,
        }

    @staticmethod
    def from_json(obj: dict) -> "SourceSignature":
        return SourceSignature(
            tuple((n, t) for n, t in obj.get("params", [])),
            tuple(obj.get("results", [])),
        )


@dataclass
class SourceFragment:
    id: str
    kind: str
    name: str
    source_text: str
    file: str
    package: str
    span: tuple[int, int]
    receiver_type: str = ""
    receiver_is_pointer: bool = False
    receiver_name: str = ""
    signature: SourceSignature | None = None
    struct_fields: tuple[tuple[str, str], ...] = ()
    interface_methods: tuple[tuple[str, SourceSignature], ...] = ()
    var_type: str = ""
    var_init: str = ""
    var_init_is_call: bool = False
    is_const: bool = False
    in_group: bool = False

    def __post_init__(self):
        if (self.kind == METHOD) != bool(self.receiver_type):
            raise ValueError(f"{self.id}: kind/receiver mismatch")

    @property
    def is_function_like(self) -> bool:
        return self.kind in (FREE_FUNCTION, METHOD)

    @property
    def line_count(self) -> int:
        return self.span[1] - self.span[0] + 1

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "kind": self.kind,
            "name": self.name,
            "receiver_type": self.receiver_type or None,
            "signature": self.signature.to_json() if self.signature else None,
            "source_text": self.source_text,
            "file": self.file,
            "package": self.package,
            "span": list(self.span),
        }
        if self.kind == STRUCT_DEF:
            obj["struct_fields"] = [[n, t] for n, t in self.struct_fields]
        if self.kind == INTERFACE_DEF:
            obj["interface_methods"] = [[n, s.to_json()] for n, s in self.interface_methods]
        if self.kind == GLOBAL_VAR:
            obj["var_type"] = self.var_type
            obj["var_init"] = self.var_init
            obj["var_init_is_call"] = self.var_init_is_call
            obj["is_const"] = self.is_const
        return obj


@dataclass
class SourceProject:
    root: str
    fragments: list[SourceFragment]
    files: dict[str, str] = field(default_factory=dict)  # rel path -> source
    metadata: dict[str, list[str]] = field(default_factory=dict)  # rel path -> retained pieces
    imports: dict[str, list[str]] = field(default_factory=dict)  # rel path -> import paths
    test_files: dict[str, str] = field(default_factory=dict)

    def by_id(self, fragment_id: str) -> SourceFragment:
        for f in self.fragments:
            if f.id == fragment_id:
                return f
        raise KeyError(fragment_id)

    def ids(self) -> list[str]:
        return [f.id for f in self.fragments]

    def declared_names(self) -> dict[str, list[SourceFragment]]:
        """Package-scoped name -> fragments declared under that name."""
        names: dict[str, list[SourceFragment]] = {}
        for f in self.fragments:
            names.setdefault(f.name, []).append(f)
        return names

    def struct_by_name(self, name: str) -> SourceFragment | None:
        for f in self.fragments:
            if f.kind == STRUCT_DEF and f.name == name:
                return f
        return None

    def manifest(self) -> str:
        """JSON manifest of all fragments, sorted by id (debugging/replay surface)."""
        rows = sorted((f.to_json() for f in self.fragments), key=lambda r: r["id"])
        return canonjson.dumps(rows)


def _fragment_id(package_dir: str, d: GoDecl) -> str:
    prefix = f"{package_dir}/" if package_dir not in (".", "") else ""
    if d.kind == "method":
        return f"{prefix}{d.receiver_type}.{d.name}"
    return f"{prefix}{d.name}"


def _to_fragment(decl: GoDecl, gofile: GoFile, rel: str, package_dir: str) -> SourceFragment:
    return SourceFragment(
        id=_fragment_id(package_dir, decl),
        kind=_KIND_FROM_DECL[decl.kind],
        name=decl.name,
        receiver_type=decl.receiver_type,
        receiver_is_pointer=decl.receiver_is_pointer,
        receiver_name=decl.receiver_name,
        signature=SourceSignature.from_go(decl.signature) if decl.signature else None,
        source_text=gofile.source[decl.start : decl.end],
        file=rel,
        package=gofile.package,
        span=(decl.start_line, decl.end_line),
        struct_fields=tuple((n, t) for n, t in decl.struct_fields),
        interface_methods=tuple(
            (n, SourceSignature.from_go(s)) for n, s in decl.interface_methods
        ),
        var_type=decl.var_type,
        var_init=decl.var_init,
        var_init_is_call=decl.var_init_is_call,
        is_const=decl.is_const,
        in_group=decl.in_group,
    )


def parse_project(root_dir: str | Path) -> SourceProject:
    """Parse every .go file under `root_dir` into declaration fragments.

    Test files (_test.go) are kept aside as the project's test suite; they
    are instrumented for snapshot collection but never become fragments.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise ParseError(str(root), (0, 0), "source root is not a directory")
    project = SourceProject(root=str(root), fragments=[])
    go_paths = sorted(p for p in root.rglob("*.go"))
    for path in go_paths:
        rel = path.relative_to(root).as_posix()
        source = path.read_text(encoding="utf-8")
        if path.name.endswith("_test.go"):
            project.test_files[rel] = source
            continue
        gofile = parse_go_file(source, rel)
        project.files[rel] = source
        project.imports[rel] = gofile.imports
        project.metadata[rel] = [gofile.source[a:b] for a, b in gofile.metadata_spans]
        package_dir = os.path.dirname(rel) or "."
        for decl in gofile.decls:
            project.fragments.append(_to_fragment(decl, gofile, rel, package_dir))
    if not project.fragments:
        raise EmptyProject(f"no declarations found under {root}")
    seen: set[str] = set()
    for f in project.fragments:
        if f.id in seen:
            raise ParseError(f.file, f.span, f"duplicate fragment id {f.id}")
        seen.add(f.id)
    return project


def interface_methods(project: SourceProject) -> set[tuple[str, tuple]]:
    """Union of (method name, signature key) over all interface declarations."""
    out: set[tuple[str, tuple]] = set()
    for f in project.fragments:
        if f.kind != INTERFACE_DEF:
            continue
        for name, sig in f.interface_methods:
            out.add((name, sig.key()))
    return out
