"""Feature-mapping rules: premise matchers, prompt directives, conclusion checks.

Each rule pairs a syntactic premise over a source fragment with a natural-
language directive for the translation backend and a parse-only conclusion
check over the generated code. Interface rules additionally carry post-
processors that decompose traits into single-method sub-traits and rewrite
inherent impls onto those sub-traits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import rustsrc
from .errors import RuleViolation, SignatureMismatch
from .fragments import (
    FREE_FUNCTION,
    GLOBAL_VAR,
    INTERFACE_DEF,
    METHOD,
    STRUCT_DEF,
    SourceFragment,
    SourceSignature,
)

MAP_VAR_INIT = "MapVarInit"
MAP_STRUCT = "MapStruct"
MAP_FN = "MapFn"
MAP_METHOD = "MapMethod"
MAP_CUSTOM_ERROR = "MapCustomError"
MAP_ERROR_HANDLING_FN = "MapErrorHandlingFn"
MAP_INTERFACE = "MapInterface"
MAP_IMPL_INTERFACE = "MapImplInterface"

ALL_RULES = (
    MAP_VAR_INIT,
    MAP_STRUCT,
    MAP_FN,
    MAP_METHOD,
    MAP_CUSTOM_ERROR,
    MAP_ERROR_HANDLING_FN,
    MAP_INTERFACE,
    MAP_IMPL_INTERFACE,
)

DIRECTIVES = {
    MAP_VAR_INIT: (
        "Translate the global variable declaration to a Rust `static` whose type is "
        "wrapped in `once_cell::sync::Lazy` and whose initializer is `Lazy::new(|| ...)`. "
        "Never call a non-const function directly in a static initializer."
    ),
    MAP_STRUCT: (
        "Translate the Go struct to a Rust struct with one field per Go field. "
        "Derive Debug, Clone, PartialEq, serde::Serialize and serde::Deserialize, and put "
        '`#[serde(rename = "<GoFieldName>")]` on every field so the original Go field '
        "name is preserved on the wire."
    ),
    MAP_FN: "Translate the Go function to a free-standing Rust function.",
    MAP_METHOD: (
        "Translate the Go method to a Rust inherent `impl` block for the receiver type "
        "containing exactly one method."
    ),
    MAP_CUSTOM_ERROR: (
        "This method implements Go's error interface. Translate it into three Rust trait "
        "implementations for the receiver type: `std::fmt::Debug`, `std::fmt::Display` "
        "(carrying the Error() string logic), and `std::error::Error`."
    ),
    MAP_ERROR_HANDLING_FN: (
        "The Go function returns an error as its last result. The Rust translation must "
        "return `Result<..., anyhow::Error>`; use the unified `anyhow::Error` type, never "
        "a concrete custom error type, in the signature."
    ),
    MAP_INTERFACE: (
        "Translate the Go interface to a plain Rust trait declaring exactly the listed "
        "method signatures (no default bodies)."
    ),
    MAP_IMPL_INTERFACE: (
        "Translate the Go method to a Rust inherent `impl` block with exactly one method. "
        "The method signature must match the required trait method signature exactly."
    ),
}


@dataclass
class FeatureRule:
    rule_id: str
    premise: callable
    directive: str
    conclusion: callable
    postprocess: str = ""  # '' | 'decompose_interface' | 'rewrite_impl_interface'


@dataclass
class GadgetRegistry:
    """Sub-trait bookkeeping for interface decomposition.

    gadget_trait maps (Go method name, signature key) to the generated
    sub-trait name; the first interface to introduce a signature owns the
    name. rust_sigs carries the Rust-side method signature declared by each
    sub-trait, and supertraits lists the already-translated traits an
    interface is structurally a super-interface of.
    """

    gadget_trait: dict[tuple[str, tuple], str] = field(default_factory=dict)
    rust_sigs: dict[str, rustsrc.RustFn] = field(default_factory=dict)
    supertraits: dict[str, list[str]] = field(default_factory=dict)
    owners: dict[str, str] = field(default_factory=dict)  # sub-trait -> declaring fragment id
    trait_owners: dict[str, str] = field(default_factory=dict)  # main trait -> fragment id

    def sub_trait_for(self, method: str, sig: SourceSignature) -> str | None:
        return self.gadget_trait.get((method, sig.key()))

    def register(self, iface: str, method: str, sig: SourceSignature, fn: rustsrc.RustFn) -> str:
        name = f"{iface}_{method}"
        existing = set(self.gadget_trait.values())
        if name in existing:
            raise RuleViolation(MAP_INTERFACE, f"sub-trait name {name} already taken")
        self.gadget_trait[(method, sig.key())] = name
        self.rust_sigs[name] = fn
        return name

    def to_json(self) -> dict:
        return {
            "gadget_trait": [
                {"method": m, "key": [list(k[0]), list(k[1])], "name": v}
                for (m, k), v in self.gadget_trait.items()
            ],
            "rust_sigs": {name: fn.signature_text() for name, fn in self.rust_sigs.items()},
            "supertraits": self.supertraits,
            "owners": self.owners,
            "trait_owners": self.trait_owners,
        }

    @staticmethod
    def from_json(obj: dict) -> "GadgetRegistry":
        reg = GadgetRegistry()
        for row in obj.get("gadget_trait", []):
            params, results = row["key"]
            key = (tuple(params), tuple(results))
            reg.gadget_trait[(row["method"], key)] = row["name"]
        for name, sig_text in obj.get("rust_sigs", {}).items():
            fn = rustsrc.find_fn(sig_text + " {}")
            if fn is not None:
                reg.rust_sigs[name] = fn
        reg.supertraits = {k: list(v) for k, v in obj.get("supertraits", {}).items()}
        reg.owners = dict(obj.get("owners", {}))
        reg.trait_owners = dict(obj.get("trait_owners", {}))
        return reg


def match_rules(
    fragment: SourceFragment,
    interface_sigs: set[tuple[str, tuple]] | None = None,
) -> list[tuple[str, str]]:
    """All (rule_id, directive) pairs whose premise holds for the fragment.

    Interface-implementing methods and Error() methods suppress MapMethod;
    MapErrorHandlingFn composes with whichever structural rule fired.
    """
    interface_sigs = interface_sigs or set()
    matched: list[str] = []
    if fragment.kind == GLOBAL_VAR:
        if fragment.var_init_is_call:
            matched.append(MAP_VAR_INIT)
    elif fragment.kind == STRUCT_DEF:
        matched.append(MAP_STRUCT)
    elif fragment.kind == INTERFACE_DEF:
        matched.append(MAP_INTERFACE)
    elif fragment.kind == FREE_FUNCTION:
        matched.append(MAP_FN)
    elif fragment.kind == METHOD:
        sig = fragment.signature
        if (fragment.name, sig.key()) in interface_sigs:
            matched.append(MAP_IMPL_INTERFACE)
        elif _is_error_method(fragment):
            matched.append(MAP_CUSTOM_ERROR)
        else:
            matched.append(MAP_METHOD)
    if fragment.is_function_like and fragment.signature.returns_error and not _is_error_method(fragment):
        matched.append(MAP_ERROR_HANDLING_FN)
    return [(rid, DIRECTIVES[rid]) for rid in matched]


def _is_error_method(fragment: SourceFragment) -> bool:
    return (
        fragment.kind == METHOD
        and fragment.name == "Error"
        and fragment.signature is not None
        and fragment.signature.params == ()
        and fragment.signature.results == ("string",)
    )


def check_conclusion(
    rule_id: str,
    target_code: str,
    *,
    fragment: SourceFragment | None = None,
    registry: GadgetRegistry | None = None,
) -> list[RuleViolation]:
    """Parse-only conclusion check; empty list means pass."""
    try:
        items = rustsrc.parse_items(target_code)
    except rustsrc.ParseViolation as exc:
        return [RuleViolation(rule_id, f"target code does not parse: {exc}")]
    checker = _CHECKERS[rule_id]
    return checker(items, target_code, fragment, registry)


def _check_var_init(items, code, fragment, registry):
    for item in items:
        if item.kind != "static":
            continue
        ty = rustsrc.normalize_rust(item.type_text)
        init = rustsrc.normalize_rust(item.init_text)
        lazy_type = ty.startswith("Lazy<") or ty.startswith("once_cell::sync::Lazy<")
        lazy_new = ("Lazy::new(" in init or "once_cell::sync::Lazy::new(" in init) and "||" in init
        if lazy_type and lazy_new:
            return []
        if not lazy_type:
            return [RuleViolation(MAP_VAR_INIT, f"static {item.name} type {item.type_text!r} is not wrapped in Lazy<...>")]
        return [RuleViolation(MAP_VAR_INIT, f"static {item.name} initializer is not a Lazy::new closure")]
    return [RuleViolation(MAP_VAR_INIT, "no static item found")]


def _check_struct(items, code, fragment, registry):
    if any(i.kind == "struct" for i in items):
        return []
    return [RuleViolation(MAP_STRUCT, "no struct item found")]


def _check_fn(items, code, fragment, registry):
    if any(i.kind == "fn" for i in items):
        return []
    return [RuleViolation(MAP_FN, "no free function found")]


def _check_method(items, code, fragment, registry):
    for item in items:
        if item.kind == "impl" and item.trait_path == "" and len(item.fns) == 1:
            return []
    return [RuleViolation(MAP_METHOD, "no inherent impl block with exactly one method")]


def _result_error_arm(ret_text: str) -> str | None:
    """The error type of a Result<..> return, or None when not a Result."""
    norm = rustsrc.normalize_rust(ret_text)
    if not norm.startswith("Result<") and not norm.startswith("std::result::Result<"):
        return None
    inner = ret_text[ret_text.find("<") + 1 : ret_text.rfind(">")]
    parts = rustsrc._split_top(inner, ",")
    if len(parts) < 2:
        return None
    return rustsrc.normalize_rust(parts[-1])


def _primary_fn(items) -> rustsrc.RustFn | None:
    for item in items:
        if item.kind == "fn" and item.fn is not None:
            return item.fn
        if item.kind == "impl" and item.fns:
            return item.fns[0]
    return None


def _check_error_handling_fn(items, code, fragment, registry):
    fn = _primary_fn(items)
    if fn is None:
        return [RuleViolation(MAP_ERROR_HANDLING_FN, "no function found")]
    err = _result_error_arm(fn.ret)
    if err is None:
        return [RuleViolation(MAP_ERROR_HANDLING_FN, f"{fn.name} does not return Result<...>")]
    if err != "anyhow::Error":
        return [RuleViolation(MAP_ERROR_HANDLING_FN, f"{fn.name} error type is {err}, not the unified anyhow::Error")]
    return []


_DEBUG_PATHS = {"Debug", "fmt::Debug", "std::fmt::Debug"}
_DISPLAY_PATHS = {"Display", "fmt::Display", "std::fmt::Display"}
_STD_ERROR_PATHS = {"Error", "error::Error", "std::error::Error"}


def _check_custom_error(items, code, fragment, registry):
    debug_for: set[str] = set()
    display_for: set[str] = set()
    error_for: set[str] = set()
    for item in items:
        if item.kind == "struct" and "Debug" in item.derives:
            debug_for.add(item.name)
        if item.kind != "impl" or not item.trait_path:
            continue
        path = rustsrc.normalize_rust(item.trait_path)
        if path in _DEBUG_PATHS:
            debug_for.add(item.impl_type)
        elif path in _DISPLAY_PATHS:
            display_for.add(item.impl_type)
        elif path in _STD_ERROR_PATHS:
            error_for.add(item.impl_type)
    covered = debug_for & display_for & error_for
    if covered:
        return []
    missing = []
    if not debug_for:
        missing.append("Debug")
    if not display_for:
        missing.append("Display")
    if not error_for:
        missing.append("std::error::Error")
    detail = f"missing trait implementations: {', '.join(missing)}" if missing else (
        "Debug/Display/std::error::Error implementations do not cover one common type"
    )
    return [RuleViolation(MAP_CUSTOM_ERROR, detail)]


def _check_interface(items, code, fragment, registry):
    """Accepts the raw form (one plain trait with the requested methods) and
    the decomposed final form (sub-traits covering the methods)."""
    traits = [i for i in items if i.kind == "trait"]
    if not traits:
        return [RuleViolation(MAP_INTERFACE, "no trait item found")]
    if fragment is not None:
        have = {_name_key(m.name) for t in traits for m in t.trait_methods}
        if registry is not None:
            for name, sig in fragment.interface_methods:
                if registry.sub_trait_for(name, sig) is not None:
                    have.add(_name_key(name))
        missing = [name for name, _ in fragment.interface_methods if _name_key(name) not in have]
        if missing:
            return [RuleViolation(MAP_INTERFACE, f"trait omits methods: {', '.join(missing)}")]
    return []


def _check_impl_interface(items, code, fragment, registry):
    """Accepts the raw form (inherent impl, one method) and the rewritten
    final form (impl of the registry sub-trait)."""
    sub = want = None
    if fragment is not None and registry is not None:
        sub = registry.sub_trait_for(fragment.name, fragment.signature)
        if sub is not None:
            want = registry.rust_sigs[sub]
    candidates = [
        i for i in items
        if i.kind == "impl" and len(i.fns) == 1
        and (i.trait_path == "" or (sub is not None and rustsrc.normalize_rust(i.trait_path) == sub))
    ]
    if not candidates:
        return [RuleViolation(MAP_IMPL_INTERFACE, "no inherent impl block with exactly one method")]
    if want is not None:
        got = candidates[0].fns[0]
        if not _consistent_signatures(want, got):
            return [
                RuleViolation(
                    MAP_IMPL_INTERFACE,
                    f"method signature `{got.signature_text()}` differs from "
                    f"sub-trait {sub} signature `{want.signature_text()}`",
                )
            ]
    return []


_CHECKERS = {
    MAP_VAR_INIT: _check_var_init,
    MAP_STRUCT: _check_struct,
    MAP_FN: _check_fn,
    MAP_METHOD: _check_method,
    MAP_CUSTOM_ERROR: _check_custom_error,
    MAP_ERROR_HANDLING_FN: _check_error_handling_fn,
    MAP_INTERFACE: _check_interface,
    MAP_IMPL_INTERFACE: _check_impl_interface,
}


def _name_key(name: str) -> str:
    return name.replace("_", "").lower()


def _consistent_signatures(want: rustsrc.RustFn, got: rustsrc.RustFn) -> bool:
    return (
        want.name == got.name
        and want.self_param == got.self_param
        and [rustsrc.normalize_rust(t) for _, t in want.params]
        == [rustsrc.normalize_rust(t) for _, t in got.params]
        and rustsrc.normalize_rust(want.ret) == rustsrc.normalize_rust(got.ret)
    )


def requested_interface_methods(
    fragment: SourceFragment, registry: GadgetRegistry | None
) -> list[tuple[str, SourceSignature]]:
    """Interface methods that still need a backend translation (no sub-trait yet)."""
    out = []
    for name, sig in fragment.interface_methods:
        if registry is not None and registry.sub_trait_for(name, sig) is not None:
            continue
        out.append((name, sig))
    return out


def decompose_interface(
    fragment: SourceFragment,
    registry: GadgetRegistry,
    raw_trait: str | None,
) -> str:
    """Split a plain trait into sub-traits plus a bounded main trait.

    New methods get one sub-trait each, named `<Interface>_<Method>`;
    methods whose signature already owns a sub-trait are reused from the
    registry. The main trait is bounded by all sub-traits plus the
    supertraits recorded for this interface, and a blanket impl makes any
    type implementing the sub-traits implement the main trait.
    """
    requested = requested_interface_methods(fragment, registry)
    raw_fns: dict[str, rustsrc.RustFn] = {}
    if requested:
        if raw_trait is None:
            raise SignatureMismatch(f"{fragment.name}: missing raw trait for methods {[n for n, _ in requested]}")
        traits = [i for i in rustsrc.parse_items(raw_trait) if i.kind == "trait"]
        if not traits:
            raise SignatureMismatch(f"{fragment.name}: backend output contains no trait")
        for fn in traits[0].trait_methods:
            raw_fns[_name_key(fn.name)] = fn

    sub_defs: list[str] = []
    bound_names: list[str] = []
    for name, sig in fragment.interface_methods:
        existing = registry.sub_trait_for(name, sig)
        if existing is not None:
            bound_names.append(existing)
            continue
        fn = raw_fns.get(_name_key(name))
        if fn is None:
            raise SignatureMismatch(f"{fragment.name}: backend trait omits method {name}")
        sub_name = registry.register(fragment.name, name, sig, fn)
        bound_names.append(sub_name)
        sub_defs.append(f"trait {sub_name} {{\n    {fn.signature_text()};\n}}")

    supers = registry.supertraits.get(fragment.name, [])
    all_bounds = bound_names + [s for s in supers if s not in bound_names]
    bounds_text = f": {' + '.join(all_bounds)}" if all_bounds else ""
    main = f"trait {fragment.name}{bounds_text} {{}}"
    if bound_names:
        where = " + ".join(bound_names)
        blanket = f"impl<T> {fragment.name} for T where T: {where} {{}}"
    else:
        blanket = f"impl<T> {fragment.name} for T {{}}"
    parts = [main] + sub_defs + [blanket]
    return "\n".join(parts) + "\n"


def rewrite_impl_interface(
    fragment: SourceFragment,
    registry: GadgetRegistry,
    raw_impl: str,
) -> str:
    """Turn the inherent impl into an impl of the registry sub-trait.

    The method body is preserved byte-for-byte; only the impl header
    changes.
    """
    sub = registry.sub_trait_for(fragment.name, fragment.signature)
    if sub is None:
        raise SignatureMismatch(f"{fragment.name}: no registered sub-trait for this method")
    want = registry.rust_sigs[sub]
    items = rustsrc.parse_items(raw_impl)
    for item in items:
        if item.kind != "impl" or item.trait_path or len(item.fns) != 1:
            continue
        got = item.fns[0]
        if not _consistent_signatures(want, got):
            raise SignatureMismatch(
                f"{fragment.name}: generated signature `{got.signature_text()}` does not "
                f"match sub-trait {sub} signature `{want.signature_text()}`"
            )
        fn_text = (got.header + got.body).strip()
        new_item = f"impl {sub} for {item.impl_type} {{\n    {fn_text}\n}}"
        return raw_impl[: item.start] + new_item + raw_impl[item.end :]
    raise SignatureMismatch(f"{fragment.name}: no inherent impl with exactly one method")
