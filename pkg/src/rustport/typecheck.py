"""Type-compatibility of translated types and signatures against feasible values.

A target type is compatible with a source type when every feasible value
crosses the boundary and returns unchanged: the value's canonical encoding
must deserialize on the target side, and the target's re-encoding must
deserialize back to the same value on the source side (canonical-string
equality). Feasible values come from execution snapshots; an empty value
set makes the check vacuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import canonjson, rustsrc
from .errors import UnmarshalableSlot
from .fragments import METHOD, SourceFragment, SourceProject
from .probes import ProbeRunner
from .snapshots import SnapshotStore, feasible_values_for_slot

COMPATIBLE = "compatible"
INCOMPATIBLE = "incompatible"
VACUOUS = "vacuous"


class SourceCodecError(ValueError):
    pass


_INT_RANGES = {
    "int": (-(2**63), 2**63 - 1),
    "int64": (-(2**63), 2**63 - 1),
    "int32": (-(2**31), 2**31 - 1),
    "uint32": (0, 2**32 - 1),
    "byte": (0, 255),
}


class SourceCodec:
    """The source side of the boundary: decides whether a canonical JSON
    value inhabits a source type. Canonical floats always carry a decimal
    point, so integer-typed and float-typed slots never overlap."""

    def __init__(self, project: SourceProject):
        self.structs = {
            f.name: list(f.struct_fields) for f in project.fragments if f.kind == "StructDef"
        }

    def decode(self, type_text: str, value):
        t = type_text.strip()
        if t in _INT_RANGES:
            lo, hi = _INT_RANGES[t]
            if isinstance(value, bool) or not isinstance(value, int):
                raise SourceCodecError(f"{value!r} is not {t}")
            if not lo <= value <= hi:
                raise SourceCodecError(f"{value!r} out of range for {t}")
            return value
        if t in ("float64", "float32"):
            if not isinstance(value, float):
                raise SourceCodecError(f"{value!r} is not {t}")
            return value
        if t == "string":
            if not isinstance(value, str):
                raise SourceCodecError(f"{value!r} is not a string")
            return value
        if t == "bool":
            if not isinstance(value, bool):
                raise SourceCodecError(f"{value!r} is not a bool")
            return value
        if t.startswith("[]"):
            if value is None:
                return None
            if not isinstance(value, list):
                raise SourceCodecError(f"{value!r} is not a slice")
            return [self.decode(t[2:], v) for v in value]
        if t.startswith("*"):
            if value is None:
                return None
            return self.decode(t[1:], value)
        if t in self.structs:
            if not isinstance(value, dict):
                raise SourceCodecError(f"{value!r} is not a {t}")
            fields = self.structs[t]
            declared = {n for n, _ in fields}
            extra = set(value) - declared
            if extra:
                raise SourceCodecError(f"unknown fields {sorted(extra)} for {t}")
            missing = declared - set(value)
            if missing:
                raise SourceCodecError(f"missing fields {sorted(missing)} for {t}")
            return {n: self.decode(ft, value[n]) for n, ft in fields}
        raise UnmarshalableSlot(t)

    def accepts(self, type_text: str, value) -> bool:
        try:
            self.decode(type_text, value)
            return True
        except (SourceCodecError, UnmarshalableSlot):
            return False


@dataclass
class CompatReport:
    subject: str
    verdict: str
    witnesses: list[tuple] = field(default_factory=list)  # (value, direction, detail)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict in (COMPATIBLE, VACUOUS)


def check_type_compat(
    source_type: str,
    target_type: str,
    values: list,
    codec: SourceCodec,
    probes: ProbeRunner,
    subject: str = "",
) -> CompatReport:
    """Definition check: each v crosses as v_r = D_Tr(S_T(v)) and returns as
    D_T(S_Tr(v_r)) == v, compared on canonical strings."""
    if not values:
        return CompatReport(subject or source_type, VACUOUS)
    witnesses = []
    for v in values:
        encoded = canonjson.dumps(v)
        accepted, out = probes.run(target_type, encoded)
        if not accepted:
            witnesses.append((v, "source->target", out))
            continue
        try:
            back_text = canonjson.recanonicalize(out)
        except ValueError as exc:
            witnesses.append((v, "target->source", f"probe output is not JSON: {exc}"))
            continue
        try:
            v_back = codec.decode(source_type, canonjson.loads(back_text))
        except (SourceCodecError, UnmarshalableSlot) as exc:
            witnesses.append((v, "target->source", str(exc)))
            continue
        if canonjson.dumps(v_back) != encoded:
            witnesses.append((v, "round-trip", f"came back as {canonjson.dumps(v_back)}"))
    verdict = INCOMPATIBLE if witnesses else COMPATIBLE
    return CompatReport(subject or source_type, verdict, witnesses)


def value_type_of(target_param_type: str) -> str:
    """The probe-able value type of a target parameter/return slot."""
    t = target_param_type.strip()
    for prefix in ("&mut ", "&"):
        if t.startswith(prefix):
            t = t[len(prefix):].strip()
    return t


def _result_parts(ret_text: str) -> tuple[list[str], bool]:
    """Decompose a target return type into value slots; flags Result form."""
    t = ret_text.strip()
    if not t or t == "()":
        return [], False
    norm = rustsrc.normalize_rust(t)
    if norm.startswith("Result<") or norm.startswith("std::result::Result<"):
        inner = t[t.find("<") + 1 : t.rfind(">")]
        parts = rustsrc._split_top(inner, ",")
        value = parts[0].strip() if parts else "()"
        return _tuple_parts(value), True
    return _tuple_parts(t), False


def _tuple_parts(t: str) -> list[str]:
    t = t.strip()
    if not t or t == "()":
        return []
    if t.startswith("(") and t.endswith(")"):
        return [p.strip() for p in rustsrc._split_top(t[1:-1], ",") if p.strip()]
    return [t]


@dataclass
class SlotPair:
    label: str
    source_type: str
    target_type: str
    values: list


def signature_slot_pairs(
    fragment: SourceFragment,
    target_fn: rustsrc.RustFn,
    impl_type: str,
    store: SnapshotStore,
) -> list[SlotPair] | CompatReport:
    """Pair source and target slots positionally; arity or shape mismatches
    come back as an incompatible report instead of pairs."""
    fid = fragment.id
    sig = fragment.signature
    pairs: list[SlotPair] = []
    in_index = 0
    source_results = list(sig.results[:-1]) if sig.returns_error else list(sig.results)
    n_out_results = len(source_results)

    if fragment.kind == METHOD:
        if not target_fn.self_param:
            return CompatReport(fid, INCOMPATIBLE, [("<receiver>", "arity", "target has no self parameter")])
        values = feasible_values_for_slot(store, fid, "in", 0)
        values += feasible_values_for_slot(store, fid, "out", n_out_results)
        pairs.append(SlotPair("receiver", fragment.receiver_type, impl_type, _dedup(values)))
        in_index = 1
    elif target_fn.self_param:
        return CompatReport(fid, INCOMPATIBLE, [("<receiver>", "arity", "target takes self but source is not a method")])

    if len(sig.params) != len(target_fn.params):
        return CompatReport(
            fid, INCOMPATIBLE,
            [("<params>", "arity", f"source has {len(sig.params)} parameters, target {len(target_fn.params)}")],
        )
    ptr_out_index = n_out_results + (1 if fragment.kind == METHOD else 0)
    for i, ((pname, ptype), (tname, ttype)) in enumerate(zip(sig.params, target_fn.params)):
        values = feasible_values_for_slot(store, fid, "in", in_index + i)
        if ptype.startswith("*"):
            values += feasible_values_for_slot(store, fid, "out", ptr_out_index)
            ptr_out_index += 1
        pairs.append(SlotPair(f"param {pname or i}", ptype, value_type_of(ttype), _dedup(values)))

    target_results, is_result = _result_parts(target_fn.ret)
    if sig.returns_error and not is_result:
        return CompatReport(fid, INCOMPATIBLE, [("<results>", "shape", "source returns error but target is not a Result")])
    if not sig.returns_error and is_result:
        return CompatReport(fid, INCOMPATIBLE, [("<results>", "shape", "target is a Result but source returns no error")])
    if len(source_results) != len(target_results):
        return CompatReport(
            fid, INCOMPATIBLE,
            [("<results>", "arity", f"source has {len(source_results)} results, target {len(target_results)}")],
        )
    for j, (st, tt) in enumerate(zip(source_results, target_results)):
        values = feasible_values_for_slot(store, fid, "out", j)
        pairs.append(SlotPair(f"result {j}", st, tt, _dedup(values)))
    return pairs


def _display_impl_type(target_code: str) -> str | None:
    """The receiver type of a Display impl, when the fragment is the
    three-impl custom-error form (no plain function present)."""
    try:
        items = rustsrc.parse_items(target_code)
    except rustsrc.ParseViolation:
        return None
    display = None
    for item in items:
        if item.kind == "impl" and rustsrc.normalize_rust(item.trait_path) in (
            "Display", "fmt::Display", "std::fmt::Display",
        ):
            display = item.impl_type
        if item.kind == "impl" and not item.trait_path and item.fns:
            return None
        if item.kind == "fn":
            return None
    return display


def _dedup(values: list) -> list:
    out, seen = [], set()
    for v in values:
        k = canonjson.dumps(v)
        if k not in seen:
            seen.add(k)
            out.append(v)
    return out


def check_signature_compat(
    fragment: SourceFragment,
    target_code: str,
    store: SnapshotStore,
    codec: SourceCodec,
    probes: ProbeRunner,
) -> CompatReport:
    """Slot-wise type compatibility of a function/method signature."""
    display_type = _display_impl_type(target_code)
    if display_type is not None:
        # custom-error form: Error() string lives in a Display impl whose
        # string result is compatible by construction; check the receiver
        values = feasible_values_for_slot(store, fragment.id, "in", 0)
        values += feasible_values_for_slot(store, fragment.id, "out", 1)
        return check_type_compat(fragment.receiver_type, display_type, _dedup(values),
                                 codec, probes, subject=fragment.id)
    fn = rustsrc.find_fn(target_code)
    if fn is None:
        return CompatReport(fragment.id, INCOMPATIBLE, [("<fn>", "shape", "no function in target code")])
    impl_type = ""
    for item in rustsrc.parse_items(target_code):
        if item.kind == "impl" and item.fns:
            impl_type = item.impl_type
            break
    pairs = signature_slot_pairs(fragment, fn, impl_type, store)
    if isinstance(pairs, CompatReport):
        return pairs
    witnesses = []
    any_checked = False
    for pair in pairs:
        if not pair.values:
            continue
        any_checked = True
        report = check_type_compat(pair.source_type, pair.target_type, pair.values,
                                   codec, probes, subject=f"{fragment.id}:{pair.label}")
        if report.verdict == INCOMPATIBLE:
            witnesses.extend((pair.label,) + w for w in report.witnesses)
    if witnesses:
        return CompatReport(fragment.id, INCOMPATIBLE, witnesses)
    return CompatReport(fragment.id, COMPATIBLE if any_checked else VACUOUS)


def check_global_compat(
    fragment: SourceFragment,
    target_code: str,
    store: SnapshotStore,
    codec: SourceCodec,
    probes: ProbeRunner,
) -> CompatReport:
    """Global declarations: the initialized value must cross into the
    static's payload type (Lazy<T> unwraps to T)."""
    values = feasible_values_for_slot(store, fragment.id, "out", 0)
    if not values or not fragment.var_type:
        return CompatReport(fragment.id, VACUOUS)
    target_type = ""
    for item in rustsrc.parse_items(target_code):
        if item.kind in ("static", "const"):
            t = item.type_text.strip()
            norm = rustsrc.normalize_rust(t)
            if norm.startswith("Lazy<") or norm.startswith("once_cell::sync::Lazy<"):
                t = t[t.find("<") + 1 : t.rfind(">")]
            target_type = t.strip()
            break
    if not target_type:
        return CompatReport(fragment.id, INCOMPATIBLE, [("<static>", "shape", "no static item")])
    return check_type_compat(fragment.var_type, target_type, values, codec, probes,
                             subject=fragment.id)


def check_struct_compat(
    fragment: SourceFragment,
    target_code: str,
    store: SnapshotStore,
    project: SourceProject,
    codec: SourceCodec,
    probes: ProbeRunner,
) -> CompatReport:
    """Type-definition check over every feasible value of the struct type."""
    from .snapshots import feasible_values

    values = feasible_values(store, project, fragment.name)
    if not values:
        return CompatReport(fragment.id, VACUOUS)
    target_name = ""
    for item in rustsrc.parse_items(target_code):
        if item.kind == "struct":
            target_name = item.name
            break
    if not target_name:
        return CompatReport(fragment.id, INCOMPATIBLE, [("<struct>", "shape", "no struct item")])
    return check_type_compat(fragment.name, target_name, values, codec, probes, subject=fragment.id)


@dataclass
class ProjectCompatReport:
    type_reports: dict[str, CompatReport]
    signature_reports: dict[str, CompatReport]
    compile_ok: bool

    @property
    def ok(self) -> bool:
        return (
            self.compile_ok
            and all(r.ok for r in self.type_reports.values())
            and all(r.ok for r in self.signature_reports.values())
        )


def check_project_compat(
    project: SourceProject,
    translations: dict,
    store: SnapshotStore,
    codec: SourceCodec,
    probes: ProbeRunner,
    compile_ok: bool,
) -> ProjectCompatReport:
    type_reports: dict[str, CompatReport] = {}
    signature_reports: dict[str, CompatReport] = {}
    for frag in project.fragments:
        target = translations.get(frag.id)
        if target is None:
            continue
        if frag.kind == "StructDef":
            type_reports[frag.id] = check_struct_compat(frag, target.code, store, project, codec, probes)
        elif frag.kind == "GlobalVar":
            type_reports[frag.id] = check_global_compat(frag, target.code, store, codec, probes)
        elif frag.is_function_like:
            signature_reports[frag.id] = check_signature_compat(frag, target.code, store, codec, probes)
    return ProjectCompatReport(type_reports, signature_reports, compile_ok)
