"""Translate-check-requery loop for a single fragment.

Queries the backend with the instantiated prompt, checks every matched
rule's conclusion on the answer, and requeries until the checks pass or
the budget runs out. Passing answers go through rule post-processing
(interface decomposition, impl rewriting) before becoming target
fragments.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import rules, rustsrc
from .assembler import TRANSLATED, TargetFragment, target_file_for
from .backend import Backend
from .depgraph import DependencyGraph
from .errors import BudgetExhausted, SignatureMismatch
from .fragments import (
    FREE_FUNCTION,
    GLOBAL_VAR,
    INTERFACE_DEF,
    METHOD,
    STRUCT_DEF,
    SourceFragment,
    SourceProject,
)
from .prompts import PromptContext, dependencies_summary, interface_query_source, render_prompt
from .runlog import RunLog


@dataclass
class TranslateContext:
    backend: Backend
    graph: DependencyGraph
    project: SourceProject
    interface_sigs: set
    registry: rules.GadgetRegistry
    runlog: RunLog


def _directives_text(matched: list[tuple[str, str]]) -> str:
    return "\n".join(f"- {directive}" for _, directive in matched)


def exported_items(fragment: SourceFragment, code: str) -> list[str]:
    items = rustsrc.parse_items(code)
    if fragment.kind == GLOBAL_VAR:
        return [i.name for i in items if i.kind in ("static", "const")]
    if fragment.kind == STRUCT_DEF:
        return [i.name for i in items if i.kind == "struct"]
    if fragment.kind == INTERFACE_DEF:
        return [i.name for i in items if i.kind == "trait"]
    if fragment.kind == FREE_FUNCTION:
        return [i.name for i in items if i.kind == "fn"]
    return []


def translate_fragment(
    fragment: SourceFragment,
    ctx: TranslateContext,
    translations: dict[str, TargetFragment],
    requery_budget: int = 10,
    freeze_signature: bool = False,
) -> TargetFragment:
    """Run the per-fragment feature-mapping loop; returns a Translated target
    fragment or raises BudgetExhausted with the last violations."""
    assert requery_budget >= 1
    matched = rules.match_rules(fragment, ctx.interface_sigs)
    rule_ids = [rid for rid, _ in matched]
    if not matched and fragment.kind == GLOBAL_VAR:
        ctx.runlog.rule_outcome(fragment.id, "none", 0, "no-rule",
                                ["literal initializer: backend free choice"])
    deps = dependencies_summary(fragment.id, translations, ctx.graph, ctx.project)

    source_text = fragment.source_text
    requested = None
    if fragment.kind == INTERFACE_DEF:
        requested = rules.requested_interface_methods(fragment, ctx.registry)
        if not requested:
            code = rules.decompose_interface(fragment, ctx.registry, None)
            ctx.runlog.rule_outcome(fragment.id, rules.MAP_INTERFACE, 0, "pass",
                                    ["all methods reuse existing sub-traits; no query needed"])
            return _finish(fragment, code, ctx, attempts=0)
        source_text = interface_query_source(fragment, requested)

    frozen_text = ""
    if freeze_signature:
        prior = translations.get(fragment.id)
        fn = prior.primary_fn() if prior else None
        if fn is None:
            raise SignatureMismatch(f"{fragment.id}: cannot freeze a signature that does not exist")
        frozen_text = fn.normalized_signature()

    prompt = render_prompt(
        PromptContext(
            source_fragment_text=source_text,
            translated_dependencies_summary=deps,
            feature_mapping_directives=_directives_text(matched),
            freeze_signature=freeze_signature,
            frozen_signature_text=frozen_text,
        )
    )

    last_violations: list[str] = []
    for attempt in range(1, requery_budget + 1):
        code = ctx.backend.ask(fragment.id, prompt, attempt)
        violations: list[str] = []
        for rid in rule_ids:
            found = rules.check_conclusion(rid, code, fragment=fragment, registry=ctx.registry)
            ctx.runlog.rule_outcome(fragment.id, rid, attempt,
                                    "pass" if not found else "violation",
                                    [str(v) for v in found])
            violations += [str(v) for v in found]
        if not violations and freeze_signature:
            fn = rustsrc.find_fn(code)
            if fn is None or fn.normalized_signature() != frozen_text:
                violations.append(f"signature changed under freeze (wanted `{frozen_text}`)")
                ctx.runlog.rule_outcome(fragment.id, "freeze", attempt, "violation", violations[-1:])
        if violations:
            last_violations = violations
            continue
        try:
            code = _postprocess(fragment, code, ctx)
        except SignatureMismatch as exc:
            last_violations = [str(exc)]
            ctx.runlog.rule_outcome(fragment.id, "postprocess", attempt, "violation", last_violations)
            continue
        return _finish(fragment, code, ctx, attempts=attempt, frozen_text=frozen_text)
    raise BudgetExhausted(fragment.id, last_violations)


def _postprocess(fragment: SourceFragment, code: str, ctx: TranslateContext) -> str:
    matched = {rid for rid, _ in rules.match_rules(fragment, ctx.interface_sigs)}
    if rules.MAP_INTERFACE in matched:
        _record_supertraits(fragment, ctx)
        return rules.decompose_interface(fragment, ctx.registry, code)
    if rules.MAP_IMPL_INTERFACE in matched:
        return rules.rewrite_impl_interface(fragment, ctx.registry, code)
    return code


def _record_supertraits(fragment: SourceFragment, ctx: TranslateContext) -> None:
    supers = []
    for dep_id in ctx.graph.dependencies(fragment.id):
        try:
            dep = ctx.project.by_id(dep_id)
        except KeyError:
            continue
        if dep.kind == INTERFACE_DEF and dep.name in ctx.registry.trait_owners:
            supers.append(dep.name)
    ctx.registry.supertraits[fragment.name] = sorted(supers)


def _finish(
    fragment: SourceFragment,
    code: str,
    ctx: TranslateContext,
    attempts: int,
    frozen_text: str = "",
) -> TargetFragment:
    extra_deps: list[str] = []
    if fragment.kind == INTERFACE_DEF:
        for name, sig in fragment.interface_methods:
            sub = ctx.registry.sub_trait_for(name, sig)
            owner = ctx.registry.owners.get(sub or "")
            if owner and owner != fragment.id:
                extra_deps.append(owner)
        for sup in ctx.registry.supertraits.get(fragment.name, []):
            owner = ctx.registry.trait_owners.get(sup)
            if owner and owner != fragment.id:
                extra_deps.append(owner)
        ctx.registry.trait_owners[fragment.name] = fragment.id
        for name, sig in fragment.interface_methods:
            sub = ctx.registry.sub_trait_for(name, sig)
            if sub and sub not in ctx.registry.owners:
                ctx.registry.owners[sub] = fragment.id
    trait_items: list[tuple[str, str]] = []
    if fragment.kind == METHOD and fragment.signature is not None:
        sub = ctx.registry.sub_trait_for(fragment.name, fragment.signature)
        if sub is not None and (fragment.name, fragment.signature.key()) in ctx.interface_sigs:
            owner = ctx.registry.owners.get(sub)
            if owner:
                extra_deps.append(owner)
                trait_items.append((owner, sub))
    return TargetFragment(
        fragment_id=fragment.id,
        code=code,
        target_file=target_file_for(fragment.file),
        status=TRANSLATED,
        frozen_signature=frozen_text,
        exported_items=exported_items(fragment, code),
        extra_deps=sorted(set(extra_deps)),
        trait_items=trait_items,
        attempts=attempts,
    )
