"""Prompt assembly and dependency summaries for backend queries."""

from __future__ import annotations

from dataclasses import dataclass

from . import rustsrc
from .depgraph import DependencyGraph
from .errors import MissingDependency
from .fragments import INTERFACE_DEF, SourceFragment, SourceProject


@dataclass
class PromptContext:
    source_fragment_text: str
    translated_dependencies_summary: str = ""
    feature_mapping_directives: str = ""
    freeze_signature: bool = False
    frozen_signature_text: str = ""

    def __post_init__(self):
        if self.freeze_signature and not self.frozen_signature_text.strip():
            raise ValueError("freeze_signature set without a frozen signature text")


def render_prompt(ctx: PromptContext) -> str:
    """The three-section prompt: source fragment, dependencies, rules."""
    sections = [
        "Translate the following Go code fragment to Rust.",
        ctx.source_fragment_text.rstrip(),
        "",
        "Rust translations of everything this fragment depends on already exist; "
        "a condensed form is given below. Use these items exactly as declared.",
        ctx.translated_dependencies_summary.rstrip(),
        "",
        "Apply the following translation rules.",
        ctx.feature_mapping_directives.rstrip(),
    ]
    if ctx.freeze_signature:
        sections.append(
            "The signature is frozen and must be reproduced exactly: "
            + ctx.frozen_signature_text.strip()
        )
    return "\n".join(sections).rstrip() + "\n"


def dependencies_summary(
    fragment_id: str,
    translations: dict,
    graph: DependencyGraph,
    project: SourceProject,
) -> str:
    """Condensed translations of the fragment's dependencies.

    Function and method dependencies contribute signatures without bodies;
    type definitions and global declarations contribute full text.
    """
    parts: list[str] = []
    for dep_id in graph.dependencies(fragment_id):
        target = translations.get(dep_id)
        if target is None:
            raise MissingDependency(dep_id)
        dep = project.by_id(dep_id)
        if dep.is_function_like:
            parts.append(rustsrc.strip_fn_bodies(target.code).strip())
        else:
            parts.append(target.code.strip())
    return "\n\n".join(p for p in parts if p)


def interface_query_source(fragment: SourceFragment, requested: list) -> str:
    """Interface source restricted to the methods that still need translation."""
    assert fragment.kind == INTERFACE_DEF
    lines = [f"type {fragment.name} interface {{"]
    for name, sig in requested:
        params = ", ".join(f"{n} {t}".strip() for n, t in sig.params)
        if len(sig.results) == 1:
            res = f" {sig.results[0]}"
        elif sig.results:
            res = f" ({', '.join(sig.results)})"
        else:
            res = ""
        lines.append(f"\t{name}({params}){res}")
    lines.append("}")
    return "\n".join(lines)
