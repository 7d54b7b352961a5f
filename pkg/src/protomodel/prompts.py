"""Prompt rendering and completion cleanup.

Three render operations, all pure: the per-module user prompt (a C
completion problem ending at the target's opening brace), the fixed
system prompt, and the state-graph-extraction prompt.  All template text
lives in embedded assets so output is byte-stable across runs.
"""

from __future__ import annotations

import re
import textwrap
from importlib import resources
from typing import List, Optional, Sequence

from .gateway import PromptPair
from .graph import FunctionModule, NativeModule, ProtocolModule, RegexModule, SynthesisPlan
from .semtypes import SemanticType, TypeTable

# The include preamble every prompt (and every assembled program) opens with.
PROMPT_HEADERS = (
    "#include <stdint.h>",
    "#include <stdbool.h>",
    "#include <string.h>",
    "#include <stdlib.h>",
    "#include <klee/klee.h>",
    "#include <stdio.h>",
)

# Total comment-line width; "// " leaves 97 columns for description text.
COMMENT_WIDTH = 100

STATE_GRAPH_PLACEHOLDER = "<MODEL SOURCE>"


class PromptError(ValueError):
    pass


def _asset(name: str) -> str:
    return resources.files("protomodel.assets").joinpath(name).read_text(encoding="utf-8")


def plan_type_table(plan: SynthesisPlan) -> TypeTable:
    """One TypeTable covering every type any module in the plan references.

    Using a single plan-wide table keeps alias names (String vs String{N})
    consistent between per-module prompts and the assembled program.
    """
    roots: List[SemanticType] = []
    for name in plan.assembly_order:
        roots.extend(_module_roots(plan.module(name)))
    return TypeTable(roots)


def _module_roots(m: ProtocolModule) -> List[SemanticType]:
    if isinstance(m, FunctionModule):
        return [arg.type for arg in m.args]
    if isinstance(m, RegexModule):
        return [m.subject.type]
    return []


def doc_comment(m: FunctionModule) -> List[str]:
    """The doc-comment block placed above a prototype or signature."""
    lines = ["// " + part for part in textwrap.wrap(m.description, width=COMMENT_WIDTH - 3)]
    lines.append("//")
    lines.append("// Parameters:")
    for arg in m.inputs:
        lines.append(f"//     {arg.name}: {arg.description}")
    lines.append("// Return Value:")
    lines.append(f"//     {m.output.description}")
    return lines


def signature_text(table: TypeTable, m: FunctionModule) -> str:
    params = ", ".join(table.param_decl(arg.type, arg.name) for arg in m.inputs)
    return f"{table.return_type(m.output.type)} {m.name}({params})"


def prototype_lines(table: TypeTable, m: ProtocolModule) -> List[str]:
    """Doc comment plus `;`-terminated prototype for one prompt-context module."""
    if isinstance(m, FunctionModule):
        return doc_comment(m) + [signature_text(table, m) + ";"]
    if isinstance(m, RegexModule):
        return [f"bool {m.name}(char* {m.subject.name});"]
    proto = m.prototype.strip()
    if not proto.endswith(";"):
        proto += ";"
    return [proto]


def render_user_prompt(
    plan: SynthesisPlan,
    module_name: str,
    table: Optional[TypeTable] = None,
    closed_body: bool = False,
) -> str:
    """Render the completion-style user prompt for one function module.

    Layout: include preamble, typedefs the module (or its callees) needs,
    one doc comment + prototype block per direct callee, then the target's
    doc comment and signature ending in ` {`.  With closed_body the body
    is closed around an `// implement me` marker instead.
    """
    m = plan.module(module_name)
    if not isinstance(m, FunctionModule):
        raise PromptError(f"module {module_name!r} is not a function module")
    if table is None:
        table = plan_type_table(plan)

    roots: List[SemanticType] = []
    callees = plan.prompt_context.get(module_name, ())
    for callee_name in callees:
        roots.extend(_module_roots(plan.module(callee_name)))
    roots.extend(_module_roots(m))

    lines: List[str] = list(PROMPT_HEADERS)
    lines.append("")
    typedefs = table.typedef_lines_for(roots)
    if typedefs:
        lines.extend(typedefs)
        lines.append("")
    for callee_name in callees:
        lines.extend(prototype_lines(table, plan.module(callee_name)))
        lines.append("")
    lines.extend(doc_comment(m))
    lines.append(signature_text(table, m) + " {")
    if closed_body:
        lines.append("  // implement me")
        lines.append("}")
    return "\n".join(lines) + "\n"


def render_system_prompt() -> str:
    return _asset("system_prompt.txt")


def render_state_graph_prompt(model_source: str) -> str:
    if not model_source.strip():
        raise PromptError("model source for state-graph extraction is empty")
    template = _asset("stategraph_prompt.txt")
    return template.replace(STATE_GRAPH_PLACEHOLDER, model_source.rstrip("\n"))


def build_prompt_pair(plan: SynthesisPlan, module_name: str) -> PromptPair:
    return PromptPair(
        system=render_system_prompt(),
        user=render_user_prompt(plan, module_name),
        target_module=module_name,
    )


def build_prompts(plan: SynthesisPlan) -> List[PromptPair]:
    """One PromptPair per function module, callees before callers."""
    return [
        build_prompt_pair(plan, name)
        for name in plan.assembly_order
        if isinstance(plan.module(name), FunctionModule)
    ]


# -- completion cleanup -------------------------------------------------


class SanitizeError(ValueError):
    pass


_FENCE_RE = re.compile(r"^\s*```")


def _strip_fences(raw: str) -> str:
    lines = raw.splitlines()
    fence_rows = [i for i, line in enumerate(lines) if _FENCE_RE.match(line)]
    if len(fence_rows) >= 2:
        lines = lines[fence_rows[0] + 1 : fence_rows[-1]]
    elif fence_rows:
        lines = [line for i, line in enumerate(lines) if i not in fence_rows]
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    return "\n".join(lines) + "\n" if lines else ""


def _squash_ws(text: str) -> str:
    return " ".join(text.split())


def _typedef_name(typedef_line: str) -> str:
    # "typedef char String[4];" -> String; "typedef ... } Record;" -> Record
    tail = typedef_line.rstrip().rstrip(";").rstrip()
    tail = re.sub(r"\[[^\]]*\]$", "", tail).rstrip()
    match = re.search(r"([A-Za-z_][A-Za-z0-9_]*)$", tail)
    if not match:
        raise SanitizeError(f"cannot determine typedef name in {typedef_line!r}")
    return match.group(1)


def sanitize_completion(
    raw: str,
    plan: SynthesisPlan,
    module_name: str,
    table: Optional[TypeTable] = None,
) -> str:
    """Clean one completion into candidate program text.

    Strips Markdown fences and surrounding prose, then checks the text
    still carries the target's exact signature and every typedef the
    prompt supplied, unaltered (whitespace-insensitive comparison).
    """
    m = plan.module(module_name)
    if not isinstance(m, FunctionModule):
        raise PromptError(f"module {module_name!r} is not a function module")
    if table is None:
        table = plan_type_table(plan)

    text = _strip_fences(raw)
    flat = _squash_ws(text)

    sig = signature_text(table, m)
    if _squash_ws(sig) not in flat:
        raise SanitizeError(
            f"completion for {module_name!r} does not contain the signature {sig!r}"
        )

    roots = _module_roots(m)
    for callee_name in plan.prompt_context.get(module_name, ()):
        roots.extend(_module_roots(plan.module(callee_name)))
    for typedef in table.typedef_lines_for(roots):
        if _squash_ws(typedef) in flat:
            continue
        name = _typedef_name(typedef)
        found = re.search(
            r"typedef[^;]*[\s*}]" + re.escape(name) + r"\s*(\[[^\]]*\])?\s*;",
            text,
        )
        if found:
            raise SanitizeError(
                f"completion for {module_name!r} altered the typedef for {name!r}: "
                f"expected {typedef!r}, found {_squash_ws(found.group(0))!r}"
            )
        raise SanitizeError(
            f"completion for {module_name!r} dropped the typedef for {name!r}: {typedef!r}"
        )
    return text
