"""The symbolic compiler: harness emission and program assembly.

Takes a synthesis plan plus per-module completion texts and produces one
self-contained C program: include preamble, typedefs, the embedded regex
matcher (when any gate needs it), gate functions, module bodies in
dependency order, and a `main` test harness that marks every flattened
input slot symbolic, applies validity gates, and pins outputs (and the
validity flag) to fresh symbolic variables so they land in the engine's
test files.  The SymbolMap records every symbolic variable for test
reconstruction.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .graph import FunctionModule, NativeModule, ProtocolModule, RegexModule, SynthesisPlan
from .prompts import PROMPT_HEADERS, _asset, plan_type_table
from .regexcore import emit_constructors, parse_pattern
from .semtypes import (
    ArrayOf,
    BaseSlot,
    BOOLEAN,
    Boolean,
    CHARACTER,
    CHARACTER_BUFFER,
    Composite,
    SemanticType,
    Text,
    TypeTable,
    UNSIGNED_INTEGER,
    flatten,
    flatten_args,
    resolve_alias,
)

ROLE_INPUT = "input"
ROLE_OUTPUT = "output"
ROLE_VALIDITY = "validity-flag"

IND = "    "


class AssemblyError(ValueError):
    """A program could not be assembled from the given completions."""


@dataclass(frozen=True)
class SymbolEntry:
    slot: BaseSlot
    role: str

    def to_json(self) -> dict:
        data = {
            "var": self.slot.var_name,
            "path": list(self.slot.path),
            "kind": self.slot.base_kind,
            "byte_width": self.slot.byte_width,
            "role": self.role,
        }
        if self.slot.bits is not None:
            data["bits"] = self.slot.bits
        if self.slot.length is not None:
            data["length"] = self.slot.length
        if self.slot.variants is not None:
            data["variants"] = list(self.slot.variants)
        return data

    @staticmethod
    def from_json(data: dict) -> "SymbolEntry":
        slot = BaseSlot(
            var_name=data["var"],
            path=tuple(data["path"]),
            base_kind=data["kind"],
            byte_width=data["byte_width"],
            bits=data.get("bits"),
            length=data.get("length"),
            variants=tuple(data["variants"]) if "variants" in data else None,
        )
        return SymbolEntry(slot, data["role"])


@dataclass(frozen=True)
class SymbolMap:
    """Ordered record of every symbolic variable the harness declares."""

    entries: Tuple[SymbolEntry, ...]
    model_id: str
    plan_fingerprint: str

    def by_role(self, role: str) -> List[SymbolEntry]:
        return [e for e in self.entries if e.role == role]

    @property
    def inputs(self) -> List[SymbolEntry]:
        return self.by_role(ROLE_INPUT)

    @property
    def outputs(self) -> List[SymbolEntry]:
        return self.by_role(ROLE_OUTPUT)

    @property
    def validity(self) -> SymbolEntry:
        flags = self.by_role(ROLE_VALIDITY)
        assert len(flags) == 1
        return flags[0]

    def entry(self, var: str) -> SymbolEntry:
        for e in self.entries:
            if e.slot.var_name == var:
                return e
        raise KeyError(var)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "plan_fingerprint": self.plan_fingerprint,
            "entries": [e.to_json() for e in self.entries],
        }

    @staticmethod
    def from_json(data: dict) -> "SymbolMap":
        return SymbolMap(
            entries=tuple(SymbolEntry.from_json(e) for e in data["entries"]),
            model_id=data["model_id"],
            plan_fingerprint=data["plan_fingerprint"],
        )


def plan_fingerprint(plan: SynthesisPlan) -> str:
    return hashlib.sha256(plan.fingerprint_source().encode("utf-8")).hexdigest()[:16]


def build_symbol_map(plan: SynthesisPlan, model_id: str = "model") -> SymbolMap:
    main = plan.main_module
    entries: List[SymbolEntry] = []
    input_slots = flatten_args([a.type for a in main.inputs])
    entries.extend(SymbolEntry(slot, ROLE_INPUT) for slot in input_slots)
    out_index = len(main.inputs)
    out_slots = flatten(out_index, main.output.type, start=len(input_slots))
    entries.extend(SymbolEntry(slot, ROLE_OUTPUT) for slot in out_slots)
    flag_var = f"x{len(input_slots) + len(out_slots)}"
    flag = BaseSlot(flag_var, (len(main.args),), BOOLEAN, 1)
    entries.append(SymbolEntry(flag, ROLE_VALIDITY))
    return SymbolMap(tuple(entries), model_id, plan_fingerprint(plan))


# -- path navigation ----------------------------------------------------


def _type_at_path(main: FunctionModule, path: Sequence) -> SemanticType:
    t = main.args[path[0]].type
    for seg in path[1:]:
        base = resolve_alias(t)
        if isinstance(base, Composite):
            t = dict(base.fields)[seg]
        elif isinstance(base, ArrayOf):
            t = base.element
        else:
            raise AssemblyError(f"path segment {seg!r} does not enter {type(base).__name__}")
    return t


def _lvalue(arg_var: str, path: Sequence) -> str:
    out = arg_var
    for seg in path[1:]:
        out += f"[{seg}]" if isinstance(seg, int) else f".{seg}"
    return out


def _needs_assembly(arg_slots: List[BaseSlot]) -> bool:
    return not (len(arg_slots) == 1 and len(arg_slots[0].path) == 1)


# -- harness emission ---------------------------------------------------


def _symbolic_block(
    table: TypeTable,
    slot: BaseSlot,
    leaf: SemanticType,
    constrain: bool,
    printable: bool,
) -> List[str]:
    """Declaration + make-symbolic + (for inputs) the domain constraints."""
    lines = [IND + table.storage_decl(leaf, slot.var_name)]
    addr = slot.var_name if slot.base_kind == CHARACTER_BUFFER else f"&{slot.var_name}"
    lines.append(IND + f'klee_make_symbolic({addr}, sizeof({slot.var_name}), "{slot.var_name}");')
    if not constrain:
        return lines
    v = slot.var_name
    if slot.base_kind == CHARACTER_BUFFER:
        if printable:
            lines.append(IND + f"for (int i = 0; i < {slot.byte_width - 1}; i++) {{")
            lines.append(
                IND * 2 + f"klee_assume(({v}[i] == 0) | (({v}[i] >= 32) & ({v}[i] <= 126)));"
            )
            lines.append(IND + "}")
        lines.append(IND + f"klee_assume({v}[{slot.byte_width - 1}] == 0);")
    elif slot.base_kind == CHARACTER and printable:
        lines.append(IND + f"klee_assume(({v} >= 32) & ({v} <= 126));")
    elif slot.base_kind == BOOLEAN:
        lines.append(IND + f"klee_assume(({v} == 0) | ({v} == 1));")
    elif slot.base_kind == UNSIGNED_INTEGER and slot.variants is None:
        if slot.bits is not None and slot.bits not in (8, 16, 32, 64):
            bound = 1 << slot.bits
            suffix = "ULL" if bound > 2**31 else ""
            lines.append(IND + f"klee_assume({v} < {bound}{suffix});")
    return lines


def _call_arg(main: FunctionModule, arg_index: int, arg_slots: List[BaseSlot]) -> str:
    if _needs_assembly(arg_slots):
        return f"a{arg_index}"
    return arg_slots[0].var_name


def emit_harness(
    plan: SynthesisPlan,
    table: Optional[TypeTable] = None,
    model_id: str = "model",
    printable_inputs: bool = True,
) -> Tuple[str, SymbolMap]:
    """Emit the `main` test harness and the matching SymbolMap.

    Shape: per-slot symbolic declarations with input constraints, argument
    assembly for structured inputs, gate check (validity flag false on the
    valid path, true with a zeroed output otherwise), then one equality
    constraint per output slot and one for the validity flag.
    """
    if table is None:
        table = plan_type_table(plan)
    main = plan.main_module
    symbol_map = build_symbol_map(plan, model_id)
    inputs = symbol_map.inputs
    outputs = symbol_map.outputs
    flag = symbol_map.validity

    lines: List[str] = ["int main() {"]

    # Input slots.
    per_arg: Dict[int, List[BaseSlot]] = {}
    for entry in inputs:
        slot = entry.slot
        per_arg.setdefault(slot.path[0], []).append(slot)
        leaf = _type_at_path(main, slot.path)
        lines.extend(_symbolic_block(table, slot, leaf, True, printable_inputs))

    # Assemble structured arguments from their slots.
    for arg_index in range(len(main.inputs)):
        arg_slots = per_arg.get(arg_index, [])
        if not _needs_assembly(arg_slots):
            continue
        arg_type = main.args[arg_index].type
        lines.append(IND + table.storage_decl(arg_type, f"a{arg_index}"))
        for slot in arg_slots:
            target = _lvalue(f"a{arg_index}", slot.path)
            if slot.base_kind == CHARACTER_BUFFER:
                lines.append(IND + f"memcpy({target}, {slot.var_name}, sizeof({slot.var_name}));")
            else:
                lines.append(IND + f"{target} = {slot.var_name};")

    # Output storage + output slots + validity flag.
    out_type = resolve_alias(main.output.type)
    text_output = isinstance(out_type, Text)
    struct_output = len(outputs) > 1 or len(outputs[0].slot.path) > 1
    if text_output:
        lines.append(IND + "char* result_ptr;")
    else:
        lines.append(IND + table.storage_decl(main.output.type, "result_tmp"))
    for entry in outputs:
        leaf = _type_at_path(main, entry.slot.path)
        lines.extend(_symbolic_block(table, entry.slot, leaf, False, printable_inputs))
    lines.append(IND + "bool bad_input;")
    lines.append(IND + f"bool {flag.slot.var_name};")
    lines.append(
        IND + f'klee_make_symbolic(&{flag.slot.var_name}, sizeof({flag.slot.var_name}), "{flag.slot.var_name}");'
    )

    # Gate and call.
    call_args = ", ".join(
        _call_arg(main, i, per_arg.get(i, [])) for i in range(len(main.inputs))
    )
    call = f"{main.name}({call_args})"
    result_var = "result_ptr" if text_output else "result_tmp"
    gate_calls = []
    for binding in plan.pipe_bindings:
        gate = plan.module(binding.source)
        args = ", ".join(_call_arg(main, i, per_arg.get(i, [])) for i in binding.arg_indices)
        gate_calls.append(f"{gate.name}({args})")
    if gate_calls:
        lines.append(IND + f"if ({' && '.join(gate_calls)}) {{")
        lines.append(IND * 2 + "bad_input = false;")
        lines.append(IND * 2 + f"{result_var} = {call};")
        lines.append(IND + "}")
        lines.append(IND + "else {")
        lines.append(IND * 2 + "bad_input = true;")
        if text_output:
            lines.append(IND * 2 + "result_ptr = 0;")
        elif struct_output:
            lines.append(IND * 2 + "memset(&result_tmp, 0, sizeof(result_tmp));")
        else:
            default = "false" if isinstance(out_type, Boolean) else "0"
            lines.append(IND * 2 + f"result_tmp = {default};")
        lines.append(IND + "}")
    else:
        lines.append(IND + "bad_input = false;")
        lines.append(IND + f"{result_var} = {call};")

    # Pin outputs to their symbolic variables.
    if text_output:
        width = outputs[0].slot.byte_width
        out_var = outputs[0].slot.var_name
        lines.append(IND + f"char result_tmp[{width}];")
        lines.append(IND + f"for (int i = 0; i < {width}; i++) {{")
        lines.append(IND * 2 + "result_tmp[i] = 0;")
        lines.append(IND + "}")
        lines.append(IND + "if (result_ptr != 0) {")
        lines.append(IND * 2 + "int n = 0;")
        lines.append(IND * 2 + f"while (n < {width - 1} && result_ptr[n] != 0) {{")
        lines.append(IND * 3 + "result_tmp[n] = result_ptr[n];")
        lines.append(IND * 3 + "n = n + 1;")
        lines.append(IND * 2 + "}")
        lines.append(IND + "}")
        lines.append(IND + f"for (int i = 0; i < {width}; i++) {{")
        lines.append(IND * 2 + f"klee_assume(result_tmp[i] == {out_var}[i]);")
        lines.append(IND + "}")
    elif struct_output:
        for entry in outputs:
            slot = entry.slot
            source = _lvalue("result_tmp", slot.path)
            if slot.base_kind == CHARACTER_BUFFER:
                lines.append(IND + f"for (int i = 0; i < {slot.byte_width}; i++) {{")
                lines.append(IND * 2 + f"klee_assume({source}[i] == {slot.var_name}[i]);")
                lines.append(IND + "}")
            else:
                lines.append(IND + f"klee_assume({source} == {slot.var_name});")
    else:
        lines.append(IND + f"klee_assume(result_tmp == {outputs[0].slot.var_name});")
    lines.append(IND + f"klee_assume(bad_input == {flag.slot.var_name});")
    lines.append(IND + "return 0;")
    lines.append("}")
    return "\n".join(lines) + "\n", symbol_map


def emit_gate_function(table: TypeTable, gate: RegexModule) -> str:
    stmts, root = emit_constructors(parse_pattern(gate.pattern), gate.subject.name)
    lines = [f"bool {gate.name}(char* {gate.subject.name}) {{"]
    lines.extend(IND + stmt for stmt in stmts.splitlines())
    lines.append(IND + f"return match(&{root}, {gate.subject.name});")
    lines.append("}")
    return "\n".join(lines) + "\n"


def matcher_source() -> str:
    return _asset("matcher.c")


# -- program assembly ---------------------------------------------------

_INCLUDE_RE = re.compile(r"^\s*#\s*include\b")
# One-line typedefs only (struct bodies may contain interior semicolons).
_TYPEDEF_RE = re.compile(r"^\s*typedef\b.*;\s*$")
_DEFINITION_RE = re.compile(
    r"^[A-Za-z_][A-Za-z0-9_*\s]*?[\s*]([A-Za-z_][A-Za-z0-9_]*)\s*\([^;{}]*\)\s*\{",
    re.MULTILINE,
)
_C_KEYWORDS = frozenset("if else for while switch return sizeof do".split())


def _squash_ws(text: str) -> str:
    return " ".join(text.split())


def _strip_completion(
    module_name: str, text: str, plan_typedefs: Mapping[str, str]
) -> str:
    """Drop the include preamble and plan typedefs repeated by a completion.

    A typedef that reuses a plan type name with different content is an
    assembly error (the model was told not to modify type definitions).
    """
    kept: List[str] = []
    for line in text.splitlines():
        if _INCLUDE_RE.match(line):
            continue
        if _TYPEDEF_RE.match(line):
            stripped = _squash_ws(line)
            matched = False
            for name, typedef in plan_typedefs.items():
                if re.search(rf"[\s*\]}}]{name}\s*(\[[^\]]*\])?\s*;\s*$", line):
                    if stripped == _squash_ws(typedef):
                        matched = True
                        break
                    raise AssemblyError(
                        f"completion for {module_name!r} diverges from the plan typedef "
                        f"for {name!r}: expected {typedef!r}, found {stripped!r}"
                    )
            if matched:
                continue
        kept.append(line)
    out = "\n".join(kept).strip("\n")
    return out + "\n" if out else ""


def definition_names(text: str) -> List[str]:
    """Names of functions defined (not merely declared) in `text`."""
    names = []
    for m in _DEFINITION_RE.finditer(text):
        name = m.group(1)
        if name not in _C_KEYWORDS:
            names.append(name)
    return names


@dataclass(frozen=True)
class GeneratedModel:
    """One assembled program plus everything needed to interpret its tests."""

    program_text: str
    symbol_map: SymbolMap
    sample_index: int
    provenance: Mapping[str, str]

    @property
    def model_id(self) -> str:
        return self.symbol_map.model_id


def assemble_program(
    plan: SynthesisPlan,
    completions: Mapping[str, str],
    sample_index: int = 0,
    model_id: Optional[str] = None,
    printable_inputs: bool = True,
) -> GeneratedModel:
    """Assemble one complete program from sanitized per-module completions.

    Section order: includes, typedefs, embedded matcher (when a regex gate
    exists), regex gate functions in pipe order, remaining modules in
    assembly order, harness main.
    """
    table = plan_type_table(plan)
    if model_id is None:
        model_id = f"{plan.main}-s{sample_index}"
    harness, symbol_map = emit_harness(
        plan, table=table, model_id=model_id, printable_inputs=printable_inputs
    )

    plan_typedefs: Dict[str, str] = {}
    for line in table.typedef_lines():
        name = re.sub(r"\[[^\]]*\]\s*;$", ";", line).rstrip(";").split()[-1]
        plan_typedefs[name] = line

    sections: List[Tuple[str, str]] = []  # (owner label, text)
    provenance: Dict[str, str] = {}

    regex_modules = [m for m in plan.graph.modules.values() if isinstance(m, RegexModule)]
    if regex_modules:
        sections.append(("embedded matcher", matcher_source()))
        provenance["matcher"] = "embedded asset"
    emitted = set()
    gate_order = [name for name in plan.gates if isinstance(plan.module(name), RegexModule)]
    gate_order += [
        m.name for m in regex_modules if m.name not in gate_order
    ]
    for name in gate_order:
        if name in emitted:
            continue
        emitted.add(name)
        sections.append((name, emit_gate_function(table, plan.module(name))))
        provenance[name] = "regex gate"

    for name in plan.assembly_order:
        m = plan.module(name)
        if isinstance(m, RegexModule):
            continue
        if isinstance(m, NativeModule):
            body = m.body.strip("\n") + "\n"
            sections.append((name, body))
            provenance[name] = "native module"
            continue
        if name not in completions:
            raise AssemblyError(f"no completion provided for module {name!r}")
        stripped = _strip_completion(name, completions[name], plan_typedefs)
        sections.append((name, stripped))
        provenance[name] = f"completion sample {sample_index}"

    # Cross-section duplicate-definition scan (helpers included).
    seen: Dict[str, str] = {}
    for owner, text in sections:
        for func in definition_names(text):
            if func == "main":
                raise AssemblyError(f"section {owner!r} must not define main")
            if func in seen and seen[func] != owner:
                raise AssemblyError(
                    f"duplicate definition of {func!r} in {seen[func]!r} and {owner!r}"
                )
            seen[func] = owner
    for name in plan.assembly_order:
        m = plan.module(name)
        if isinstance(m, FunctionModule) and seen.get(name) != name:
            raise AssemblyError(
                f"completion for {name!r} does not define it (found in {seen.get(name)!r})"
            )

    parts = ["\n".join(PROMPT_HEADERS)]
    typedefs = table.typedef_lines()
    if typedefs:
        parts.append("\n".join(typedefs))
    parts.extend(text.strip("\n") for _, text in sections)
    parts.append(harness.strip("\n"))
    program = "\n\n".join(parts) + "\n"
    return GeneratedModel(program, symbol_map, sample_index, provenance)


def emit_all(
    plan: SynthesisPlan,
    module_samples: Mapping[str, Mapping[int, str]],
    k: int,
    printable_inputs: bool = True,
) -> Tuple[List[GeneratedModel], Dict[int, str]]:
    """Assemble model i from sample i of every module, skipping broken indices.

    Returns (models, skip reasons by index); raises when no index survives.
    """
    function_names = [
        name
        for name in plan.assembly_order
        if isinstance(plan.module(name), FunctionModule)
    ]
    models: List[GeneratedModel] = []
    skipped: Dict[int, str] = {}
    for i in range(k):
        missing = [n for n in function_names if i not in module_samples.get(n, {})]
        if missing:
            skipped[i] = "missing completion for " + ", ".join(missing)
            continue
        try:
            models.append(
                assemble_program(
                    plan,
                    {n: module_samples[n][i] for n in function_names},
                    sample_index=i,
                    printable_inputs=printable_inputs,
                )
            )
        except AssemblyError as e:
            skipped[i] = str(e)
    if not models:
        detail = "; ".join(f"sample {i}: {why}" for i, why in sorted(skipped.items()))
        raise AssemblyError(f"all {k} samples failed assembly: {detail}")
    return models, skipped


def load_model(directory: Path) -> GeneratedModel:
    """Inverse of write_model: rebuild a GeneratedModel from its directory."""
    directory = Path(directory)
    program = (directory / "model.c").read_text(encoding="utf-8")
    payload = json.loads((directory / "symbols.json").read_text(encoding="utf-8"))
    return GeneratedModel(
        program_text=program,
        symbol_map=SymbolMap.from_json(payload),
        sample_index=int(payload.get("sample_index", 0)),
        provenance=dict(payload.get("provenance", {})),
    )


def write_model(model: GeneratedModel, directory: Path) -> Path:
    """Write model.c and symbols.json under `directory` (created if needed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "model.c").write_text(model.program_text, encoding="utf-8")
    payload = dict(model.symbol_map.to_json())
    payload["sample_index"] = model.sample_index
    payload["provenance"] = dict(model.provenance)
    (directory / "symbols.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    return directory
