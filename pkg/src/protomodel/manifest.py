"""Declarative model manifests.

A manifest is a JSON tree mirroring the builder API one-to-one:

    {
      "types": {"RecordType": {"kind": "enum", "variants": [...]},
                "Record": {"kind": "struct", "fields": [["record_type", "RecordType"], ...]}},
      "modules": [
        {"kind": "regex", "name": "valid_query", "pattern": "...",
         "subject": {"name": "query", "type": {"kind": "text", "max_len": 5},
                     "description": "..."}},
        {"kind": "function", "name": "record_applies", "description": "...",
         "args": [{"name": "query", "type": ..., "description": "..."}, ...]},
        {"kind": "native", "name": "...", "prototype": "...", "body": "..."}
      ],
      "pipes": [["valid_query", "record_applies"]],
      "call_edges": [["record_applies", ["dname_applies"]]],
      "main": "record_applies",
      "protocol": "dns",
      "generation": {"k": 10, "temperature": 0.6}
    }

Where a type is expected, either an inline object or the name of an entry
in "types" is accepted.  Type kinds: bool, char, uint (bits), text
(max_len), enum (name, variants), array (element, length), struct (name,
fields), alias (name, inner).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .gateway import GenerationConfig
from .graph import (
    ArgSpec,
    DependencyGraph,
    FunctionModule,
    GraphError,
    NativeModule,
    ProtocolModule,
    RegexModule,
    SynthesisPlan,
    build_graph,
    synthesize_plan,
)
from .semtypes import (
    Alias,
    ArrayOf,
    Boolean,
    Character,
    Composite,
    Enumeration,
    SemanticType,
    Text,
    UInt,
)


class ManifestError(ValueError):
    """Manifest text that does not describe a valid model."""


@dataclass(frozen=True)
class Manifest:
    """A parsed manifest plus the plan it resolves to."""

    graph: DependencyGraph
    plan: SynthesisPlan
    protocol: Optional[str]
    generation: GenerationConfig
    raw: Dict[str, Any] = field(repr=False, default_factory=dict)


def _parse_type(node: Any, named: Dict[str, SemanticType], depth: int = 0) -> SemanticType:
    if depth > 32:
        raise ManifestError("type nesting too deep")
    if isinstance(node, str):
        if node not in named:
            raise ManifestError(f"unknown type name {node!r}")
        return named[node]
    if not isinstance(node, dict) or "kind" not in node:
        raise ManifestError(f"expected a type object or type name, got {node!r}")
    kind = node["kind"]
    try:
        if kind == "bool":
            return Boolean()
        if kind == "char":
            return Character()
        if kind == "uint":
            return UInt(bits=int(node["bits"]))
        if kind == "text":
            return Text(max_len=int(node["max_len"]))
        if kind == "enum":
            return Enumeration(node["name"], [str(v) for v in node["variants"]])
        if kind == "array":
            return ArrayOf(_parse_type(node["element"], named, depth + 1), int(node["length"]))
        if kind == "struct":
            fields = []
            for entry in node["fields"]:
                if isinstance(entry, dict):
                    fname, ftype = entry["name"], entry["type"]
                else:
                    fname, ftype = entry
                fields.append((str(fname), _parse_type(ftype, named, depth + 1)))
            return Composite(node["name"], fields)
        if kind == "alias":
            return Alias(node["name"], _parse_type(node["inner"], named, depth + 1))
    except KeyError as e:
        raise ManifestError(f"type of kind {kind!r} is missing key {e.args[0]!r}") from None
    raise ManifestError(f"unknown type kind {kind!r}")


def _parse_arg(node: Any, named: Dict[str, SemanticType]) -> ArgSpec:
    if not isinstance(node, dict):
        raise ManifestError(f"argument must be an object, got {node!r}")
    try:
        return ArgSpec(
            name=str(node["name"]),
            type=_parse_type(node["type"], named),
            description=str(node["description"]),
        )
    except KeyError as e:
        raise ManifestError(f"argument is missing key {e.args[0]!r}") from None


def _parse_module(node: Any, named: Dict[str, SemanticType]) -> ProtocolModule:
    if not isinstance(node, dict) or "kind" not in node:
        raise ManifestError(f"module must be an object with a kind, got {node!r}")
    kind = node["kind"]
    try:
        if kind == "function":
            args = [_parse_arg(a, named) for a in node["args"]]
            return FunctionModule(str(node["name"]), str(node["description"]), args)
        if kind == "regex":
            return RegexModule(
                name=str(node["name"]),
                pattern=str(node["pattern"]),
                subject=_parse_arg(node["subject"], named),
            )
        if kind == "native":
            return NativeModule(str(node["name"]), str(node["prototype"]), str(node["body"]))
    except KeyError as e:
        raise ManifestError(f"module of kind {kind!r} is missing key {e.args[0]!r}") from None
    raise ManifestError(f"unknown module kind {kind!r}")


def parse_manifest(data: Dict[str, Any]) -> Manifest:
    """Validate a manifest tree and resolve it into a synthesis plan.

    Collects a validation error list and raises ManifestError naming every
    problem found rather than only the first.
    """
    if not isinstance(data, dict):
        raise ManifestError("manifest root must be an object")

    named: Dict[str, SemanticType] = {}
    problems: List[str] = []
    for name, node in dict(data.get("types", {})).items():
        try:
            t = _parse_type(node, named)
        except ManifestError as e:
            problems.append(f"type {name!r}: {e}")
            continue
        declared = getattr(t, "name", name)
        if declared != name:
            problems.append(f"type {name!r} declares inner name {declared!r}")
        named[name] = t

    modules: List[ProtocolModule] = []
    for node in data.get("modules", []):
        try:
            modules.append(_parse_module(node, named))
        except ManifestError as e:
            problems.append(str(e))
    if not modules and not problems:
        problems.append("manifest declares no modules")

    pipes: List[Tuple[str, str]] = []
    for entry in data.get("pipes", []):
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            problems.append(f"pipe entry must be [source, target], got {entry!r}")
            continue
        pipes.append((str(entry[0]), str(entry[1])))

    call_edges: List[Tuple[str, List[str]]] = []
    for entry in data.get("call_edges", []):
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2 and isinstance(entry[1], (list, tuple))):
            problems.append(f"call edge entry must be [caller, [callees...]], got {entry!r}")
            continue
        call_edges.append((str(entry[0]), [str(c) for c in entry[1]]))

    if problems:
        raise ManifestError("; ".join(problems))

    try:
        g = build_graph(modules, pipes, call_edges)
        plan = synthesize_plan(g, data.get("main"))
    except GraphError as e:
        raise ManifestError(str(e)) from e

    gen_node = dict(data.get("generation", {}))
    generation = GenerationConfig(
        k=int(gen_node.get("k", GenerationConfig.k)),
        temperature=float(gen_node.get("temperature", GenerationConfig.temperature)),
        max_output_tokens=int(gen_node.get("max_output_tokens", GenerationConfig.max_output_tokens)),
        request_timeout=float(gen_node.get("request_timeout", GenerationConfig.request_timeout)),
        retries=int(gen_node.get("retries", GenerationConfig.retries)),
    )
    protocol = data.get("protocol")
    return Manifest(
        graph=g,
        plan=plan,
        protocol=str(protocol) if protocol is not None else None,
        generation=generation,
        raw=data,
    )


def load_manifest(path: Path) -> Manifest:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}") from e
    return parse_manifest(data)
