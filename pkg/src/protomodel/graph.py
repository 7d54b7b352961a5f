"""Module declarations, the dependency graph, and synthesis planning.

A model is a set of protocol modules wired together with two edge kinds:

* Pipe (sequential composition): the source module acts as a boolean
  validity gate over a run of the target's input arguments.
* CallEdge (decomposition): the caller's prompt carries the callee's
  prototype and doc comment; the callee is synthesized separately and
  linked in before the caller.

Planning resolves the main module, a deterministic assembly order
(callees before callers, lexicographic tie-break), the per-pipe argument
bindings, and the prompt context each module needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .semtypes import Boolean, SemanticType, Text, validate_type
from .regexcore import RegexSyntaxError, parse_pattern


class GraphError(ValueError):
    """Structural problem in module declarations or their wiring."""


@dataclass(frozen=True)
class ArgSpec:
    """One named, typed, described function argument."""

    name: str
    type: SemanticType
    description: str


@dataclass(frozen=True)
class FunctionModule:
    """A module whose body the language model writes.

    The final argument is the output: its type becomes the C return type
    and its description fills the Return Value doc block.  All earlier
    arguments are inputs.
    """

    name: str
    description: str
    args: Tuple[ArgSpec, ...]

    def __init__(self, name: str, description: str, args: Sequence[ArgSpec]):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "description", description)
        object.__setattr__(self, "args", tuple(args))

    @property
    def inputs(self) -> Tuple[ArgSpec, ...]:
        return self.args[:-1]

    @property
    def output(self) -> ArgSpec:
        return self.args[-1]


@dataclass(frozen=True)
class RegexModule:
    """A built-in validity gate: subject text must match the pattern."""

    name: str
    pattern: str
    subject: ArgSpec

    @property
    def inputs(self) -> Tuple[ArgSpec, ...]:
        return (self.subject,)


@dataclass(frozen=True)
class NativeModule:
    """A user-supplied module included verbatim (no LLM call)."""

    name: str
    prototype: str
    body: str


ProtocolModule = Union[FunctionModule, RegexModule, NativeModule]


def validate_module(m: ProtocolModule) -> List[str]:
    violations: List[str] = []
    if isinstance(m, FunctionModule):
        if len(m.args) < 2:
            violations.append(f"module {m.name!r} needs at least 2 arguments (inputs + output)")
        seen = set()
        for arg in m.args:
            if arg.name in seen:
                violations.append(f"module {m.name!r} repeats argument name {arg.name!r}")
            seen.add(arg.name)
            if not arg.description:
                violations.append(f"argument {arg.name!r} of {m.name!r} has an empty description")
            for v in validate_type(arg.type):
                violations.append(f"module {m.name!r}, argument {arg.name!r}: {v}")
    elif isinstance(m, RegexModule):
        if not isinstance(m.subject, ArgSpec) or not isinstance(m.subject.type, Text):
            violations.append(f"regex module {m.name!r} subject must be Text-typed")
        try:
            parse_pattern(m.pattern)
        except RegexSyntaxError as e:
            violations.append(f"regex module {m.name!r}: {e}")
    elif isinstance(m, NativeModule):
        if not m.prototype.strip() or not m.body.strip():
            violations.append(f"native module {m.name!r} needs a prototype and a body")
    else:
        violations.append(f"unknown module kind {type(m).__name__}")
    return violations


@dataclass(frozen=True)
class PipeBinding:
    """Resolved argument binding for one pipe into the main module.

    arg_indices[i] is the target input-argument index fed by the source's
    i-th input argument.
    """

    source: str
    target: str
    arg_indices: Tuple[int, ...]


class DependencyGraph:
    """Builder-style container for modules, pipes, and call edges."""

    def __init__(self) -> None:
        self.modules: Dict[str, ProtocolModule] = {}
        self.pipes: List[Tuple[str, str]] = []
        self.call_edges: Dict[str, List[str]] = {}

    def add_module(self, m: ProtocolModule) -> ProtocolModule:
        if m.name in self.modules:
            raise GraphError(f"duplicate module name {m.name!r}")
        problems = validate_module(m)
        if problems:
            raise GraphError("; ".join(problems))
        self.modules[m.name] = m
        return m

    def pipe(self, source: ProtocolModule, target: ProtocolModule) -> None:
        """Gate `target`'s inputs behind `source`'s validity check."""
        for m in (source, target):
            if m.name not in self.modules:
                self.add_module(m)
        self.pipes.append((source.name, target.name))

    def call_edge(self, caller: ProtocolModule, callees: Sequence[ProtocolModule]) -> None:
        if isinstance(caller, RegexModule):
            raise GraphError(f"regex module {caller.name!r} cannot be a caller")
        if caller.name not in self.modules:
            self.add_module(caller)
        for callee in callees:
            if callee.name not in self.modules:
                self.add_module(callee)
        self.call_edges.setdefault(caller.name, []).extend(c.name for c in callees)

    def callees_of(self, name: str) -> List[str]:
        return list(self.call_edges.get(name, []))


def _find_cycle(nodes: Sequence[str], edges: Dict[str, List[str]]) -> Optional[List[str]]:
    """Return one cycle as [a, b, ..., a] if the edge relation has one."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack: List[str] = []

    def visit(n: str) -> Optional[List[str]]:
        color[n] = GRAY
        stack.append(n)
        for succ in edges.get(n, []):
            if color[succ] == GRAY:
                return stack[stack.index(succ):] + [succ]
            if color[succ] == WHITE:
                found = visit(succ)
                if found:
                    return found
        stack.pop()
        color[n] = BLACK
        return None

    for n in nodes:
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None


def build_graph(
    modules: Sequence[ProtocolModule],
    pipes: Sequence[Tuple[str, str]] = (),
    call_edges: Sequence[Tuple[str, Sequence[str]]] = (),
) -> DependencyGraph:
    """Assemble and structurally check a dependency graph.

    Raises GraphError for duplicate names, regex callers, unknown edge
    endpoints, and cycles (the error names one cycle).
    """
    g = DependencyGraph()
    for m in modules:
        g.add_module(m)
    for source, target in pipes:
        for name in (source, target):
            if name not in g.modules:
                raise GraphError(f"pipe endpoint {name!r} is not a declared module")
        g.pipes.append((source, target))
    for caller, callees in call_edges:
        if caller not in g.modules:
            raise GraphError(f"caller {caller!r} is not a declared module")
        if isinstance(g.modules[caller], RegexModule):
            raise GraphError(f"regex module {caller!r} cannot be a caller")
        for callee in callees:
            if callee not in g.modules:
                raise GraphError(f"callee {callee!r} is not a declared module")
        g.call_edges.setdefault(caller, []).extend(callees)

    names = list(g.modules)
    call_cycle = _find_cycle(names, g.call_edges)
    if call_cycle:
        raise GraphError("call cycle: " + " -> ".join(call_cycle))
    pipe_edges: Dict[str, List[str]] = {}
    for source, target in g.pipes:
        pipe_edges.setdefault(source, []).append(target)
    pipe_cycle = _find_cycle(names, pipe_edges)
    if pipe_cycle:
        raise GraphError("pipe cycle: " + " -> ".join(pipe_cycle))

    # Binding is computed eagerly so type mismatches surface here.
    resolve_pipe_bindings(g)
    return g


def resolve_pipe_bindings(g: DependencyGraph) -> List[PipeBinding]:
    """Bind each pipe's source inputs to target argument positions.

    The i-th pipe added to a target binds the source's input arguments, in
    order, to the lowest-indexed still-unbound input arguments of the
    target.  Argument types must match exactly.
    """
    bound: Dict[str, set] = {}
    bindings: List[PipeBinding] = []
    for source_name, target_name in g.pipes:
        source = g.modules[source_name]
        target = g.modules[target_name]
        if isinstance(source, NativeModule) or isinstance(target, (RegexModule, NativeModule)):
            raise GraphError(f"pipe {source_name!r} -> {target_name!r} must gate a function module")
        if isinstance(source, FunctionModule) and not isinstance(source.output.type, Boolean):
            raise GraphError(f"pipe source {source_name!r} must produce a boolean validity result")
        taken = bound.setdefault(target_name, set())
        free = [i for i in range(len(target.inputs)) if i not in taken]
        src_inputs = source.inputs
        if len(src_inputs) > len(free):
            raise GraphError(
                f"pipe {source_name!r} -> {target_name!r}: target has no free arguments left"
            )
        indices = []
        for offset, arg in enumerate(src_inputs):
            idx = free[offset]
            if target.inputs[idx].type != arg.type:
                raise GraphError(
                    f"pipe {source_name!r} -> {target_name!r}: argument {arg.name!r} "
                    f"does not match target argument {target.inputs[idx].name!r}"
                )
            indices.append(idx)
        taken.update(indices)
        bindings.append(PipeBinding(source_name, target_name, tuple(indices)))
    return bindings


def topo_order(g: DependencyGraph) -> List[str]:
    """Module names with callees before callers and pipe sources before targets.

    Deterministic: among ready modules the lexicographically smallest name
    is taken first.
    """
    succ: Dict[str, List[str]] = {n: [] for n in g.modules}
    indegree = {n: 0 for n in g.modules}
    seen_edges = set()
    for caller, callees in g.call_edges.items():
        for callee in callees:
            if (callee, caller) not in seen_edges:
                seen_edges.add((callee, caller))
                succ[callee].append(caller)
                indegree[caller] += 1
    for source, target in g.pipes:
        if (source, target) not in seen_edges:
            seen_edges.add((source, target))
            succ[source].append(target)
            indegree[target] += 1

    ready = sorted(n for n, d in indegree.items() if d == 0)
    order: List[str] = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        changed = False
        for m in succ[n]:
            indegree[m] -= 1
            if indegree[m] == 0:
                ready.append(m)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(g.modules):
        remaining = [n for n in g.modules if n not in order]
        cycle = _find_cycle(remaining, {n: [s for s in succ[n] if s in remaining] for n in remaining})
        detail = " -> ".join(cycle) if cycle else ", ".join(remaining)
        raise GraphError(f"cycle prevents ordering: {detail}")
    return order


@dataclass(frozen=True)
class SynthesisPlan:
    """Everything downstream stages need, resolved once.

    assembly_order lists every module, callees before callers; gates lists
    the validity predicates applied in main, in pipe order; prompt_context
    maps each function module to its direct callees (prototype context).
    """

    graph: DependencyGraph
    main: str
    assembly_order: Tuple[str, ...]
    pipe_bindings: Tuple[PipeBinding, ...]
    gates: Tuple[str, ...]
    prompt_context: Dict[str, Tuple[str, ...]]

    def module(self, name: str) -> ProtocolModule:
        return self.graph.modules[name]

    @property
    def main_module(self) -> FunctionModule:
        m = self.graph.modules[self.main]
        assert isinstance(m, FunctionModule)
        return m

    def fingerprint_source(self) -> str:
        """Stable serialization used for the plan fingerprint."""
        parts = [self.main, "|".join(self.assembly_order)]
        for b in self.pipe_bindings:
            parts.append(f"{b.source}>{b.target}:{','.join(map(str, b.arg_indices))}")
        return ";".join(parts)


def synthesize_plan(g: DependencyGraph, main: Optional[str] = None) -> SynthesisPlan:
    """Resolve the main module and produce a deterministic synthesis plan.

    When `main` is omitted it defaults to the unique pipe sink that no
    module calls; zero or several candidates is an error.  Pipes are only
    accepted into main's argument list.
    """
    all_callees = {c for callees in g.call_edges.values() for c in callees}
    if main is None:
        sinks = {t for _, t in g.pipes}
        candidates = sorted(s for s in sinks if s not in all_callees)
        if len(candidates) != 1:
            raise GraphError(
                "ambiguous main: expected exactly one pipe sink that is not a callee, "
                f"found {candidates or 'none'}"
            )
        main = candidates[0]
    if main not in g.modules:
        raise GraphError(f"main module {main!r} is not in the graph")
    if not isinstance(g.modules[main], FunctionModule):
        raise GraphError(f"main module {main!r} must be a function module")

    for _, target in g.pipes:
        if target != main:
            raise GraphError(
                f"pipe into {target!r} rejected: validity gates may only feed the main module"
            )

    bindings = resolve_pipe_bindings(g)
    order = topo_order(g)
    gates = tuple(source for source, _ in g.pipes)
    context = {
        name: tuple(g.callees_of(name))
        for name, m in g.modules.items()
        if isinstance(m, FunctionModule)
    }
    return SynthesisPlan(
        graph=g,
        main=main,
        assembly_order=tuple(order),
        pipe_bindings=tuple(bindings),
        gates=gates,
        prompt_context=context,
    )
