"""State-graph extraction and BFS input-prefix driving for stateful models.

A stateful model takes the current protocol state as its first argument,
so each test lands in some required state.  A second completion call
turns the generated server code into a (state, input) -> state dictionary;
breadth-first search over that graph yields the shortest input sequence
that drives a fresh implementation into the test's state before the
test's own input is sent.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .gateway import GenerationConfig, PromptPair, sample_k
from .harness import GeneratedModel, ROLE_INPUT
from .prompts import render_state_graph_prompt


class StateDriveError(RuntimeError):
    pass


class TransitionParseError(StateDriveError):
    """Completion did not contain a readable transition dictionary.

    Keeps the raw completion text for inspection.
    """

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class StateGraph:
    """Transition relation (state, input) -> state with a start state.

    Transition order is preserved as returned by the completion; the BFS
    tie-break depends on it, so it is part of the graph's identity.
    """

    states: Tuple[str, ...]
    transitions: Tuple[Tuple[Tuple[str, str], str], ...]
    initial: str

    def transition_map(self) -> Dict[Tuple[str, str], str]:
        return dict(self.transitions)

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "states": list(self.states),
            "transitions": [[s, i, t] for (s, i), t in self.transitions],
        }

    @staticmethod
    def from_json(data: dict) -> "StateGraph":
        transitions = tuple(
            ((str(s), str(i)), str(t)) for s, i, t in data["transitions"]
        )
        return StateGraph(
            states=tuple(str(s) for s in data["states"]),
            transitions=transitions,
            initial=str(data["initial"]),
        )


def _outermost_braces(text: str) -> str:
    """The first balanced brace-delimited span, string-literal aware."""
    start = text.find("{")
    if start < 0:
        raise TransitionParseError("no dictionary literal found in completion", text)
    depth = 0
    quote: Optional[str] = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    raise TransitionParseError("unbalanced braces in completion", text)


def parse_transition_dict(completion: str, state_order: Optional[Sequence[str]] = None) -> StateGraph:
    """Tolerantly parse a completion into a StateGraph.

    Accepts surrounding prose, assignment prefixes, and code fences; only
    the outermost {...} literal is read.  Keys must be (state, input)
    string pairs and values state strings.  The initial state is INITIAL
    when mentioned, otherwise the first entry of state_order (the model's
    state enumeration), otherwise the first source state.
    """
    literal = _outermost_braces(completion)
    try:
        obj = ast.literal_eval(literal)
    except (SyntaxError, ValueError) as e:
        raise TransitionParseError(f"dictionary literal does not parse: {e}", completion)
    if not isinstance(obj, dict):
        raise TransitionParseError(f"expected a dictionary, got {type(obj).__name__}", completion)

    transitions: List[Tuple[Tuple[str, str], str]] = []
    for key, value in obj.items():
        if (
            not isinstance(key, tuple)
            or len(key) != 2
            or not all(isinstance(part, str) for part in key)
        ):
            raise TransitionParseError(
                f"transition key must be a (state, input) string pair, got {key!r}", completion
            )
        if not isinstance(value, str):
            raise TransitionParseError(
                f"transition target must be a state string, got {value!r}", completion
            )
        transitions.append(((key[0], key[1]), value))

    states: List[str] = []
    for (src, _), dst in transitions:
        for s in (src, dst):
            if s not in states:
                states.append(s)
    if not states:
        raise TransitionParseError("transition dictionary is empty", completion)

    if "INITIAL" in states:
        initial = "INITIAL"
    elif state_order:
        initial = state_order[0]
        if initial not in states:
            states.insert(0, initial)
    else:
        initial = transitions[0][0][0]
    return StateGraph(tuple(states), tuple(transitions), initial)


def render_transition_dict(graph: StateGraph) -> str:
    """The graph as a dictionary literal (parse_transition_dict inverse)."""
    lines = ["{"]
    for (src, inp), dst in graph.transitions:
        lines.append(f"    ({src!r}, {inp!r}): {dst!r},")
    lines.append("}")
    return "\n".join(lines)


def is_stateful(model: GeneratedModel) -> bool:
    """A model is stateful when a whole top-level input argument is an
    enumeration (nested enum fields, e.g. a record type, do not count)."""
    return state_variants(model) is not None


def state_variants(model: GeneratedModel) -> Optional[Tuple[str, ...]]:
    for entry in model.symbol_map.entries:
        if (
            entry.role == ROLE_INPUT
            and entry.slot.variants is not None
            and len(entry.slot.path) == 1
        ):
            return tuple(entry.slot.variants)
    return None


def extract_state_graph(model: GeneratedModel, backend, cfg: Optional[GenerationConfig] = None) -> StateGraph:
    """One deterministic completion call turning model code into a graph.

    Uses temperature 0 and a single sample: this is structure extraction,
    not diversity sampling.
    """
    if not is_stateful(model):
        raise StateDriveError(
            f"model {model.model_id} has no state-typed argument; nothing to extract"
        )
    if cfg is None:
        cfg = GenerationConfig(k=1, temperature=0.0)
    prompt = PromptPair(
        system="",
        user=render_state_graph_prompt(model.program_text),
        target_module="stategraph",
    )
    result = sample_k(backend, prompt, cfg, parallel=False)
    if 0 not in result.texts:
        raise StateDriveError(f"state-graph completion failed: {result.errors.get(0, 'no sample')}")
    return parse_transition_dict(result.texts[0], state_order=state_variants(model))


def input_prefix(graph: StateGraph, target: str) -> List[str]:
    """Shortest input sequence from the initial state to target.

    Neighbors are explored in transition-declaration order, so among
    equal-length paths the first-declared transitions win.  That keeps
    the result deterministic and faithful to the completion's own
    ordering.
    """
    if target not in graph.states:
        raise StateDriveError(f"unknown state {target!r}; graph has {list(graph.states)}")
    if target == graph.initial:
        return []
    adjacency: Dict[str, List[Tuple[str, str]]] = {}
    for (src, inp), dst in graph.transitions:
        adjacency.setdefault(src, []).append((inp, dst))
    back: Dict[str, Tuple[str, str]] = {}
    frontier = [graph.initial]
    seen = {graph.initial}
    while frontier:
        nxt: List[str] = []
        for state in frontier:
            for inp, dst in adjacency.get(state, []):
                if dst in seen:
                    continue
                seen.add(dst)
                back[dst] = (state, inp)
                if dst == target:
                    path: List[str] = []
                    cur = dst
                    while cur != graph.initial:
                        prev, step = back[cur]
                        path.append(step)
                        cur = prev
                    path.reverse()
                    return path
                nxt.append(dst)
        frontier = nxt
    raise StateDriveError(f"state {target!r} is unreachable from {graph.initial!r}")


def drive_and_execute(adapter, test, graph: StateGraph):
    """Send the BFS prefix, then the test's own input; reset afterwards.

    The test's first input names the required state and its second input
    is the payload.  The adapter must offer send/translate_input/reset
    (the stateful half of the adapter contract).  Returns the normalized
    response to the final input only.
    """
    for method in ("send", "translate_input", "reset"):
        if not hasattr(adapter, method):
            raise StateDriveError(
                f"adapter {getattr(adapter, 'id', adapter)!r} lacks {method}(); cannot drive state"
            )
    inputs = list(test.inputs)
    if len(inputs) < 2 or not isinstance(inputs[0], str):
        raise StateDriveError(f"test is not a (state, input) pair: {inputs!r}")
    target_state, payload = inputs[0], str(inputs[1])
    prefix = input_prefix(graph, target_state)
    try:
        for step_index, step in enumerate(prefix):
            try:
                adapter.send(adapter.translate_input(step))
            except Exception as e:
                raise StateDriveError(
                    f"prefix step {step_index} ({step!r}) failed on {adapter.id}: {e}"
                ) from e
        return adapter.send(adapter.translate_input(payload))
    finally:
        adapter.reset()


def write_state_graph(graph: StateGraph, path: Path) -> None:
    Path(path).write_text(json.dumps(graph.to_json(), indent=2) + "\n", encoding="utf-8")


def load_state_graph(path: Path) -> StateGraph:
    return StateGraph.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
