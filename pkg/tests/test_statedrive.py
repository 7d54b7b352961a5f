from __future__ import annotations

import random

import networkx as nx
import pytest

from protomodel import (
    StateGraph,
    TestCase,
    drive_and_execute,
    extract_state_graph,
    input_prefix,
    parse_transition_dict,
)
from protomodel.statedrive import (
    StateDriveError,
    TransitionParseError,
    is_stateful,
    load_state_graph,
    render_transition_dict,
    state_variants,
    write_state_graph,
)
from protomodel import assemble_program

from conftest import build_dns_plan, build_smtp_plan, fixture_path

SMTP_STATES = (
    "INITIAL",
    "HELO_SENT",
    "EHLO_SENT",
    "MAIL_FROM_RECEIVED",
    "RCPT_TO_RECEIVED",
    "DATA_RECEIVED",
    "QUITTED",
)


def smtp_graph():
    text = fixture_path("stategraph", "smtp_response.txt").read_text()
    return parse_transition_dict(text, state_order=SMTP_STATES)


def test_canned_smtp_response_parses_fully():
    graph = smtp_graph()
    assert graph.states == SMTP_STATES
    assert graph.initial == "INITIAL"
    assert len(graph.transitions) == 11


def test_prefix_to_data_received_is_the_expected_command_sequence():
    assert input_prefix(smtp_graph(), "DATA_RECEIVED") == [
        "HELO",
        "MAIL FROM:",
        "RCPT TO:",
        "DATA",
    ]


def test_prefix_to_initial_is_empty():
    assert input_prefix(smtp_graph(), "INITIAL") == []


def test_prefix_to_quitted_has_length_two():
    prefix = input_prefix(smtp_graph(), "QUITTED")
    assert len(prefix) == 2
    assert prefix[1] == "QUIT"


def test_prefix_unknown_state_is_an_error():
    with pytest.raises(StateDriveError, match="GHOST"):
        input_prefix(smtp_graph(), "GHOST")


def test_prefix_unreachable_state_is_an_error():
    graph = StateGraph(("A", "B"), ((("A", "x"), "A"),), "A")
    with pytest.raises(StateDriveError, match="unreachable"):
        input_prefix(graph, "B")


def test_bfs_minimality_against_shortest_path_oracle():
    rng = random.Random(7)
    for trial in range(100):
        n = rng.randint(2, 15)
        states = [f"S{i}" for i in range(n)]
        transitions = []
        seen = set()
        for _ in range(rng.randint(1, 3 * n)):
            src = rng.choice(states)
            dst = rng.choice(states)
            label = f"i{rng.randint(0, 9)}"
            if (src, label) in seen:
                continue
            seen.add((src, label))
            transitions.append(((src, label), dst))
        graph = StateGraph(tuple(states), tuple(transitions), states[0])

        dg = nx.DiGraph()
        dg.add_nodes_from(states)
        for (src, _), dst in transitions:
            dg.add_edge(src, dst)
        lengths = nx.single_source_shortest_path_length(dg, states[0])

        for target in states:
            if target in lengths:
                prefix = input_prefix(graph, target)
                assert len(prefix) == lengths[target], (trial, target)
                # The prefix must actually drive the machine to the target.
                tmap = graph.transition_map()
                state = graph.initial
                for step in prefix:
                    state = tmap[(state, step)]
                assert state == target
            else:
                with pytest.raises(StateDriveError):
                    input_prefix(graph, target)


def test_render_parse_round_trip():
    graph = smtp_graph()
    rendered = render_transition_dict(graph)
    back = parse_transition_dict(rendered, state_order=SMTP_STATES)
    assert back == graph


def test_state_graph_json_round_trip(tmp_path):
    graph = smtp_graph()
    path = tmp_path / "stategraph.json"
    write_state_graph(graph, path)
    assert load_state_graph(path) == graph


@pytest.mark.parametrize(
    "bad",
    [
        "no dict here at all",
        "{(1, 2): 3}",
        "{('A',): 'B'}",
        "{('A', 'x'): 5}",
        "{'A': 'B'}",
    ],
)
def test_malformed_transition_text_is_rejected(bad):
    with pytest.raises(TransitionParseError):
        parse_transition_dict(bad)


def test_parse_keeps_raw_text_for_diagnostics():
    try:
        parse_transition_dict("just prose")
    except TransitionParseError as e:
        assert e.raw == "just prose"
    else:
        pytest.fail("expected TransitionParseError")


def test_smtp_model_is_stateful_dns_is_not():
    smtp = build_smtp_plan()
    completion = fixture_path("stub", "02bb6425a2bcefa6-0.txt").read_text()
    smtp_model = assemble_program(smtp, {"smtp_server_resp": completion})
    assert is_stateful(smtp_model)
    variants = state_variants(smtp_model)
    assert variants == SMTP_STATES

    dns = build_dns_plan()
    dns_model = assemble_program(
        dns,
        {
            "dname_applies": fixture_path("stub", "70a99e11c7ac643e-0.txt").read_text(),
            "record_applies": fixture_path("stub", "9668acd2c9bbdc40-0.txt").read_text(),
        },
    )
    # The nested record_type enum is not a top-level state argument.
    assert not is_stateful(dns_model)


def test_extract_state_graph_uses_zero_temperature_single_sample():
    smtp = build_smtp_plan()
    completion = fixture_path("stub", "02bb6425a2bcefa6-0.txt").read_text()
    model = assemble_program(smtp, {"smtp_server_resp": completion})
    canned = fixture_path("stategraph", "smtp_response.txt").read_text()

    calls = []

    class Recorder:
        def complete(self, prompt, temperature, sample_index):
            calls.append((temperature, sample_index))
            assert model.program_text in prompt.user
            return canned

    graph = extract_state_graph(model, Recorder())
    assert graph.states == SMTP_STATES
    assert calls == [(0.0, 0)]


def test_extract_state_graph_rejects_stateless_model():
    dns = build_dns_plan()
    model = assemble_program(
        dns,
        {
            "dname_applies": fixture_path("stub", "70a99e11c7ac643e-0.txt").read_text(),
            "record_applies": fixture_path("stub", "9668acd2c9bbdc40-0.txt").read_text(),
        },
    )
    with pytest.raises(StateDriveError, match="no state-typed argument"):
        extract_state_graph(model, object())


class ScriptedAdapter:
    """Records the exact wire strings sent; scripted final reply."""

    def __init__(self):
        self.id = "scripted"
        self.sent = []
        self.resets = 0

    def translate_input(self, label):
        return {"HELO": "HELO localhost", "MAIL FROM:": "MAIL FROM:<a@b>",
                "RCPT TO:": "RCPT TO:<c@d>", "DATA": "DATA"}[label]

    def send(self, wire):
        self.sent.append(wire)
        return {"code": 250, "text": "OK"}

    def reset(self):
        self.resets += 1


def test_drive_and_execute_sends_prefix_then_payload():
    graph = smtp_graph()
    adapter = ScriptedAdapter()
    test = TestCase(("RCPT_TO_RECEIVED", "DATA"), "354 ...", False, ("m", "t"))
    response = drive_and_execute(adapter, test, graph)
    assert adapter.sent == [
        "HELO localhost",
        "MAIL FROM:<a@b>",
        "RCPT TO:<c@d>",
        "DATA",
    ]
    assert adapter.resets == 1
    assert response["code"] == 250


def test_drive_and_execute_resets_even_when_prefix_fails():
    graph = smtp_graph()

    class Failing(ScriptedAdapter):
        def send(self, wire):
            raise ConnectionError("gone")

    adapter = Failing()
    test = TestCase(("DATA_RECEIVED", "QUIT"), "", False, ("m", "t"))
    with pytest.raises(Exception):
        drive_and_execute(adapter, test, graph)
    assert adapter.resets == 1
