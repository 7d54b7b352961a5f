from __future__ import annotations

from pathlib import Path

import pytest

from protomodel import (
    Boolean,
    Composite,
    Enumeration,
    Text,
    UInt,
    ArgSpec,
    FunctionModule,
    RegexModule,
    build_graph,
    synthesize_plan,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def fixture_path(*parts: str) -> Path:
    p = FIXTURES.joinpath(*parts)
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def build_dns_plan():
    """The DNS record-matching plan used across the golden tests.

    Mirrors tests/fixtures/manifests/dns_dname.json; a few tests assert
    that the two stay in sync.
    """
    record_type = Enumeration(
        "RecordType", ["A", "AAAA", "NS", "TXT", "CNAME", "DNAME", "SOA"]
    )
    record = Composite(
        "Record",
        [
            ("record_type", record_type),
            ("name", Text(3)),
            ("rdata", Text(3)),
        ],
    )
    dname_applies = FunctionModule(
        "dname_applies",
        "If a DNAME record matches a query.",
        [
            ArgSpec("query", Text(5), "A DNS query domain name."),
            ArgSpec("record", record, "A DNS record."),
            ArgSpec("result", Boolean(), "If the DNS record matches the query."),
        ],
    )
    record_applies = FunctionModule(
        "record_applies",
        "If a DNS record matches a query.",
        [
            ArgSpec("query", Text(5), "A DNS query domain name."),
            ArgSpec("record", record, "A DNS record."),
            ArgSpec("result", Boolean(), "If the DNS record matches the query."),
        ],
    )
    valid_query = RegexModule(
        "valid_query",
        r"[a-z*](\.[a-z*])*",
        ArgSpec("query", Text(5), "A DNS query domain name."),
    )
    g = build_graph(
        [valid_query, dname_applies, record_applies],
        pipes=[("valid_query", "record_applies")],
        call_edges=[("record_applies", ["dname_applies"])],
    )
    return synthesize_plan(g, main="record_applies")


def build_smtp_plan():
    state = Enumeration(
        "State",
        [
            "INITIAL",
            "HELO_SENT",
            "EHLO_SENT",
            "MAIL_FROM_RECEIVED",
            "RCPT_TO_RECEIVED",
            "DATA_RECEIVED",
            "QUITTED",
        ],
    )
    resp = FunctionModule(
        "smtp_server_resp",
        "A function that takes the current state of the SMTP server, the input "
        "string, updates the state and returns the output response.",
        [
            ArgSpec("state", state, "Current state of the SMTP server"),
            ArgSpec("input", Text(15), "Input string"),
            ArgSpec("output", Text(63), "Output string"),
        ],
    )
    return synthesize_plan(build_graph([resp]), main="smtp_server_resp")


def build_bgp_plan():
    route = Composite(
        "Route",
        [("prefix", UInt(32)), ("prefixLength", UInt(8))],
    )
    pfe = Composite(
        "PrefixListEntry",
        [
            ("prefix", UInt(32)),
            ("prefixLength", UInt(8)),
            ("le", UInt(32)),
            ("ge", UInt(32)),
            ("any", Boolean()),
            ("permit", Boolean()),
        ],
    )
    to_mask = FunctionModule(
        "prefixLengthToSubnetMask",
        "a function that takes as input the prefix length and converts it to "
        "the corresponding unsigned integer representation",
        [
            ArgSpec("maskLength", UInt(32), "The length of the prefix"),
            ArgSpec(
                "mask", UInt(32), "The unsigned integer representation of the prefix length"
            ),
        ],
    )
    is_match = FunctionModule(
        "isMatchPrefixListEntry",
        "A function that takes as input a prefix list entry and a BGP route "
        "advertisement. If the route advertisement matches the prefix, then the "
        "function should return the value of the permit flag. In case there is "
        "no match, the function should vacuously return false.",
        [
            ArgSpec("route", route, "Route to be matched"),
            ArgSpec("pfe", pfe, "Prefix list entry"),
            ArgSpec("match", Boolean(), "True if the route matches the prefix list entry"),
        ],
    )
    g = build_graph(
        [to_mask, is_match],
        call_edges=[("isMatchPrefixListEntry", ["prefixLengthToSubnetMask"])],
    )
    return synthesize_plan(g, main="isMatchPrefixListEntry")


@pytest.fixture
def dns_plan():
    return build_dns_plan()


@pytest.fixture
def smtp_plan():
    return build_smtp_plan()


@pytest.fixture
def bgp_plan():
    return build_bgp_plan()
