from __future__ import annotations

import itertools
import json

import pytest

from protomodel import (
    NormalizedResponse,
    TestCase,
    TriageTuple,
    aggregate_report,
    majority_and_triage,
    normalize_response,
    postprocess_dns,
    run_suite,
    write_reports,
)
from protomodel.difftest import (
    CRASH_FIELD,
    DiffTestError,
    PostprocessError,
    canonical_value,
    report_markdown,
)
from protomodel.adapters import build_adapter, load_adapters
from protomodel.adapters.dns_toy import DnsToyDnameOwnerBug, DnsToyReference

from conftest import fixture_path


def dns_response(rcode="NOERROR", answer=()):
    return normalize_response(
        {
            "answer": list(answer),
            "authority": [],
            "additional": [],
            "flags": ["AA", "QR"],
            "rcode": rcode,
        }
    )


def test_canonical_value_sorts_dict_keys_and_lists():
    value = {"b": [3, 1, 2], "a": {"y": 1, "x": 2}}
    canon = canonical_value(value)
    assert list(canon) == ["a", "b"]
    assert canon["b"] == [1, 2, 3]
    # Idempotent.
    assert canonical_value(canon) == canon


def test_normalized_response_equality_ignores_field_order():
    a = normalize_response({"rcode": "NOERROR", "answer": ["x", "y"]})
    b = normalize_response({"answer": ["y", "x"], "rcode": "NOERROR"})
    assert a == b
    assert a.key() == b.key()


def test_crash_response_is_first_class():
    crash = NormalizedResponse.crash("TimeoutError: deadline")
    assert crash.is_crash
    assert crash.as_dict()[CRASH_FIELD].startswith("TimeoutError")
    assert crash != dns_response()


def test_four_against_one_names_the_outlier_exactly():
    responses = {
        "bind": dns_response("NOERROR"),
        "nsd": dns_response("NOERROR"),
        "knot": dns_response("NOERROR"),
        "powerdns": dns_response("NOERROR"),
        "coredns": dns_response("NXDOMAIN"),
    }
    triage = majority_and_triage(responses, index=0)
    assert not triage.no_majority
    assert sorted(triage.majority_ids) == ["bind", "knot", "nsd", "powerdns"]
    assert triage.tuples == [
        TriageTuple("coredns", "rcode", '"NXDOMAIN"', '"NOERROR"')
    ]


def test_all_agree_yields_zero_tuples():
    responses = {name: dns_response() for name in ("a", "b", "c", "d", "e")}
    triage = majority_and_triage(responses)
    assert triage.tuples == []
    assert not triage.no_majority


def test_two_two_split_sets_no_majority_flag():
    responses = {
        "a": dns_response("NOERROR"),
        "b": dns_response("NOERROR"),
        "c": dns_response("NXDOMAIN"),
        "d": dns_response("NXDOMAIN"),
    }
    triage = majority_and_triage(responses)
    assert triage.no_majority
    assert triage.tuples  # pairwise diffs are still reported
    implicated = {t.implementation for t in triage.tuples}
    assert implicated == {"a", "b", "c", "d"}


def test_majority_outlier_reports_every_differing_field():
    responses = {
        "a": dns_response("NOERROR", answer=["r1"]),
        "b": dns_response("NOERROR", answer=["r1"]),
        "c": dns_response("NXDOMAIN", answer=[]),
    }
    triage = majority_and_triage(responses)
    fields = sorted(t.field for t in triage.tuples)
    assert fields == ["answer", "rcode"]
    assert all(t.implementation == "c" for t in triage.tuples)


def test_triage_is_invariant_under_adapter_order():
    base = {
        "a": dns_response("NOERROR"),
        "b": dns_response("NOERROR"),
        "c": dns_response("SERVFAIL"),
    }
    reference = majority_and_triage(base)
    for names in itertools.permutations(base):
        shuffled = {name: base[name] for name in names}
        assert majority_and_triage(shuffled).tuples == reference.tuples


def test_single_response_is_rejected():
    with pytest.raises(DiffTestError):
        majority_and_triage({"only": dns_response()})


def test_tuple_count_is_bounded_by_fields_times_outliers():
    responses = {
        "a": dns_response("NOERROR", ["r"]),
        "b": dns_response("NOERROR", ["r"]),
        "c": dns_response("NXDOMAIN", []),
        "d": dns_response("SERVFAIL", ["other"]),
    }
    triage = majority_and_triage(responses)
    field_count = 5  # answer, authority, additional, flags, rcode
    assert len(triage.tuples) <= field_count * 2


def test_aggregate_report_groups_and_caps_witnesses():
    tuples = [TriageTuple("x", "rcode", '"A"', '"B"')]
    triage = []
    from protomodel.difftest import TestTriage

    for i in range(15):
        triage.append(TestTriage(i, False, ["y", "z"], list(tuples)))
    groups = aggregate_report(triage, witness_cap=10)
    assert len(groups) == 1
    assert groups[0].count == 15
    assert len(groups[0].witnesses) == 10
    assert groups[0].witnesses == list(range(10))


def make_dname_test(query="a.*", owner="*", rdata="a.a"):
    return TestCase(
        (query, {"record_type": "DNAME", "name": owner, "rdata": rdata}),
        True,
        False,
        ("record_applies-s0", "test000001.ktest"),
    )


def test_postprocess_dns_builds_rooted_zone():
    fixture = postprocess_dns(make_dname_test())
    assert fixture.qname == "a.*.test."
    assert fixture.qtype == "CNAME"
    assert "$ORIGIN test." in fixture.zone_text
    assert "*.test. 3600 IN DNAME a.a.test." in fixture.zone_text
    assert " SOA " in fixture.zone_text
    assert " NS " in fixture.zone_text


def test_postprocess_dns_reroots_name_typed_rdata_only():
    fixture = postprocess_dns(
        TestCase(("a", {"record_type": "TXT", "name": "a", "rdata": "b"}),
                 True, False, ("m", "t"))
    )
    assert "a.test. 3600 IN TXT b" in fixture.zone_text
    fixture = postprocess_dns(
        TestCase(("a", {"record_type": "NS", "name": "a", "rdata": "b"}),
                 True, False, ("m", "t"))
    )
    assert "a.test. 3600 IN NS b.test." in fixture.zone_text


def test_postprocess_dns_rejects_oversized_names():
    with pytest.raises(PostprocessError):
        postprocess_dns(make_dname_test(query="q" * 300))


def test_toy_adapters_disagree_only_on_dname_owner():
    ref = DnsToyReference("ref")
    bug = DnsToyDnameOwnerBug("bug")
    fixture = postprocess_dns(make_dname_test())

    for adapter in (ref, bug):
        adapter.setup(fixture)
    try:
        good = ref.execute(None).as_dict()
        bad = bug.execute(None).as_dict()
    finally:
        for adapter in (ref, bug):
            adapter.teardown()

    assert good["rcode"] == bad["rcode"] == "NOERROR"
    assert "*.test. DNAME a.a.test." in good["answer"]
    assert "a.*.test. DNAME a.a.test." in bad["answer"]


def test_run_suite_catches_adapter_crashes():
    class Exploding:
        id = "boom"

        def setup(self, fixture=None):
            pass

        def execute(self, test):
            raise RuntimeError("kaput")

        def teardown(self):
            pass

    class Steady:
        id = "ok"

        def setup(self, fixture=None):
            pass

        def execute(self, test):
            return {"rcode": "NOERROR"}

        def teardown(self):
            pass

    run = run_suite([Exploding(), Steady()], [make_dname_test()])
    row = run.responses[0]
    assert row["boom"].is_crash
    assert "kaput" in row["boom"].as_dict()[CRASH_FIELD]
    assert not row["ok"].is_crash


def test_run_suite_rejects_duplicate_adapter_ids():
    class A:
        id = "same"

        def setup(self, fixture=None):
            pass

        def execute(self, test):
            return {}

        def teardown(self):
            pass

    with pytest.raises(DiffTestError, match="duplicate"):
        run_suite([A(), A()], [])


def test_write_reports_produces_json_and_markdown(tmp_path):
    ref = DnsToyReference("dns-ref")
    bug = DnsToyDnameOwnerBug("dns-knotlike")
    run = run_suite([ref, bug], [make_dname_test()], prepare=postprocess_dns)
    assert run.finding_count > 0
    json_path, md_path = write_reports(run, tmp_path)
    payload = json.loads(json_path.read_text())
    assert payload["adapters"] == ["dns-ref", "dns-knotlike"]
    assert payload["groups"]
    rendered = md_path.read_text()
    assert "dns-knotlike" in rendered
    assert "answer" in rendered
    assert report_markdown(run, aggregate_report(run.triage)) == rendered


def test_adapter_registry_builds_configured_kinds():
    adapter = build_adapter({"id": "x", "kind": "dns-toy-reference"})
    assert isinstance(adapter, DnsToyReference)
    with pytest.raises(DiffTestError, match="unknown adapter kind"):
        build_adapter({"id": "x", "kind": "no-such-kind"})


def test_load_adapters_from_config_file():
    adapters = load_adapters(fixture_path("adapters", "dns_toys.json"))
    assert [a.id for a in adapters] == ["dns-ref", "dns-knotlike"]
    assert isinstance(adapters[1], DnsToyDnameOwnerBug)
