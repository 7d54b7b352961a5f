from __future__ import annotations

import json
import shutil

import pytest

from protomodel import EngineConfig, TestCase, build_symbol_map, dedup_union, load_suite
from protomodel.runner import (
    DiscardedTest,
    ReconstructionError,
    RunnerError,
    canonical_key,
    collect_tests,
    generate_tests,
    new_run_dir,
    reconstruct,
)
from protomodel import load_model

from conftest import build_dns_plan, fixture_path


def dns_symbol_map():
    return build_symbol_map(build_dns_plan(), "m")


def objects_for(query, rtype_index, name, rdata, output, invalid):
    return {
        "x0": query.encode().ljust(6, b"\0"),
        "x1": rtype_index.to_bytes(4, "little"),
        "x2": name.encode().ljust(4, b"\0"),
        "x3": rdata.encode().ljust(4, b"\0"),
        "x4": b"\x01" if output else b"\x00",
        "x5": b"\x01" if invalid else b"\x00",
    }


def test_reconstruct_builds_nested_inputs():
    sm = dns_symbol_map()
    test = reconstruct(sm, objects_for("a.*", 5, "*", "", True, False), ("m", "t1"))
    assert test.inputs == ("a.*", {"record_type": "DNAME", "name": "*", "rdata": ""})
    assert test.output is True
    assert test.invalid is False
    assert test.origin == ("m", "t1")


def test_reconstruct_marks_validity_flag():
    sm = dns_symbol_map()
    test = reconstruct(sm, objects_for("A!", 0, "", "", False, True), ("m", "t"))
    assert test.invalid is True


def test_reconstruct_missing_object_is_an_error():
    sm = dns_symbol_map()
    objects = objects_for("a", 0, "a", "b", True, False)
    del objects["x3"]
    with pytest.raises(ReconstructionError, match="x3"):
        reconstruct(sm, objects, ("m", "t"))


def test_reconstruct_width_mismatch_is_an_error():
    sm = dns_symbol_map()
    objects = objects_for("a", 0, "a", "b", True, False)
    objects["x1"] = b"\x00\x00"
    with pytest.raises(ReconstructionError, match="x1"):
        reconstruct(sm, objects, ("m", "t"))


def test_reconstruct_discards_out_of_range_enum():
    sm = dns_symbol_map()
    objects = objects_for("a", 99, "a", "b", True, False)
    with pytest.raises(DiscardedTest, match="99"):
        reconstruct(sm, objects, ("m", "t"))


def test_reconstruct_ignores_extra_engine_objects():
    sm = dns_symbol_map()
    objects = objects_for("a", 1, "a", "b", True, False)
    objects["model_version"] = b"\x01"
    test = reconstruct(sm, objects, ("m", "t"))
    assert test.inputs[0] == "a"


def test_canonical_key_ignores_output_and_origin():
    a = TestCase(("q", {"f": 1}), True, False, ("m1", "t1"))
    b = TestCase(("q", {"f": 1}), False, False, ("m2", "t9"))
    assert canonical_key(a) == canonical_key(b)


def test_canonical_key_distinguishes_validity():
    a = TestCase(("q",), True, False, ("m", "t"))
    b = TestCase(("q",), True, True, ("m", "t"))
    assert canonical_key(a) != canonical_key(b)


def make_tests(*specs):
    return [
        TestCase((q, {"record_type": r}), out, inv, ("m", f"t{i}"))
        for i, (q, r, out, inv) in enumerate(specs)
    ]


def test_dedup_union_keeps_first_occurrence():
    tests = make_tests(("a", "NS", True, False), ("a", "NS", False, False))
    unique = dedup_union(tests)
    assert len(unique) == 1
    assert unique[0].origin[1] == "t0"


def test_dedup_union_is_idempotent():
    tests = make_tests(
        ("a", "NS", True, False),
        ("b", "NS", True, False),
        ("a", "NS", True, False),
    )
    once = dedup_union(tests)
    again = dedup_union(once)
    assert again == once


def test_dedup_union_monotone_over_model_prefixes():
    # Growing the model set can only grow the union; counts are
    # non-decreasing in the prefix length.
    per_model = [
        make_tests(("a", "NS", True, False), ("b", "NS", True, False)),
        make_tests(("a", "NS", True, False), ("c", "NS", True, False)),
        make_tests(("d", "NS", True, False)),
        make_tests(("a", "NS", True, False)),
    ]
    def union_of(k):
        return dedup_union(t for tests in per_model[:k] for t in tests)

    sizes = [len(union_of(k)) for k in range(1, len(per_model) + 1)]
    assert sizes == sorted(sizes)
    assert sizes == [2, 3, 4, 4]
    keys_prev = set()
    for k in range(1, len(per_model) + 1):
        keys = {canonical_key(t) for t in union_of(k)}
        assert keys_prev <= keys
        keys_prev = keys


def test_engine_config_validation():
    with pytest.raises(RunnerError, match="mode"):
        EngineConfig(mode="quantum").validate()
    with pytest.raises(RunnerError, match="fixture"):
        EngineConfig(mode="fixture").validate()
    with pytest.raises(RunnerError, match="timeout"):
        EngineConfig(mode="docker", timeout_s=0).validate()
    EngineConfig(mode="fixture", fixture_dir="somewhere").validate()


def test_collect_tests_reports_discards(tmp_path):
    source = fixture_path("ktests", "dns_dname", "record_applies-s0")
    for f in source.glob("*.ktest"):
        shutil.copy(f, tmp_path / f.name)
    sm = dns_symbol_map()
    tests, discards = collect_tests(sm, tmp_path, "m")
    assert len(tests) == 3
    assert discards == []


def test_generate_tests_fixture_mode(tmp_path):
    models = [
        load_model(p)
        for p in sorted(tmp_path_models(tmp_path).glob("record_applies-s*"))
    ]
    cfg = EngineConfig(
        mode="fixture", fixture_dir=str(fixture_path("ktests", "dns_dname"))
    )
    workspace = tmp_path / "ws"
    workspace.mkdir()
    suite = generate_tests(models, cfg, workspace)
    assert len(suite.unique_tests) == 4
    assert suite.dropped_invalid == 1
    assert (workspace / "tests.json").exists()
    assert (workspace / "report.json").exists()
    for model in models:
        report = workspace / "models" / model.model_id / "report.json"
        assert report.exists()

    loaded = load_suite(workspace / "tests.json")
    assert [t.inputs for t in loaded] == [t.inputs for t in suite.unique_tests]


def test_generate_tests_can_retain_invalid(tmp_path):
    models = [
        load_model(p)
        for p in sorted(tmp_path_models(tmp_path).glob("record_applies-s*"))
    ]
    cfg = EngineConfig(
        mode="fixture", fixture_dir=str(fixture_path("ktests", "dns_dname"))
    )
    workspace = tmp_path / "ws"
    workspace.mkdir()
    suite = generate_tests(models, cfg, workspace, retain_invalid=True)
    assert any(t.invalid for t in suite.unique_tests)
    assert len(suite.unique_tests) == 5


def tmp_path_models(tmp_path):
    """Assemble the two DNS fixture models into tmp_path/models."""
    from protomodel import assemble_program, write_model

    plan = build_dns_plan()
    root = tmp_path / "models"
    if not root.exists():
        root.mkdir()
        for i in (0, 1):
            completions = {
                "dname_applies": fixture_path("stub", f"70a99e11c7ac643e-{i}.txt").read_text(),
                "record_applies": fixture_path("stub", f"9668acd2c9bbdc40-{i}.txt").read_text(),
            }
            model = assemble_program(plan, completions, sample_index=i)
            write_model(model, root / model.model_id)
    return root


def test_tests_json_shape_is_stable(tmp_path):
    models = [
        load_model(p)
        for p in sorted(tmp_path_models(tmp_path).glob("record_applies-s*"))
    ]
    cfg = EngineConfig(
        mode="fixture", fixture_dir=str(fixture_path("ktests", "dns_dname"))
    )
    ws_a = tmp_path / "a"
    ws_b = tmp_path / "b"
    ws_a.mkdir()
    ws_b.mkdir()
    generate_tests(models, cfg, ws_a)
    generate_tests(models, cfg, ws_b)
    assert (ws_a / "tests.json").read_bytes() == (ws_b / "tests.json").read_bytes()
    payload = json.loads((ws_a / "tests.json").read_text())
    assert set(payload) == {"plan_fingerprint", "count", "tests"}
    assert payload["count"] == len(payload["tests"])


def test_test_case_json_round_trip():
    t = TestCase(("q", {"record_type": "NS"}), True, False, ("m", "t1"))
    assert TestCase.from_json(t.to_json()) == t


def test_new_run_dir_never_overwrites(tmp_path):
    a = new_run_dir(tmp_path, stamp="20260823T120000")
    b = new_run_dir(tmp_path, stamp="20260823T120000")
    assert a != b
    assert a.exists() and b.exists()
    assert b.name.startswith(a.name)


def test_missing_fixture_dir_is_an_environment_error(tmp_path):
    models = [
        load_model(p)
        for p in sorted(tmp_path_models(tmp_path).glob("record_applies-s*"))
    ]
    cfg = EngineConfig(mode="fixture", fixture_dir=str(tmp_path / "nowhere"))
    ws = tmp_path / "ws"
    ws.mkdir()
    with pytest.raises(RunnerError):
        generate_tests(models, cfg, ws)
