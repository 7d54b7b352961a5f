from __future__ import annotations

import pytest

from protomodel import GenerationConfig, PromptPair, StubBackend, sample_k
from protomodel.gateway import (
    GatewayError,
    MissingFixtureError,
    fixture_filename,
    prompt_key,
)


def test_prompt_key_is_stable_and_distinct():
    a = prompt_key("sys", "user")
    assert a == prompt_key("sys", "user")
    assert len(a) == 16
    assert int(a, 16) >= 0
    assert a != prompt_key("sys", "user2")
    # The separator keeps boundary shifts from colliding.
    assert prompt_key("ab", "c") != prompt_key("a", "bc")


def test_fixture_filename_includes_sample_index():
    assert fixture_filename("s", "u", 0).endswith("-0.txt")
    assert fixture_filename("s", "u", 7).endswith("-7.txt")
    assert fixture_filename("s", "u", 0)[:16] == prompt_key("s", "u")


def test_stub_backend_serves_fixture_text(tmp_path):
    pair = PromptPair(system="s", user="u", target_module="m")
    (tmp_path / fixture_filename("s", "u", 0)).write_text("int f() { return 1; }\n")
    backend = StubBackend(tmp_path)
    text = backend.complete(pair, temperature=0.0, sample_index=0)
    assert text == "int f() { return 1; }\n"


def test_stub_backend_missing_fixture_names_key_and_path(tmp_path):
    pair = PromptPair(system="s", user="u", target_module="m")
    backend = StubBackend(tmp_path)
    with pytest.raises(MissingFixtureError) as exc:
        backend.complete(pair, temperature=0.0, sample_index=2)
    message = str(exc.value)
    assert prompt_key("s", "u") in message
    assert "index 2" in message
    assert isinstance(exc.value, GatewayError)


def test_generation_config_defaults():
    cfg = GenerationConfig()
    assert cfg.k == 10
    assert cfg.temperature == pytest.approx(0.6)


class FlakyBackend:
    """Succeeds on even sample indices, raises on odd ones."""

    def __init__(self):
        self.calls = []

    def complete(self, prompt, temperature, sample_index):
        self.calls.append((sample_index, temperature))
        if sample_index % 2:
            raise GatewayError(f"boom {sample_index}")
        return f"text {sample_index}"


def test_sample_k_keeps_partial_failures(tmp_path):
    backend = FlakyBackend()
    pair = PromptPair(system="s", user="u", target_module="m")
    cfg = GenerationConfig(k=5, temperature=0.3)
    result = sample_k(backend, pair, cfg, parallel=False)
    assert sorted(result.texts) == [0, 2, 4]
    assert sorted(result.errors) == [1, 3]
    assert "boom 1" in result.errors[1]
    assert result.texts[2] == "text 2"
    assert all(t == pytest.approx(0.3) for _, t in backend.calls)


def test_sample_k_ordered_output():
    backend = FlakyBackend()
    pair = PromptPair(system="s", user="u", target_module="m")
    result = sample_k(backend, pair, GenerationConfig(k=4), parallel=False)
    assert [i for i, _ in result.ordered()] == [0, 2]


def test_sample_k_parallel_matches_serial():
    pair = PromptPair(system="s", user="u", target_module="m")
    cfg = GenerationConfig(k=6)
    serial = sample_k(FlakyBackend(), pair, cfg, parallel=False)
    parallel = sample_k(FlakyBackend(), pair, cfg, parallel=True)
    assert serial.texts == parallel.texts
    assert sorted(serial.errors) == sorted(parallel.errors)


def test_stub_fixture_checked_in_for_dns_plan():
    # The checked-in stub corpus serves two samples per DNS module.
    import conftest
    from protomodel import build_prompt_pair

    plan = conftest.build_dns_plan()
    stub = StubBackend(conftest.fixture_path("stub"))
    for module in ("dname_applies", "record_applies"):
        pair = build_prompt_pair(plan, module)
        for index in (0, 1):
            text = stub.complete(pair, temperature=0.6, sample_index=index)
            assert module in text
