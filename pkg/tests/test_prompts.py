from __future__ import annotations

import time

import pytest

from protomodel import build_prompt_pair, render_system_prompt, sanitize_completion
from protomodel.prompts import SanitizeError, build_prompts, render_state_graph_prompt

from conftest import build_bgp_plan, build_dns_plan, build_smtp_plan, fixture_path


def golden(name: str) -> str:
    return fixture_path("prompts", name).read_text()


def test_dns_prompt_matches_golden_byte_for_byte():
    plan = build_dns_plan()
    started = time.monotonic()
    pair = build_prompt_pair(plan, "record_applies")
    assert time.monotonic() - started < 1.0
    assert pair.user == golden("dns_record_applies.txt")


def test_smtp_prompt_matches_golden_byte_for_byte():
    plan = build_smtp_plan()
    pair = build_prompt_pair(plan, "smtp_server_resp")
    assert pair.user == golden("smtp_server_resp.txt")


def test_bgp_dependency_prompt_matches_golden_byte_for_byte():
    plan = build_bgp_plan()
    pair = build_prompt_pair(plan, "isMatchPrefixListEntry")
    assert pair.user == golden("bgp_is_match_prefix_list_entry.txt")


def test_dns_prompt_structure():
    text = golden("dns_record_applies.txt")
    # Typedefs come before the dependency prototype, which comes before the
    # documented target signature; the prompt ends at the opening brace.
    assert text.index("typedef enum") < text.index("bool dname_applies")
    assert text.index("bool dname_applies") < text.index("bool record_applies")
    assert "// Parameters:" in text
    assert "// Return Value:" in text
    assert text.rstrip().endswith("bool record_applies(char* query, Record record) {")


def test_prompts_are_deterministic():
    plan = build_dns_plan()
    a = build_prompt_pair(plan, "record_applies")
    b = build_prompt_pair(plan, "record_applies")
    assert a == b


def test_build_prompts_covers_every_function_module():
    plan = build_dns_plan()
    pairs = build_prompts(plan)
    targets = [p.target_module for p in pairs]
    assert targets == ["dname_applies", "record_applies"]


def test_system_prompt_contains_required_phrases():
    text = render_system_prompt()
    assert "Do NOT add a `main()` function" in text
    assert "DO NOT USE fenced code blocks" in text
    assert "DO NOT USE C strtok function" in text


def test_state_graph_prompt_embeds_model_source():
    source = "char* f(int s) { return 0; }"
    text = render_state_graph_prompt(source)
    assert source in text
    assert "dictionary" in text.lower() or "dict" in text.lower()


# -- sanitize ----------------------------------------------------------


def dns_completion() -> str:
    return fixture_path("stub", "9668acd2c9bbdc40-0.txt").read_text()


def test_sanitize_accepts_clean_completion_unchanged():
    plan = build_dns_plan()
    text = dns_completion()
    assert sanitize_completion(text, plan, "record_applies") == text


def test_sanitize_is_idempotent():
    plan = build_dns_plan()
    once = sanitize_completion(dns_completion(), plan, "record_applies")
    assert sanitize_completion(once, plan, "record_applies") == once


def test_sanitize_strips_fences_and_prose():
    plan = build_dns_plan()
    wrapped = (
        "Sure! Here is the implementation you asked for:\n\n"
        "```c\n" + dns_completion() + "```\n\nLet me know if it helps.\n"
    )
    cleaned = sanitize_completion(wrapped, plan, "record_applies")
    assert "```" not in cleaned
    assert "Sure!" not in cleaned
    assert "bool record_applies" in cleaned


def test_sanitize_rejects_missing_signature():
    plan = build_dns_plan()
    with pytest.raises(SanitizeError, match="signature"):
        sanitize_completion("int unrelated(void) { return 0; }", plan, "record_applies")


def test_sanitize_rejects_altered_typedef():
    plan = build_dns_plan()
    text = dns_completion().replace(
        "typedef char String[4];", "typedef char String[16];"
    )
    with pytest.raises(SanitizeError, match="altered"):
        sanitize_completion(text, plan, "record_applies")


def test_sanitize_rejects_dropped_typedef():
    plan = build_dns_plan()
    text = dns_completion().replace("typedef char String[4];\n", "")
    with pytest.raises(SanitizeError, match="dropped"):
        sanitize_completion(text, plan, "record_applies")
