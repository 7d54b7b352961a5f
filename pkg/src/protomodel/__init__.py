"""Model-based protocol testing.

Declare protocol modules over semantic types, let a language model fill
in their bodies, compile the assembled model into a symbolic-execution
harness, reconstruct the engine's test files into typed test cases, and
feed them to majority-vote differential testing of real implementations.
"""

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
from .graph import (
    ArgSpec,
    DependencyGraph,
    FunctionModule,
    GraphError,
    NativeModule,
    RegexModule,
    SynthesisPlan,
    build_graph,
    synthesize_plan,
    topo_order,
)
from .manifest import Manifest, ManifestError, load_manifest, parse_manifest
from .gateway import (
    GenerationConfig,
    PromptPair,
    RemoteChatBackend,
    StubBackend,
    sample_k,
)
from .prompts import (
    build_prompt_pair,
    build_prompts,
    render_state_graph_prompt,
    render_system_prompt,
    render_user_prompt,
    sanitize_completion,
)
from .harness import (
    AssemblyError,
    GeneratedModel,
    SymbolMap,
    assemble_program,
    build_symbol_map,
    emit_all,
    emit_harness,
    load_model,
    plan_fingerprint,
    write_model,
)
from .ktest import KTestFile, load_test_file, parse_ktest, serialize_ktest
from .runner import (
    EngineConfig,
    TestCase,
    dedup_union,
    generate_tests,
    load_suite,
    reconstruct,
)
from .difftest import (
    NormalizedResponse,
    TriageTuple,
    aggregate_report,
    majority_and_triage,
    normalize_response,
    postprocess_dns,
    run_suite,
    write_reports,
)
from .statedrive import (
    StateGraph,
    drive_and_execute,
    extract_state_graph,
    input_prefix,
    parse_transition_dict,
)
from .regexcore import match_pattern, parse_pattern

__version__ = "0.1.0"

__all__ = [
    "Alias", "ArrayOf", "Boolean", "Character", "Composite", "Enumeration",
    "SemanticType", "Text", "UInt",
    "ArgSpec", "DependencyGraph", "FunctionModule", "GraphError", "NativeModule",
    "RegexModule", "SynthesisPlan", "build_graph", "synthesize_plan", "topo_order",
    "Manifest", "ManifestError", "load_manifest", "parse_manifest",
    "GenerationConfig", "PromptPair", "RemoteChatBackend", "StubBackend", "sample_k",
    "build_prompt_pair", "build_prompts", "render_state_graph_prompt",
    "render_system_prompt", "render_user_prompt", "sanitize_completion",
    "AssemblyError", "GeneratedModel", "SymbolMap", "assemble_program",
    "build_symbol_map", "emit_all", "emit_harness", "load_model", "plan_fingerprint",
    "write_model",
    "KTestFile", "load_test_file", "parse_ktest", "serialize_ktest",
    "EngineConfig", "TestCase", "dedup_union", "generate_tests", "load_suite",
    "reconstruct",
    "NormalizedResponse", "TriageTuple", "aggregate_report", "majority_and_triage",
    "normalize_response", "postprocess_dns", "run_suite", "write_reports",
    "StateGraph", "drive_and_execute", "extract_state_graph", "input_prefix",
    "parse_transition_dict",
    "match_pattern", "parse_pattern",
]
