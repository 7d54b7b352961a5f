"""Command-line front end for the whole pipeline over one workspace.

    synth       manifest -> k assembled models
    gen-tests   models -> engine run -> tests.json
    difftest    tests.json + adapters -> triage.json / triage.md
    stategraph  stateful model -> stategraph.json (BFS driving input)
    sweep       (temperature, k) grid -> sweep.csv

Exit codes: 0 success, 1 findings present, 2 usage or configuration
error, 3 environment error (toolchain, engine, or backend failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .difftest import DiffTestError, PostprocessError, postprocess_dns, run_suite, write_reports
from .gateway import (
    GatewayError,
    GenerationConfig,
    PromptPair,
    RemoteChatBackend,
    StubBackend,
    sample_k,
)
from .graph import GraphError
from .harness import AssemblyError, emit_all, load_model, write_model
from .ktest import KTestError
from .manifest import Manifest, ManifestError, load_manifest
from .prompts import PromptError, SanitizeError, build_prompts, sanitize_completion
from .runner import (
    EngineConfig,
    RunnerError,
    dedup_union,
    generate_tests,
    load_suite,
    new_run_dir,
)
from .statedrive import (
    StateDriveError,
    TransitionParseError,
    drive_and_execute,
    extract_state_graph,
    load_state_graph,
    write_state_graph,
)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3

log = logging.getLogger("protomodel")


class UsageError(Exception):
    pass


# -- shared helpers -----------------------------------------------------


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("stub", "remote"), default="stub")
    p.add_argument("--stub-dir", help="fixture directory for the stub backend")
    p.add_argument("--endpoint", help="chat-completions endpoint for the remote backend")
    p.add_argument("--model-name", help="remote model identifier")


def _build_backend(args):
    if args.backend == "stub":
        if not args.stub_dir:
            raise UsageError("--stub-dir is required with --backend stub")
        return StubBackend(Path(args.stub_dir))
    if not args.endpoint or not args.model_name:
        raise UsageError("--endpoint and --model-name are required with --backend remote")
    return RemoteChatBackend(args.endpoint, args.model_name)


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=("docker", "local", "fixture"), default="docker")
    p.add_argument("--image", default=EngineConfig.image)
    p.add_argument("--clang", default="clang", help="clang path for --engine local")
    p.add_argument("--klee", default="klee", help="engine path for --engine local")
    p.add_argument("--timeout", type=int, default=300, help="engine budget in seconds")
    p.add_argument("--fixture-dir", help="checked-in .ktest directory for --engine fixture")
    p.add_argument("--parallel", type=int, default=1, help="models run concurrently")


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        mode=args.engine,
        image=args.image,
        clang_path=args.clang,
        klee_path=args.klee,
        timeout_s=args.timeout,
        fixture_dir=Path(args.fixture_dir) if args.fixture_dir else None,
        parallel=args.parallel,
    )


def _workspace_for_out(out: Optional[str], runs_root: str) -> Path:
    if out:
        path = Path(out)
        if path.exists() and any(path.iterdir()):
            raise UsageError(f"workspace {path} already exists and is not empty")
        path.mkdir(parents=True, exist_ok=True)
        return path
    return new_run_dir(Path(runs_root))


def _config_path(workspace: Path) -> Path:
    return workspace / "config"


def _update_config(workspace: Path, section: str, payload: dict) -> None:
    path = _config_path(workspace)
    doc = {}
    if path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
    doc[section] = payload
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _read_config(workspace: Path) -> dict:
    path = _config_path(workspace)
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _sample_modules(
    backend, manifest: Manifest, cfg: GenerationConfig
) -> Tuple[Dict[str, Dict[int, str]], List[str]]:
    """k sanitized completions per function module, plus skip notes."""
    plan = manifest.plan
    module_samples: Dict[str, Dict[int, str]] = {}
    notes: List[str] = []
    for prompt in build_prompts(plan):
        result = sample_k(backend, prompt, cfg)
        texts: Dict[int, str] = {}
        for i, raw in sorted(result.texts.items()):
            try:
                texts[i] = sanitize_completion(raw, plan, prompt.target_module)
            except SanitizeError as e:
                notes.append(f"{prompt.target_module} sample {i}: {e}")
        for i, err in sorted(result.errors.items()):
            notes.append(f"{prompt.target_module} sample {i}: {err}")
        module_samples[prompt.target_module] = texts
    return module_samples, notes


# -- commands -----------------------------------------------------------


def cmd_synth(args) -> int:
    manifest = load_manifest(Path(args.manifest))
    gen = manifest.generation
    cfg = GenerationConfig(
        k=args.k if args.k else gen.k,
        temperature=args.temperature if args.temperature is not None else gen.temperature,
        max_output_tokens=gen.max_output_tokens,
        request_timeout=gen.request_timeout,
        retries=gen.retries,
    )
    backend = _build_backend(args)
    workspace = _workspace_for_out(args.out, args.runs_root)

    module_samples, notes = _sample_modules(backend, manifest, cfg)
    models, skipped = emit_all(manifest.plan, module_samples, cfg.k)
    for index, why in sorted(skipped.items()):
        notes.append(f"sample {index}: {why}")
    for model in models:
        write_model(model, workspace / "models" / model.model_id)

    _update_config(
        workspace,
        "synth",
        {
            "manifest": str(Path(args.manifest).resolve()),
            "protocol": manifest.protocol,
            "k": cfg.k,
            "temperature": cfg.temperature,
            "backend": args.backend,
            "models": [m.model_id for m in models],
            "skipped": notes,
        },
    )
    for note in notes:
        log.warning("skipped: %s", note)
    print(f"workspace: {workspace}")
    print(f"assembled {len(models)} of {cfg.k} models")
    return EXIT_OK


def cmd_gen_tests(args) -> int:
    workspace = Path(args.workspace)
    models_dir = workspace / "models"
    if not models_dir.is_dir():
        raise UsageError(f"no models directory under {workspace}; run synth first")
    model_dirs = sorted(d for d in models_dir.iterdir() if (d / "model.c").is_file())
    if not model_dirs:
        raise UsageError(f"no models under {models_dir}")
    models = sorted((load_model(d) for d in model_dirs), key=lambda m: m.sample_index)

    cfg = _engine_config(args)
    suite = generate_tests(models, cfg, workspace, retain_invalid=args.retain_invalid)
    compiled = [r for r in suite.model_results if r.compiled]
    if not compiled:
        for r in suite.model_results:
            log.error("%s failed to compile: %s", r.model_id, r.diagnostic.splitlines()[:1])
        raise RunnerError("no model compiled; see per-model report.json for diagnostics")
    _update_config(
        workspace,
        "engine",
        {
            "mode": cfg.mode,
            "image": cfg.image,
            "timeout_s": cfg.timeout_s,
            "retain_invalid": args.retain_invalid,
            "models_run": len(compiled),
            "models_skipped": len(suite.model_results) - len(compiled),
        },
    )
    print(f"tests: {len(suite.unique_tests)} unique ({suite.dropped_invalid} invalid dropped)")
    print(f"wrote {workspace / 'tests.json'}")
    return EXIT_OK


def cmd_difftest(args) -> int:
    workspace = Path(args.workspace)
    tests_path = workspace / "tests.json"
    if not tests_path.is_file():
        raise UsageError(f"{tests_path} not found; run gen-tests first")
    tests = load_suite(tests_path)
    from .adapters import load_adapters  # import here so kinds register on use

    adapters = load_adapters(Path(args.adapters))
    protocol = args.protocol or _read_config(workspace).get("synth", {}).get("protocol")
    prepare = postprocess_dns if protocol == "dns" else None

    driver = None
    graph_path = Path(args.stategraph) if args.stategraph else workspace / "stategraph.json"
    if graph_path.is_file():
        graph = load_state_graph(graph_path)
        driver = lambda adapter, test: drive_and_execute(adapter, test, graph)
        log.info("state driving enabled via %s", graph_path)

    run = run_suite(adapters, tests, prepare=prepare, driver=driver)
    json_path, md_path = write_reports(run, workspace, witness_cap=args.witness_cap)
    _update_config(
        workspace,
        "difftest",
        {
            "adapters": run.adapter_ids,
            "tests": len(tests),
            "findings": run.finding_count,
        },
    )
    print(f"wrote {json_path} and {md_path}")
    print(f"findings: {run.finding_count}")
    return EXIT_FINDINGS if run.finding_count else EXIT_OK


def cmd_stategraph(args) -> int:
    workspace = Path(args.workspace)
    models_dir = workspace / "models"
    if args.model:
        model_dir = models_dir / args.model
        if not model_dir.is_dir():
            raise UsageError(f"model {args.model!r} not found under {models_dir}")
    else:
        candidates = sorted(d for d in models_dir.iterdir() if (d / "model.c").is_file())
        if not candidates:
            raise UsageError(f"no models under {models_dir}")
        model_dir = candidates[0]
    model = load_model(model_dir)
    backend = _build_backend(args)
    graph = extract_state_graph(model, backend)
    out = workspace / "stategraph.json"
    write_state_graph(graph, out)
    print(f"wrote {out}: {len(graph.states)} states, {len(graph.transitions)} transitions")
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest = load_manifest(Path(args.manifest))
    try:
        temperatures = [float(t) for t in args.temperatures.split(",") if t.strip()]
    except ValueError as e:
        raise UsageError(f"bad --temperatures value: {e}")
    if not temperatures:
        raise UsageError("no temperatures given")
    if args.k_max < 1:
        raise UsageError("--k-max must be >= 1")
    backend = _build_backend(args)
    engine_cfg = _engine_config(args)
    sweep_root = _workspace_for_out(args.out_dir, args.runs_root)

    rows: List[Tuple[float, int, float]] = []
    for tau in temperatures:
        counts: Dict[int, List[int]] = {k: [] for k in range(1, args.k_max + 1)}
        for run_index in range(args.runs):
            cfg = GenerationConfig(k=args.k_max, temperature=tau)
            module_samples, notes = _sample_modules(backend, manifest, cfg)
            for note in notes:
                log.warning("skipped: %s", note)
            models, _ = emit_all(manifest.plan, module_samples, cfg.k)
            models = sorted(models, key=lambda m: m.sample_index)
            ws = sweep_root / f"t{tau:g}-run{run_index}"
            suite = generate_tests(models, engine_cfg, ws)
            tests_by_id = {r.model_id: r.tests for r in suite.model_results}
            for k in range(1, args.k_max + 1):
                pool = []
                for model in models[:k]:
                    pool.extend(tests_by_id.get(model.model_id, []))
                unique = [t for t in dedup_union(pool) if not t.invalid]
                counts[k].append(len(unique))
        for k in range(1, args.k_max + 1):
            values = counts[k]
            mean = sum(values) / len(values) if values else 0.0
            rows.append((tau, k, mean))

    csv_path = Path(args.out) if args.out else sweep_root / "sweep.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["temperature", "k", "mean_unique_tests", "runs"])
        for tau, k, mean in rows:
            writer.writerow([f"{tau:g}", k, f"{mean:g}", args.runs])
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


# -- entry point --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protomodel",
        description="Model-based protocol testing: synthesize models, generate tests, diff implementations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample completions and assemble k models")
    p.add_argument("manifest")
    p.add_argument("--k", type=int, help="samples per module (manifest default otherwise)")
    p.add_argument("--temperature", type=float)
    p.add_argument("--out", help="exact workspace directory (must be empty)")
    p.add_argument("--runs-root", default="runs", help="root for timestamped workspaces")
    _add_backend_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-tests", help="run the engine over every model")
    p.add_argument("--workspace", required=True)
    p.add_argument("--retain-invalid", action="store_true",
                   help="keep tests whose validity flag is set")
    _add_engine_args(p)
    p.set_defaults(func=cmd_gen_tests)

    p = sub.add_parser("difftest", help="differential-test adapters over tests.json")
    p.add_argument("--workspace", required=True)
    p.add_argument("--adapters", required=True, help="adapter config JSON")
    p.add_argument("--protocol", choices=("dns", "smtp", "none"),
                   help="override the protocol recorded at synth time")
    p.add_argument("--witness-cap", type=int, default=10)
    p.add_argument("--stategraph", help="state graph JSON (default: workspace/stategraph.json)")
    p.set_defaults(func=cmd_difftest)

    p = sub.add_parser("stategraph", help="extract a state graph from a stateful model")
    p.add_argument("--workspace", required=True)
    p.add_argument("--model", help="model id (default: first model)")
    _add_backend_args(p)
    p.set_defaults(func=cmd_stategraph)

    p = sub.add_parser("sweep", help="mean unique-test counts over a (temperature, k) grid")
    p.add_argument("manifest")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--temperatures", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--out", help="CSV output path (default: sweep root/sweep.csv)")
    p.add_argument("--out-dir", help="exact sweep workspace root")
    p.add_argument("--runs-root", default="runs")
    _add_backend_args(p)
    _add_engine_args(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ManifestError, GraphError, PromptError, DiffTestError,
            PostprocessError) as e:
        log.error("%s", e)
        return EXIT_USAGE
    except TransitionParseError as e:
        log.error("state-graph completion did not parse: %s", e)
        return EXIT_ENVIRONMENT
    except StateDriveError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except (GatewayError, RunnerError, AssemblyError, KTestError) as e:
        log.error("%s", e)
        return EXIT_ENVIRONMENT
    except KeyboardInterrupt:
        return EXIT_ENVIRONMENT


if __name__ == "__main__":
    sys.exit(main())
