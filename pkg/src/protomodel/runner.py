"""Engine orchestration: compile models, run symbolic execution, rebuild tests.

Three engine modes share one interface: `docker` launches the pinned
toolchain+engine container per model, `local` uses host clang/klee
binaries, and `fixture` replays checked-in .ktest files so the whole
pipeline stays hermetic for tests and demos.  Reconstruction turns raw
engine objects back into typed test cases via the SymbolMap, and the
per-run union is deduplicated over (inputs, validity flag) — model
outputs are deliberately not part of the key, since the models under
test may disagree with each other.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .harness import GeneratedModel, SymbolMap, write_model
from .ktest import KTestError, load_test_file

ENGINE_MODES = ("docker", "local", "fixture")
DEFAULT_IMAGE = "klee/klee:3.0"


class RunnerError(RuntimeError):
    """Environment-level failure (toolchain, container runtime, engine crash)."""


class CompileError(RuntimeError):
    """A single model failed to compile; the model is skipped, not the run."""


class ReconstructionError(ValueError):
    """Engine objects do not line up with the symbol map."""


class DiscardedTest(Exception):
    """A parsed test was dropped (e.g. enum value outside declared variants)."""


@dataclass(frozen=True)
class EngineConfig:
    mode: str = "docker"
    image: str = DEFAULT_IMAGE
    clang_path: str = "clang"
    klee_path: str = "klee"
    timeout_s: int = 300
    extra_args: Tuple[str, ...] = ()
    fixture_dir: Optional[Path] = None
    parallel: int = 1

    def validate(self) -> None:
        if self.mode not in ENGINE_MODES:
            raise RunnerError(f"unknown engine mode {self.mode!r}; pick one of {ENGINE_MODES}")
        if self.mode == "fixture" and self.fixture_dir is None:
            raise RunnerError("fixture engine mode needs fixture_dir")
        if self.timeout_s < 1:
            raise RunnerError(f"timeout {self.timeout_s}s must be >= 1")
        if self.parallel < 1:
            raise RunnerError("parallel must be >= 1")


@dataclass
class EngineRunReport:
    test_files: int
    exit_status: int
    wall_time_s: float
    timeout_hit: bool
    stderr: str

    def to_json(self) -> dict:
        return {
            "test_files": self.test_files,
            "exit_status": self.exit_status,
            "wall_time_s": round(self.wall_time_s, 3),
            "timeout_hit": self.timeout_hit,
            "stderr": self.stderr,
        }


# -- typed test cases ---------------------------------------------------


@dataclass(frozen=True)
class TestCase:
    """One reconstructed engine test: typed inputs by argument position."""

    __test__ = False  # not a pytest class, despite the name

    inputs: Tuple[object, ...]
    output: object
    invalid: bool
    origin: Tuple[str, str]

    def to_json(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "output": self.output,
            "invalid": self.invalid,
            "origin": {"model": self.origin[0], "test_file": self.origin[1]},
        }

    @staticmethod
    def from_json(data: dict) -> "TestCase":
        origin = data.get("origin", {})
        return TestCase(
            inputs=tuple(data["inputs"]),
            output=data.get("output"),
            invalid=bool(data.get("invalid", False)),
            origin=(origin.get("model", "?"), origin.get("test_file", "?")),
        )


def canonical_key(test: TestCase) -> str:
    """Dedup key: inputs and validity only (outputs excluded by design)."""
    return json.dumps(
        {"inputs": list(test.inputs), "invalid": test.invalid},
        sort_keys=True,
        separators=(",", ":"),
    )


def dedup_union(tests: Iterable[TestCase]) -> List[TestCase]:
    """Unique tests in first-occurrence order."""
    seen = set()
    out: List[TestCase] = []
    for t in tests:
        key = canonical_key(t)
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def _build_value(parts: List[Tuple[Tuple, object]]) -> object:
    """Rebuild one argument value from (path-tail, leaf value) parts."""
    if len(parts) == 1 and not parts[0][0]:
        return parts[0][1]
    grouped: Dict[object, List[Tuple[Tuple, object]]] = {}
    order: List[object] = []
    for tail, value in parts:
        seg = tail[0]
        if seg not in grouped:
            grouped[seg] = []
            order.append(seg)
        grouped[seg].append((tail[1:], value))
    if all(isinstance(seg, int) for seg in order):
        return [_build_value(grouped[seg]) for seg in sorted(grouped)]
    return {str(seg): _build_value(grouped[seg]) for seg in order}


def reconstruct(
    symbol_map: SymbolMap,
    objects: Mapping[str, bytes],
    origin: Tuple[str, str] = ("model", "?"),
) -> TestCase:
    """Typed TestCase from raw engine objects.

    Structural mismatches (missing object, wrong width) raise
    ReconstructionError; domain violations (out-of-range enum,
    unterminated buffer) raise DiscardedTest so callers can drop the test
    and keep going.
    """
    decoded: Dict[str, object] = {}
    for entry in symbol_map.entries:
        slot = entry.slot
        data = objects.get(slot.var_name)
        if data is None:
            raise ReconstructionError(f"missing engine object {slot.var_name!r}")
        if len(data) != slot.byte_width:
            raise ReconstructionError(
                f"object {slot.var_name!r} is {len(data)} bytes, expected {slot.byte_width}"
            )
        try:
            decoded[slot.var_name] = slot.decode(data)
        except ValueError as e:
            raise DiscardedTest(str(e))

    per_arg: Dict[int, List[Tuple[Tuple, object]]] = {}
    for entry in symbol_map.inputs:
        slot = entry.slot
        per_arg.setdefault(slot.path[0], []).append((slot.path[1:], decoded[slot.var_name]))
    inputs = tuple(_build_value(per_arg[i]) for i in sorted(per_arg))
    out_parts = [
        (e.slot.path[1:], decoded[e.slot.var_name]) for e in symbol_map.outputs
    ]
    output = _build_value(out_parts)
    invalid = bool(decoded[symbol_map.validity.slot.var_name])
    return TestCase(inputs, output, invalid, origin)


# -- compile and run ----------------------------------------------------


def _install_shim_headers(model_dir: Path) -> None:
    dest = model_dir / "include" / "klee"
    dest.mkdir(parents=True, exist_ok=True)
    header = resources.files("protomodel.assets").joinpath("include/klee/klee.h")
    (dest / "klee.h").write_text(header.read_text(encoding="utf-8"), encoding="utf-8")


def compile_bitcode(model_dir: Path, cfg: EngineConfig) -> Optional[Path]:
    """Compile model.c to model.bc (skipped entirely in fixture mode)."""
    if cfg.mode == "fixture":
        return None
    _install_shim_headers(model_dir)
    compile_args = [
        "-I", "include", "-emit-llvm", "-c", "-g", "-O0", "model.c", "-o", "model.bc",
    ]
    if cfg.mode == "docker":
        cmd = [
            "docker", "run", "--rm",
            "-v", f"{model_dir.resolve()}:/work", "-w", "/work",
            cfg.image, "clang", *compile_args,
        ]
        what = f"container compile (image {cfg.image})"
    else:
        cmd = [cfg.clang_path, *compile_args]
        what = f"local compile ({cfg.clang_path})"
    proc = _run_in(cmd, model_dir if cfg.mode == "local" else None, what)
    if proc.returncode != 0:
        raise CompileError(proc.stderr.strip() or f"{what} failed with {proc.returncode}")
    bitcode = model_dir / "model.bc"
    if not bitcode.exists():
        raise CompileError(f"{what} produced no bitcode")
    return bitcode


def _run_in(cmd: Sequence[str], cwd: Optional[Path], what: str, timeout: Optional[float] = None):
    try:
        return subprocess.run(
            list(cmd),
            capture_output=True,
            text=True,
            cwd=str(cwd) if cwd else None,
            timeout=timeout,
        )
    except FileNotFoundError:
        raise RunnerError(f"{what}: executable {cmd[0]!r} not found")
    except subprocess.TimeoutExpired as e:
        raise RunnerError(f"{what}: timed out after {e.timeout}s")


def run_engine(
    model_dir: Path, cfg: EngineConfig, model_id: Optional[str] = None
) -> Tuple[EngineRunReport, Path]:
    """Run the engine over model.bc, returning the report and test directory."""
    out_dir = model_dir / "ktests"
    if cfg.mode == "fixture":
        out_dir.mkdir(parents=True, exist_ok=True)
        assert cfg.fixture_dir is not None
        source = Path(cfg.fixture_dir)
        if not source.is_dir():
            raise RunnerError(f"fixture directory {source} does not exist")
        if model_id and (source / model_id).is_dir():
            source = source / model_id
        files = sorted(source.glob("*.ktest"))
        for f in files:
            shutil.copy(f, out_dir / f.name)
        report = EngineRunReport(len(files), 0, 0.0, False, "")
        return report, out_dir

    engine_flags = [
        "--libc=uclibc",
        "--posix-runtime",
        f"--max-time={cfg.timeout_s}s",
        "--external-calls=all",
    ]
    start = time.monotonic()
    if cfg.mode == "docker":
        cmd = [
            "docker", "run", "--rm",
            "-v", f"{model_dir.resolve()}:/work", "-w", "/work",
            cfg.image, "klee", *engine_flags,
            "--output-dir=/work/ktests", *cfg.extra_args, "model.bc",
        ]
        proc = _run_in(cmd, None, f"engine container (image {cfg.image})",
                       timeout=cfg.timeout_s * 4 + 120)
    else:
        cmd = [
            cfg.klee_path, *engine_flags,
            f"--output-dir={out_dir}", *cfg.extra_args, "model.bc",
        ]
        proc = _run_in(cmd, model_dir, f"local engine ({cfg.klee_path})",
                       timeout=cfg.timeout_s * 4 + 120)
    wall = time.monotonic() - start
    test_files = sorted(out_dir.glob("*.ktest")) if out_dir.exists() else []
    if proc.returncode != 0 and not test_files:
        tail = "\n".join(proc.stderr.splitlines()[-15:])
        raise RunnerError(f"engine failed (exit {proc.returncode}) with no tests:\n{tail}")
    timeout_hit = "HaltTimer" in proc.stderr or wall >= cfg.timeout_s
    report = EngineRunReport(len(test_files), proc.returncode, wall, timeout_hit, proc.stderr)
    return report, out_dir


def collect_tests(
    symbol_map: SymbolMap, tests_dir: Path, model_id: str
) -> Tuple[List[TestCase], List[str]]:
    """Parse and reconstruct every test file; returns (tests, discard notes)."""
    tests: List[TestCase] = []
    discards: List[str] = []
    for path in sorted(Path(tests_dir).glob("*.ktest")):
        try:
            kt = load_test_file(path)
        except KTestError as e:
            discards.append(f"{path.name}: {e}")
            continue
        try:
            tests.append(
                reconstruct(symbol_map, kt.object_dict(), (model_id, path.name))
            )
        except DiscardedTest as e:
            discards.append(f"{path.name}: {e}")
    return tests, discards


# -- whole-suite orchestration ------------------------------------------


@dataclass
class ModelRunResult:
    model_id: str
    compiled: bool
    diagnostic: str = ""
    report: Optional[EngineRunReport] = None
    tests: List[TestCase] = field(default_factory=list)
    discards: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "compiled": self.compiled,
            "diagnostic": self.diagnostic,
            "report": self.report.to_json() if self.report else None,
            "tests": len(self.tests),
            "discards": self.discards,
        }


@dataclass
class SuiteResult:
    model_results: List[ModelRunResult]
    unique_tests: List[TestCase]
    dropped_invalid: int
    workspace: Path


def _run_one_model(model: GeneratedModel, cfg: EngineConfig, workspace: Path) -> ModelRunResult:
    model_dir = workspace / "models" / model.model_id
    write_model(model, model_dir)
    result = ModelRunResult(model.model_id, compiled=True)
    try:
        compile_bitcode(model_dir, cfg)
    except CompileError as e:
        result.compiled = False
        result.diagnostic = str(e)
        _write_json(model_dir / "report.json", result.to_json())
        return result
    report, tests_dir = run_engine(model_dir, cfg, model.model_id)
    result.report = report
    result.tests, result.discards = collect_tests(
        model.symbol_map, tests_dir, model.model_id
    )
    _write_json(model_dir / "report.json", result.to_json())
    return result


def generate_tests(
    models: Sequence[GeneratedModel],
    cfg: EngineConfig,
    workspace: Path,
    retain_invalid: bool = False,
) -> SuiteResult:
    """Run every model, union and dedup their tests, and export the suite.

    Invalid tests (validity flag set) are dropped from the export by
    default; retain_invalid keeps them for exercising validity paths.
    """
    cfg.validate()
    workspace = Path(workspace)
    workspace.mkdir(parents=True, exist_ok=True)
    if cfg.parallel > 1 and len(models) > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.parallel, len(models))) as pool:
            results = list(pool.map(lambda m: _run_one_model(m, cfg, workspace), models))
    else:
        results = [_run_one_model(m, cfg, workspace) for m in models]

    union: List[TestCase] = []
    for r in results:
        union.extend(r.tests)
    unique = dedup_union(union)
    if retain_invalid:
        exported = unique
        dropped = 0
    else:
        exported = [t for t in unique if not t.invalid]
        dropped = len(unique) - len(exported)

    suite = SuiteResult(results, exported, dropped, workspace)
    _write_json(workspace / "tests.json", suite_to_json(suite, models))
    _write_json(
        workspace / "report.json",
        {
            "models": [r.to_json() for r in results],
            "unique_tests": len(exported),
            "dropped_invalid": dropped,
        },
    )
    return suite


def suite_to_json(suite: SuiteResult, models: Sequence[GeneratedModel]) -> dict:
    fingerprint = models[0].symbol_map.plan_fingerprint if models else ""
    return {
        "plan_fingerprint": fingerprint,
        "count": len(suite.unique_tests),
        "tests": [t.to_json() for t in suite.unique_tests],
    }


def load_suite(path: Path) -> List[TestCase]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TestCase.from_json(t) for t in data["tests"]]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def new_run_dir(root: Path, stamp: Optional[str] = None) -> Path:
    """Create a fresh timestamped run directory (never reuses an existing one)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if stamp is None:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    for i in range(10000):
        name = stamp if i == 0 else f"{stamp}-{i}"
        candidate = root / name
        try:
            candidate.mkdir(exist_ok=False)
            return candidate
        except FileExistsError:
            continue
    raise RunnerError(f"could not allocate a run directory under {root}")
