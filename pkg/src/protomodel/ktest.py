"""Binary engine test-file (.ktest) parsing and serialization.

Layout: magic "KTEST", big-endian u32 version, argument strings, then
(for version >= 2) the symbolic-argv counters, then length-prefixed
(name, data) objects.  Object payload integers are raw little-endian
memory; only the file framing is big-endian.  A parser for the engine's
textual dump-tool output is provided as a fallback for environments
where only that output was captured.
"""

from __future__ import annotations

import ast
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

KTEST_MAGIC = b"KTEST"
MAX_SUPPORTED_VERSION = 3


class KTestError(ValueError):
    pass


@dataclass(frozen=True)
class KTestFile:
    version: int
    args: Tuple[str, ...]
    sym_argvs: int
    sym_argv_len: int
    objects: Tuple[Tuple[str, bytes], ...]

    def object_dict(self) -> dict:
        """First occurrence wins; the engine should not repeat names."""
        seen = {}
        for name, data in self.objects:
            seen.setdefault(name, data)
        return seen


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.data):
            raise KTestError(f"truncated file while reading {what}")
        chunk = self.data[self.off : self.off + n]
        self.off += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.take(4, what))[0]

    def lp_bytes(self, what: str) -> bytes:
        return self.take(self.u32(f"{what} length"), what)


def parse_ktest(data: bytes) -> KTestFile:
    r = _Reader(data)
    magic = r.take(len(KTEST_MAGIC), "magic")
    if magic != KTEST_MAGIC:
        raise KTestError(f"bad magic {magic!r}, expected {KTEST_MAGIC!r}")
    version = r.u32("version")
    if version > MAX_SUPPORTED_VERSION:
        raise KTestError(f"unsupported version {version} (max {MAX_SUPPORTED_VERSION})")
    num_args = r.u32("argument count")
    args = tuple(r.lp_bytes(f"argument {i}").decode("latin-1") for i in range(num_args))
    sym_argvs = sym_argv_len = 0
    if version >= 2:
        sym_argvs = r.u32("symArgvs")
        sym_argv_len = r.u32("symArgvLen")
    num_objects = r.u32("object count")
    objects = []
    for i in range(num_objects):
        name = r.lp_bytes(f"object {i} name").decode("latin-1")
        payload = r.lp_bytes(f"object {i} data")
        objects.append((name, payload))
    if r.off != len(data):
        raise KTestError(f"{len(data) - r.off} trailing bytes after last object")
    return KTestFile(version, args, sym_argvs, sym_argv_len, tuple(objects))


def serialize_ktest(kt: KTestFile) -> bytes:
    if kt.version > MAX_SUPPORTED_VERSION:
        raise KTestError(f"cannot serialize version {kt.version}")
    out = bytearray(KTEST_MAGIC)
    out += struct.pack(">I", kt.version)
    out += struct.pack(">I", len(kt.args))
    for arg in kt.args:
        raw = arg.encode("latin-1")
        out += struct.pack(">I", len(raw)) + raw
    if kt.version >= 2:
        out += struct.pack(">I", kt.sym_argvs)
        out += struct.pack(">I", kt.sym_argv_len)
    out += struct.pack(">I", len(kt.objects))
    for name, data in kt.objects:
        raw = name.encode("latin-1")
        out += struct.pack(">I", len(raw)) + raw
        out += struct.pack(">I", len(data)) + data
    return bytes(out)


# -- dump-tool fallback -------------------------------------------------

_ARGS_RE = re.compile(r"^args\s*:\s*(\[.*\])\s*$")
_OBJ_RE = re.compile(r"^object\s+(\d+)\s*:\s*(name|size|data|hex)\s*:\s*(.*)$")


def parse_dump_tool_output(text: str) -> KTestFile:
    """Parse the engine's textual test-dump output into a KTestFile.

    Object bytes are taken from the `hex` line when present, else from the
    `data` byte-string literal.
    """
    args: Tuple[str, ...] = ()
    names: dict = {}
    payloads: dict = {}
    for line in text.splitlines():
        line = line.strip()
        m = _ARGS_RE.match(line)
        if m:
            try:
                args = tuple(str(a) for a in ast.literal_eval(m.group(1)))
            except (ValueError, SyntaxError) as e:
                raise KTestError(f"bad args line {line!r}: {e}")
            continue
        m = _OBJ_RE.match(line)
        if not m:
            continue
        index = int(m.group(1))
        field, value = m.group(2), m.group(3).strip()
        if field == "name":
            try:
                parsed = ast.literal_eval(value)
            except (ValueError, SyntaxError):
                parsed = value
            names[index] = parsed.decode("latin-1") if isinstance(parsed, bytes) else str(parsed)
        elif field == "hex":
            if not value.startswith("0x"):
                raise KTestError(f"bad hex line for object {index}: {value!r}")
            payloads[index] = bytes.fromhex(value[2:]) if len(value) > 2 else b""
        elif field == "data" and index not in payloads:
            try:
                parsed = ast.literal_eval(value)
            except (ValueError, SyntaxError) as e:
                raise KTestError(f"bad data line for object {index}: {e}")
            payloads[index] = parsed if isinstance(parsed, bytes) else str(parsed).encode("latin-1")
    if set(names) != set(payloads):
        missing = sorted(set(names.keys()) ^ set(payloads.keys()))
        raise KTestError(f"incomplete dump output for objects {missing}")
    objects = tuple((names[i], payloads[i]) for i in sorted(names))
    return KTestFile(MAX_SUPPORTED_VERSION, args, 0, 0, objects)


def load_test_file(path: Path) -> KTestFile:
    """Load a test file, accepting either binary or dump-tool text form."""
    raw = Path(path).read_bytes()
    if raw.startswith(KTEST_MAGIC):
        return parse_ktest(raw)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise KTestError(f"{path}: bad magic and not dump-tool text")
    return parse_dump_tool_output(text)
