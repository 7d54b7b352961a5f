"""Regex subset: parser, reference matcher, and C constructor emission.

The dialect is deliberately small because the matching runtime embedded in
generated programs supports exactly four operations: character range,
sequence, alternation, and star.  The concrete syntax accepts literal
characters, `\\c` escapes for metacharacters, character classes with ranges,
grouping, postfix `*`, and alternation with `|`.  `.` is a literal: it must
be escaped outside classes and stands for itself inside them.  There are no
wildcards, anchors, `+`, `?`, or negated classes.  Matching is anchored at
both ends.

The reference matcher mirrors the embedded C matcher's continuation
semantics step for step so the two can be cross-validated on a shared
corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple, Union


@dataclass(frozen=True)
class RangeNode:
    lo: str
    hi: str


@dataclass(frozen=True)
class SeqNode:
    left: "RegexAst"
    right: "RegexAst"


@dataclass(frozen=True)
class OrNode:
    left: "RegexAst"
    right: "RegexAst"


@dataclass(frozen=True)
class StarNode:
    inner: "RegexAst"


RegexAst = Union[RangeNode, SeqNode, OrNode, StarNode]


class RegexSyntaxError(ValueError):
    """Pattern text rejected by the parser."""


METACHARACTERS = set("()[]*|\\.")


def nullable(ast: RegexAst) -> bool:
    """Whether the pattern can match the empty string."""
    if isinstance(ast, RangeNode):
        return False
    if isinstance(ast, StarNode):
        return True
    if isinstance(ast, SeqNode):
        return nullable(ast.left) and nullable(ast.right)
    if isinstance(ast, OrNode):
        return nullable(ast.left) or nullable(ast.right)
    raise TypeError(f"unknown node {type(ast).__name__}")


class _Parser:
    def __init__(self, pattern: str):
        self.pattern = pattern
        self.pos = 0

    def error(self, message: str) -> RegexSyntaxError:
        return RegexSyntaxError(f"{message} at position {self.pos} in {self.pattern!r}")

    def peek(self) -> str:
        return self.pattern[self.pos] if self.pos < len(self.pattern) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    # alternation := concat ('|' concat)*
    def parse_alternation(self) -> RegexAst:
        node = self.parse_concat()
        while self.peek() == "|":
            self.take()
            node = OrNode(node, self.parse_concat())
        return node

    # concat := repeat+
    def parse_concat(self) -> RegexAst:
        parts: List[RegexAst] = []
        while self.peek() not in ("", "|", ")"):
            parts.append(self.parse_repeat())
        if not parts:
            raise self.error("empty pattern branch")
        node = parts[0]
        for part in parts[1:]:
            node = SeqNode(node, part)
        return node

    # repeat := atom '*'*
    def parse_repeat(self) -> RegexAst:
        node = self.parse_atom()
        while self.peek() == "*":
            self.take()
            if nullable(node):
                raise self.error("star applied to a possibly-empty pattern")
            node = StarNode(node)
        return node

    def parse_atom(self) -> RegexAst:
        ch = self.peek()
        if ch == "":
            raise self.error("unexpected end of pattern")
        if ch == "(":
            self.take()
            node = self.parse_alternation()
            if self.peek() != ")":
                raise self.error("unbalanced parenthesis")
            self.take()
            return node
        if ch == "[":
            return self.parse_class()
        if ch == "\\":
            self.take()
            esc = self.take()
            if esc == "":
                raise self.error("trailing escape")
            return RangeNode(esc, esc)
        if ch == "*":
            raise self.error("dangling '*'")
        if ch in METACHARACTERS:
            raise self.error(f"metacharacter {ch!r} must be escaped")
        self.take()
        return RangeNode(ch, ch)

    def parse_class(self) -> RegexAst:
        self.take()  # consume '['
        members: List[RangeNode] = []
        while True:
            ch = self.peek()
            if ch == "":
                raise self.error("unbalanced bracket")
            if ch == "]":
                self.take()
                break
            lo = self.take()
            if lo == "\\":
                lo = self.take()
                if lo == "":
                    raise self.error("trailing escape")
            if self.peek() == "-" and self.pos + 1 < len(self.pattern) and self.pattern[self.pos + 1] != "]":
                self.take()  # consume '-'
                hi = self.take()
                if hi == "\\":
                    hi = self.take()
                    if hi == "":
                        raise self.error("trailing escape")
                if hi < lo:
                    raise self.error(f"bad range {lo!r}-{hi!r}")
                members.append(RangeNode(lo, hi))
            else:
                members.append(RangeNode(lo, lo))
        if not members:
            raise self.error("empty class")
        node: RegexAst = members[0]
        for member in members[1:]:
            node = OrNode(node, member)
        return node


def parse_pattern(pattern: str) -> RegexAst:
    """Parse pattern text into the four-op AST.

    Raises RegexSyntaxError for unbalanced brackets or parens, empty classes
    and branches, dangling `*`, bad ranges, trailing escapes, unescaped
    metacharacters, and star over a possibly-empty operand (which would not
    terminate under the continuation semantics).
    """
    if pattern == "":
        raise RegexSyntaxError("empty pattern")
    parser = _Parser(pattern)
    node = parser.parse_alternation()
    if parser.pos != len(pattern):
        raise parser.error("unbalanced parenthesis")
    return node


# ---------------------------------------------------------------------------
# Reference matcher (continuation semantics)
# ---------------------------------------------------------------------------


def matches(ast: RegexAst, subject: str) -> bool:
    """Anchored match of `subject` against `ast`.

    Semantics, mirroring the embedded C matcher exactly: a null regex
    accepts iff the subject is exhausted; OR tries left then right; SEQ
    pushes its right side onto the continuation; STAR first tries the
    continuation alone, then (only on non-empty remaining text) one
    mandatory unrolling of its operand followed by the star again; RANGE
    consumes exactly one in-range character.
    """
    return _match(ast, (), subject)


def _match(node: RegexAst, cont: Tuple[RegexAst, ...], text: str) -> bool:
    if isinstance(node, OrNode):
        return _match(node.left, cont, text) or _match(node.right, cont, text)
    if isinstance(node, SeqNode):
        return _match(node.left, (node.right,) + cont, text)
    if isinstance(node, StarNode):
        if _match_cont(cont, text):
            return True
        return text != "" and _match(SeqNode(node.inner, node), cont, text)
    if isinstance(node, RangeNode):
        if text == "":
            return False
        ch = text[0]
        return node.lo <= ch <= node.hi and _match_cont(cont, text[1:])
    raise TypeError(f"unknown node {type(node).__name__}")


def _match_cont(cont: Tuple[RegexAst, ...], text: str) -> bool:
    if not cont:
        return text == ""
    return _match(cont[0], cont[1:], text)


def match_pattern(pattern: str, subject: str) -> bool:
    """Convenience wrapper: parse then match."""
    return matches(parse_pattern(pattern), subject)


# ---------------------------------------------------------------------------
# C constructor emission
# ---------------------------------------------------------------------------


def _c_char(ch: str) -> str:
    if ch == "'":
        return "'\\''"
    if ch == "\\":
        return "'\\\\'"
    return f"'{ch}'"


def emit_constructors(ast: RegexAst, subject_var: str, var_prefix: str = "r") -> Tuple[str, str]:
    """Emit C statements building `ast` as matcher nodes.

    Returns (statements text, root variable name).  Nodes are numbered in
    post order starting at 1; child links use address-of so the output
    compiles against the embedded matcher.  The final statement is not
    included; callers wrap the root in a match() call on `subject_var`.
    """
    lines: List[str] = []
    counter = 0

    def emit(node: RegexAst) -> str:
        nonlocal counter
        if isinstance(node, RangeNode):
            counter += 1
            var = f"{var_prefix}{counter}"
            lines.append(
                f"Regex {var}; {var}.op = RANGE; {var}.clo = {_c_char(node.lo)}; "
                f"{var}.chi = {_c_char(node.hi)};"
            )
            return var
        if isinstance(node, StarNode):
            inner = emit(node.inner)
            counter += 1
            var = f"{var_prefix}{counter}"
            lines.append(f"Regex {var}; {var}.op = STAR; {var}.left = &{inner};")
            return var
        if isinstance(node, (SeqNode, OrNode)):
            left = emit(node.left)
            right = emit(node.right)
            counter += 1
            var = f"{var_prefix}{counter}"
            op = "SEQ" if isinstance(node, SeqNode) else "OR"
            lines.append(
                f"Regex {var}; {var}.op = {op}; {var}.left = &{left}; {var}.right = &{right};"
            )
            return var
        raise TypeError(f"unknown node {type(node).__name__}")

    root = emit(ast)
    return "\n".join(lines), root


def count_nodes(ast: RegexAst) -> int:
    if isinstance(ast, RangeNode):
        return 1
    if isinstance(ast, StarNode):
        return 1 + count_nodes(ast.inner)
    return 1 + count_nodes(ast.left) + count_nodes(ast.right)


# Shared cross-validation corpus.  The native matcher runtime replays the
# same patterns over all subjects of length <= 6 drawn from CORPUS_ALPHABET;
# the Python reference matcher and an independent brute-force matcher must
# agree on every pair.
CORPUS_ALPHABET = ("a", "b", ".", "*")

CORPUS_PATTERNS = (
    "[a-z]*",
    "[a-z*](\\.[a-z*])*",
    "a",
    "b*",
    "ab",
    "a|b",
    "(a|b)*",
    "a*b",
    "ab*",
    "(ab)*",
    "a(a|b)b",
    "[ab]",
    "[ab]*",
    "[a-b]*",
    "\\.",
    "\\**",
    "a\\.b",
    "(a\\.)*b",
    "[a-z.]",
    "[.*]*",
    "a|ab",
    "(a|ab)b",
    "aa*",
    "(ab|ba)*",
)


def corpus_subjects(max_len: int = 6) -> List[str]:
    """All subjects over CORPUS_ALPHABET up to `max_len` characters."""
    subjects = [""]
    frontier = [""]
    for _ in range(max_len):
        frontier = [s + ch for s in frontier for ch in CORPUS_ALPHABET]
        subjects.extend(frontier)
    return subjects
