"""Generate the native matcher and its cross-validation corpus.

Pulls the matcher fragment and the regex corpus from the installed
protomodel package and writes two files into the build directory:

  matcher.c   the matcher fragment, verbatim
  cases.inc   subjects, per-pattern constructor functions, and the
              verdicts the reference matcher produced

The driver includes both and replays every (pattern, subject) pair.
Verdicts are bit-packed, one bit per subject, because a plain string
literal for 5461 subjects would exceed the C99 minimum limit.
"""

import argparse
from pathlib import Path

from protomodel.harness import matcher_source
from protomodel.regexcore import (
    CORPUS_PATTERNS,
    corpus_subjects,
    emit_constructors,
    match_pattern,
    parse_pattern,
)

MAX_SUBJECT_LEN = 6


def c_string(text):
    out = []
    for ch in text:
        if ch in ('\\', '"'):
            out.append('\\' + ch)
        else:
            out.append(ch)
    return '"' + ''.join(out) + '"'


def pack_bits(verdicts):
    """Pack booleans little-endian within each byte, 8 per byte."""
    data = bytearray((len(verdicts) + 7) // 8)
    for i, v in enumerate(verdicts):
        if v:
            data[i >> 3] |= 1 << (i & 7)
    return bytes(data)


def byte_rows(data, per_row=12):
    rows = []
    for off in range(0, len(data), per_row):
        chunk = data[off:off + per_row]
        rows.append('    ' + ', '.join('0x%02x' % b for b in chunk) + ',')
    return rows


def emit_cases(patterns, subjects):
    lines = []
    lines.append('/* Generated by gen_cases.py; do not edit. */')
    lines.append('')
    lines.append('enum { SUBJECT_COUNT = %d };' % len(subjects))
    lines.append('')
    lines.append('static char subjects[SUBJECT_COUNT][%d] = {' % (MAX_SUBJECT_LEN + 2))
    for off in range(0, len(subjects), 8):
        row = subjects[off:off + 8]
        lines.append('    ' + ' '.join(c_string(s) + ',' for s in row))
    lines.append('};')
    lines.append('')

    for i, pattern in enumerate(patterns):
        ast = parse_pattern(pattern)
        body, root = emit_constructors(ast, 's')
        lines.append('/* pattern: %s */' % pattern)
        lines.append('static int match_p%d(char *s) {' % i)
        for stmt in body.splitlines():
            lines.append('    ' + stmt if stmt else '')
        lines.append('    return match(&%s, s);' % root)
        lines.append('}')
        lines.append('')
        verdicts = [match_pattern(pattern, s) for s in subjects]
        packed = pack_bits(verdicts)
        lines.append('static const unsigned char expected_p%d[%d] = {' % (i, len(packed)))
        lines.extend(byte_rows(packed))
        lines.append('};')
        lines.append('')

    lines.append('static const struct pattern_case {')
    lines.append('    const char *pattern;')
    lines.append('    int (*fn)(char *);')
    lines.append('    const unsigned char *expected;')
    lines.append('} cases[] = {')
    for i, pattern in enumerate(patterns):
        lines.append('    { %s, match_p%d, expected_p%d },' % (c_string(pattern), i, i))
    lines.append('};')
    lines.append('')
    return '\n'.join(lines)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument('--out-dir', type=Path, default=Path('build'))
    args = parser.parse_args(argv)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / 'matcher.c').write_text(matcher_source())

    subjects = corpus_subjects(MAX_SUBJECT_LEN)
    cases = emit_cases(CORPUS_PATTERNS, subjects)
    (args.out_dir / 'cases.inc').write_text(cases)
    print('wrote %s and %s' % (args.out_dir / 'matcher.c', args.out_dir / 'cases.inc'))


if __name__ == '__main__':
    main()
