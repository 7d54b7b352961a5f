"""Differential execution: run the suite on several implementations,
normalize answers, vote, and triage disagreements.

Every implementation sits behind an adapter (setup / execute / teardown /
translate).  Responses are canonicalized so that equality is meaningful,
grouped by full equality, and each adapter outside the largest group
contributes one triage tuple per differing field.  Ties produce no
majority; pairwise field diffs are emitted instead so nothing is
arbitrarily resolved.  Adapter failures become a distinguished crash
response rather than aborting the run — crashes are findings.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .runner import TestCase

log = logging.getLogger(__name__)

CRASH_FIELD = "crash"


class DiffTestError(RuntimeError):
    pass


class PostprocessError(ValueError):
    """A test value cannot be turned into a legal protocol stimulus."""


def canonical_value(value):
    """Deterministic form: dict keys sorted, record lists sorted by their
    serialized form.  Idempotent by construction."""
    if isinstance(value, dict):
        return {k: canonical_value(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        items = [canonical_value(v) for v in value]
        return sorted(items, key=lambda v: json.dumps(v, sort_keys=True))
    return value


@dataclass(frozen=True)
class NormalizedResponse:
    """Ordered field-key -> canonical value map with value equality."""

    fields: Tuple[Tuple[str, object], ...]

    @staticmethod
    def make(mapping: Mapping[str, object]) -> "NormalizedResponse":
        return NormalizedResponse(
            tuple((str(k), canonical_value(v)) for k, v in mapping.items())
        )

    @staticmethod
    def crash(reason: str) -> "NormalizedResponse":
        return NormalizedResponse.make({CRASH_FIELD: reason})

    @property
    def is_crash(self) -> bool:
        return any(k == CRASH_FIELD for k, _ in self.fields)

    def as_dict(self) -> Dict[str, object]:
        return {k: v for k, v in self.fields}

    def key(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalizedResponse):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self) -> int:
        return hash(self.key())


def normalize_response(mapping: Mapping[str, object]) -> NormalizedResponse:
    return NormalizedResponse.make(mapping)


@dataclass(frozen=True)
class TriageTuple:
    """(implementation, field, observed, majority) disagreement record.

    Values are compact canonical JSON strings so tuples hash and group
    cleanly.  In a no-majority tie the fourth element holds the paired
    adapter's value instead of a majority value.
    """

    implementation: str
    field: str
    observed: str
    majority: str

    def as_list(self) -> List[str]:
        return [self.implementation, self.field, self.observed, self.majority]


def _render(value) -> str:
    return json.dumps(canonical_value(value), sort_keys=True, separators=(",", ":"))


def _field_diffs(a: NormalizedResponse, b: NormalizedResponse) -> List[str]:
    da, db = a.as_dict(), b.as_dict()
    keys = sorted(set(da) | set(db))
    return [k for k in keys if da.get(k) != db.get(k)]


@dataclass
class TestTriage:
    index: int
    no_majority: bool
    majority_ids: List[str]
    tuples: List[TriageTuple]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "no_majority": self.no_majority,
            "majority": self.majority_ids,
            "tuples": [t.as_list() for t in self.tuples],
        }


def majority_and_triage(responses: Mapping[str, NormalizedResponse], index: int = 0) -> TestTriage:
    """Vote over one test's responses.

    Responses are grouped by full equality; the unique largest group is
    the majority and every outsider yields one tuple per differing field,
    with the majority's value as the reference.  A tie for largest gives
    no majority: every disagreeing ordered pair contributes field diffs.
    """
    if len(responses) < 2:
        raise DiffTestError(f"need at least 2 responses to vote, got {len(responses)}")
    groups: Dict[str, List[str]] = {}
    for impl in sorted(responses):
        groups.setdefault(responses[impl].key(), []).append(impl)
    ranked = sorted(groups.values(), key=len, reverse=True)
    tied = len(ranked) > 1 and len(ranked[0]) == len(ranked[1])

    if tied:
        tuples: List[TriageTuple] = []
        impls = sorted(responses)
        for a in impls:
            for b in impls:
                if a >= b:
                    continue
                ra, rb = responses[a], responses[b]
                if ra == rb:
                    continue
                for key in _field_diffs(ra, rb):
                    tuples.append(
                        TriageTuple(a, key, _render(ra.as_dict().get(key)), _render(rb.as_dict().get(key)))
                    )
                    tuples.append(
                        TriageTuple(b, key, _render(rb.as_dict().get(key)), _render(ra.as_dict().get(key)))
                    )
        return TestTriage(index, True, [], tuples)

    majority_ids = ranked[0]
    reference = responses[majority_ids[0]]
    tuples = []
    for impl in sorted(responses):
        if impl in majority_ids:
            continue
        observed = responses[impl]
        for key in _field_diffs(observed, reference):
            tuples.append(
                TriageTuple(
                    impl,
                    key,
                    _render(observed.as_dict().get(key)),
                    _render(reference.as_dict().get(key)),
                )
            )
    return TestTriage(index, False, majority_ids, tuples)


# -- suite execution ----------------------------------------------------


@dataclass
class SuiteRun:
    adapter_ids: List[str]
    responses: List[Dict[str, NormalizedResponse]]
    triage: List[TestTriage] = field(default_factory=list)

    @property
    def finding_count(self) -> int:
        return sum(len(t.tuples) for t in self.triage)


def run_suite(
    adapters: Sequence,
    tests: Sequence[TestCase],
    prepare: Optional[Callable[[TestCase], object]] = None,
    driver: Optional[Callable] = None,
) -> SuiteRun:
    """Execute every test against every adapter.

    `prepare` builds the per-test fixture shared by all adapters (for DNS,
    the zone and query).  `driver` overrides plain execute() — the state
    driver uses it to send BFS prefixes first.  Per-cell failures are
    recorded as crash responses; setup/execute/teardown stays a critical
    section per adapter.
    """
    if not adapters:
        raise DiffTestError("no adapters configured")
    ids = [a.id for a in adapters]
    if len(set(ids)) != len(ids):
        raise DiffTestError(f"duplicate adapter ids: {ids}")
    if not tests:
        log.warning("test suite is empty; nothing to run")
    if driver is None:
        driver = lambda adapter, test: adapter.execute(test)

    all_responses: List[Dict[str, NormalizedResponse]] = []
    for test in tests:
        fixture = prepare(test) if prepare else None
        row: Dict[str, NormalizedResponse] = {}
        for adapter in adapters:
            try:
                adapter.setup(fixture)
                response = driver(adapter, test)
                if not isinstance(response, NormalizedResponse):
                    response = normalize_response(response)
            except Exception as e:
                response = NormalizedResponse.crash(f"{type(e).__name__}: {e}")
            finally:
                try:
                    adapter.teardown()
                except Exception as e:
                    log.warning("teardown of %s failed: %s", adapter.id, e)
            row[adapter.id] = response
        all_responses.append(row)

    run = SuiteRun(ids, all_responses)
    for i, row in enumerate(all_responses):
        if len(row) >= 2:
            run.triage.append(majority_and_triage(row, i))
    return run


@dataclass
class TupleGroup:
    tuple: TriageTuple
    count: int
    witnesses: List[int]

    def to_json(self) -> dict:
        return {
            "implementation": self.tuple.implementation,
            "field": self.tuple.field,
            "observed": self.tuple.observed,
            "majority": self.tuple.majority,
            "count": self.count,
            "witnesses": self.witnesses,
        }


def aggregate_report(triage: Iterable[TestTriage], witness_cap: int = 10) -> List[TupleGroup]:
    """Group identical tuples across tests; witnesses capped for reading."""
    by_tuple: Dict[TriageTuple, TupleGroup] = {}
    for entry in triage:
        for t in entry.tuples:
            group = by_tuple.get(t)
            if group is None:
                by_tuple[t] = TupleGroup(t, 1, [entry.index])
            else:
                group.count += 1
                if len(group.witnesses) < witness_cap:
                    group.witnesses.append(entry.index)
    ordered = sorted(
        by_tuple.values(),
        key=lambda g: (g.tuple.implementation, g.tuple.field, g.tuple.observed, g.tuple.majority),
    )
    return ordered


def report_json(run: SuiteRun, groups: List[TupleGroup]) -> dict:
    return {
        "adapters": run.adapter_ids,
        "tests": [t.to_json() for t in run.triage],
        "groups": [g.to_json() for g in groups],
        "findings": run.finding_count,
    }


def report_markdown(run: SuiteRun, groups: List[TupleGroup]) -> str:
    lines = ["# Differential triage report", ""]
    lines.append(f"Adapters: {', '.join(run.adapter_ids)}")
    lines.append(f"Tests voted: {len(run.triage)}")
    lines.append(f"Disagreement tuples: {run.finding_count}")
    lines.append("")
    if not groups:
        lines.append("All implementations agreed on every test.")
        return "\n".join(lines) + "\n"
    lines.append("| implementation | field | observed | majority | tests |")
    lines.append("|---|---|---|---|---|")
    for g in groups:
        t = g.tuple
        witnesses = ", ".join(str(w) for w in g.witnesses)
        if g.count > len(g.witnesses):
            witnesses += ", ..."
        lines.append(
            f"| {t.implementation} | {t.field} | {t.observed} | {t.majority} "
            f"| {g.count} ({witnesses}) |"
        )
    ties = [t.index for t in run.triage if t.no_majority]
    if ties:
        lines.append("")
        lines.append(
            f"No-majority ties on tests: {', '.join(str(i) for i in ties)} "
            "(tuples above hold the paired adapter's value in the majority column)."
        )
    return "\n".join(lines) + "\n"


def write_reports(run: SuiteRun, directory: Path, witness_cap: int = 10) -> Tuple[Path, Path]:
    groups = aggregate_report(run.triage, witness_cap)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / "triage.json"
    md_path = directory / "triage.md"
    json_path.write_text(
        json.dumps(report_json(run, groups), indent=2) + "\n", encoding="utf-8"
    )
    md_path.write_text(report_markdown(run, groups), encoding="utf-8")
    return json_path, md_path


# -- DNS postprocessing -------------------------------------------------

NAME_TYPED_RDATA = ("CNAME", "DNAME", "NS", "PTR")
MAX_NAME_OCTETS = 255
MAX_LABEL_OCTETS = 63


@dataclass(frozen=True)
class DnsFixture:
    """One test turned into a servable zone plus a query."""

    origin: str
    zone_text: str
    records: Tuple[Tuple[str, str, str], ...]
    qname: str
    qtype: str


def _reroot(name: str, suffix: str) -> str:
    stem = name.strip().rstrip(".").lower()
    rooted = suffix if not stem else f"{stem}.{suffix}"
    labels = rooted.rstrip(".").split(".")
    octets = sum(len(l) + 1 for l in labels) + 1
    if octets > MAX_NAME_OCTETS:
        raise PostprocessError(
            f"name {rooted!r} is {octets} octets after suffixing (limit {MAX_NAME_OCTETS})"
        )
    for label in labels:
        if len(label) > MAX_LABEL_OCTETS:
            raise PostprocessError(
                f"label {label!r} in {rooted!r} exceeds {MAX_LABEL_OCTETS} octets"
            )
    return rooted


def _collect_records(value, out: List[dict]) -> None:
    if isinstance(value, dict) and "record_type" in value:
        out.append(value)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _collect_records(item, out)


def postprocess_dns(test: TestCase, suffix: str = "test.", qtype: str = "CNAME") -> DnsFixture:
    """Zone file and query from a DNS test's typed inputs.

    The apex gains SOA and NS records and every domain name is re-rooted
    under the suffix; name-typed rdata (CNAME/DNAME/NS/PTR) is re-rooted
    too.  The model carries no query type, so the query defaults to CNAME
    (the type under test in the DNAME scenario).
    """
    query: Optional[str] = None
    raw_records: List[dict] = []
    for value in test.inputs:
        if query is None and isinstance(value, str):
            query = value
        _collect_records(value, raw_records)
    if query is None:
        raise PostprocessError(f"test has no query string input: {list(test.inputs)!r}")

    records: List[Tuple[str, str, str]] = []
    for rec in raw_records:
        rtype = str(rec.get("record_type", "")).upper()
        owner = _reroot(str(rec.get("name", "")), suffix)
        rdata = str(rec.get("rdata", ""))
        if rtype in NAME_TYPED_RDATA:
            rdata = _reroot(rdata, suffix)
        records.append((owner, rtype, rdata))

    lines = [
        f"$ORIGIN {suffix}",
        f"{suffix} 3600 IN SOA ns1.outside.edu. admin.outside.edu. 1 7200 900 1209600 86400",
        f"{suffix} 3600 IN NS ns1.outside.edu.",
    ]
    for owner, rtype, rdata in records:
        lines.append(f"{owner} 3600 IN {rtype} {rdata if rdata else chr(34) * 2}")
    return DnsFixture(
        origin=suffix,
        zone_text="\n".join(lines) + "\n",
        records=tuple(records),
        qname=_reroot(query, suffix),
        qtype=qtype,
    )
