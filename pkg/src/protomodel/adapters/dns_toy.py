"""Scripted in-process DNS implementations for hermetic differential runs.

Both adapters answer authoritatively over the zone in the DnsFixture.
The reference adapter follows DNAME substitution correctly; the second is
seeded with a wrong-answer defect observed in real authoritative servers:
the DNAME record placed in the answer section has its owner name replaced
by the query name, which makes downstream resolvers conclude the DNAME
does not apply.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from ..difftest import DiffTestError, DnsFixture, NormalizedResponse, normalize_response
from . import ImplementationAdapter, register_adapter

Record = Tuple[str, str, str]


def _fmt(owner: str, rtype: str, rdata: str) -> str:
    return f"{owner} {rtype} {rdata}".rstrip()


class _DnsToyBase(ImplementationAdapter):
    def __init__(self, adapter_id: str):
        self.id = adapter_id
        self._fixture: Optional[DnsFixture] = None

    def setup(self, fixture=None) -> None:
        if not isinstance(fixture, DnsFixture):
            raise DiffTestError(f"{self.id} needs a DnsFixture, got {type(fixture).__name__}")
        self._fixture = fixture

    def teardown(self) -> None:
        self._fixture = None

    def translate(self, test) -> Tuple[str, str]:
        assert self._fixture is not None
        return (self._fixture.qname, self._fixture.qtype)

    def execute(self, test) -> NormalizedResponse:
        fx = self._fixture
        if fx is None:
            raise DiffTestError(f"{self.id}: execute before setup")
        answer, rcode = self._lookup(fx)
        return normalize_response(
            {
                "answer": answer,
                "authority": [],
                "additional": [],
                "flags": ["AA", "QR"],
                "rcode": rcode,
            }
        )

    def _lookup(self, fx: DnsFixture) -> Tuple[List[str], str]:
        qname, qtype = fx.qname, fx.qtype
        exact = [r for r in fx.records if r[0] == qname]
        hits = [r for r in exact if r[1] == qtype]
        if hits:
            return [_fmt(*r) for r in hits], "NOERROR"
        cnames = [r for r in exact if r[1] == "CNAME"]
        if cnames and qtype != "CNAME":
            return [_fmt(*cnames[0])], "NOERROR"
        for record in fx.records:
            owner = record[0]
            if record[1] == "DNAME" and qname != owner and qname.endswith("." + owner):
                prefix = qname[: len(qname) - len(owner)]
                target = prefix + record[2]
                synthesized = (qname, "CNAME", target)
                return [_fmt(*self._emit_dname(record, qname)), _fmt(*synthesized)], "NOERROR"
        if exact:
            return [], "NOERROR"
        return [], "NXDOMAIN"

    def _emit_dname(self, record: Record, qname: str) -> Record:
        return record


class DnsToyReference(_DnsToyBase):
    """Correct authoritative lookup over the fixture zone."""


class DnsToyDnameOwnerBug(_DnsToyBase):
    """Same lookup, but the answered DNAME's owner becomes the query name."""

    def _emit_dname(self, record: Record, qname: str) -> Record:
        return (qname, record[1], record[2])


register_adapter(
    "dns-toy-reference", lambda e: DnsToyReference(e.get("id", "dns-toy-reference"))
)
register_adapter(
    "dns-toy-dname-owner-bug",
    lambda e: DnsToyDnameOwnerBug(e.get("id", "dns-toy-dname-owner-bug")),
)
