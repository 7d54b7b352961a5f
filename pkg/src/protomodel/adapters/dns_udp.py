"""DNS-over-UDP adapter speaking standard wire format to a configured server.

The query is built from the test's DnsFixture (qname, qtype).  When a
zone directory is configured, setup writes the fixture zone there and
optionally runs a reload command, so a container serving that directory
picks the zone up.  Responses are normalized to answer/authority/
additional record lists plus flags and rcode; TTLs are dropped from the
comparison.
"""

from __future__ import annotations

import shlex
import socket
import struct
import subprocess
from pathlib import Path
from typing import List, Optional, Tuple

from ..difftest import DiffTestError, DnsFixture, NormalizedResponse, normalize_response
from . import ImplementationAdapter, register_adapter

TYPE_CODES = {
    "A": 1,
    "NS": 2,
    "CNAME": 5,
    "SOA": 6,
    "PTR": 12,
    "MX": 15,
    "TXT": 16,
    "AAAA": 28,
    "DNAME": 39,
    "ANY": 255,
}
CODE_TYPES = {v: k for k, v in TYPE_CODES.items()}
RCODES = {
    0: "NOERROR",
    1: "FORMERR",
    2: "SERVFAIL",
    3: "NXDOMAIN",
    4: "NOTIMP",
    5: "REFUSED",
}
CLASS_IN = 1
DEFAULT_QUERY_ID = 0x1D25


def encode_name(name: str) -> bytes:
    out = b""
    for label in name.rstrip(".").split("."):
        if not label:
            continue
        raw = label.encode("ascii")
        if len(raw) > 63:
            raise DiffTestError(f"label too long for wire format: {label!r}")
        out += bytes([len(raw)]) + raw
    return out + b"\x00"


def encode_query(qname: str, qtype: str, qid: int = DEFAULT_QUERY_ID) -> bytes:
    code = TYPE_CODES.get(qtype.upper())
    if code is None:
        raise DiffTestError(f"unsupported query type {qtype!r}")
    header = struct.pack(">HHHHHH", qid, 0, 1, 0, 0, 0)
    return header + encode_name(qname) + struct.pack(">HH", code, CLASS_IN)


def _read_name(data: bytes, offset: int) -> Tuple[str, int]:
    """Wire-format name at offset, following compression pointers."""
    labels: List[str] = []
    jumps = 0
    end: Optional[int] = None
    while True:
        if offset >= len(data):
            raise DiffTestError("truncated name in response")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise DiffTestError("truncated compression pointer")
            pointer = ((length & 0x3F) << 8) | data[offset + 1]
            if end is None:
                end = offset + 2
            offset = pointer
            jumps += 1
            if jumps > 128:
                raise DiffTestError("compression pointer loop in response")
            continue
        if length == 0:
            offset += 1
            break
        offset += 1
        labels.append(data[offset : offset + length].decode("latin-1"))
        offset += length
    return ".".join(labels) + ".", end if end is not None else offset


def _decode_rdata(data: bytes, offset: int, rdlen: int, rtype: int) -> str:
    rdata = data[offset : offset + rdlen]
    name = CODE_TYPES.get(rtype, str(rtype))
    if name in ("CNAME", "DNAME", "NS", "PTR"):
        value, _ = _read_name(data, offset)
        return value
    if name == "A" and rdlen == 4:
        return ".".join(str(b) for b in rdata)
    if name == "AAAA" and rdlen == 16:
        return socket.inet_ntop(socket.AF_INET6, rdata)
    if name == "MX" and rdlen > 2:
        pref = struct.unpack(">H", rdata[:2])[0]
        target, _ = _read_name(data, offset + 2)
        return f"{pref} {target}"
    if name == "TXT":
        parts = []
        i = 0
        while i < len(rdata):
            n = rdata[i]
            parts.append(rdata[i + 1 : i + 1 + n].decode("latin-1"))
            i += 1 + n
        return " ".join(parts)
    if name == "SOA":
        mname, after = _read_name(data, offset)
        rname, _ = _read_name(data, after)
        return f"{mname} {rname}"
    return rdata.hex()


def parse_response(data: bytes) -> dict:
    if len(data) < 12:
        raise DiffTestError(f"short DNS response ({len(data)} bytes)")
    _, flags, qd, an, ns, ar = struct.unpack(">HHHHHH", data[:12])
    flag_names = []
    for bit, label in ((15, "QR"), (10, "AA"), (9, "TC"), (8, "RD"), (7, "RA")):
        if flags & (1 << bit):
            flag_names.append(label)
    rcode = RCODES.get(flags & 0xF, str(flags & 0xF))
    offset = 12
    for _ in range(qd):
        _, offset = _read_name(data, offset)
        offset += 4
    sections = {"answer": [], "authority": [], "additional": []}
    for section, count in (("answer", an), ("authority", ns), ("additional", ar)):
        for _ in range(count):
            owner, offset = _read_name(data, offset)
            rtype, _, _, rdlen = struct.unpack(">HHIH", data[offset : offset + 10])
            offset += 10
            rendered = _decode_rdata(data, offset, rdlen, rtype)
            offset += rdlen
            type_name = CODE_TYPES.get(rtype, str(rtype))
            sections[section].append(f"{owner.lower()} {type_name} {rendered.lower()}")
    return {
        "answer": sections["answer"],
        "authority": sections["authority"],
        "additional": sections["additional"],
        "flags": flag_names,
        "rcode": rcode,
    }


class DnsUdpAdapter(ImplementationAdapter):
    def __init__(
        self,
        adapter_id: str,
        host: str,
        port: int,
        timeout: float = 5.0,
        zone_dir: Optional[str] = None,
        reload_cmd: Optional[str] = None,
    ):
        self.id = adapter_id
        self.host = host
        self.port = int(port)
        self.timeout = float(timeout)
        self.zone_dir = Path(zone_dir) if zone_dir else None
        self.reload_cmd = reload_cmd
        self._fixture: Optional[DnsFixture] = None

    def setup(self, fixture=None) -> None:
        if not isinstance(fixture, DnsFixture):
            raise DiffTestError(f"{self.id} needs a DnsFixture, got {type(fixture).__name__}")
        self._fixture = fixture
        if self.zone_dir is not None:
            self.zone_dir.mkdir(parents=True, exist_ok=True)
            zone_path = self.zone_dir / f"{fixture.origin}zone"
            zone_path.write_text(fixture.zone_text, encoding="utf-8")
            if self.reload_cmd:
                subprocess.run(
                    shlex.split(self.reload_cmd),
                    capture_output=True,
                    timeout=max(self.timeout, 30.0),
                )

    def teardown(self) -> None:
        self._fixture = None

    def translate(self, test) -> bytes:
        if self._fixture is None:
            raise DiffTestError(f"{self.id}: translate before setup")
        return encode_query(self._fixture.qname, self._fixture.qtype)

    def execute(self, test) -> NormalizedResponse:
        packet = self.translate(test)
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(self.timeout)
        try:
            sock.sendto(packet, (self.host, self.port))
            try:
                data, _ = sock.recvfrom(65535)
            except socket.timeout:
                raise TimeoutError(
                    f"no response from {self.host}:{self.port} within {self.timeout}s"
                ) from None
        finally:
            sock.close()
        return normalize_response(parse_response(data))


register_adapter(
    "dns-udp",
    lambda e: DnsUdpAdapter(
        e.get("id", "dns-udp"),
        host=e["host"],
        port=e["port"],
        timeout=e.get("timeout", 5.0),
        zone_dir=e.get("zone_dir"),
        reload_cmd=e.get("reload_cmd"),
    ),
)
