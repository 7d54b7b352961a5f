"""SMTP adapter holding a TCP dialog with a server at host:port.

Model inputs are command prefixes ("MAIL FROM:"), so the translate layer
completes them into well-formed wire commands before sending.  One TCP
session spans the BFS prefix plus the test input; reset() drops the
session so the next test starts from the server greeting again.
"""

from __future__ import annotations

import re
import socket
from typing import Dict, Optional

from ..difftest import DiffTestError, NormalizedResponse, normalize_response
from . import ImplementationAdapter, register_adapter

DEFAULT_TRANSLATIONS = {
    "HELO": "HELO localhost",
    "EHLO": "EHLO localhost",
    "MAIL FROM:": "MAIL FROM:<a@b>",
    "RCPT TO:": "RCPT TO:<c@d>",
}
_REPLY_LINE = re.compile(r"^(\d{3})([ -])(.*)$")


class SmtpTcpAdapter(ImplementationAdapter):
    def __init__(
        self,
        adapter_id: str,
        host: str = "127.0.0.1",
        port: int = 8025,
        timeout: float = 5.0,
        translations: Optional[Dict[str, str]] = None,
    ):
        self.id = adapter_id
        self.host = host
        self.port = int(port)
        self.timeout = float(timeout)
        self.translations = dict(DEFAULT_TRANSLATIONS)
        if translations:
            self.translations.update(translations)
        self._sock: Optional[socket.socket] = None
        self._file = None

    # -- session management --------------------------------------------

    def _connect(self) -> None:
        self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        self._file = self._sock.makefile("rb")
        self._read_reply()  # server greeting

    def reset(self) -> None:
        if self._file is not None:
            try:
                self._file.close()
            except OSError:
                pass
            self._file = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def setup(self, fixture=None) -> None:
        self.reset()

    def teardown(self) -> None:
        self.reset()

    # -- wire dialog ---------------------------------------------------

    def _read_reply(self) -> NormalizedResponse:
        assert self._file is not None
        lines = []
        while True:
            raw = self._file.readline()
            if not raw:
                raise DiffTestError(f"{self.id}: connection closed mid-reply")
            line = raw.decode("latin-1").rstrip("\r\n")
            lines.append(line)
            m = _REPLY_LINE.match(line)
            if m and m.group(2) == " ":
                return normalize_response({"code": m.group(1), "text": "\n".join(lines)})
            if not m:
                # not an SMTP status line; treat as a one-line raw reply
                return normalize_response({"code": "", "text": "\n".join(lines)})

    def send(self, command: str) -> NormalizedResponse:
        if self._sock is None:
            self._connect()
        assert self._sock is not None
        self._sock.sendall(command.encode("latin-1") + b"\r\n")
        return self._read_reply()

    def translate_input(self, text: str) -> str:
        return self.translations.get(text, text)

    def translate(self, test) -> str:
        inputs = list(test.inputs)
        payload = str(inputs[-1]) if inputs else ""
        return self.translate_input(payload)

    def execute(self, test) -> NormalizedResponse:
        """Stateless path: send only the test's own input.

        Stateful suites go through the state driver, which sends the BFS
        prefix first via send()/translate_input().
        """
        return self.send(self.translate(test))


register_adapter(
    "smtp-tcp",
    lambda e: SmtpTcpAdapter(
        e.get("id", "smtp-tcp"),
        host=e.get("host", "127.0.0.1"),
        port=e.get("port", 8025),
        timeout=e.get("timeout", 5.0),
        translations=e.get("translations"),
    ),
)
