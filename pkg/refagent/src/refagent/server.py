"""The line-delimited agent loop.

One JSON record per line over stdin/stdout, UTF-8, compact separators. The
loop emits the {"proto": 1} handshake first and then answers every request
line with exactly one response line. Malformed requests get an
{"error": ...} record and the loop continues; `reset` clears the opaque
session state and acknowledges with {}; `close` acknowledges and stops.

The loop wraps an arbitrary handler callable `(request_record, state) ->
response_record`, so a real model can be served by swapping the handler;
the bundled rule engines in rules.py are plain examples of that shape.
"""

from __future__ import annotations

import json
import sys

from .rules import RuleError

PROTOCOL_VERSION = 1


class AgentLoop:
    def __init__(self, handler, stdin=None, stdout=None):
        self.handler = handler
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout = stdout if stdout is not None else sys.stdout
        self.state: dict = {}

    def _emit(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
        self.stdout.write(line + "\n")
        self.stdout.flush()

    def _handle_line(self, line: str) -> bool:
        """Answer one request line; returns False once the session is over."""
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            self._emit({"error": f"malformed request: not JSON: {line[:200]}"})
            return True
        if not isinstance(record, dict):
            self._emit({"error": "malformed request: not a record"})
            return True
        kind = record.get("kind")
        if kind == "close":
            self._emit({})
            return False
        if kind == "reset":
            self.state.clear()
            self._emit({})
            return True
        expected = getattr(self.handler, "kind", None)
        if expected is not None and kind != expected:
            self._emit({"error": f"unsupported request kind: {kind!r}"})
            return True
        try:
            response = self.handler(record, self.state)
        except RuleError as exc:
            self._emit({"error": str(exc)})
            return True
        self._emit(response)
        return True

    def serve(self) -> int:
        self._emit({"proto": PROTOCOL_VERSION})
        for raw in self.stdin:
            line = raw.strip()
            if not line:
                continue
            if not self._handle_line(line):
                return 0
        # EOF without an explicit close still ends the session cleanly.
        return 0
