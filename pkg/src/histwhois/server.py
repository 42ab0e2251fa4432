"""whois-style TCP line protocol: banner, interactive queries, HELP, and
begin/end bulk mode streaming one JSON object per line.

Wire rules: UTF-8 lines, LF-terminated responses, comment lines prefixed
"# ", queries `<ip-or-prefix> [YYYYMMDD]` with a missing date defaulting to
the newest imported snapshot. Keywords (HELP, begin, end, FORMAT) are
case-insensitive. Interactive answers pretty-print; bulk answers are
compact single-line JSON, in request order.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field

from .engine import JSON_SHORT, JSON_VERBOSE, LookupEngine, parse_qdate, render_result
from .errors import QueryError

log = logging.getLogger(__name__)

INTERACTIVE = "interactive"
BULK = "bulk"

HELP_LINES = (
    "# Usage: <ip-or-prefix> [YYYYMMDD]",
    "#   e.g.  192.0.2.1 20190301",
    "#   The date defaults to the newest imported snapshot when omitted.",
    "# Commands:",
    "#   HELP                     this text",
    "#   FORMAT <name>            switch output: JSON-SHORT or JSON-VERBOSE",
    "#   begin ... end            bulk mode, one query per line, one JSON object per line",
    "# Comment lines start with '# '; everything else is JSON.",
)


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 4343
    contact: str = "contact@example.net"
    output_format: str = JSON_SHORT
    max_line_length: int = 1024
    bulk_max_lines: int = 100_000
    idle_timeout: float = 300.0


@dataclass
class SessionState:
    mode: str = INTERACTIVE
    output_format: str = JSON_SHORT
    lines_processed: int = 0


class WhoisService:
    """Protocol logic, independent of sockets so it can be tested directly."""

    def __init__(self, engine: LookupEngine | None, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        self._engine = engine

    @property
    def engine(self) -> LookupEngine | None:
        return self._engine

    def set_engine(self, engine: LookupEngine) -> None:
        # single reference assignment: readers see the old or the new engine,
        # never a half-swapped one
        self._engine = engine

    def new_session(self) -> SessionState:
        return SessionState(output_format=self.config.output_format)

    def banner_lines(self, session: SessionState) -> list[str]:
        engine = self._engine
        lines = [
            "# This is the historic IP to AS mapping service",
            f"# Contact: <{self.config.contact}>",
        ]
        if engine is None:
            lines.append("# Trie Status: LOADING - data import in progress")
            lines.append("# AS2Org Status: not loaded")
        else:
            v4, v6 = engine.prefix_counts
            n_as, n_org = engine.as2org_counts
            lines.append(f"# Trie Status: READY - loaded {v4} IPv4 and {v6} IPv6 prefixes")
            lines.append(f"# AS2Org Status: {n_as} AS and {n_org} organisations loaded")
        lines.append("# Enter HELP to get basic usage information")
        lines.append(f"# NOTICE: OUTPUT FORMAT: {session.output_format.upper()}")
        lines.append("# READY" if engine is not None else "# NOT READY")
        return lines

    def handle_line(self, line: str, session: SessionState) -> tuple[list[str], bool]:
        """One request line -> (response lines, close connection?)."""
        text = line.strip()
        if not text:
            return [], False
        keyword = text.upper()

        if keyword == "HELP":
            return list(HELP_LINES), False
        if keyword == "BEGIN":
            if session.mode == BULK:
                return ["# ERROR: already in bulk mode"], False
            session.mode = BULK
            return [], False
        if keyword == "END":
            if session.mode != BULK:
                return ["# ERROR: not in bulk mode"], False
            session.mode = INTERACTIVE
            return ["# goodbye"], True
        if keyword.startswith("FORMAT"):
            arg = text[len("FORMAT"):].strip().lower()
            if arg in (JSON_SHORT, JSON_VERBOSE):
                session.output_format = arg
                return [f"# NOTICE: OUTPUT FORMAT: {arg.upper()}"], False
            return ["# ERROR: unknown format (use JSON-SHORT or JSON-VERBOSE)"], False

        engine = self._engine
        if engine is None:
            return ["# ERROR: service is still loading, try again later"], False

        if session.mode == BULK:
            session.lines_processed += 1
            if session.lines_processed > self.config.bulk_max_lines:
                return ["# ERROR: bulk batch limit exceeded", "# goodbye"], True

        parts = text.split()
        if len(parts) > 2:
            return ["# ERROR: expected <ip-or-prefix> [YYYYMMDD]"], False
        try:
            qdate = parse_qdate(parts[1]) if len(parts) == 2 else None
            result = engine.lookup(parts[0], qdate)
        except QueryError as exc:
            return [f"# ERROR: {exc}"], False
        pretty = session.mode == INTERACTIVE
        return [render_result(result, session.output_format, pretty=pretty)], False


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        service: WhoisService = self.server.service  # type: ignore[attr-defined]
        config = service.config
        self.connection.settimeout(config.idle_timeout)
        session = service.new_session()
        try:
            self._send_lines(service.banner_lines(session))
            limit = config.max_line_length
            while True:
                raw = self.rfile.readline(limit + 1)
                if not raw:
                    break
                if len(raw) > limit and not raw.endswith(b"\n"):
                    self._drain_oversized(limit)
                    self._send_lines(["# ERROR: line too long"])
                    continue
                line = raw.decode("utf-8", errors="replace")
                responses, close = service.handle_line(line, session)
                self._send_lines(responses)
                if close:
                    break
        except (socket.timeout, TimeoutError):
            self._try_send(["# ERROR: idle timeout, closing"])
        except (ConnectionError, BrokenPipeError, OSError) as exc:
            log.debug("connection error from %s: %s", self.client_address, exc)

    def _drain_oversized(self, limit: int) -> None:
        while True:
            chunk = self.rfile.readline(limit + 1)
            if not chunk or chunk.endswith(b"\n"):
                return

    def _send_lines(self, lines) -> None:
        for text in lines:
            self.wfile.write(text.encode("utf-8") + b"\n")
        self.wfile.flush()

    def _try_send(self, lines) -> None:
        try:
            self._send_lines(lines)
        except OSError:
            pass


class WhoisServer(socketserver.ThreadingTCPServer):
    """Many concurrent connections, each processed sequentially, all sharing
    one immutable engine (swapped atomically by set_engine)."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, engine: LookupEngine | None, config: ServerConfig | None = None):
        self.service = WhoisService(engine, config)
        address = (self.service.config.host, self.service.config.port)
        super().__init__(address, _Handler)

    @property
    def bound_port(self) -> int:
        return self.server_address[1]

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
