import json
import socket

import pytest
from hypothesis import given, settings, strategies as st

from histwhois.engine import JSON_SHORT, JSON_VERBOSE
from histwhois.server import BULK, INTERACTIVE, ServerConfig, WhoisServer, WhoisService


@pytest.fixture(scope="module")
def service(appendix_engine):
    return WhoisService(appendix_engine, ServerConfig())


def lines_of(service, text, session):
    responses, closed = service.handle_line(text, session)
    return responses, closed


# -- banner -------------------------------------------------------------------

def test_banner_shape(service, appendix_engine):
    session = service.new_session()
    banner = service.banner_lines(session)
    assert all(line.startswith("# ") for line in banner)
    assert banner[0] == "# This is the historic IP to AS mapping service"
    assert banner[1] == "# Contact: <contact@example.net>"
    v4, v6 = appendix_engine.prefix_counts
    assert banner[2] == f"# Trie Status: READY - loaded {v4} IPv4 and {v6} IPv6 prefixes"
    n_as, n_org = appendix_engine.as2org_counts
    assert banner[3] == f"# AS2Org Status: {n_as} AS and {n_org} organisations loaded"
    assert banner[4] == "# Enter HELP to get basic usage information"
    assert banner[5] == "# NOTICE: OUTPUT FORMAT: JSON-SHORT"
    assert banner[-1] == "# READY"


def test_banner_while_loading_and_refusal():
    service = WhoisService(None, ServerConfig())
    session = service.new_session()
    banner = service.banner_lines(session)
    assert banner[-1] == "# NOT READY"
    assert any("LOADING" in line for line in banner)
    responses, closed = service.handle_line("1.1.1.1 20210101", session)
    assert responses[0].startswith("# ERROR:") and not closed


# -- line handling --------------------------------------------------------------

def test_help_is_comment_block(service):
    responses, closed = lines_of(service, "HELP", service.new_session())
    assert not closed
    assert all(line.startswith("# ") for line in responses)
    assert any("YYYYMMDD" in line for line in responses)


def test_keywords_case_insensitive(service):
    session = service.new_session()
    assert lines_of(service, "Help", session)[0]
    lines_of(service, "BEGIN", session)
    assert session.mode == BULK
    responses, closed = lines_of(service, "End", session)
    assert responses == ["# goodbye"] and closed


def test_interactive_query_pretty_printed(service):
    responses, _ = lines_of(service, "1.1.1.1 20210101", service.new_session())
    (text,) = responses
    assert text.count("\n") > 3
    assert json.loads(text)["QDATE"] == "20210101"


def test_bulk_query_single_line(service):
    session = service.new_session()
    lines_of(service, "begin", session)
    responses, _ = lines_of(service, "1.1.1.1 20210101", session)
    (text,) = responses
    assert "\n" not in text
    assert json.loads(text)["results"]["prefix"] == "1.1.1.0/24"


def test_missing_date_defaults_to_newest(service, appendix_engine):
    session = service.new_session()
    session.mode = BULK
    (defaulted,), _ = lines_of(service, "1.1.1.1", session)
    (explicit,), _ = lines_of(service, "1.1.1.1 20210101", session)
    assert defaulted == explicit


def test_unparsable_query_is_comment_error(service):
    session = service.new_session()
    responses, closed = lines_of(service, "not-an-ip 20210101", session)
    assert responses[0].startswith("# ERROR:") and not closed
    responses, _ = lines_of(service, "1.1.1.1 2021-01-01", session)
    assert responses[0].startswith("# ERROR:")
    responses, _ = lines_of(service, "1.1.1.1 20210101 extra", session)
    assert responses[0].startswith("# ERROR:")


def test_end_outside_bulk_is_error(service):
    responses, closed = lines_of(service, "end", service.new_session())
    assert responses[0].startswith("# ERROR:") and not closed


def test_begin_twice_is_error(service):
    session = service.new_session()
    lines_of(service, "begin", session)
    responses, _ = lines_of(service, "begin", session)
    assert responses[0].startswith("# ERROR:")
    assert session.mode == BULK


def test_format_switch(service):
    session = service.new_session()
    responses, _ = lines_of(service, "format json-verbose", session)
    assert responses == ["# NOTICE: OUTPUT FORMAT: JSON-VERBOSE"]
    assert session.output_format == JSON_VERBOSE
    (answer,), _ = lines_of(service, "1.1.1.1 20210101", session)
    assert "ipaddr" in json.loads(answer)
    responses, _ = lines_of(service, "FORMAT XML", session)
    assert responses[0].startswith("# ERROR:")
    assert session.output_format == JSON_VERBOSE


def test_blank_lines_ignored(service):
    assert lines_of(service, "   ", service.new_session()) == ([], False)


def test_bulk_batch_cap_closes_session(appendix_engine):
    service = WhoisService(appendix_engine, ServerConfig(bulk_max_lines=2))
    session = service.new_session()
    lines_of(service, "begin", session)
    lines_of(service, "1.1.1.1 20210101", session)
    lines_of(service, "1.1.1.1 20210101", session)
    responses, closed = lines_of(service, "1.1.1.1 20210101", session)
    assert closed
    assert responses[0].startswith("# ERROR:")
    assert responses[-1] == "# goodbye"


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_arbitrary_text_never_crashes(appendix_engine, line):
    service = WhoisService(appendix_engine, ServerConfig())
    session = service.new_session()
    responses, _ = service.handle_line(line, session)
    for response in responses:
        assert isinstance(response, str)


# -- socket level ---------------------------------------------------------------

@pytest.fixture()
def running_server(appendix_engine):
    server = WhoisServer(appendix_engine, ServerConfig(host="127.0.0.1", port=0,
                                                       idle_timeout=10.0))
    server.serve_in_thread()
    yield server
    server.shutdown()
    server.server_close()


def talk(port: int, payload: bytes, timeout=10.0) -> bytes:
    with socket.create_connection(("127.0.0.1", port), timeout=timeout) as sock:
        sock.sendall(payload)
        sock.shutdown(socket.SHUT_WR)
        chunks = []
        while True:
            chunk = sock.recv(65536)
            if not chunk:
                break
            chunks.append(chunk)
    return b"".join(chunks)


def test_bulk_transcript(running_server):
    body = b"begin\n1.1.1.1 20210101\n1.1.1.1 20120101\n8.8.8.8 20210201\nend\n"
    raw = talk(running_server.bound_port, body).decode("utf-8")
    lines = raw.splitlines()
    comments = [l for l in lines if l.startswith("# ")]
    payloads = [l for l in lines if not l.startswith("# ")]
    assert comments[-1] == "# goodbye"
    assert "# READY" in comments
    assert len(payloads) == 3
    first, second, third = (json.loads(p) for p in payloads)
    assert first["IP"] == "1.1.1.1" and first["results"]["prefix"] == "1.1.1.0/24"
    assert second == {"IP": "1.1.1.1", "QDATE": "20120101", "results": []}
    assert third["IP"] == "8.8.8.8" and third["results"]["asns"] == [15169]


def test_oversized_line_keeps_connection_usable(appendix_engine):
    server = WhoisServer(appendix_engine,
                         ServerConfig(host="127.0.0.1", port=0, max_line_length=64,
                                      idle_timeout=10.0))
    server.serve_in_thread()
    try:
        body = b"x" * 5000 + b"\nbegin\n1.1.1.1 20210101\nend\n"
        raw = talk(server.bound_port, body).decode("utf-8")
        assert "# ERROR: line too long" in raw
        assert raw.splitlines()[-1] == "# goodbye"
        assert any(line.startswith("{") for line in raw.splitlines())
    finally:
        server.shutdown()
        server.server_close()


def test_byte_noise_does_not_kill_server(running_server):
    noise = bytes(range(256)) * 3 + b"\n\xff\xfe\n"
    raw = talk(running_server.bound_port, noise + b"begin\nend\n")
    assert raw.endswith(b"# goodbye\n")
    # the server must still answer a fresh connection
    again = talk(running_server.bound_port, b"begin\n1.1.1.1 20210101\nend\n")
    assert b'"prefix": "1.1.1.0/24"' in again


def test_idle_timeout_closes_connection(appendix_engine):
    server = WhoisServer(appendix_engine,
                         ServerConfig(host="127.0.0.1", port=0, idle_timeout=0.3))
    server.serve_in_thread()
    try:
        with socket.create_connection(("127.0.0.1", server.bound_port), timeout=10) as sock:
            sock.settimeout(10)
            data = b""
            while True:  # stay silent; the server must hang up on its own
                chunk = sock.recv(65536)
                if not chunk:
                    break
                data += chunk
        assert b"# ERROR: idle timeout" in data
    finally:
        server.shutdown()
        server.server_close()


def test_responses_preserve_request_order(running_server):
    queries = [f"20.0.0.{i} 20210101" for i in range(5)]
    body = ("begin\n" + "\n".join(queries) + "\nend\n").encode()
    raw = talk(running_server.bound_port, body).decode("utf-8")
    answers = [json.loads(l) for l in raw.splitlines() if l.startswith("{")]
    assert [a["IP"] for a in answers] == [f"20.0.0.{i}" for i in range(5)]
