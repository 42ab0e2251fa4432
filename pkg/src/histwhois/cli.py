"""Operator CLI: build a snapshot from raw files, serve it over the whois
protocol, run offline lookups, and run the disagreement evaluation.

Exit codes: 0 success, 1 input error, 2 build error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .dates import parse_day
from .engine import JSON_SHORT, JSON_VERBOSE, parse_qdate, render_result
from .errors import BuildError, HistWhoisError, QueryError, SnapshotError
from .evaluate import evaluate_disagreement, load_reference, write_reports
from .ingest import FilterPolicy
from .server import ServerConfig, WhoisServer
from .snapshot import BuildConfig, build_index, load_snapshot, save_snapshot

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUILD = 2

ENV_PREFIX = "HISTWHOIS_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _add_build_parser(sub) -> None:
    p = sub.add_parser("build", help="build a sealed snapshot from raw data files")
    p.add_argument("--pfx2as-v4", metavar="DIR", help="daily IPv4 prefix-to-AS files")
    p.add_argument("--pfx2as-v6", metavar="DIR", help="daily IPv6 prefix-to-AS files")
    p.add_argument("--as2org", metavar="DIR", required=True,
                   help="quarterly AS-to-organization files")
    p.add_argument("--out", metavar="FILE", required=True, help="snapshot output path")
    p.add_argument("--start", metavar="YYYYMMDD", help="first pfx2as day to import")
    p.add_argument("--end", metavar="YYYYMMDD", help="last pfx2as day to import")
    p.add_argument("--v4-min-len", type=int, default=8)
    p.add_argument("--v4-max-len", type=int, default=24)
    p.add_argument("--v6-min-len", type=int, default=18)
    p.add_argument("--v6-max-len", type=int, default=48)
    p.add_argument("--report", metavar="FILE", help="write the build report here (default stdout)")


def _add_serve_parser(sub) -> None:
    p = sub.add_parser("serve", help="serve lookups over the whois line protocol")
    p.add_argument("--snapshot", metavar="FILE", help="snapshot to load")
    p.add_argument("--host", help="listen address (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="listen port (default 4343)")
    p.add_argument("--contact", help="contact shown in the banner")
    p.add_argument("--format", choices=[JSON_SHORT, JSON_VERBOSE],
                   help="default session output format")
    p.add_argument("--config", metavar="FILE", help="JSON config file")


def _add_query_parser(sub) -> None:
    p = sub.add_parser("query", help="offline lookups against a snapshot")
    p.add_argument("--snapshot", metavar="FILE", required=True)
    p.add_argument("target", nargs="?", help="IP address or prefix")
    p.add_argument("date", nargs="?", help="YYYYMMDD (defaults to newest snapshot day)")
    p.add_argument("--input", metavar="FILE", help="file of `<target> [date]` lines, - for stdin")
    p.add_argument("--output", metavar="FILE", help="write responses here instead of stdout")
    p.add_argument("--format", choices=[JSON_SHORT, JSON_VERBOSE], default=JSON_SHORT)
    p.add_argument("--pretty", action="store_true", help="pretty-print single lookups")


def _add_eval_parser(sub) -> None:
    p = sub.add_parser("eval", help="disagreement evaluation against a reference table")
    p.add_argument("--snapshot", metavar="FILE", required=True)
    p.add_argument("--reference", metavar="FILE", required=True,
                   help="delimited `unit as,list` attribution table")
    p.add_argument("--queries", metavar="FILE", required=True,
                   help="lines of `<unit> <YYYYMM>` to compare")
    p.add_argument("--out", metavar="BASE", required=True,
                   help="report base path; writes BASE.tsv and BASE.json")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histwhois",
        description="historic IP-to-AS/organization attribution service tooling")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_build_parser(sub)
    _add_serve_parser(sub)
    _add_query_parser(sub)
    _add_eval_parser(sub)
    return parser


def cmd_build(args) -> int:
    try:
        policy = FilterPolicy(
            v4_min_len=args.v4_min_len, v4_max_len=args.v4_max_len,
            v6_min_len=args.v6_min_len, v6_max_len=args.v6_max_len)
        config = BuildConfig(
            pfx2as_v4=args.pfx2as_v4, pfx2as_v6=args.pfx2as_v6, as2org=args.as2org,
            policy=policy,
            start=parse_day(args.start) if args.start else None,
            end=parse_day(args.end) if args.end else None)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        built = build_index(config)
    except BuildError as exc:
        print(f"build error: {exc}", file=sys.stderr)
        return EXIT_BUILD
    digest = save_snapshot(built, args.out)
    report_text = built.report.as_text()
    if args.report:
        Path(args.report).write_text(report_text, encoding="utf-8")
    else:
        sys.stdout.write(report_text)
    print(f"snapshot written to {args.out} (sha256 {digest})", file=sys.stderr)
    return EXIT_OK


def _load_engine(snapshot_path: str):
    built = load_snapshot(snapshot_path)
    return built.engine()


def cmd_serve(args) -> int:
    settings: dict = {}
    config_path = args.config or _env("CONFIG")
    if config_path:
        try:
            settings.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {config_path}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    # precedence: flags > environment > config file > defaults
    snapshot_path = args.snapshot or _env("SNAPSHOT", settings.get("snapshot"))
    host = args.host or _env("HOST", settings.get("host", "127.0.0.1"))
    port = args.port if args.port is not None else int(_env("PORT", settings.get("port", 4343)))
    contact = args.contact or _env("CONTACT", settings.get("contact", "contact@example.net"))
    output_format = args.format or _env("FORMAT", settings.get("format", JSON_SHORT))
    if output_format not in (JSON_SHORT, JSON_VERBOSE):
        print(f"error: unknown output format {output_format!r}", file=sys.stderr)
        return EXIT_INPUT
    if not snapshot_path:
        print("error: no snapshot configured (use --snapshot)", file=sys.stderr)
        return EXIT_INPUT

    server_config = ServerConfig(
        host=host, port=port, contact=contact, output_format=output_format,
        max_line_length=int(settings.get("max_line_length", 1024)),
        bulk_max_lines=int(settings.get("bulk_max_lines", 100_000)),
        idle_timeout=float(settings.get("idle_timeout", 300.0)))
    try:
        engine = _load_engine(snapshot_path)
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    server = WhoisServer(engine, server_config)
    host, port = server.server_address[0], server.bound_port
    v4, v6 = engine.prefix_counts
    log.info("listening on %s:%d (%d IPv4 / %d IPv6 prefixes)", host, port, v4, v6)
    print(f"listening on {host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
    return EXIT_OK


def run_query_stream(engine, lines, out, output_format: str) -> tuple[int, int]:
    """Bulk-protocol twin over a line iterable: same semantics, same order."""
    processed = errors = 0
    for raw in lines:
        text = raw.strip()
        if not text:
            continue
        processed += 1
        parts = text.split()
        try:
            if len(parts) > 2:
                raise QueryError("expected <ip-or-prefix> [YYYYMMDD]")
            qdate = parse_qdate(parts[1]) if len(parts) == 2 else None
            result = engine.lookup(parts[0], qdate)
            out.write(render_result(result, output_format) + "\n")
        except QueryError as exc:
            errors += 1
            out.write(f"# ERROR: {exc}\n")
    return processed, errors


def cmd_query(args) -> int:
    try:
        engine = _load_engine(args.snapshot)
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        if args.input:
            source = sys.stdin if args.input == "-" else open(args.input, "r", encoding="utf-8")
            try:
                started = time.monotonic()
                processed, errors = run_query_stream(engine, source, out, args.format)
                elapsed = time.monotonic() - started
                if processed:
                    log.info("processed %d queries in %.2fs (%.0f/s), %d errors",
                             processed, elapsed, processed / elapsed if elapsed else 0.0, errors)
            finally:
                if source is not sys.stdin:
                    source.close()
            return EXIT_OK
        if not args.target:
            print("error: give a target or --input", file=sys.stderr)
            return EXIT_INPUT
        try:
            qdate = parse_qdate(args.date) if args.date else None
            result = engine.lookup(args.target, qdate)
        except QueryError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        out.write(render_result(result, args.format, pretty=args.pretty) + "\n")
        return EXIT_OK
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_eval(args) -> int:
    try:
        engine = _load_engine(args.snapshot)
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        reference = load_reference(args.reference)
        queries = []
        with open(args.queries, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    print(f"error: queries line {lineno}: expected `<unit> <YYYYMM>`",
                          file=sys.stderr)
                    return EXIT_INPUT
                queries.append((parts[0], parts[1]))
        report = evaluate_disagreement(engine, reference, queries)
    except (OSError, QueryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    tsv_path, json_path = write_reports(report, args.out)
    for stats in report.periods:
        print(f"{stats.period}: {stats.disagree}/{stats.compared} disagree "
              f"({stats.percent:.2f}%), {stats.uncomparable} uncomparable")
    print(f"reports written to {tsv_path} and {json_path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    handlers = {"build": cmd_build, "serve": cmd_serve, "query": cmd_query, "eval": cmd_eval}
    try:
        return handlers[args.command](args)
    except HistWhoisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUILD if isinstance(exc, BuildError) else EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
