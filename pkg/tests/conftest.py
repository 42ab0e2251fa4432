"""Shared fixtures: a small on-disk dataset reproducing the Cloudflare
example answers, and a 130-unit world with a mid-quarter AS move for the
disagreement evaluation."""

from __future__ import annotations

import datetime
import gzip
from pathlib import Path

import pytest

from histwhois.snapshot import BuildConfig, build_index

ONE_DAY = datetime.timedelta(days=1)

FIXTURE_FIRST_DAY = datetime.date(2018, 3, 20)
FIXTURE_NEWEST_DAY = datetime.date(2021, 1, 1)

AS2ORG_EARLY = """# format: aut|changed|aut_name|org_id|opaque_id|source
13335|20180101|CLOUDFLARE|@family-471||RIPE
15169|20000301|GOOGLE|@google-1|e5yyb|ARIN
# format: org_id|changed|org_name|country|source
@family-471|20180101|Cloudflare Inc|US|ARIN
@google-1|20000301|Google LLC|US|ARIN
"""

AS2ORG_LATE = """# format: aut|changed|aut_name|org_id|opaque_id|source
13335|20180703|CLOUDFLARENET-AS|@family-471||RIPE
15169|20000301|GOOGLE|@google-1|e5yyb|ARIN
# format: org_id|changed|org_name|country|source
@family-471|20180703|Cloudflare Inc|US|ARIN,RIPE
@google-1|20000301|Google LLC|US|ARIN
"""


def _write_daily(directory: Path, stem: str, day: datetime.date, text: str,
                 compress: bool) -> None:
    datecode = day.strftime("%Y%m%d")
    if compress:
        path = directory / f"{stem}-{datecode}-1200.pfx2as.gz"
        path.write_bytes(gzip.compress(text.encode("utf-8")))
    else:
        path = directory / f"{stem}-{datecode}-1200.pfx2as"
        path.write_text(text, encoding="utf-8")


@pytest.fixture(scope="session")
def appendix_dataset(tmp_path_factory) -> dict:
    """Daily v4/v6 aggregates (20180320..20210101) plus two quarterly
    AS2ORG snapshots, shaped so the Cloudflare answers come out exactly."""
    root = tmp_path_factory.mktemp("appendix-data")
    v4 = root / "pfx2as-v4"
    v6 = root / "pfx2as-v6"
    as2org = root / "as2org"
    for directory in (v4, v6, as2org):
        directory.mkdir()

    day = FIXTURE_FIRST_DAY
    i = 0
    while day <= FIXTURE_NEWEST_DAY:
        _write_daily(v4, "routeviews-rv2", day,
                     "1.1.1.0\t24\t13335\n8.8.8.0\t24\t15169\n", compress=i % 5 == 0)
        _write_daily(v6, "routeviews-rv6", day,
                     "2606:4700::\t32\t13335\n", compress=i % 7 == 0)
        day += ONE_DAY
        i += 1

    (as2org / "20180401.as-org2info.txt").write_text(AS2ORG_EARLY, encoding="utf-8")
    (as2org / "20180703.as-org2info.txt").write_text(AS2ORG_LATE, encoding="utf-8")
    return {"root": root, "pfx2as_v4": v4, "pfx2as_v6": v6, "as2org": as2org}


@pytest.fixture(scope="session")
def appendix_built(appendix_dataset):
    return build_index(BuildConfig(
        pfx2as_v4=appendix_dataset["pfx2as_v4"],
        pfx2as_v6=appendix_dataset["pfx2as_v6"],
        as2org=appendix_dataset["as2org"]))


@pytest.fixture(scope="session")
def appendix_engine(appendix_built):
    return appendix_built.engine()


EVAL_FIRST_DAY = datetime.date(2020, 12, 1)
EVAL_MOVE_DAY = datetime.date(2021, 2, 1)
EVAL_LAST_DAY = datetime.date(2021, 2, 28)
EVAL_UNITS = 130
EVAL_MOVED = 10

EVAL_AS2ORG = """# format: aut|changed|aut_name|org_id|opaque_id|source
100|20200101|OLDNET|@org-old||ARIN
200|20200101|NEWNET|@org-new||ARIN
300|20200101|STABLENET|@org-stable||RIPE
# format: org_id|changed|org_name|country|source
@org-old|20200101|Old Network Inc|US|ARIN
@org-new|20200101|New Network Inc|US|ARIN
@org-stable|20200101|Stable Network GmbH|DE|RIPE
"""


@pytest.fixture(scope="session")
def eval_dataset(tmp_path_factory) -> dict:
    """130 /24 units; units 0..9 move AS 100 -> 200 on the boundary day,
    the rest stay on AS 300. Reference table carries the post-move state."""
    root = tmp_path_factory.mktemp("eval-data")
    v4 = root / "pfx2as-v4"
    as2org = root / "as2org"
    v4.mkdir()
    as2org.mkdir()

    day = EVAL_FIRST_DAY
    while day <= EVAL_LAST_DAY:
        lines = []
        for i in range(EVAL_UNITS):
            if i < EVAL_MOVED:
                asn = 100 if day < EVAL_MOVE_DAY else 200
            else:
                asn = 300
            lines.append(f"20.1.{i}.0\t24\t{asn}")
        _write_daily(v4, "routeviews-rv2", day, "\n".join(lines) + "\n", compress=False)
        day += ONE_DAY
    (as2org / "20201001.as-org2info.txt").write_text(EVAL_AS2ORG, encoding="utf-8")

    reference = root / "reference.txt"
    reference.write_text(
        "".join(f"20.1.{i}.0/24 {200 if i < EVAL_MOVED else 300}\n"
                for i in range(EVAL_UNITS)),
        encoding="utf-8")
    queries = root / "queries.txt"
    queries.write_text(
        "".join(f"20.1.{i}.0/24 {period}\n"
                for period in ("202101", "202102") for i in range(EVAL_UNITS)),
        encoding="utf-8")
    return {"root": root, "pfx2as_v4": v4, "as2org": as2org,
            "reference": reference, "queries": queries}


@pytest.fixture(scope="session")
def eval_engine(eval_dataset):
    built = build_index(BuildConfig(
        pfx2as_v4=eval_dataset["pfx2as_v4"], as2org=eval_dataset["as2org"]))
    return built.engine()
