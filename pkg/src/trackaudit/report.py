"""Cross-channel aggregation and table export.

Tables are plain column/row containers with typed columns so that a
CSV export can be parsed back into an identical table.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .domains import PublicSuffixList, registrable_domain
from .web_audit import CaptureSession, Party, SiteSummary, dedupe_cookies

__all__ = [
    "DomainTally",
    "Table",
    "Format",
    "UnsupportedFormat",
    "top_sites_by_third_cookies",
    "domain_tallies",
    "merge_tallies",
    "export",
    "parse_csv",
    "top_sites_table",
    "tallies_table",
    "actor_table_report",
    "entity_table_report",
]

LIST_SEP = ";"


@dataclass
class DomainTally:
    domain: str
    first_cookies: int = 0
    third_cookies: int = 0
    third_requests: int = 0

    def __post_init__(self):
        if min(self.first_cookies, self.third_cookies, self.third_requests) < 0:
            raise ValueError("tally counts must be non-negative")

    @property
    def total(self) -> int:
        return self.first_cookies + self.third_cookies + self.third_requests

    def __add__(self, other: "DomainTally") -> "DomainTally":
        if other.domain != self.domain:
            raise ValueError("cannot add tallies of different domains")
        return DomainTally(
            self.domain,
            self.first_cookies + other.first_cookies,
            self.third_cookies + other.third_cookies,
            self.third_requests + other.third_requests,
        )


def top_sites_by_third_cookies(summaries: Iterable[SiteSummary], n: int = 10) -> list[SiteSummary]:
    """Sites with the most third-party cookies; ties go alphabetically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sorted(summaries, key=lambda s: (-s.third_cookies, s.name))[:n]


def _sorted_tallies(tallies: Iterable[DomainTally]) -> list[DomainTally]:
    return sorted(tallies, key=lambda t: (-t.total, t.domain))


def domain_tallies(
    sessions: Iterable[CaptureSession], psl: Optional[PublicSuffixList] = None
) -> list[DomainTally]:
    """Per registrable domain: first/third-party cookies and third-party requests."""
    acc: dict[str, list[int]] = {}
    for session in sessions:
        for cookie in dedupe_cookies(session.cookies, psl):
            domain = cookie.key(psl)[1]
            slot = acc.setdefault(domain, [0, 0, 0])
            slot[0 if cookie.party is Party.FIRST else 1] += 1
        for request in session.requests:
            if request.party is Party.THIRD:
                acc.setdefault(registrable_domain(request.host, psl), [0, 0, 0])[2] += 1
    return _sorted_tallies(DomainTally(d, *counts) for d, counts in acc.items())


def merge_tallies(*groups: Iterable[DomainTally]) -> list[DomainTally]:
    """Combine tallies from independent batches (associative, commutative)."""
    acc: dict[str, DomainTally] = {}
    for group in groups:
        for t in group:
            acc[t.domain] = acc[t.domain] + t if t.domain in acc else DomainTally(
                t.domain, t.first_cookies, t.third_cookies, t.third_requests
            )
    return _sorted_tallies(acc.values())


# -- tables -----------------------------------------------------------------

class Format(str, enum.Enum):
    CSV = "csv"
    JSONL = "jsonl"
    MARKDOWN = "md"


class UnsupportedFormat(ValueError):
    pass


@dataclass
class Table:
    """Columns are ``(name, type)`` with type one of ``str``, ``int``, ``list``."""

    columns: Sequence[tuple[str, str]]
    rows: list[tuple] = field(default_factory=list)
    title: str = ""

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Table)
            and list(self.columns) == list(other.columns)
            and [tuple(r) for r in self.rows] == [tuple(r) for r in other.rows]
        )


def _csv_cell(value, kind: str):
    if kind == "list":
        return LIST_SEP.join(value)
    return value


def _md_cell(value, kind: str) -> str:
    text = ", ".join(value) if kind == "list" else str(value)
    return text.replace("|", "\\|")


def export(table: Table, fmt: Format | str) -> bytes:
    """Serialize ``table``; output is a pure function of its content."""
    try:
        fmt = Format(fmt.lower() if isinstance(fmt, str) else fmt)
    except ValueError:
        raise UnsupportedFormat(f"unsupported format {fmt!r}") from None
    kinds = [k for _, k in table.columns]
    if fmt is Format.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.names)
        for row in table.rows:
            writer.writerow([_csv_cell(v, k) for v, k in zip(row, kinds)])
        return buf.getvalue().encode("utf-8")
    if fmt is Format.JSONL:
        lines = [
            json.dumps(dict(zip(table.names, [list(v) if k == "list" else v for v, k in zip(row, kinds)])),
                       ensure_ascii=False)
            for row in table.rows
        ]
        return "".join(line + "\n" for line in lines).encode("utf-8")
    lines = []
    if table.title:
        lines += [f"### {table.title}", ""]
    lines.append("| " + " | ".join(table.names) + " |")
    lines.append("|" + "|".join("---:" if k == "int" else "---" for k in kinds) + "|")
    for row in table.rows:
        lines.append("| " + " | ".join(_md_cell(v, k) for v, k in zip(row, kinds)) + " |")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_csv(data: bytes, columns: Sequence[tuple[str, str]], title: str = "") -> Table:
    """Inverse of ``export(table, "csv")`` given the column types."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader, None)
    if header != [name for name, _ in columns]:
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = []
    for raw in reader:
        row = []
        for value, (_, kind) in zip(raw, columns):
            if kind == "int":
                row.append(int(value))
            elif kind == "list":
                row.append([v for v in value.split(LIST_SEP) if v] if value else [])
            else:
                row.append(value)
        rows.append(tuple(row))
    return Table(list(columns), rows, title)


TOP_SITES_COLUMNS = [("site", "str"), ("count", "int"), ("cookies", "list"), ("requests", "list")]
TALLY_COLUMNS = [
    ("domain", "str"), ("first_cookies", "int"), ("third_cookies", "int"), ("third_requests", "int"),
]
ACTOR_COLUMNS = [("actor", "str"), ("sources", "list")]
ENTITY_COLUMNS = [("entity", "str"), ("percent", "int")]


def top_sites_table(summaries: Iterable[SiteSummary], n: int = 10) -> Table:
    """Site, third-party cookie count, cookie domains, request domains."""
    rows = []
    for s in top_sites_by_third_cookies(summaries, n):
        counts = s.post or s.pre
        rows.append((s.name, counts.third_cookies, list(counts.third_cookie_domains),
                     list(counts.third_request_domains)))
    return Table(TOP_SITES_COLUMNS, rows, "Sites with the most third-party cookies")


def tallies_table(tallies: Iterable[DomainTally], n: Optional[int] = None) -> Table:
    tallies = list(tallies)[:n] if n else list(tallies)
    rows = [(t.domain, t.first_cookies, t.third_cookies, t.third_requests) for t in tallies]
    return Table(TALLY_COLUMNS, rows, "Most present domains")


def actor_table_report(rows: Iterable[tuple[str, list[str]]]) -> Table:
    return Table(ACTOR_COLUMNS, [(actor, list(sources)) for actor, sources in rows],
                 "External actors in emails")


def entity_table_report(rows: Iterable[tuple]) -> Table:
    return Table(ENTITY_COLUMNS, [(row[0], int(row[1])) for row in rows], "Tracker share by owner")
