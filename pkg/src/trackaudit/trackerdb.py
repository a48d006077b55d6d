"""Tracker signatures, domain blocklists and the entity map.

Ownership is data: the shipped ``entity_map.csv`` is a snapshot of who
owned what at the time it was written, and can be replaced wholesale.
"""

from __future__ import annotations

import csv
import enum
import fnmatch
import io
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .domains import DomainError, normalize_host

__all__ = [
    "FALLBACK_ENTITY",
    "TrackerDBError",
    "DuplicatePattern",
    "BadPattern",
    "BadSignature",
    "Rule",
    "EntityMap",
    "load_entity_map",
    "default_entity_map",
    "attribute",
    "Category",
    "DomainBlocklist",
    "TrackerSignature",
    "load_signatures",
    "default_signatures",
]

FALLBACK_ENTITY = "Autres"

_IDENT_RE = re.compile(r"^[A-Za-z_$][\w$]*(\.[A-Za-z_$][\w$]*)*$")


class TrackerDBError(ValueError):
    pass


class DuplicatePattern(TrackerDBError):
    pass


class BadPattern(TrackerDBError):
    pass


class BadSignature(TrackerDBError):
    pass


@dataclass(frozen=True)
class Rule:
    """One entity-map rule.

    ``kind`` is ``domain`` (matches the domain and its subdomains),
    ``pkg`` (code-package prefix at a label boundary) or ``tracker``
    (glob over tracker names, e.g. ``Google *``).
    """

    kind: str
    pattern: str
    entity: str

    @classmethod
    def parse(cls, raw: str, entity: str) -> "Rule":
        raw = raw.strip()
        entity = entity.strip()
        if not entity:
            raise BadPattern(f"empty entity for pattern {raw!r}")
        if raw.startswith("pkg:"):
            prefix = raw[4:].strip().rstrip(".")
            if not _IDENT_RE.match(prefix):
                raise BadPattern(f"not a dotted package prefix: {raw!r}")
            return cls("pkg", prefix, entity)
        if raw.startswith("tracker:"):
            glob = raw[8:].strip()
            if not glob:
                raise BadPattern(f"empty tracker pattern: {raw!r}")
            return cls("tracker", glob, entity)
        try:
            host = normalize_host(raw.lstrip("."))
        except DomainError as exc:
            raise BadPattern(f"not a domain pattern: {raw!r}") from exc
        if "." not in host:
            raise BadPattern(f"domain pattern needs at least two labels: {raw!r}")
        return cls("domain", host, entity)

    def matches(self, kind: str, value: str) -> bool:
        if kind != self.kind:
            return False
        if kind == "domain":
            return value == self.pattern or value.endswith("." + self.pattern)
        if kind == "pkg":
            return value == self.pattern or value.startswith(self.pattern + ".")
        return fnmatch.fnmatchcase(value, self.pattern)


class EntityMap:
    """Ordered rules; the first match wins, ``Autres`` otherwise."""

    def __init__(self, rules: Iterable[Rule] = (), fallback: str = FALLBACK_ENTITY) -> None:
        self.rules: tuple[Rule, ...] = tuple(rules)
        self.fallback = fallback
        seen = set()
        for rule in self.rules:
            key = (rule.kind, rule.pattern)
            if key in seen:
                raise DuplicatePattern(f"duplicate pattern {rule.kind}:{rule.pattern}")
            seen.add(key)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, EntityMap)
            and self.rules == other.rules
            and self.fallback == other.fallback
        )

    def __len__(self) -> int:
        return len(self.rules)

    def _lookup(self, kind: str, value: str) -> str:
        for rule in self.rules:
            if rule.matches(kind, value):
                return rule.entity
        return self.fallback

    def attribute(self, domain: str) -> str:
        try:
            host = normalize_host(domain.lstrip("."))
        except DomainError:
            return self.fallback
        return self._lookup("domain", host)

    def attribute_package(self, class_name: str) -> str:
        return self._lookup("pkg", class_name)

    def attribute_tracker(self, name: str) -> str:
        return self._lookup("tracker", name)

    def entities(self) -> list[str]:
        return sorted({r.entity for r in self.rules} | {self.fallback})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pattern", "entity"])
        for rule in self.rules:
            pattern = rule.pattern if rule.kind == "domain" else f"{rule.kind}:{rule.pattern}"
            writer.writerow([pattern, rule.entity])
        return buf.getvalue()


def _parse_entity_csv(text: str) -> EntityMap:
    rules = []
    reader = csv.reader(line for line in text.splitlines() if not line.lstrip().startswith("#"))
    for lineno, row in enumerate(reader, 1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if lineno == 1 and [c.strip().lower() for c in row] == ["pattern", "entity"]:
            continue
        if len(row) != 2:
            raise BadPattern(f"line {lineno}: expected 'pattern,entity', got {row!r}")
        rules.append(Rule.parse(row[0], row[1]))
    return EntityMap(rules)


def load_entity_map(path: str | Path) -> EntityMap:
    """Load a ``pattern,entity`` CSV; raises on bad or duplicate patterns."""
    return _parse_entity_csv(Path(path).read_text(encoding="utf-8"))


def default_entity_map() -> EntityMap:
    text = resources.files("trackaudit.data").joinpath("entity_map.csv").read_text("utf-8")
    return _parse_entity_csv(text)


def attribute(domain: str, entity_map: Optional[EntityMap] = None) -> str:
    return (entity_map or default_entity_map()).attribute(domain)


class Category(str, enum.Enum):
    ANALYTICS = "Analytics"
    ADVERTISING = "Advertising"
    SOCIAL = "Social"
    OTHER = "Other"


class DomainBlocklist:
    """Known tracking domains with a coarse category.

    File format: one domain per line, optional ``,category``; ``#``
    comments.  Lookups match subdomains of an entry.
    """

    def __init__(self, entries: Optional[dict[str, Category]] = None) -> None:
        self.entries: dict[str, Category] = dict(entries or {})

    @classmethod
    def parse(cls, text: str) -> "DomainBlocklist":
        entries = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            domain, _, cat = line.partition(",")
            try:
                domain = normalize_host(domain.strip().lstrip("."))
            except DomainError as exc:
                raise BadPattern(f"line {lineno}: {exc}") from exc
            cat = cat.strip() or "Other"
            try:
                category = Category(cat.capitalize())
            except ValueError:
                raise BadPattern(f"line {lineno}: unknown category {cat!r}") from None
            entries[domain] = category
        return cls(entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "DomainBlocklist":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def category(self, host: str) -> Optional[Category]:
        labels = host.lower().lstrip(".").split(".")
        for i in range(len(labels) - 1):
            hit = self.entries.get(".".join(labels[i:]))
            if hit is not None:
                return hit
        return None

    def __contains__(self, host: str) -> bool:
        return self.category(host) is not None

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TrackerSignature:
    name: str
    code_prefixes: tuple[str, ...] = ()
    network_hosts: tuple[str, ...] = ()
    owner: str = ""

    def __post_init__(self):
        if not self.code_prefixes and not self.network_hosts:
            raise BadSignature(f"{self.name!r}: needs a code or network signature")
        for prefix in self.code_prefixes:
            if not _IDENT_RE.match(prefix):
                raise BadSignature(f"{self.name!r}: bad package prefix {prefix!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerSignature":
        """Accepts list fields or the ``|``-joined strings of Exodus exports."""

        def split(value) -> tuple[str, ...]:
            if not value:
                return ()
            items = value.split("|") if isinstance(value, str) else value
            # Exodus prefixes often end with a dot ("com.mopub.")
            return tuple(dict.fromkeys(s.strip().strip(".") for s in items if s.strip().strip(".")))

        if "name" not in d:
            raise BadSignature(f"signature without name: {d!r}")
        return cls(
            name=str(d["name"]).strip(),
            code_prefixes=split(d.get("code_signature", d.get("code_prefixes"))),
            network_hosts=split(d.get("network_signature", d.get("network_hosts"))),
            owner=str(d.get("owner") or "").strip(),
        )


def _parse_signatures(data) -> list[TrackerSignature]:
    if isinstance(data, dict):
        data = data.get("trackers", data)
        if isinstance(data, dict):
            data = list(data.values())
    if not isinstance(data, list):
        raise BadSignature("signature file must hold a list of trackers")
    sigs = [TrackerSignature.from_dict(d) for d in data]
    names = [s.name for s in sigs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise BadSignature(f"duplicate tracker names: {dupes}")
    return sigs


def load_signatures(path: str | Path) -> list[TrackerSignature]:
    return _parse_signatures(json.loads(Path(path).read_text(encoding="utf-8")))


def default_signatures() -> list[TrackerSignature]:
    text = resources.files("trackaudit.data").joinpath("trackers.json").read_text("utf-8")
    return _parse_signatures(json.loads(text))
