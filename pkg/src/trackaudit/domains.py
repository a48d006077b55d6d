"""Host parsing and public-suffix based domain normalization.

Every cross-domain comparison in the package (email sender vs. URL,
site vs. cookie, tracker attribution) goes through
:func:`registrable_domain`, which reduces a hostname to its eTLD+1.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import urlsplit

__all__ = [
    "DomainError",
    "EmptyHost",
    "UnparseableHost",
    "NotRegistrable",
    "RegistrableDomain",
    "PublicSuffixList",
    "default_psl",
    "normalize_host",
    "host_of",
    "registrable_domain",
    "OriginKind",
    "LoadKind",
    "UrlFinding",
    "Allowlist",
    "AliasMap",
    "classify_origin",
    "origin_of_domain",
]

_LABEL_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]{0,61}[a-z0-9_])?$")
_ICANN_END = "===END ICANN DOMAINS==="


class DomainError(ValueError):
    """Base class for host/domain parsing failures."""


class EmptyHost(DomainError):
    pass


class UnparseableHost(DomainError):
    pass


class NotRegistrable(DomainError):
    """The host is itself a public suffix (``gouv.fr``, ``com``)."""


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host)
    except ValueError:
        return False
    return True


class RegistrableDomain(str):
    """An eTLD+1 such as ``ameli.fr``.

    IP-literal hosts are carried verbatim; ``is_ip`` tells them apart
    since they have no registrable part.
    """

    __slots__ = ()

    @property
    def is_ip(self) -> bool:
        return _is_ip(self)

    @property
    def registrable(self) -> bool:
        return not self.is_ip


class PublicSuffixList:
    """Rule set in the publicsuffix.org ``.dat`` format.

    By default only the ICANN section is loaded: the private section
    lists things like ``googleapis.com`` as suffixes, which would make
    every Google Fonts host its own "site".
    """

    def __init__(self, rules: Iterable[str] = ()) -> None:
        self._rules: set[str] = set()
        self._wildcards: set[str] = set()
        self._exceptions: set[str] = set()
        for rule in rules:
            self.add_rule(rule)

    def add_rule(self, rule: str) -> None:
        """Add one rule: ``com``, ``*.ck`` or ``!www.ck``."""
        rule = rule.strip().lower()
        if not rule:
            return
        if rule.startswith("!"):
            self._exceptions.add(_to_ascii(rule[1:]))
        elif rule.startswith("*."):
            self._wildcards.add(_to_ascii(rule[2:]))
        else:
            self._rules.add(_to_ascii(rule))

    @classmethod
    def parse(cls, text: str, include_private: bool = False) -> "PublicSuffixList":
        psl = cls()
        for line in text.splitlines():
            line = line.strip()
            if _ICANN_END in line and not include_private:
                break
            if not line or line.startswith("//"):
                continue
            psl.add_rule(line.split()[0])
        return psl

    @classmethod
    def from_file(cls, path: str | Path, include_private: bool = False) -> "PublicSuffixList":
        return cls.parse(Path(path).read_text(encoding="utf-8"), include_private)

    def __len__(self) -> int:
        return len(self._rules) + len(self._wildcards) + len(self._exceptions)

    def suffix_length(self, labels: list[str]) -> int:
        """Number of trailing labels forming the public suffix of ``labels``."""
        n = len(labels)
        # Exception rules win over everything else.
        for i in range(n):
            if ".".join(labels[i:]) in self._exceptions:
                return n - i - 1
        for i in range(n):
            suffix = ".".join(labels[i:])
            if suffix in self._rules:
                return n - i
            if i + 1 < n and ".".join(labels[i + 1:]) in self._wildcards:
                return n - i
        return 1

    def public_suffix(self, host: str) -> str:
        labels = normalize_host(host).split(".")
        return ".".join(labels[len(labels) - self.suffix_length(labels):])


def _to_ascii(name: str) -> str:
    if name.isascii():
        return name
    try:
        return ".".join(
            label.encode("idna").decode("ascii") if not label.isascii() else label
            for label in name.split(".")
        )
    except UnicodeError as exc:
        raise UnparseableHost(f"invalid IDN host: {name!r}") from exc


@lru_cache(maxsize=2)
def default_psl(include_private: bool = False) -> PublicSuffixList:
    """The bundled suffix list snapshot."""
    text = resources.files("trackaudit.data").joinpath("public_suffix_list.dat").read_text("utf-8")
    return PublicSuffixList.parse(text, include_private=include_private)


def normalize_host(host: str) -> str:
    """Case-fold, strip one trailing dot, punycode-encode and validate."""
    if host is None:
        raise EmptyHost("host is None")
    host = host.strip()
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    if host.endswith("."):
        host = host[:-1]
    if not host:
        raise EmptyHost("empty host")
    try:
        return str(ipaddress.ip_address(host))
    except ValueError:
        pass
    host = _to_ascii(host.lower())
    labels = host.split(".")
    if len(host) > 253 or not all(_LABEL_RE.match(label) for label in labels):
        raise UnparseableHost(f"not a hostname: {host!r}")
    return host


def host_of(url: str) -> str:
    """Hostname of an absolute URL (scheme-relative ``//host/`` accepted)."""
    if not url or not url.strip():
        raise EmptyHost("empty URL")
    url = url.strip()
    if url.startswith("//"):
        url = "http:" + url
    try:
        parts = urlsplit(url)
        host = parts.hostname
    except ValueError as exc:
        raise UnparseableHost(f"cannot parse URL {url!r}") from exc
    if not parts.scheme or not host:
        raise UnparseableHost(f"URL has no host: {url!r}")
    return host


def registrable_domain(host: str, psl: Optional[PublicSuffixList] = None) -> RegistrableDomain:
    """Reduce ``host`` to its registrable domain (eTLD+1).

    >>> registrable_domain("stats.info.ameli.fr")
    'ameli.fr'
    >>> registrable_domain("oups.gouv.fr")
    'oups.gouv.fr'
    """
    host = normalize_host(host)
    if _is_ip(host):
        return RegistrableDomain(host)
    psl = psl or default_psl()
    labels = host.split(".")
    n_suffix = psl.suffix_length(labels)
    if n_suffix >= len(labels):
        raise NotRegistrable(f"{host!r} is a public suffix")
    return RegistrableDomain(".".join(labels[-n_suffix - 1:]))


class OriginKind(str, enum.Enum):
    INTERNAL = "Internal"
    EXTERNAL = "External"
    ALLOWLISTED = "Allowlisted"


class LoadKind(str, enum.Enum):
    LOADED = "Loaded"
    LINK_ONLY = "LinkOnly"


@dataclass(frozen=True)
class UrlFinding:
    host: str
    domain: RegistrableDomain
    load_kind: LoadKind
    origin_kind: OriginKind


class Allowlist:
    """Domains never reported as external (``w3.org`` by default)."""

    DEFAULT = ("w3.org",)

    def __init__(self, entries: Iterable[str] = DEFAULT) -> None:
        self.entries = frozenset(normalize_host(e) for e in entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "Allowlist":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                entries.append(line)
        return cls(entries)

    def __contains__(self, domain: str) -> bool:
        domain = domain.lower()
        return any(domain == e or domain.endswith("." + e) for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


class AliasMap:
    """Same-entity aliases, e.g. ``oups.gouv.fr`` -> ``impots.gouv.fr``.

    File format: ``alias,canonical`` per line, ``#`` comments.
    """

    def __init__(self, pairs: dict[str, str] | None = None) -> None:
        self.pairs = {normalize_host(k): normalize_host(v) for k, v in (pairs or {}).items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "AliasMap":
        pairs = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            alias, sep, canonical = line.partition(",")
            if not sep or not canonical.strip():
                raise ValueError(f"{path}:{lineno}: expected 'alias,canonical'")
            pairs[alias.strip()] = canonical.strip()
        return cls(pairs)

    def canonical(self, domain: str) -> str:
        return self.pairs.get(domain, domain)


@lru_cache(maxsize=1)
def _default_allowlist() -> Allowlist:
    return Allowlist()


def classify_origin(
    url: str,
    sender: str,
    allow: Optional[Allowlist] = None,
    psl: Optional[PublicSuffixList] = None,
) -> OriginKind:
    """Internal if the URL shares ``sender``'s registrable domain,
    Allowlisted if on the allowlist, External otherwise."""
    return origin_of_domain(registrable_domain(host_of(url), psl), sender, allow)


def origin_of_domain(domain: str, sender: str, allow: Optional[Allowlist] = None) -> OriginKind:
    """:func:`classify_origin` for an already-reduced domain.

    ``allow=None`` means the default allowlist.
    """
    if domain == sender:
        return OriginKind.INTERNAL
    if domain in (_default_allowlist() if allow is None else allow):
        return OriginKind.ALLOWLISTED
    return OriginKind.EXTERNAL
