"""Email channel: which third parties does rendering a message contact?

Only the registrable domains of external resources are kept.  Paths and
query strings often carry per-recipient identifiers, so they never leave
this module unless ``debug_hosts`` is switched on (and even then only
full hostnames are kept, not URLs).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from email import policy
from email.message import EmailMessage
from email.parser import BytesParser
from email.utils import getaddresses
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .domains import (
    Allowlist,
    AliasMap,
    DomainError,
    OriginKind,
    PublicSuffixList,
    RegistrableDomain,
    host_of,
    origin_of_domain,
    registrable_domain,
)
from .resources import LoadKind, extract_urls

log = logging.getLogger(__name__)

__all__ = [
    "MissingFromHeader",
    "UndecodablePart",
    "ParsedMessage",
    "EmailAuditRecord",
    "parse_message",
    "audit_email",
    "audit_directory",
    "actor_table",
    "apply_aliases",
]


class MissingFromHeader(ValueError):
    pass


class UndecodablePart(ValueError):
    """A body part whose transfer encoding or charset cannot be decoded."""


@dataclass
class ParsedMessage:
    sender_domain: RegistrableDomain
    body_parts: list[tuple[str, str]]
    message_id: Optional[str] = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class EmailAuditRecord:
    message_id_hash: str
    sender_domain: str
    loaded_external: set[str] = field(default_factory=set)
    linkonly_external: set[str] = field(default_factory=set)
    internal_count: int = 0
    allowlisted_count: int = 0
    # loaded_external domains seen only through <script>/<iframe>
    script_only_external: set[str] = field(default_factory=set)
    # loaded_external domains serving at least one <=1x1 image
    pixel_external: set[str] = field(default_factory=set)
    unresolved_count: int = 0
    hosts: Optional[list[str]] = None

    @property
    def media_loaded_external(self) -> set[str]:
        """Loaded domains restricted to images and styles."""
        return self.loaded_external - self.script_only_external

    def to_dict(self) -> dict:
        d = {
            "message_id_hash": self.message_id_hash,
            "sender_domain": self.sender_domain,
            "loaded_external": sorted(self.loaded_external),
            "linkonly_external": sorted(self.linkonly_external),
            "internal_count": self.internal_count,
            "allowlisted_count": self.allowlisted_count,
            "script_only_external": sorted(self.script_only_external),
            "pixel_external": sorted(self.pixel_external),
            "unresolved_count": self.unresolved_count,
        }
        if self.hosts is not None:
            d["hosts"] = self.hosts
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_dict(cls, d: Mapping) -> "EmailAuditRecord":
        return cls(
            message_id_hash=d["message_id_hash"],
            sender_domain=d["sender_domain"],
            loaded_external=set(d.get("loaded_external", ())),
            linkonly_external=set(d.get("linkonly_external", ())),
            internal_count=int(d.get("internal_count", 0)),
            allowlisted_count=int(d.get("allowlisted_count", 0)),
            script_only_external=set(d.get("script_only_external", ())),
            pixel_external=set(d.get("pixel_external", ())),
            unresolved_count=int(d.get("unresolved_count", 0)),
            hosts=d.get("hosts"),
        )


_IDENTITY_HEADERS = ("from", "to", "cc", "date", "subject")


def _header_digest(msg: EmailMessage) -> str:
    message_id = msg.get("Message-ID")
    if message_id:
        basis = str(message_id).strip()
    else:
        # Identity headers only: MIME boundaries and body edits must not matter.
        basis = "\n".join(f"{k}:{msg.get(k, '')}" for k in _IDENTITY_HEADERS)
    return hashlib.sha256(basis.encode("utf-8", "replace")).hexdigest()[:16]


def parse_message(raw: bytes, psl: Optional[PublicSuffixList] = None) -> ParsedMessage:
    """Parse a raw RFC 5322 message into sender domain and decoded text parts."""
    msg = BytesParser(policy=policy.default).parsebytes(raw)
    warnings: list[str] = []

    from_values = msg.get_all("From") or []
    addresses = [addr for _, addr in getaddresses([str(v) for v in from_values]) if "@" in addr]
    if not addresses:
        raise MissingFromHeader("message has no usable From address")
    if len(addresses) > 1:
        warnings.append(f"multiple From addresses, using {addresses[0]!r}")
        log.warning(warnings[-1])
    sender_host = addresses[0].rsplit("@", 1)[1].strip(" >")
    sender_domain = registrable_domain(sender_host, psl)

    parts: list[tuple[str, str]] = []
    for part in msg.walk():
        if part.is_multipart():
            continue
        ctype = part.get_content_type()
        if ctype not in ("text/html", "text/plain"):
            continue
        if part.get_content_disposition() == "attachment":
            continue
        try:
            parts.append((ctype, _decode_part(part)))
        except UndecodablePart as exc:
            warnings.append(str(exc))
            log.warning("skipping part: %s", exc)
    return ParsedMessage(sender_domain, parts, msg.get("Message-ID"), warnings)


def _decode_part(part: EmailMessage) -> str:
    try:
        return part.get_content()
    except (LookupError, UnicodeDecodeError) as exc:
        payload = part.get_payload(decode=True)
        if payload is None:
            raise UndecodablePart(f"{part.get_content_type()}: {exc}") from exc
        # Unknown charset label: utf-8 if it decodes, else refuse.
        try:
            return payload.decode("utf-8")
        except UnicodeDecodeError:
            raise UndecodablePart(f"{part.get_content_type()}: {exc}") from exc


def audit_email(
    raw: bytes,
    allow: Optional[Allowlist] = None,
    psl: Optional[PublicSuffixList] = None,
    debug_hosts: bool = False,
) -> EmailAuditRecord:
    """Classify every URL of the message's HTML parts against its sender."""
    allow = Allowlist() if allow is None else allow
    parsed = parse_message(raw, psl)
    msg = BytesParser(policy=policy.default).parsebytes(raw, headersonly=True)
    record = EmailAuditRecord(_header_digest(msg), str(parsed.sender_domain))
    hosts: set[str] = set()
    media_loaded: set[str] = set()
    script_loaded: set[str] = set()

    for ctype, text in parsed.body_parts:
        if ctype != "text/html":
            continue  # plain text loads nothing
        for res in extract_urls(text).resources:
            try:
                host = host_of(res.url)
                domain = registrable_domain(host, psl)
            except DomainError as exc:
                record.unresolved_count += 1
                log.debug("unresolved URL host: %s", exc)
                continue
            origin = origin_of_domain(domain, parsed.sender_domain, allow)
            if origin is OriginKind.INTERNAL:
                record.internal_count += 1
                continue
            if origin is OriginKind.ALLOWLISTED:
                record.allowlisted_count += 1
                continue
            hosts.add(host.lower())
            if res.load_kind is LoadKind.LOADED:
                (script_loaded if res.active else media_loaded).add(domain)
                if res.pixel:
                    record.pixel_external.add(domain)
            else:
                record.linkonly_external.add(domain)

    record.loaded_external = media_loaded | script_loaded
    record.script_only_external = script_loaded - media_loaded
    if debug_hosts:
        record.hosts = sorted(hosts)
    return record


def audit_directory(
    directory: str | Path,
    allow: Optional[Allowlist] = None,
    psl: Optional[PublicSuffixList] = None,
    debug_hosts: bool = False,
) -> tuple[dict[str, EmailAuditRecord], dict[str, str]]:
    """Audit every ``*.eml`` file; returns (records by file stem, errors by file stem)."""
    records: dict[str, EmailAuditRecord] = {}
    errors: dict[str, str] = {}
    for path in sorted(Path(directory).glob("*.eml")):
        try:
            records[path.stem] = audit_email(path.read_bytes(), allow, psl, debug_hosts)
        except (MissingFromHeader, DomainError) as exc:
            errors[path.stem] = f"{type(exc).__name__}: {exc}"
            log.error("%s: %s", path.name, errors[path.stem])
    return records, errors


def apply_aliases(record: EmailAuditRecord, aliases: AliasMap) -> EmailAuditRecord:
    """Drop external domains that an alias file declares part of the sender."""
    sender = aliases.canonical(record.sender_domain)

    def keep(domains: set[str]) -> set[str]:
        return {d for d in domains if aliases.canonical(d) != sender}

    kept_loaded = keep(record.loaded_external)
    moved = len(record.loaded_external - kept_loaded) + len(
        record.linkonly_external - keep(record.linkonly_external)
    )
    return EmailAuditRecord(
        message_id_hash=record.message_id_hash,
        sender_domain=record.sender_domain,
        loaded_external=kept_loaded,
        linkonly_external=keep(record.linkonly_external),
        internal_count=record.internal_count + moved,
        allowlisted_count=record.allowlisted_count,
        script_only_external=record.script_only_external & kept_loaded,
        pixel_external=record.pixel_external & kept_loaded,
        unresolved_count=record.unresolved_count,
        hosts=record.hosts,
    )


def actor_table(
    records: Iterable[EmailAuditRecord],
    labels: Iterable[str],
    entity_map=None,
) -> list[tuple[str, list[str]]]:
    """Rows of (actor, sorted source names) over loaded external domains.

    ``labels`` gives one source name per record, in order.  With an
    :class:`~trackaudit.trackerdb.EntityMap`, domains are rolled up to
    their owning entity (``googleapis.com`` -> ``Google``).
    """
    records = list(records)
    labels = list(labels)
    if len(labels) != len(records):
        raise ValueError("labels must name every record")
    sources: dict[str, set[str]] = {}
    for record, label in zip(records, labels):
        for domain in record.loaded_external:
            actor = entity_map.attribute(domain) if entity_map is not None else domain
            sources.setdefault(actor, set()).add(label)
    rows = [(actor, sorted(names)) for actor, names in sources.items()]
    rows.sort(key=lambda row: (-len(row[1]), row[0]))
    return rows
