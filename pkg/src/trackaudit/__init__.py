"""Audit third-party trackers in emails, websites and mobile apps."""

from .domains import (
    Allowlist,
    AliasMap,
    DomainError,
    OriginKind,
    PublicSuffixList,
    classify_origin,
    default_psl,
    registrable_domain,
)
from .email_audit import EmailAuditRecord, audit_email
from .resources import extract_urls
from .trackerdb import EntityMap, attribute, default_entity_map, load_entity_map

__version__ = "0.1.0"

__all__ = [
    "Allowlist",
    "AliasMap",
    "DomainError",
    "OriginKind",
    "PublicSuffixList",
    "classify_origin",
    "default_psl",
    "registrable_domain",
    "EmailAuditRecord",
    "audit_email",
    "extract_urls",
    "EntityMap",
    "attribute",
    "default_entity_map",
    "load_entity_map",
]
