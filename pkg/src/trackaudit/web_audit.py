"""Website channel: capture sessions, first/third-party classification.

A site is audited in two phases, a fresh visit (``PreConsent``) and a
visit after the consent banner was accepted (``PostConsent``).  Sessions
normally come from capture files written by a browser-automation tool;
:func:`static_fetch` is a fallback that only sees header-set cookies.

Capture file schema (version 1)::

    {"schema_version": 1, "site": "https://www.laposte.fr/",
     "phase": "PreConsent", "fetched_at": "2020-06-01T10:00:00+00:00",
     "cookies": [{"name": "IDE", "domain": ".doubleclick.net",
                  "value": "...", "expires": "2021-06-01T10:00:00+00:00"}],
     "requests": [{"url": "https://fonts.googleapis.com/css", "kind": "Style"}]}

Cookie ``value`` is hashed on ingest; a file may carry ``value_hash``
instead.  Request URLs are reduced to their host.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import socket
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence
from urllib.parse import urljoin, urlsplit

from .domains import DomainError, PublicSuffixList, host_of, registrable_domain
from .resources import ResourceKind, iter_resources

log = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "Phase",
    "Party",
    "CookieRecord",
    "RequestRecord",
    "CaptureSession",
    "PhaseMismatch",
    "FetchError",
    "DnsFailure",
    "HttpError",
    "FetchTimeout",
    "ConnectionFailure",
    "RedirectLimit",
    "ErrorRecord",
    "hash_value",
    "classify_party",
    "dedupe_cookies",
    "parse_set_cookie",
    "session_from_dict",
    "session_to_dict",
    "load_capture",
    "load_capture_dir",
    "static_fetch",
    "fetch_sites",
    "PhaseCounts",
    "SiteSummary",
    "site_report",
    "pair_sessions",
    "read_site_list",
    "raw_cookie_rows",
    "write_raw_csv",
    "write_summary_csv",
    "write_errors_csv",
]

SCHEMA_VERSION = 1
USER_AGENT = "trackaudit/0.1 (+static capture)"


class Phase(str, enum.Enum):
    PRE_CONSENT = "PreConsent"
    POST_CONSENT = "PostConsent"


class Party(str, enum.Enum):
    FIRST = "First"
    THIRD = "Third"


class PhaseMismatch(ValueError):
    pass


def hash_value(value: str) -> str:
    return hashlib.sha256(value.encode("utf-8", "surrogateescape")).hexdigest()[:16]


def classify_party(host: str, site_domain: str, psl: Optional[PublicSuffixList] = None) -> Party:
    """First party iff ``host`` shares the site's registrable domain.

    A leading dot (cookie ``Domain=.example.com`` form) is ignored.
    """
    domain = registrable_domain(host.strip().lstrip("."), psl)
    return Party.FIRST if domain == site_domain else Party.THIRD


@dataclass(frozen=True)
class CookieRecord:
    name: str
    cookie_domain: str
    value_hash: str
    expires: Optional[str]
    party: Party

    def key(self, psl: Optional[PublicSuffixList] = None) -> tuple[str, str]:
        return self.name, registrable_domain(self.cookie_domain.lstrip("."), psl)


@dataclass(frozen=True)
class RequestRecord:
    host: str
    party: Party
    resource_kind: ResourceKind


@dataclass
class CaptureSession:
    site: str
    site_domain: str
    phase: Phase
    cookies: list[CookieRecord] = field(default_factory=list)
    requests: list[RequestRecord] = field(default_factory=list)
    fetched_at: Optional[str] = None

    @property
    def site_host(self) -> str:
        return host_of(self.site).lower()


def dedupe_cookies(
    cookies: Iterable[CookieRecord], psl: Optional[PublicSuffixList] = None
) -> list[CookieRecord]:
    """Keep the first cookie per (name, registrable domain), order preserved."""
    seen: set[tuple[str, str]] = set()
    out = []
    for cookie in cookies:
        key = cookie.key(psl)
        if key not in seen:
            seen.add(key)
            out.append(cookie)
    return out


# -- capture files ----------------------------------------------------------

_KIND_ALIASES = {
    "document": ResourceKind.DOCUMENT,
    "subdocument": ResourceKind.DOCUMENT,
    "sub_frame": ResourceKind.DOCUMENT,
    "iframe": ResourceKind.DOCUMENT,
    "image": ResourceKind.IMAGE,
    "img": ResourceKind.IMAGE,
    "imageset": ResourceKind.IMAGE,
    "style": ResourceKind.STYLE,
    "stylesheet": ResourceKind.STYLE,
    "script": ResourceKind.SCRIPT,
}


def _kind(value: Optional[str]) -> ResourceKind:
    return _KIND_ALIASES.get((value or "").strip().lower(), ResourceKind.OTHER)


def _iso(value) -> Optional[str]:
    """Normalize an expiry (epoch seconds, RFC 1123 or ISO string) to ISO 8601 UTC."""
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(value, tz=timezone.utc).isoformat()
    text = str(value).strip()
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        try:
            dt = parsedate_to_datetime(text)
        except (TypeError, ValueError):
            return text
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat()


def session_from_dict(d: dict, psl: Optional[PublicSuffixList] = None) -> CaptureSession:
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported capture schema_version {version!r}")
    site = d["site"]
    site_domain = registrable_domain(host_of(site), psl)
    phase = Phase(d.get("phase", Phase.PRE_CONSENT.value))
    cookies = []
    for c in d.get("cookies", []):
        try:
            party = classify_party(c["domain"], site_domain, psl)
        except DomainError as exc:
            log.warning("%s: skipping cookie %r: %s", site, c.get("name"), exc)
            continue
        value_hash = c.get("value_hash") or hash_value(str(c.get("value", "")))
        cookies.append(
            CookieRecord(c["name"], c["domain"].lower(), value_hash, _iso(c.get("expires")), party)
        )
    requests_ = []
    for r in d.get("requests", []):
        try:
            host = (r.get("host") or host_of(r["url"])).lower()
            party = classify_party(host, site_domain, psl)
        except (DomainError, KeyError) as exc:
            log.warning("%s: skipping request: %s", site, exc)
            continue
        requests_.append(RequestRecord(host, party, _kind(r.get("kind"))))
    return CaptureSession(site, site_domain, phase, cookies, requests_, d.get("fetched_at"))


def session_to_dict(session: CaptureSession) -> dict:
    """Serializable form; values appear only as hashes, URLs only as hosts."""
    return {
        "schema_version": SCHEMA_VERSION,
        "site": session.site,
        "phase": session.phase.value,
        "fetched_at": session.fetched_at,
        "cookies": [
            {"name": c.name, "domain": c.cookie_domain, "value_hash": c.value_hash, "expires": c.expires}
            for c in session.cookies
        ],
        "requests": [{"host": r.host, "kind": r.resource_kind.value} for r in session.requests],
    }


def load_capture(path: str | Path, psl: Optional[PublicSuffixList] = None) -> CaptureSession:
    return session_from_dict(json.loads(Path(path).read_text(encoding="utf-8")), psl)


def load_capture_dir(
    directory: str | Path, psl: Optional[PublicSuffixList] = None
) -> tuple[list[CaptureSession], dict[str, str]]:
    sessions, errors = [], {}
    for path in sorted(Path(directory).glob("*.json")):
        try:
            sessions.append(load_capture(path, psl))
        except (ValueError, KeyError, DomainError) as exc:
            errors[path.name] = f"{type(exc).__name__}: {exc}"
            log.error("%s: %s", path.name, errors[path.name])
    return sessions, errors


# -- static fetch -----------------------------------------------------------

class FetchError(Exception):
    kind = "FetchError"


class DnsFailure(FetchError):
    kind = "DnsFailure"


class HttpError(FetchError):
    kind = "HttpError"

    def __init__(self, status: int, url: str = ""):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


class FetchTimeout(FetchError):
    kind = "Timeout"


class ConnectionFailure(FetchError):
    kind = "ConnectionFailure"


class RedirectLimit(FetchError):
    kind = "RedirectLimit"


@dataclass(frozen=True)
class ErrorRecord:
    site: str
    kind: str
    detail: str


def parse_set_cookie(header: str, response_host: str, now: datetime) -> Optional[dict]:
    """One ``Set-Cookie`` header -> capture-schema cookie dict."""
    pieces = header.split(";")
    name, sep, value = pieces[0].partition("=")
    name = name.strip()
    if not sep or not name:
        return None
    attrs = {}
    for piece in pieces[1:]:
        k, _, v = piece.partition("=")
        attrs[k.strip().lower()] = v.strip()
    expires = None
    if "max-age" in attrs:
        try:
            expires = (now + timedelta(seconds=int(attrs["max-age"]))).isoformat()
        except ValueError:
            pass
    elif attrs.get("expires"):
        expires = _iso(attrs["expires"])
    domain = attrs.get("domain") or response_host
    return {"name": name, "domain": domain.lower(), "value": value.strip(), "expires": expires}


def _resolution_failure(exc: BaseException) -> bool:
    seen = set()
    stack = [exc]
    while stack:
        e = stack.pop()
        if e is None or id(e) in seen:
            continue
        seen.add(id(e))
        if isinstance(e, socket.gaierror) or type(e).__name__ == "NameResolutionError":
            return True
        stack.extend([getattr(e, "reason", None), e.__cause__, e.__context__])
        stack.extend(a for a in getattr(e, "args", ()) if isinstance(a, BaseException))
    return False


def static_fetch(
    site: str,
    redirect_limit: int = 5,
    timeout: float = 30.0,
    psl: Optional[PublicSuffixList] = None,
    http=None,
) -> CaptureSession:
    """GET ``site`` without running scripts and build a PreConsent session.

    Set-Cookie headers of every hop of the redirect chain are recorded;
    loaded sub-resources of the final HTML page become requests.  Cookies
    set from JavaScript are invisible here by construction.
    """
    import requests

    own_session = http is None
    http = http or requests.Session()  # fresh cookie state per site
    now = datetime.now(timezone.utc).replace(microsecond=0)
    url = site
    raw_cookies = []
    try:
        for hop in range(redirect_limit + 1):
            resp = http.get(url, allow_redirects=False, timeout=timeout, headers={"User-Agent": USER_AGENT})
            hop_host = urlsplit(resp.url).hostname or ""
            headers = getattr(resp.raw, "headers", None)
            set_cookies = headers.getlist("Set-Cookie") if hasattr(headers, "getlist") else []
            for header in set_cookies:
                cookie = parse_set_cookie(header, hop_host, now)
                if cookie:
                    raw_cookies.append(cookie)
            if resp.is_redirect and "location" in resp.headers:
                if hop == redirect_limit:
                    raise RedirectLimit(f"more than {redirect_limit} redirects from {site}")
                url = urljoin(resp.url, resp.headers["location"])
                continue
            break
        if resp.status_code >= 400:
            raise HttpError(resp.status_code, resp.url)
        ctype = resp.headers.get("content-type", "")
        html = resp.text if ("html" in ctype or not ctype) else ""
        final_url = resp.url
    except requests.exceptions.Timeout as exc:
        raise FetchTimeout(f"{site}: timed out after {timeout}s") from exc
    except requests.exceptions.ConnectionError as exc:
        if _resolution_failure(exc):
            raise DnsFailure(f"{site}: name resolution failed") from exc
        raise ConnectionFailure(f"{site}: {exc}") from exc
    except requests.exceptions.RequestException as exc:
        raise ConnectionFailure(f"{site}: {exc}") from exc
    finally:
        if own_session:
            http.close()

    requests_ = []
    for res in iter_resources(html, base_url=final_url):
        if res.load_kind.value == "Loaded":
            requests_.append({"url": res.url, "kind": res.kind.value})
    return session_from_dict(
        {
            "site": site,
            "phase": Phase.PRE_CONSENT.value,
            "fetched_at": now.isoformat(),
            "cookies": raw_cookies,
            "requests": requests_,
        },
        psl,
    )


def fetch_sites(
    sites: Sequence[str],
    parallel: int = 4,
    redirect_limit: int = 5,
    timeout: float = 30.0,
    psl: Optional[PublicSuffixList] = None,
    fetch: Callable[..., CaptureSession] = static_fetch,
) -> tuple[list[CaptureSession], list[ErrorRecord]]:
    """Fetch every site in its own HTTP session; failures never stop the batch.

    Results keep the order of ``sites``.
    """

    def one(site: str):
        try:
            return fetch(site, redirect_limit=redirect_limit, timeout=timeout, psl=psl)
        except FetchError as exc:
            log.error("%s: %s", site, exc)
            return ErrorRecord(site, exc.kind, str(exc))
        except DomainError as exc:
            log.error("%s: %s", site, exc)
            return ErrorRecord(site, type(exc).__name__, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        results = list(pool.map(one, sites))
    sessions = [r for r in results if isinstance(r, CaptureSession)]
    errors = [r for r in results if isinstance(r, ErrorRecord)]
    return sessions, errors


def read_site_list(path: str | Path) -> list[str]:
    sites = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            sites.append(line if "://" in line else f"https://{line}")
    return sites


# -- per-site summary -------------------------------------------------------

@dataclass
class PhaseCounts:
    first_cookies: int = 0
    third_cookies: int = 0
    third_requests: int = 0
    third_cookie_domains: list[str] = field(default_factory=list)
    third_request_domains: list[str] = field(default_factory=list)


def _count(session: Optional[CaptureSession], psl) -> PhaseCounts:
    if session is None:
        return PhaseCounts()
    cookies = dedupe_cookies(session.cookies, psl)
    third = [c for c in cookies if c.party is Party.THIRD]
    third_req = [r for r in session.requests if r.party is Party.THIRD]
    return PhaseCounts(
        first_cookies=len(cookies) - len(third),
        third_cookies=len(third),
        third_requests=len(third_req),
        third_cookie_domains=sorted({c.key(psl)[1] for c in third}),
        third_request_domains=sorted({registrable_domain(r.host, psl) for r in third_req}),
    )


@dataclass
class SiteSummary:
    site: str
    site_domain: str
    pre: PhaseCounts
    post: Optional[PhaseCounts] = None

    @property
    def name(self) -> str:
        return host_of(self.site).lower()

    @property
    def third_cookies(self) -> int:
        """Headline count: the post-consent value when available."""
        return (self.post or self.pre).third_cookies

    @property
    def delta(self) -> Optional[dict[str, int]]:
        if self.post is None:
            return None
        return {
            "first_cookies": self.post.first_cookies - self.pre.first_cookies,
            "third_cookies": self.post.third_cookies - self.pre.third_cookies,
            "third_requests": self.post.third_requests - self.pre.third_requests,
        }

    @property
    def third_domains(self) -> list[str]:
        phases = [self.pre] + ([self.post] if self.post else [])
        return sorted({d for p in phases for d in p.third_cookie_domains + p.third_request_domains})


def site_report(
    pre: CaptureSession,
    post: Optional[CaptureSession] = None,
    psl: Optional[PublicSuffixList] = None,
) -> SiteSummary:
    """Cookie and request counts per phase for one site."""
    if pre.phase is not Phase.PRE_CONSENT:
        raise PhaseMismatch(f"{pre.site}: first session must be PreConsent, got {pre.phase.value}")
    if post is not None:
        if post.phase is not Phase.POST_CONSENT:
            raise PhaseMismatch(f"{post.site}: second session must be PostConsent")
        if post.site_domain != pre.site_domain:
            raise PhaseMismatch(f"sessions are for different sites: {pre.site} / {post.site}")
    return SiteSummary(pre.site, pre.site_domain, _count(pre, psl), _count(post, psl) if post else None)


def pair_sessions(sessions: Iterable[CaptureSession]) -> list[tuple[CaptureSession, Optional[CaptureSession]]]:
    """Group sessions by site host into (pre, post) pairs.

    A site with only a post-consent capture is paired with an empty
    pre-consent session.
    """
    by_site: dict[str, dict[Phase, CaptureSession]] = {}
    for s in sessions:
        slot = by_site.setdefault(s.site_host, {})
        if s.phase in slot:
            log.warning("%s: duplicate %s capture, keeping the first", s.site, s.phase.value)
            continue
        slot[s.phase] = s
    pairs = []
    for host in sorted(by_site):
        slot = by_site[host]
        post = slot.get(Phase.POST_CONSENT)
        pre = slot.get(Phase.PRE_CONSENT) or CaptureSession(
            post.site, post.site_domain, Phase.PRE_CONSENT
        )
        pairs.append((pre, post))
    return pairs


# -- CSV outputs ------------------------------------------------------------

RAW_COLUMNS = ["site", "name", "domain", "value_hash", "expires", "party", "phase"]
SUMMARY_COLUMNS = [
    "site", "phase", "first_cookies", "third_cookies", "third_requests",
    "third_cookie_domains", "third_request_domains",
]


def raw_cookie_rows(sessions: Iterable[CaptureSession]) -> list[list]:
    rows = []
    for s in sessions:
        for c in s.cookies:
            rows.append([s.site, c.name, c.cookie_domain, c.value_hash, c.expires or "", c.party.value, s.phase.value])
    return rows


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_raw_csv(path: str | Path, sessions: Iterable[CaptureSession]) -> None:
    _write_csv(path, RAW_COLUMNS, raw_cookie_rows(sessions))


def write_summary_csv(path: str | Path, summaries: Iterable[SiteSummary]) -> None:
    rows = []
    for s in summaries:
        for phase, counts in ((Phase.PRE_CONSENT, s.pre), (Phase.POST_CONSENT, s.post)):
            if counts is None:
                continue
            rows.append([
                s.site, phase.value, counts.first_cookies, counts.third_cookies, counts.third_requests,
                ";".join(counts.third_cookie_domains), ";".join(counts.third_request_domains),
            ])
    _write_csv(path, SUMMARY_COLUMNS, rows)


def write_errors_csv(path: str | Path, errors: Iterable[ErrorRecord]) -> None:
    _write_csv(path, ["site", "kind", "detail"], [[e.site, e.kind, e.detail] for e in errors])
