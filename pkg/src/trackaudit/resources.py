"""Extraction of auto-loaded resources vs. click-only links from HTML.

A mail client or browser fetches images, stylesheets, icons and CSS
``url()`` targets on render; anchors are only followed on click.  Scripts
and iframes are also fetched on render and are reported as loaded, but
flagged ``active`` so the images-and-styles subset can be recovered.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator, Optional
from urllib.parse import urljoin, urlsplit

from .domains import LoadKind

log = logging.getLogger(__name__)

__all__ = ["ResourceKind", "Resource", "ExtractedUrls", "extract_urls", "iter_resources"]

_CSS_URL_RE = re.compile(r"""url\(\s*(?P<q>['"]?)(?P<url>[^'")]*?)(?P=q)\s*\)""", re.I)
_CSS_IMPORT_RE = re.compile(r"""@import\s+(?P<q>['"])(?P<url>[^'"]+)(?P=q)""", re.I)
_HIERARCHICAL = {"http", "https", "ftp", "ws", "wss"}


class ResourceKind(str, enum.Enum):
    DOCUMENT = "Document"
    IMAGE = "Image"
    STYLE = "Style"
    SCRIPT = "Script"
    OTHER = "Other"


@dataclass(frozen=True)
class Resource:
    url: str
    kind: ResourceKind
    load_kind: LoadKind
    active: bool = False  # script/iframe: loaded, but outside the images+styles subset
    pixel: bool = False  # declared width and height both <= 1


@dataclass
class ExtractedUrls:
    loaded: list[str] = field(default_factory=list)
    linkonly: list[str] = field(default_factory=list)
    resources: list[Resource] = field(default_factory=list)

    def __iter__(self) -> Iterator[list[str]]:
        yield self.loaded
        yield self.linkonly


def _absolute(url: str, base_url: Optional[str]) -> Optional[str]:
    url = url.strip()
    if not url:
        return None
    if url.startswith("//"):
        scheme = urlsplit(base_url).scheme if base_url else "http"
        return f"{scheme or 'http'}:{url}"
    try:
        parts = urlsplit(url)
    except ValueError:
        return None
    if parts.scheme:
        return url if parts.scheme.lower() in _HIERARCHICAL and parts.netloc else None
    if base_url is None:
        return None
    joined = urljoin(base_url, url)
    return joined if urlsplit(joined).netloc else None


def _tiny(value: Optional[str]) -> bool:
    if value is None:
        return False
    m = re.match(r"\s*(\d+(?:\.\d+)?)\s*(px)?\s*$", value, re.I)
    return bool(m) and float(m.group(1)) <= 1


def _css_urls(css: str) -> Iterator[tuple[str, ResourceKind]]:
    for m in _CSS_IMPORT_RE.finditer(css):
        yield m.group("url"), ResourceKind.STYLE
    for m in _CSS_URL_RE.finditer(css):
        yield m.group("url"), ResourceKind.IMAGE


class _ResourceParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.found: list[tuple[str, ResourceKind, LoadKind, bool, bool]] = []
        self._in_style = False

    def _add(self, url, kind, load=LoadKind.LOADED, active=False, pixel=False):
        if url:
            self.found.append((url, kind, load, active, pixel))

    def handle_starttag(self, tag, attrs):
        a = {k.lower(): (v or "") for k, v in attrs}
        if tag in ("img", "source"):
            pixel = tag == "img" and _tiny(a.get("width")) and _tiny(a.get("height"))
            self._add(a.get("src"), ResourceKind.IMAGE, pixel=pixel)
            for candidate in a.get("srcset", "").split(","):
                self._add(candidate.strip().split(" ")[0], ResourceKind.IMAGE)
        elif tag == "input" and a.get("type", "").lower() == "image":
            self._add(a.get("src"), ResourceKind.IMAGE)
        elif tag == "link":
            rels = a.get("rel", "").lower().split()
            if "stylesheet" in rels:
                self._add(a.get("href"), ResourceKind.STYLE)
            elif any(r.endswith("icon") for r in rels):
                self._add(a.get("href"), ResourceKind.IMAGE)
        elif tag == "script":
            self._add(a.get("src"), ResourceKind.SCRIPT, active=True)
        elif tag in ("iframe", "frame"):
            self._add(a.get("src"), ResourceKind.DOCUMENT, active=True)
        elif tag in ("a", "area"):
            self._add(a.get("href"), ResourceKind.DOCUMENT, LoadKind.LINK_ONLY)
        elif tag == "style":
            self._in_style = True

        if "background" in a:
            self._add(a["background"], ResourceKind.IMAGE)
        if "style" in a:
            for url, kind in _css_urls(a["style"]):
                self._add(url, kind)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag == "style":
            self._in_style = False

    def handle_endtag(self, tag):
        if tag == "style":
            self._in_style = False

    def handle_data(self, data):
        if self._in_style:
            for url, kind in _css_urls(data):
                self._add(url, kind)


_TAG_RE = re.compile(r"<\s*([a-zA-Z][\w-]*)([^>]*)>", re.S)
_ATTR_RE = re.compile(r"""([\w:-]+)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))""")


def _token_scan(html: str) -> list[tuple[str, ResourceKind, LoadKind, bool, bool]]:
    """Regex fallback for markup the parser gives up on."""
    parser = _ResourceParser()
    for m in _TAG_RE.finditer(html):
        attrs = [(k, v1 or v2 or v3) for k, v1, v2, v3 in _ATTR_RE.findall(m.group(2))]
        parser.handle_starttag(m.group(1).lower(), attrs)
    for css in re.findall(r"<style[^>]*>(.*?)</style>", html, re.S | re.I):
        for url, kind in _css_urls(css):
            parser._add(url, kind)
    return parser.found


def iter_resources(html: str, base_url: Optional[str] = None) -> Iterator[Resource]:
    """Yield every absolute resource reference in ``html`` in document order."""
    if not html:
        return
    parser = _ResourceParser()
    try:
        parser.feed(html)
        parser.close()
        found = parser.found
    except Exception as exc:  # HTMLParser is lenient but not bulletproof
        log.warning("HTML parse failed (%s); falling back to token scan", exc)
        found = _token_scan(html)
    for url, kind, load, active, pixel in found:
        absolute = _absolute(url, base_url)
        if absolute is not None:
            yield Resource(absolute, kind, load, active, pixel)


def extract_urls(html: str, base_url: Optional[str] = None) -> ExtractedUrls:
    """Split the absolute URLs of ``html`` into loaded and link-only lists.

    Relative URLs are dropped unless ``base_url`` is given, in which case
    they are resolved against it.  ``mailto:``, ``tel:``, ``cid:``,
    ``data:`` and other non-hierarchical targets are always dropped.
    """
    out = ExtractedUrls()
    for res in iter_resources(html, base_url):
        out.resources.append(res)
        (out.loaded if res.load_kind is LoadKind.LOADED else out.linkonly).append(res.url)
    return out
