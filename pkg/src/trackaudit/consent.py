"""Locating the "accept cookies" control of a consent banner.

Banners follow no standard: sometimes a link, sometimes a button, with
varying labels.  The search tries class hints first, then id hints,
then visible text of clickable elements, and stops at the first hit.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Optional, Sequence

__all__ = [
    "DEFAULT_ACCEPT_TEXTS",
    "Strategy",
    "BannerProbe",
    "locate_consent_button",
    "normalize_text",
]

DEFAULT_ACCEPT_TEXTS = ("Accepter", "Ok, tout accepter", "Oui, je suis d'accord", "Ok", "J'accepte")

_VOID = {
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr",
}
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'", "´": "'"})


class Strategy(str, enum.Enum):
    BY_CLASS = "ByClass"
    BY_ID = "ById"
    BY_TEXT = "ByText"
    NONE = "None"


@dataclass(frozen=True)
class BannerProbe:
    matched: bool
    strategy: Strategy
    matched_text: Optional[str] = None
    tag: Optional[str] = None

    def __post_init__(self):
        if (self.strategy is Strategy.NONE) == self.matched:
            raise ValueError("strategy must be None exactly when nothing matched")


@dataclass
class _Element:
    tag: str
    attrs: dict[str, str]
    text: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.tag == "input":
            return _collapse(self.attrs.get("value", ""))
        return _collapse("".join(self.text))

    @property
    def clickable(self) -> bool:
        if self.tag in ("a", "button"):
            return True
        return self.tag == "input" and self.attrs.get("type", "").lower() in ("submit", "button")


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def normalize_text(text: str) -> str:
    """Case-insensitive, whitespace-collapsed comparison key."""
    text = unicodedata.normalize("NFKC", text).translate(_APOSTROPHES)
    return _collapse(text).casefold()


class _DomCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.elements: list[_Element] = []
        self._open: list[_Element] = []

    def handle_starttag(self, tag, attrs):
        el = _Element(tag, {k.lower(): (v or "") for k, v in attrs})
        self.elements.append(el)
        if tag not in _VOID:
            self._open.append(el)

    def handle_startendtag(self, tag, attrs):
        self.elements.append(_Element(tag, {k.lower(): (v or "") for k, v in attrs}))

    def handle_endtag(self, tag):
        for i in range(len(self._open) - 1, -1, -1):
            if self._open[i].tag == tag:
                del self._open[i:]
                return

    def handle_data(self, data):
        for el in self._open:
            el.text.append(data)


def _elements(html: str) -> list[_Element]:
    parser = _DomCollector()
    try:
        parser.feed(html or "")
        parser.close()
    except Exception:
        pass  # keep whatever was collected before the parser gave up
    return parser.elements


def locate_consent_button(
    html: str,
    accept_texts: Sequence[str] = DEFAULT_ACCEPT_TEXTS,
    class_hints: Sequence[str] = (),
    id_hints: Sequence[str] = (),
) -> BannerProbe:
    """Find the accept control: class hints, then id hints, then text."""
    elements = _elements(html)

    def hit(el: _Element, strategy: Strategy) -> BannerProbe:
        return BannerProbe(True, strategy, el.label or None, el.tag)

    for hint in class_hints:
        wanted = hint.strip().casefold()
        for el in elements:
            if wanted and wanted in el.attrs.get("class", "").casefold().split():
                return hit(el, Strategy.BY_CLASS)

    for hint in id_hints:
        wanted = hint.strip()
        for el in elements:
            if wanted and el.attrs.get("id", "").strip() == wanted:
                return hit(el, Strategy.BY_ID)

    clickable = [el for el in elements if el.clickable]
    for text in accept_texts:
        wanted = normalize_text(text)
        for el in clickable:
            if wanted and normalize_text(el.label) == wanted:
                return hit(el, Strategy.BY_TEXT)

    return BannerProbe(False, Strategy.NONE)
