"""Mobile-app channel: public-service triage, tracker scan, permission stats.

Apps are read from neutral JSON dumps rather than APK binaries::

    {"app_id": "fr.gouv.android.stopcovid", "title": "...", "developer": "...",
     "website": "https://...", "version": "2.1.0", "keyword": "covid",
     "classes": ["com.google.firebase.analytics.FirebaseAnalytics", ...],
     "permissions": ["android.permission.CAMERA", ...]}

Any static-analysis extractor that lists class names (dotted or JVM
``Lcom/foo/Bar;`` descriptors) and manifest permissions can produce them.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, TextIO

from .trackerdb import EntityMap, TrackerSignature

log = logging.getLogger(__name__)

__all__ = [
    "Decision",
    "AppRecord",
    "EmptyInput",
    "classify_public_service",
    "label_interactively",
    "read_answer_log",
    "SignatureIndex",
    "scan_classes",
    "normalize_class_name",
    "normalize_permission",
    "default_intrusive_permissions",
    "load_permission_list",
    "load_app_dump",
    "scan_app",
    "is_red_flagged",
    "PermissionSummary",
    "permission_summary",
    "tracker_identity_table",
    "round_half_up",
    "largest_remainder",
]

LOG_COLUMNS = ["app_id", "c1", "c2", "c3", "c4", "decision"]


class Decision(str, enum.Enum):
    PUBLIC_SERVICE = "PublicService"
    NOT_PUBLIC_SERVICE = "NotPublicService"
    SKIPPED = "Skipped"
    UNDECIDED = "Undecided"


class EmptyInput(ValueError):
    pass


@dataclass
class AppRecord:
    app_id: str
    title: str = ""
    developer: str = ""
    website: Optional[str] = None
    keyword: str = ""
    version: Optional[str] = None
    criteria: tuple[Optional[bool], Optional[bool], Optional[bool], Optional[bool]] = (
        None, None, None, None,
    )
    decision: Decision = Decision.UNDECIDED
    permissions: list[str] = field(default_factory=list)
    trackers: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.permissions = list(dict.fromkeys(self.permissions))
        self.trackers = list(dict.fromkeys(self.trackers))
        if self.decision is Decision.PUBLIC_SERVICE:
            if None in self.criteria or not classify_public_service(*self.criteria):
                raise ValueError(f"{self.app_id}: criteria do not support PublicService")

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "title": self.title,
            "developer": self.developer,
            "website": self.website,
            "keyword": self.keyword,
            "version": self.version,
            "criteria": list(self.criteria),
            "decision": self.decision.value,
            "permissions": self.permissions,
            "trackers": self.trackers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AppRecord":
        crit = d.get("criteria") or [None] * 4
        return cls(
            app_id=d["app_id"],
            title=d.get("title", ""),
            developer=d.get("developer", ""),
            website=d.get("website"),
            keyword=d.get("keyword", ""),
            version=d.get("version"),
            criteria=tuple(crit),
            decision=Decision(d.get("decision", "Undecided")),
            permissions=list(d.get("permissions", ())),
            trackers=list(d.get("trackers", ())),
        )


def classify_public_service(c1: bool, c2: bool, c3: bool, c4: bool) -> bool:
    """At least two criteria hold, and one of them is the developer (c1)
    or the website (c4) criterion."""
    return (c1 + c2 + c3 + c4) >= 2 and (c1 or c4)


# -- interactive labeling ---------------------------------------------------

_CRITERIA_PROMPTS = (
    "1) Developer name relates to a public body?",
    "2) App name matches a possible public service?",
    "3) App id carries a public-service marker (gouv, city name...)?",
    "4) App links to a public-service website?",
)


def _fmt(value: Optional[bool]) -> str:
    return "" if value is None else ("y" if value else "n")


def _parse_bool(value: str) -> Optional[bool]:
    return {"y": True, "n": False, "": None}[value.strip().lower()]


def read_answer_log(path: str | Path) -> dict[str, tuple[tuple, Decision]]:
    """Previously logged answers keyed by app id (last entry wins)."""
    path = Path(path)
    if not path.exists():
        return {}
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            crit = tuple(_parse_bool(row[c]) for c in ("c1", "c2", "c3", "c4"))
            out[row["app_id"]] = (crit, Decision(row["decision"]))
    return out


def _ask(prompt: Callable[[str], str], question: str, choices: str) -> str:
    while True:
        answer = prompt(f"{question} [{'/'.join(choices)}] ").strip().lower()
        if answer in choices:
            return answer


def label_interactively(
    apps: Iterable[AppRecord],
    log_path: str | Path | None = None,
    prompt: Callable[[str], str] = input,
    out: TextIO = sys.stdout,
) -> list[AppRecord]:
    """Terminal triage loop.

    For each app, show title/developer/id/website, ask y/n for the four
    criteria, then a final y/n/t.  ``t`` answers "no" for the current app
    and skips the rest of its keyword group.  Every decision is appended
    to ``log_path`` (CSV) right away; apps already in the log are not
    asked again, so an interrupted session resumes where it stopped.
    End of input leaves the remaining apps Undecided.
    """
    logged = read_answer_log(log_path) if log_path else {}
    log_fh = None
    if log_path:
        path = Path(log_path)
        new_file = not path.exists() or path.stat().st_size == 0
        log_fh = path.open("a", newline="", encoding="utf-8")
        writer = csv.writer(log_fh, lineterminator="\n")
        if new_file:
            writer.writerow(LOG_COLUMNS)

    def persist(app: AppRecord) -> None:
        if log_fh is not None:
            writer.writerow([app.app_id, *map(_fmt, app.criteria), app.decision.value])
            log_fh.flush()

    results: list[AppRecord] = []
    skip_group: Optional[str] = None
    exhausted = False
    try:
        for app in apps:
            if app.app_id in logged:
                crit, decision = logged[app.app_id]
                results.append(replace(app, criteria=crit, decision=decision))
                continue
            if exhausted:
                results.append(replace(app, decision=Decision.UNDECIDED))
                continue
            if skip_group is not None and app.keyword == skip_group:
                labeled = replace(app, decision=Decision.SKIPPED)
                persist(labeled)
                results.append(labeled)
                continue
            skip_group = None

            print(f"\n{app.title}  ({app.app_id})", file=out)
            print(f"  developer: {app.developer}", file=out)
            print(f"  website:   {app.website or '-'}", file=out)
            try:
                crit = tuple(_ask(prompt, q, "yn") == "y" for q in _CRITERIA_PROMPTS)
                final = _ask(prompt, "Public service?", "ynt")
            except EOFError:
                exhausted = True
                results.append(replace(app, decision=Decision.UNDECIDED))
                continue

            if final == "y":
                if classify_public_service(*crit):
                    decision = Decision.PUBLIC_SERVICE
                else:
                    print("  criteria do not allow a public-service label; recorded as no", file=out)
                    log.warning("%s: 'y' contradicts criteria, recorded NotPublicService", app.app_id)
                    decision = Decision.NOT_PUBLIC_SERVICE
            else:
                decision = Decision.NOT_PUBLIC_SERVICE
                if final == "t":
                    skip_group = app.keyword
            labeled = replace(app, criteria=crit, decision=decision)
            persist(labeled)
            results.append(labeled)
    finally:
        if log_fh is not None:
            log_fh.close()
    return results


# -- tracker signatures -----------------------------------------------------

def normalize_class_name(name: str) -> str:
    """``Lcom/foo/Bar;`` -> ``com.foo.Bar``; dotted names pass through."""
    name = name.strip()
    if name.startswith("L") and name.endswith(";"):
        name = name[1:-1]
    return name.replace("/", ".")


class SignatureIndex:
    """Prefix table for label-boundary matching of class names.

    A class matches prefix ``com.google`` if it equals it or continues
    with a dot (``com.google.X``), never ``com.googleX``.
    """

    def __init__(self, sigs: Sequence[TrackerSignature]) -> None:
        self.by_prefix: dict[str, set[str]] = {}
        for sig in sigs:
            for prefix in sig.code_prefixes:
                self.by_prefix.setdefault(prefix, set()).add(sig.name)

    def match(self, class_name: str) -> set[str]:
        labels = normalize_class_name(class_name).split(".")
        hits: set[str] = set()
        for i in range(1, len(labels) + 1):
            names = self.by_prefix.get(".".join(labels[:i]))
            if names:
                hits |= names
        return hits


def scan_classes(
    class_names: Iterable[str], sigs: Sequence[TrackerSignature] | SignatureIndex
) -> list[str]:
    """Names of trackers whose code prefix heads any of ``class_names``."""
    index = sigs if isinstance(sigs, SignatureIndex) else SignatureIndex(sigs)
    found: set[str] = set()
    for name in class_names:
        found |= index.match(name)
    return sorted(found)


# -- permissions ------------------------------------------------------------

def normalize_permission(name: str) -> str:
    name = name.strip()
    return name if "." in name else f"android.permission.{name.replace(' ', '_').upper()}"


def load_permission_list(path: str | Path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(normalize_permission(l.split("#", 1)[0]) for l in lines if l.split("#", 1)[0].strip())


def default_intrusive_permissions() -> frozenset[str]:
    text = resources.files("trackaudit.data").joinpath("intrusive_permissions.txt").read_text("utf-8")
    return frozenset(
        normalize_permission(l.split("#", 1)[0]) for l in text.splitlines() if l.split("#", 1)[0].strip()
    )


def load_app_dump(path: str | Path) -> tuple[AppRecord, list[str]]:
    """Read one app dump; returns the record (trackers empty) and its class list."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "app_id" not in d:
        raise ValueError(f"{path}: missing app_id")
    record = AppRecord(
        app_id=d["app_id"],
        title=d.get("title", ""),
        developer=d.get("developer", ""),
        website=d.get("website"),
        keyword=d.get("keyword", ""),
        version=d.get("version"),
        permissions=[normalize_permission(p) for p in d.get("permissions", [])],
    )
    return record, list(d.get("classes", []))


def scan_app(record: AppRecord, classes: Iterable[str], index: SignatureIndex) -> AppRecord:
    return replace(record, trackers=scan_classes(classes, index))


def is_red_flagged(app: AppRecord, max_permissions: int = 10, max_trackers: int = 5) -> bool:
    """Exodus-style red badge: too many permissions or trackers."""
    return len(app.permissions) > max_permissions or len(app.trackers) > max_trackers


def round_half_up(x: Fraction | float, ndigits: int = 0) -> float | int:
    q = Fraction(x) * 10**ndigits
    n = (q + Fraction(1, 2)).__floor__()
    return n if ndigits == 0 else n / 10**ndigits


@dataclass
class PermissionSummary:
    app_count: int
    mean_permissions: float
    mean_trackers: float
    permission_frequency: dict[str, float]
    intrusive_frequency: dict[str, float]
    tracker_frequency: dict[str, float]
    # exact values behind the rounded means
    exact_mean_permissions: Fraction = Fraction(0)
    exact_mean_trackers: Fraction = Fraction(0)


def _percentages(counts: dict[str, int], total: int) -> dict[str, float]:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {k: round_half_up(Fraction(100 * v, total), 2) for k, v in ordered}


def permission_summary(
    apps: Sequence[AppRecord], intrusive: Optional[Iterable[str]] = None
) -> PermissionSummary:
    """Mean permissions/trackers per app and per-item frequencies (% of apps)."""
    apps = list(apps)
    if not apps:
        raise EmptyInput("no apps to summarize")
    intrusive = frozenset(normalize_permission(p) for p in (intrusive or default_intrusive_permissions()))
    n = len(apps)
    perm_counts: dict[str, int] = {}
    tracker_counts: dict[str, int] = {}
    for app in apps:
        for perm in set(app.permissions):
            perm_counts[perm] = perm_counts.get(perm, 0) + 1
        for tracker in set(app.trackers):
            tracker_counts[tracker] = tracker_counts.get(tracker, 0) + 1
    exact_p = Fraction(sum(len(set(a.permissions)) for a in apps), n)
    exact_t = Fraction(sum(len(set(a.trackers)) for a in apps), n)
    return PermissionSummary(
        app_count=n,
        mean_permissions=round_half_up(exact_p, 2),
        mean_trackers=round_half_up(exact_t, 2),
        permission_frequency=_percentages(perm_counts, n),
        intrusive_frequency=_percentages({p: perm_counts.get(p, 0) for p in intrusive}, n),
        tracker_frequency=_percentages(tracker_counts, n),
        exact_mean_permissions=exact_p,
        exact_mean_trackers=exact_t,
    )


def tracker_identity_table(
    apps: Sequence[AppRecord], entity_map: EntityMap
) -> list[tuple[str, int, Fraction]]:
    """Share of tracker occurrences per owning entity.

    Rows are ``(entity, percent, exact fraction)`` sorted by share,
    descending; the integer percents always add up to 100.  Each
    (app, tracker) pair counts once.
    """
    counts: dict[str, int] = {}
    for app in apps:
        for tracker in set(app.trackers):
            entity = entity_map.attribute_tracker(tracker)
            counts[entity] = counts.get(entity, 0) + 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyInput("no tracker occurrences")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    percents = largest_remainder([Fraction(100 * c, total) for _, c in ordered])
    return [(e, pct, Fraction(c, total)) for (e, c), pct in zip(ordered, percents)]


def largest_remainder(shares: Sequence[Fraction], total: int = 100) -> list[int]:
    """Round ``shares`` (summing to ``total``) to integers with the same sum.

    Floors first, then hands the missing units to the largest remainders;
    ties go to the earlier share.
    """
    floors = [s.numerator // s.denominator for s in shares]
    missing = total - sum(floors)
    by_remainder = sorted(range(len(shares)), key=lambda i: (-(shares[i] - floors[i]), i))
    for i in by_remainder[:missing]:
        floors[i] += 1
    return floors
