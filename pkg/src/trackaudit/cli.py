"""``trackaudit`` command line.

Exit codes: 0 success, 1 configuration error (nothing was audited),
2 batch finished but some items failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import app_audit, email_audit, report, web_audit
from .domains import Allowlist, AliasMap, DomainError, PublicSuffixList, default_psl, host_of
from .trackerdb import (
    TrackerDBError,
    default_entity_map,
    default_signatures,
    load_entity_map,
    load_signatures,
)

log = logging.getLogger("trackaudit")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
CONFIG_ENV = "TRACKAUDIT_CONFIG"
CONFIG_KEYS = {
    "psl", "allowlist", "sigs", "entity_map", "aliases", "intrusive",
    "parallel", "timeout", "redirect_limit",
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    psl: PublicSuffixList
    allowlist: Allowlist
    entity_map: object
    aliases: Optional[AliasMap] = None
    parallel: int = 4
    timeout: float = 30.0
    redirect_limit: int = 5
    sigs: Optional[str] = None
    intrusive: Optional[str] = None


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key=value`` lines, ``#`` comments."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
        values[key] = value.strip()
    return values


def _setting(args, defaults: dict, key: str):
    value = getattr(args, key, None)
    return value if value is not None else defaults.get(key)


def _setting_or(args, defaults: dict, key: str, fallback):
    value = _setting(args, defaults, key)
    return fallback if value is None else value


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return p


def build_config(args) -> RunConfig:
    """Load every referenced file up front so bad config fails before any work."""
    defaults = {}
    env_path = os.environ.get(CONFIG_ENV)
    if env_path:
        defaults = read_config_file(_require_file(env_path, "config file"))
    try:
        psl_path = _setting(args, defaults, "psl")
        psl = PublicSuffixList.from_file(_require_file(psl_path, "public suffix list")) if psl_path else default_psl()
        if psl_path and len(psl) == 0:
            raise ConfigError(f"public suffix list {psl_path} has no rules")
        allow_path = _setting(args, defaults, "allowlist")
        allowlist = Allowlist.from_file(_require_file(allow_path, "allowlist")) if allow_path else Allowlist()
        em_path = _setting(args, defaults, "entity_map")
        entity_map = load_entity_map(_require_file(em_path, "entity map")) if em_path else default_entity_map()
        alias_path = _setting(args, defaults, "aliases")
        aliases = AliasMap.from_file(_require_file(alias_path, "alias file")) if alias_path else None
        parallel = int(_setting_or(args, defaults, "parallel", 4))
        timeout = float(_setting_or(args, defaults, "timeout", 30.0))
        redirect_limit = int(_setting_or(args, defaults, "redirect_limit", 5))
    except (TrackerDBError, DomainError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    if parallel < 1 or timeout <= 0 or redirect_limit < 0:
        raise ConfigError("parallel must be >= 1, timeout > 0, redirect-limit >= 0")
    if getattr(args, "interactive", False):
        parallel = 1
    return RunConfig(
        psl, allowlist, entity_map, aliases, parallel, timeout, redirect_limit,
        _setting(args, defaults, "sigs"), _setting(args, defaults, "intrusive"),
    )


# -- subcommands ------------------------------------------------------------

def cmd_email(args, cfg: RunConfig) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    records, errors = email_audit.audit_directory(in_dir, cfg.allowlist, cfg.psl, args.debug_hosts)
    if cfg.aliases is not None:
        records = {k: email_audit.apply_aliases(r, cfg.aliases) for k, r in records.items()}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for source, record in records.items():
            fh.write(json.dumps({"source": source, **record.to_dict()}, ensure_ascii=False) + "\n")
    if args.actors:
        rows = email_audit.actor_table(records.values(), records.keys(),
                                       cfg.entity_map if args.by_entity else None)
        Path(args.actors).write_bytes(report.export(report.actor_table_report(rows), "csv"))
    print(f"audited {len(records)} messages, {len(errors)} failed")
    return EXIT_PARTIAL if errors else EXIT_OK


def _slug(site: str) -> str:
    return re.sub(r"[^A-Za-z0-9.-]+", "_", site.split("://", 1)[-1]).strip("_")


def cmd_web(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    sites = web_audit.read_site_list(_require_file(args.sites, "site list")) if args.sites else None
    if args.fetch:
        if not sites:
            raise ConfigError("--fetch needs --sites")
        sessions, errors = web_audit.fetch_sites(
            sites, cfg.parallel, cfg.redirect_limit, cfg.timeout, cfg.psl
        )
    else:
        ingest = Path(args.ingest)
        if not ingest.is_dir():
            raise ConfigError(f"capture directory not found: {ingest}")
        sessions, bad_files = web_audit.load_capture_dir(ingest, cfg.psl)
        errors = [web_audit.ErrorRecord(name, "BadCapture", msg) for name, msg in bad_files.items()]
        if sites is not None:
            wanted = {host_of(s).lower() for s in sites}
            sessions = [s for s in sessions if s.site_host in wanted]

    out.mkdir(parents=True, exist_ok=True)
    session_dir = out / "sessions"
    session_dir.mkdir(exist_ok=True)
    for s in sessions:
        path = session_dir / f"{_slug(s.site)}.{s.phase.value}.json"
        path.write_text(json.dumps(web_audit.session_to_dict(s), indent=1, ensure_ascii=False) + "\n",
                        encoding="utf-8")
    summaries = [web_audit.site_report(pre, post, cfg.psl) for pre, post in web_audit.pair_sessions(sessions)]
    web_audit.write_raw_csv(out / "cookies.csv", sessions)
    web_audit.write_summary_csv(out / "summary.csv", summaries)
    web_audit.write_errors_csv(out / "errors.csv", errors)
    print(f"{len(sessions)} sessions written, {len(errors)} failed")
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_apk_scan(args, cfg: RunConfig) -> int:
    dumps = Path(args.dumps)
    if not dumps.is_dir():
        raise ConfigError(f"dump directory not found: {dumps}")
    try:
        sigs = load_signatures(_require_file(cfg.sigs, "signature file")) if cfg.sigs else default_signatures()
        intrusive = (app_audit.load_permission_list(_require_file(cfg.intrusive, "permission list"))
                     if cfg.intrusive else app_audit.default_intrusive_permissions())
    except (TrackerDBError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    index = app_audit.SignatureIndex(sigs)
    apps, failed = [], 0
    for path in sorted(dumps.glob("*.json")):
        try:
            record, classes = app_audit.load_app_dump(path)
        except (ValueError, KeyError) as exc:
            failed += 1
            log.error("%s: %s", path.name, exc)
            continue
        apps.append(app_audit.scan_app(record, classes, index))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for app in apps:
            d = app.to_dict()
            d["red_flag"] = app_audit.is_red_flagged(app, args.max_permissions, args.max_trackers)
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")
    if apps:
        summary = app_audit.permission_summary(apps, intrusive)
        print(f"{len(apps)} apps: mean {summary.mean_permissions} permissions, "
              f"{summary.mean_trackers} trackers")
    print(f"scanned {len(apps)} dumps, {failed} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def _read_apps(path: Path) -> list[app_audit.AppRecord]:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".jsonl":
        items = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        items = json.loads(text)
    return [app_audit.AppRecord.from_dict(d) for d in items]


def cmd_label(args, cfg: RunConfig) -> int:
    try:
        apps = _read_apps(_require_file(args.apps, "app list"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad app list: {exc}") from exc
    labeled = app_audit.label_interactively(apps, args.log)
    if args.ids:
        ids = [a.app_id for a in labeled if a.decision is app_audit.Decision.PUBLIC_SERVICE]
        Path(args.ids).write_text("".join(i + "\n" for i in ids), encoding="utf-8")
    undecided = sum(a.decision is app_audit.Decision.UNDECIDED for a in labeled)
    print(f"labeled {len(labeled) - undecided} apps, {undecided} undecided")
    return EXIT_PARTIAL if undecided else EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    src = Path(args.from_dir)
    if not src.is_dir():
        raise ConfigError(f"report input directory not found: {src}")
    sessions, bad = [], 0
    for path in sorted(src.rglob("*.json")):
        try:
            sessions.append(web_audit.load_capture(path, cfg.psl))
        except (ValueError, KeyError, DomainError) as exc:
            log.warning("%s: not a capture session (%s)", path, exc)
            bad += 1
    email_records, email_labels, apps = [], [], []
    for path in sorted(src.rglob("*.jsonl")):
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            if "message_id_hash" in d:
                email_records.append(email_audit.EmailAuditRecord.from_dict(d))
                email_labels.append(d.get("source") or d["message_id_hash"])
            elif "app_id" in d:
                apps.append(app_audit.AppRecord.from_dict(d))

    tables = []
    if sessions:
        summaries = [web_audit.site_report(pre, post, cfg.psl) for pre, post in web_audit.pair_sessions(sessions)]
        tables.append(("top_sites", report.top_sites_table(summaries, args.top)))
        tables.append(("domain_tallies", report.tallies_table(report.domain_tallies(sessions, cfg.psl), args.top)))
    if email_records:
        rows = email_audit.actor_table(email_records, email_labels, cfg.entity_map)
        tables.append(("email_actors", report.actor_table_report(rows)))
    if apps and any(a.trackers for a in apps):
        rows = app_audit.tracker_identity_table(apps, cfg.entity_map)
        tables.append(("tracker_entities", report.entity_table_report(rows)))
    if not tables:
        raise ConfigError(f"nothing to report in {src}")

    ext = {"csv": "csv", "jsonl": "jsonl", "md": "md"}[args.format]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, table in tables:
            (out / f"{name}.{ext}").write_bytes(report.export(table, args.format))
    else:
        for name, table in tables:
            if args.format != "md":
                sys.stdout.write(f"# {name}\n")
            sys.stdout.write(report.export(table, args.format).decode("utf-8"))
            sys.stdout.write("\n")
    return EXIT_PARTIAL if bad else EXIT_OK


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--psl", help="public suffix list file (default: bundled snapshot)")
    common.add_argument("--entity-map", dest="entity_map", help="pattern,entity CSV")
    common.add_argument("--aliases", help="same-entity alias file (alias,canonical)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="trackaudit", description="Audit third-party tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("email", parents=[common], help="audit a directory of .eml files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True, help="JSON lines output")
    p.add_argument("--allowlist")
    p.add_argument("--actors", help="also write the actor table CSV here")
    p.add_argument("--by-entity", action="store_true", help="group actors by owning entity")
    p.add_argument("--debug-hosts", action="store_true", help="keep full external hostnames")
    p.set_defaults(func=cmd_email)

    p = sub.add_parser("web", parents=[common], help="audit website cookies and requests")
    p.add_argument("--sites", help="one URL per line")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--fetch", action="store_true", help="static fetch of each site")
    mode.add_argument("--ingest", metavar="DIR", help="capture-session JSON files")
    p.add_argument("--out", required=True)
    p.add_argument("--parallel", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--redirect-limit", dest="redirect_limit", type=int)
    p.set_defaults(func=cmd_web)

    p = sub.add_parser("apk", help="mobile app dumps")
    apk_sub = p.add_subparsers(dest="apk_command", required=True)
    s = apk_sub.add_parser("scan", parents=[common], help="scan app dumps for tracker signatures")
    s.add_argument("--dumps", required=True)
    s.add_argument("--sigs", help="tracker signature JSON (default: bundled)")
    s.add_argument("--out", required=True)
    s.add_argument("--intrusive", help="intrusive permission list")
    s.add_argument("--max-permissions", type=int, default=10)
    s.add_argument("--max-trackers", type=int, default=5)
    s.set_defaults(func=cmd_apk_scan)

    p = sub.add_parser("label", parents=[common], help="interactive public-service triage")
    p.add_argument("--apps", required=True)
    p.add_argument("--log", required=True, help="append-only answer log (CSV)")
    p.add_argument("--ids", help="write ids of public-service apps here")
    p.set_defaults(func=cmd_label, interactive=True)

    p = sub.add_parser("report", parents=[common], help="aggregate audit outputs into tables")
    p.add_argument("--from", dest="from_dir", required=True)
    p.add_argument("--format", choices=["csv", "jsonl", "md"], default="md")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", help="write one file per table here instead of stdout")
    p.set_defaults(func=cmd_report)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"trackaudit: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
