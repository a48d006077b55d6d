import json
from email.message import EmailMessage
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from trackaudit.domains import AliasMap, Allowlist
from trackaudit.email_audit import (
    EmailAuditRecord,
    MissingFromHeader,
    actor_table,
    apply_aliases,
    audit_directory,
    audit_email,
    parse_message,
)

EMAILS = Path(__file__).parent / "fixtures" / "emails"


def make_mail(html, sender="news@info.ameli.fr", text="plain", message_id="<m1@ameli.fr>", **headers):
    msg = EmailMessage()
    msg["From"] = sender
    msg["To"] = "someone@example.org"
    msg["Subject"] = "test"
    if message_id:
        msg["Message-ID"] = message_id
    for k, v in headers.items():
        msg[k] = v
    msg.set_content(text)
    if html is not None:
        msg.add_alternative(html, subtype="html")
    return bytes(msg)


def test_loaded_linkonly_internal_allowlisted():
    html = ('<img src="https://extra1.ameli.fr/logo.png">'
            '<img src="https://logc279.xiti.com/hit.xiti?id=42" width="1" height="1">'
            '<a href="https://www.youtube.com/watch?v=abc">video</a>'
            '<a href="http://www.w3.org/">w3</a><a href="http://t/x">broken</a>')
    r = audit_email(make_mail(html))
    assert r.sender_domain == "ameli.fr"
    assert r.loaded_external == {"xiti.com"}
    assert r.pixel_external == {"xiti.com"}
    assert r.linkonly_external == {"youtube.com"}
    assert (r.internal_count, r.allowlisted_count, r.unresolved_count) == (1, 1, 1)
    assert r.hosts is None


def test_plain_text_urls_are_not_loaded():
    r = audit_email(make_mail(None, text="voir https://tracker.example.com/p.gif"))
    assert r.loaded_external == set() and r.linkonly_external == set()


def test_script_only_domains_are_separated():
    html = ('<script src="https://www.googletagmanager.com/gtm.js"></script>'
            '<img src="https://www.google-analytics.com/c.gif">'
            '<script src="https://www.google-analytics.com/a.js"></script>')
    r = audit_email(make_mail(html))
    assert r.loaded_external == {"googletagmanager.com", "google-analytics.com"}
    assert r.script_only_external == {"googletagmanager.com"}
    assert r.media_loaded_external == {"google-analytics.com"}


def test_debug_hosts_keeps_hostnames_not_urls():
    r = audit_email(make_mail('<img src="https://logc279.xiti.com/hit?u=secret">'), debug_hosts=True)
    assert r.hosts == ["logc279.xiti.com"]
    assert "secret" not in r.to_json()


def test_missing_from_and_multiple_from():
    raw = b"To: a@b.fr\r\nSubject: x\r\nContent-Type: text/html\r\n\r\n<img src='https://x.com/a'>"
    with pytest.raises(MissingFromHeader):
        audit_email(raw)
    raw = b"From: a@crous.fr, b@caf.fr\r\nContent-Type: text/html\r\n\r\n<p>x</p>"
    parsed = parse_message(raw)
    assert parsed.sender_domain == "crous.fr" and parsed.warnings


def test_unknown_charset_falls_back_to_utf8():
    raw = ("From: a@caf.fr\r\nContent-Type: text/html; charset=x-unknown\r\n\r\n"
           "<img src='https://tracker.example.com/é.gif'>").encode("utf-8")
    assert audit_email(raw).loaded_external == {"example.com"}


def test_attachments_are_ignored():
    msg = EmailMessage()
    msg["From"] = "a@caf.fr"
    msg.set_content("x")
    msg.add_attachment(b'<img src="https://evil.example.com/a.gif">', maintype="text", subtype="html",
                       filename="a.html")
    assert audit_email(bytes(msg)).loaded_external == set()


def test_message_id_hash_is_stable_and_header_only():
    a = audit_email(make_mail("<p>a</p>", message_id=None))
    b = audit_email(make_mail('<p>b</p><img src="https://x.com/y">', message_id=None))
    assert a.message_id_hash == b.message_id_hash
    assert audit_email(make_mail("<p>", message_id="<other@x>")).message_id_hash != a.message_id_hash


def test_record_json_roundtrip():
    r = audit_email(make_mail('<img src="https://logc279.xiti.com/h">'), debug_hosts=True)
    d = json.loads(r.to_json())
    assert d["loaded_external"] == ["xiti.com"]
    assert EmailAuditRecord.from_dict(d) == r


def test_aliases_move_same_entity_domains_to_internal():
    raw = make_mail('<a href="https://oups.gouv.fr/">o</a><img src="https://oups.gouv.fr/i.png">',
                    sender="ne-pas-repondre@dgfip.impots.gouv.fr")
    r = audit_email(raw)
    assert r.loaded_external == {"oups.gouv.fr"}
    fixed = apply_aliases(r, AliasMap({"oups.gouv.fr": "impots.gouv.fr"}))
    assert fixed.loaded_external == set() and fixed.linkonly_external == set()
    assert fixed.internal_count == r.internal_count + 2


def test_custom_allowlist():
    html = '<img src="https://schema.org/x.png">'
    assert audit_email(make_mail(html)).loaded_external == {"schema.org"}
    assert audit_email(make_mail(html), allow=Allowlist(["schema.org"])).loaded_external == set()


def test_directory_reports_failures(tmp_path):
    (tmp_path / "ok.eml").write_bytes(make_mail("<p>x</p>"))
    (tmp_path / "bad.eml").write_bytes(b"Subject: no sender\r\n\r\nhi")
    records, errors = audit_directory(tmp_path)
    assert list(records) == ["ok"] and list(errors) == ["bad"]


def test_fixture_corpus_actor_table_by_domain():
    records, errors = audit_directory(EMAILS)
    assert not errors
    rows = dict(actor_table(records.values(), records.keys()))
    assert rows["googleapis.com"] == ["Crous", "DIRCOM", "Smerra", "laposte.fr", "laposte.net"]
    assert rows["google-analytics.com"] == ["DIRCOM"]


def test_actor_table_label_count_must_match():
    with pytest.raises(ValueError):
        actor_table([EmailAuditRecord("h", "a.fr")], [])


# -- redaction property -------------------------------------------------------

secret = st.from_regex(r"[A-Z]{6}[0-9]{4}", fullmatch=True)
hosts = st.sampled_from(["logc279.xiti.com", "stats.iroquois.fr", "fonts.googleapis.com",
                         "www.google-analytics.com", "extra1.ameli.fr", "www.w3.org", "t"])
templates = st.sampled_from([
    '<img src="https://{h}/{s}/p.gif?uid={s}">',
    '<a href="https://{h}/r?email={s}%40mail.fr">x</a>',
    '<link rel="stylesheet" href="https://{h}/css?k={s}">',
    '<div style="background:url(https://{h}/bg/{s}.png)"></div>',
])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(templates, hosts, secret), min_size=1, max_size=8), st.booleans())
def test_no_path_or_query_token_survives(items, debug):
    html = "".join(t.format(h=h, s=s) for t, h, s in items)
    record = audit_email(make_mail(html), debug_hosts=debug)
    out = record.to_json()
    for _, _, s in items:
        assert s not in out and s.lower() not in out
