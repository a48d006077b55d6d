import json

import pytest

from trackaudit.trackerdb import (
    FALLBACK_ENTITY,
    BadPattern,
    BadSignature,
    Category,
    DomainBlocklist,
    DuplicatePattern,
    EntityMap,
    Rule,
    TrackerSignature,
    attribute,
    default_entity_map,
    default_signatures,
    load_entity_map,
    load_signatures,
)


@pytest.mark.parametrize("domain,entity", [
    ("googleapis.com", "Google"),
    ("fonts.googleapis.com", "Google"),
    ("doubleclick.net", "Google"),
    ("google-analytics.com", "Google"),
    ("xiti.com", "Xiti"),
    ("logc279.xiti.com", "Xiti"),
    ("iroquois.fr", "Iroquois"),
    ("facebook.net", "Facebook"),
    ("nmp1.com", FALLBACK_ENTITY),
    ("notgoogle.com", FALLBACK_ENTITY),
])
def test_default_domain_attribution(domain, entity):
    assert attribute(domain) == entity


def test_default_package_and_tracker_attribution():
    m = default_entity_map()
    assert m.attribute_package("com.google.firebase.analytics.FirebaseAnalytics") == "Google"
    assert m.attribute_package("com.googlex.Thing") == FALLBACK_ENTITY
    assert m.attribute_tracker("Google CrashLytics") == "Google"
    assert m.attribute_tracker("Facebook Login") == "Facebook"
    assert m.attribute_tracker("Microsoft Visual Studio App Center Crashes") == "Microsoft"
    assert m.attribute_tracker("AT Internet") == FALLBACK_ENTITY
    assert {"Google", "Facebook", "Xiti", "Iroquois", "Microsoft", FALLBACK_ENTITY} <= set(m.entities())


def test_first_match_wins_and_roundtrip(tmp_path):
    path = tmp_path / "map.csv"
    path.write_text("pattern,entity\n# comment\nads.example.com,AdCo\nexample.com,Example\npkg:com.ex,Example\n")
    m = load_entity_map(path)
    assert m.attribute("x.ads.example.com") == "AdCo"
    assert m.attribute("www.example.com") == "Example"
    again = tmp_path / "again.csv"
    again.write_text(m.to_csv())
    assert load_entity_map(again) == m
    assert len(m) == 3


@pytest.mark.parametrize("text,exc", [
    ("a.com,A\na.com,B\n", DuplicatePattern),
    ("com,A\n", BadPattern),
    ("a.com,\n", BadPattern),
    ("pkg:com..x,A\n", BadPattern),
    ("a.com,A,extra\n", BadPattern),
])
def test_bad_entity_maps(tmp_path, text, exc):
    path = tmp_path / "m.csv"
    path.write_text(text)
    with pytest.raises(exc):
        load_entity_map(path)


def test_rule_kinds():
    assert Rule.parse("tracker:Google *", "Google").matches("tracker", "Google Ads")
    assert not Rule.parse("tracker:Google *", "Google").matches("tracker", "Googlebot")
    assert Rule.parse(".xiti.com", "Xiti").pattern == "xiti.com"
    assert EntityMap().attribute("anything.fr") == FALLBACK_ENTITY


def test_blocklist():
    bl = DomainBlocklist.parse("# list\ndoubleclick.net,advertising\ngoogle-analytics.com,analytics\nfoo.org\n")
    assert bl.category("stats.g.doubleclick.net") is Category.ADVERTISING
    assert bl.category("www.google-analytics.com") is Category.ANALYTICS
    assert bl.category("foo.org") is Category.OTHER
    assert "example.com" not in bl and len(bl) == 3
    with pytest.raises(BadPattern):
        DomainBlocklist.parse("x.com,bogus\n")


def test_signatures(tmp_path):
    sigs = default_signatures()
    assert len({s.name for s in sigs}) == len(sigs)
    exodus = {"trackers": {"1": {"name": "Twitter MoPub", "code_signature": "com.mopub.|com.mopub.mobileads",
                                 "network_signature": "ads.mopub.com"}}}
    path = tmp_path / "sigs.json"
    path.write_text(json.dumps(exodus))
    (sig,) = load_signatures(path)
    assert sig.code_prefixes == ("com.mopub", "com.mopub.mobileads")
    with pytest.raises(BadSignature):
        TrackerSignature("empty")
    with pytest.raises(BadSignature):
        TrackerSignature("bad", code_prefixes=("com..x",))
    path.write_text(json.dumps([{"name": "A", "code_prefixes": ["a.b"]}, {"name": "A", "code_prefixes": ["c.d"]}]))
    with pytest.raises(BadSignature):
        load_signatures(path)
