import pytest
from hypothesis import given, settings, strategies as st

from trackaudit.consent import (
    DEFAULT_ACCEPT_TEXTS,
    BannerProbe,
    Strategy,
    locate_consent_button,
    normalize_text,
)


def test_text_match_on_default_labels():
    html = '<div id="banner"><a href="#">Paramétrer</a><button class="btn">  Ok,   tout  ACCEPTER </button></div>'
    probe = locate_consent_button(html)
    assert probe == BannerProbe(True, Strategy.BY_TEXT, "Ok, tout ACCEPTER", "button")


def test_curly_apostrophe_and_input_value():
    assert locate_consent_button("<a>J’accepte</a>").strategy is Strategy.BY_TEXT
    probe = locate_consent_button('<input type="submit" value="Accepter">')
    assert probe.matched and probe.tag == "input"
    assert not locate_consent_button('<input type="text" value="Accepter">').matched


def test_text_must_match_whole_label():
    assert not locate_consent_button("<button>Ne pas accepter</button>").matched
    assert not locate_consent_button("<p>Accepter</p>").matched  # not clickable


def test_class_before_id_before_text():
    html = ('<button>Accepter</button><a id="cookie-ok">continuer</a>'
            '<span class="cc-btn cc-allow">Tout accepter</span>')
    assert locate_consent_button(html, class_hints=["cc-allow"], id_hints=["cookie-ok"]).strategy is Strategy.BY_CLASS
    assert locate_consent_button(html, id_hints=["cookie-ok"]).strategy is Strategy.BY_ID
    assert locate_consent_button(html).strategy is Strategy.BY_TEXT


def test_class_hint_is_a_token_not_substring():
    assert not locate_consent_button('<a class="cc-allowance">x</a>', accept_texts=[], class_hints=["cc-allow"]).matched


def test_accept_text_order_wins_over_document_order():
    html = "<button>Ok</button><button>Accepter</button>"
    assert locate_consent_button(html).matched_text == "Accepter"
    assert locate_consent_button(html, accept_texts=["Ok", "Accepter"]).matched_text == "Ok"


def test_no_match_and_probe_invariant():
    assert locate_consent_button("<p>rien</p>") == BannerProbe(False, Strategy.NONE)
    assert locate_consent_button("") == BannerProbe(False, Strategy.NONE)
    with pytest.raises(ValueError):
        BannerProbe(True, Strategy.NONE)
    with pytest.raises(ValueError):
        BannerProbe(False, Strategy.BY_ID)


def test_normalize_text():
    assert normalize_text("  Oui,\n je suis\td’ACCORD ") == "oui, je suis d'accord"


# -- strategy priority --------------------------------------------------------

def element(kind):
    return {
        "class": '<span class="banner accept-all">go</span>',
        "id": '<div id="consent-yes">go</div>',
        "text": "<button>Accepter</button>",
        "noise": "<p>Bienvenue sur le site de la mairie</p>",
    }[kind]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(["class", "id", "text", "noise"]), max_size=8), st.booleans(), st.booleans())
def test_strategy_priority(kinds, use_class, use_id):
    html = "".join(element(k) for k in kinds)
    probe = locate_consent_button(
        html,
        DEFAULT_ACCEPT_TEXTS,
        class_hints=["accept-all"] if use_class else [],
        id_hints=["consent-yes"] if use_id else [],
    )
    if use_class and "class" in kinds:
        expected = Strategy.BY_CLASS
    elif use_id and "id" in kinds:
        expected = Strategy.BY_ID
    elif "text" in kinds:
        expected = Strategy.BY_TEXT
    else:
        expected = Strategy.NONE
    assert probe.strategy is expected
    assert probe.matched == (expected is not Strategy.NONE)
