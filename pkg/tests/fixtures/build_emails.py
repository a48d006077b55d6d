"""Regenerate the .eml corpus in tests/fixtures/emails.

Each message carries the host list of one real public-service mail.  Hosts known
to be tracking resources are loaded (image, pixel or stylesheet); every
other host only appears as a link target.
"""

from email.message import EmailMessage
from pathlib import Path

HERE = Path(__file__).parent / "emails"

PIXEL = '<img src="{}" width="1" height="1" alt="">'
STYLE = '<link rel="stylesheet" href="{}">'
IMG = '<img src="{}" alt="">'
LINK = '<a href="{}">lien</a>'

MAILS = {
    "Crous": ("noreply@national.lescrous.fr", [
        STYLE.format("https://fonts.googleapis.com/css?family=Open+Sans"),
        PIXEL.format("https://stats.iroquois.fr/open/u=83ac21f0"),
        IMG.format("https://public.iroquois.fr/img/bandeau.png"),
        LINK.format("https://media.etudiant.gouv.fr/file/actualites.pdf"),
        LINK.format("https://pwlink.national.lescrous.fr/c/5512?u=83ac21f0"),
    ]),
    "Ameli": ("assurance-maladie@info.ameli.fr", [
        '<html xmlns="http://www.w3.org/1999/xhtml">',
        IMG.format("https://extra1.ameli.fr/img/logo.png"),
        PIXEL.format("https://logc279.xiti.com/hit.xiti?s=552&p=mail&idclient=7f1c"),
        LINK.format("https://stats.info.ameli.fr/r/?id=h7f1c"),
        LINK.format("http://www.w3.org/"),
    ]),
    "impots": ("ne-pas-repondre@dgfip.impots.gouv.fr", [
        IMG.format("https://www.impots.gouv.fr/sites/default/files/logo.png"),
        LINK.format("https://oups.gouv.fr/"),
        LINK.format("https://www.impots.gouv.fr/portail/"),
    ]),
    "CAF": ("ne-pas-repondre@courriel.caf.fr", [
        IMG.format("https://courriel.caf.fr/images/entete.jpg"),
        LINK.format("https://courriel.caf.fr/r/?id=monCompte"),
    ]),
    "FranceConnect": ("ne-pas-repondre@franceconnect.gouv.fr", [
        IMG.format("https://app.franceconnect.gouv.fr/images/logo-fc.png"),
        LINK.format("https://www.service-public.fr/"),
        LINK.format("https://www.mesdroitssociaux.gouv.fr/"),
    ]),
    "Smerra": ("contact@smerra.fr", [
        STYLE.format("https://fonts.googleapis.com/css?family=Lato"),
        LINK.format("https://espaceperso.smerra.fr/connexion"),
        LINK.format("https://tracker.nmp1.com/c/1d2e3f"),
        LINK.format("http://www.w3.org/"),
    ]),
    "laposte.net": ("laposte@info.laposte.net", [
        STYLE.format("https://fonts.googleapis.com/css?family=Montserrat"),
        IMG.format("https://t.info.laposte.net/r/logo.gif"),
        LINK.format("https://lapostegp-t.neolane.net/r/?id=h1a2b"),
        LINK.format("http://t/r/?id=h1a2b"),
        LINK.format("http://t.info/r/?id=h1a2b"),
        LINK.format("https://laboutique.commander1.com/c3/?tcs=1"),
        LINK.format("http://www.w3.org/"),
    ]),
    "laposte.fr": ("noreply@notifclient.laposte.fr", [
        STYLE.format("https://fonts.googleapis.com/css?family=Roboto"),
        IMG.format("https://ressources.notifclient.laposte.fr/img/colis.png"),
        LINK.format("https://eservices-laposte.fr/suivi"),
    ]),
    "SNCF": ("ouisncf@mail.oui.sncf", [
        IMG.format("https://pdkm.oui.sncf/img/header.png"),
        LINK.format("https://stats.voyages-sncf.com/r/?id=9a"),
        LINK.format("https://avissec.centprod.com/avis"),
        LINK.format("http://schema.org/"),
        LINK.format("https://pubads.g.doubleclick.net/gampad/clk?id=1"),
        LINK.format("https://agence-voyage.oui.sncf/"),
        LINK.format("https://www.oui.sncf/"),
        LINK.format("https://oui.sncf/"),
    ]),
    "DIRCOM": ("dircom@insa-lyon.fr", [
        STYLE.format("https://fonts.googleapis.com/css?family=Raleway"),
        PIXEL.format("https://www.google-analytics.com/collect?v=1&tid=UA-1&cid=555"),
        LINK.format("https://www.insa-lyon.fr/fr/actualites"),
    ]),
}


def build(name, sender, snippets):
    msg = EmailMessage()
    msg["From"] = f"{name} <{sender}>"
    msg["To"] = "etudiant@example.org"
    msg["Subject"] = f"Message {name}"
    msg["Date"] = "Mon, 04 May 2020 09:00:00 +0200"
    msg["Message-ID"] = f"<{name.lower()}.20200504@{sender.split('@')[1]}>"
    msg.set_content(f"Bonjour,\nversion texte du message {name}.\n")
    body = "\n".join(snippets)
    msg.add_alternative(f"<html><body>\n{body}\n<p>Bonjour</p>\n</body></html>\n", subtype="html")
    return bytes(msg)


if __name__ == "__main__":
    HERE.mkdir(exist_ok=True)
    for name, (sender, snippets) in MAILS.items():
        (HERE / f"{name}.eml").write_bytes(build(name, sender, snippets))
