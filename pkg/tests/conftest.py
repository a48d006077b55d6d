import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

CONSENT_PAGE = """<!doctype html>
<html><head><link rel="stylesheet" href="http://127.0.0.2:{tp}/style.css"></head>
<body>
<div id="cookie-banner"><p>Ce site utilise des cookies.</p>
  <a href="/parametres">Personnaliser</a><button class="btn">Accepter</button></div>
<img src="http://127.0.0.2:{tp}/pixel.gif" width="1" height="1">
<script src="/local.js"></script>
<a href="http://127.0.0.2:{tp}/partenaire">partenaire</a>
</body></html>
"""


class _Handler(BaseHTTPRequestHandler):
    routes: dict = {}

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        status, headers, body = self.routes.get(path, (404, [], b"not found"))
        if callable(body):
            body = body()
        self.send_response(status)
        for k, v in headers:
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


def _serve(host, routes):
    handler = type("Handler", (_Handler,), {"routes": routes})
    server = ThreadingHTTPServer((host, 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


@pytest.fixture(scope="session")
def local_sites():
    """A first-party site on 127.0.0.1 whose entry redirects through a
    third-party host (127.0.0.2) that drops a cookie on the way."""
    third_routes, site_routes = {}, {}
    third = _serve("127.0.0.2", third_routes)
    site = _serve("127.0.0.1", site_routes)
    sp, tp = site.server_address[1], third.server_address[1]
    site_base, third_base = f"http://127.0.0.1:{sp}", f"http://127.0.0.2:{tp}"
    html = CONSENT_PAGE.format(tp=tp).encode()

    site_routes.update({
        "/": (302, [("Location", f"{third_base}/bounce"), ("Set-Cookie", "sid=s3cr3t; Path=/; HttpOnly")], b""),
        "/home": (200, [("Content-Type", "text/html; charset=utf-8"),
                        ("Set-Cookie", "lang=fr; Max-Age=3600")], html),
        "/loop": (302, [("Location", "/loop")], b""),
        "/gone": (404, [], b"gone"),
    })
    third_routes.update({
        "/bounce": (302, [("Location", f"{site_base}/home"),
                          ("Set-Cookie", "uid=abc123; Expires=Wed, 01 Jun 2022 10:00:00 GMT; Path=/")], b""),
    })
    yield {"site": site_base + "/", "third": third_base, "base": site_base, "html": html.decode()}
    site.shutdown()
    third.shutdown()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
