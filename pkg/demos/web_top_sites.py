"""
Third-party cookies on municipal websites
==========================================

Load captured browser sessions (before and after clicking "Accepter"),
rank the sites and tally the domains that show up everywhere.
"""

from pathlib import Path

from trackaudit import report, web_audit

CAPTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "captures" / "top_sites"

sessions, bad = web_audit.load_capture_dir(CAPTURES)
summaries = [web_audit.site_report(pre, post) for pre, post in web_audit.pair_sessions(sessions)]

# accepting the banner is what lets most trackers in
for s in summaries[:3]:
    print(f"{s.name}: {s.pre.third_cookies} third-party cookies before consent, {s.post.third_cookies} after")

print()
print(report.export(report.top_sites_table(summaries, 10), "md").decode())
print(report.export(report.tallies_table(report.domain_tallies(sessions), 8), "md").decode())
