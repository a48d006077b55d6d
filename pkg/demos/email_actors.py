"""
Who gets pinged when a public-service email is opened?
=======================================================

Audit the sample mailbox shipped with the tests and roll the external
domains up to the companies that own them.
"""

from pathlib import Path

from trackaudit import email_audit, report
from trackaudit.trackerdb import default_entity_map

MAILBOX = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "emails"

# one record per message: only registrable domains survive, never URLs
records, errors = email_audit.audit_directory(MAILBOX)
for name, record in sorted(records.items()):
    print(f"{name:14} loaded={sorted(record.loaded_external)} links={len(record.linkonly_external)}")

# fonts.googleapis.com and google-analytics.com both end up under Google
rows = email_audit.actor_table(records.values(), records.keys(), default_entity_map())
print()
print(report.export(report.actor_table_report(rows), "md").decode())
