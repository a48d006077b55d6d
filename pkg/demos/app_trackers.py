"""
Tracker SDKs inside an Android app
===================================

Scan the class list of a decompiled app for known tracker packages,
then check it against the red-flag thresholds.
"""

from trackaudit import app_audit
from trackaudit.trackerdb import default_entity_map, default_signatures

classes = [
    "Lfr/mairie/app/MainActivity;",
    "Lcom/google/firebase/analytics/FirebaseAnalytics;",
    "Lcom/facebook/appevents/AppEventsLogger;",
    "Lcom/atinternet/tracker/Tracker;",
    "Lcom/googlex/NotATracker;",  # label boundary: no match
]
app = app_audit.AppRecord(
    "fr.mairie.app",
    "Ma Mairie",
    permissions=["INTERNET", "ACCESS_FINE_LOCATION", "READ_PHONE_STATE"],
)

index = app_audit.SignatureIndex(default_signatures())
app = app_audit.scan_app(app, classes, index)
print("trackers:", app.trackers)
print("red flag:", app_audit.is_red_flagged(app))

# who owns them
for entity, percent, _ in app_audit.tracker_identity_table([app], default_entity_map()):
    print(f"{entity:10} {percent}%")

# the public-service rule behind the labeling tool
print(app_audit.classify_public_service(True, False, False, True))
