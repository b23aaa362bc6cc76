"""revaudit: offline compliance auditor for consent revocation on the Web.

Decodes CMP consent strings (IAB TCF v2, OneTrust), scans recorded
four-stage crawl sessions, and reports violations of the operationalized
legal requirements LR1-LR6 and principles P1-P3.
"""

__version__ = "0.1.0"
