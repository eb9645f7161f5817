"""The eight repository-dependent fields and the replacement strategies.

A generated certificate or CRL cannot simply be dropped into a repository:
these fields must agree with the surrounding scaffold or validators discard
the object before reading anything else.  Replacement strategies decide which
of them the scaffolder overwrites and re-signs.
"""

from __future__ import annotations

import enum

REPLACEABLE_FIELDS = (
    "signature",
    "parentKeyIdentifier",
    "crlLocation",
    "issuerName",
    "issuerLocation",
    "repositoryLocation",
    "manifestLocation",
    "notificationLocation",
)

# subset meaningful on a CRL (no SIA/AIA/CRLDP there)
CRL_FIELDS = ("signature", "parentKeyIdentifier", "issuerName")

NONE_URI = "none://"


class ReplacementStrategy(enum.Enum):
    OPTIMISTIC = "optimistic"
    TARGETED = "targeted"
    PARSEABLE = "parseable"
    NONE = "none"
