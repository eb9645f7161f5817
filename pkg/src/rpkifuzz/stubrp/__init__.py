"""Bundled stub relying party.

A minimal, strictly conforming validator that follows the standard processing
order (trust anchor, RRDP fetch, manifest integrity, per-object signature
chains), applies the path-traversal check to publish URIs, and exposes quirk
flags that emulate the behavioral differences observed across production
validators.  The whole test suite runs against it without third-party
binaries; signature verification is pure modular arithmetic, independent of
the signing stack used to build repositories.
"""

from .quirks import PROFILES, QUIRK_FLAGS
from .validator import StubValidator, check_path, rsa_verify_sha256

__all__ = ["StubValidator", "check_path", "rsa_verify_sha256", "PROFILES", "QUIRK_FLAGS"]
