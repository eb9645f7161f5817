"""Quirk flags and per-validator profiles.

The strict baseline rejects everything the RFCs call invalid and accepts
everything they permit.  Each flag moves one decision toward a behavior
observed in a production validator (2023-era releases); profiles bundle the
flags that reproduce one validator's column of the observed accept/reject
matrix.
"""

QUIRK_FLAGS = (
    # tolerances (accept what strict rejects)
    "tolerate-expired-crl",
    "tolerate-missing-crl-number",
    "tolerate-missing-crl-fields",
    "tolerate-bad-maxlength",
    "tolerate-session-mismatch",
    "tolerate-duplicate-serial",
    "tolerate-noncritical-certext",
    # extra strictness / drops (reject what strict accepts)
    "reject-repeated-family",
    "reject-asid-inherit",
    "reject-nonstandard-issuer-attrs",
    "drop-overlong-prefix",
)

PROFILES = {
    "strict": frozenset(),
    "routinator": frozenset(
        {"reject-repeated-family", "tolerate-duplicate-serial", "tolerate-noncritical-certext"}
    ),
    "fort": frozenset({"reject-nonstandard-issuer-attrs"}),
    "octorpki": frozenset(
        {
            "tolerate-expired-crl",
            "tolerate-missing-crl-number",
            "tolerate-missing-crl-fields",
            "tolerate-bad-maxlength",
            "tolerate-session-mismatch",
            "tolerate-duplicate-serial",
            "tolerate-noncritical-certext",
            "drop-overlong-prefix",
        }
    ),
    "rpki-client": frozenset({"tolerate-missing-crl-number", "reject-asid-inherit"}),
}


def resolve_quirks(profile: str | None, extra_flags=()) -> frozenset[str]:
    flags = set(PROFILES.get(profile or "strict", frozenset()))
    for flag in extra_flags:
        if flag not in QUIRK_FLAGS:
            raise ValueError(f"unknown quirk flag {flag!r}")
        flags.add(flag)
    return frozenset(flags)
