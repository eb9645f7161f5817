"""Object identifiers used across the RPKI object suite."""

SHA256 = "2.16.840.1.101.3.4.2.1"
RSA_ENCRYPTION = "1.2.840.113549.1.1.1"
SHA256_WITH_RSA = "1.2.840.113549.1.1.11"

# CMS
SIGNED_DATA = "1.2.840.113549.1.7.2"
CT_ROA = "1.2.840.113549.1.9.16.1.24"
CT_MANIFEST = "1.2.840.113549.1.9.16.1.26"
CT_GBR = "1.2.840.113549.1.9.16.1.35"
CT_ASPA = "1.2.840.113549.1.9.16.1.49"
ATTR_CONTENT_TYPE = "1.2.840.113549.1.9.3"
ATTR_MESSAGE_DIGEST = "1.2.840.113549.1.9.4"
ATTR_SIGNING_TIME = "1.2.840.113549.1.9.5"

# X.509 name attributes
AT_COMMON_NAME = "2.5.4.3"
AT_SERIAL_NUMBER = "2.5.4.5"
AT_ORGANIZATION_NAME = "2.5.4.10"

# X.509 extensions
EXT_SUBJECT_KEY_ID = "2.5.29.14"
EXT_KEY_USAGE = "2.5.29.15"
EXT_BASIC_CONSTRAINTS = "2.5.29.19"
EXT_CRL_NUMBER = "2.5.29.20"
EXT_CRL_DISTRIBUTION_POINTS = "2.5.29.31"
EXT_CERTIFICATE_POLICIES = "2.5.29.32"
EXT_AUTHORITY_KEY_ID = "2.5.29.35"
EXT_AIA = "1.3.6.1.5.5.7.1.1"
EXT_SIA = "1.3.6.1.5.5.7.1.11"
EXT_IP_RESOURCES = "1.3.6.1.5.5.7.1.7"
EXT_AS_RESOURCES = "1.3.6.1.5.5.7.1.8"

# access method / policy OIDs
AD_CA_ISSUERS = "1.3.6.1.5.5.7.48.2"
AD_CA_REPOSITORY = "1.3.6.1.5.5.7.48.5"
AD_RPKI_MANIFEST = "1.3.6.1.5.5.7.48.10"
AD_SIGNED_OBJECT = "1.3.6.1.5.5.7.48.11"
AD_RPKI_NOTIFY = "1.3.6.1.5.5.7.48.13"
POLICY_RPKI = "1.3.6.1.5.5.7.14.2"

ECONTENT_BY_KIND = {
    "roa": CT_ROA,
    "mft": CT_MANIFEST,
    "gbr": CT_GBR,
    "aspa": CT_ASPA,
}
