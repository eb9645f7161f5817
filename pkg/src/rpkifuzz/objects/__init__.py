"""Data models and bit-exact codecs for every object kind relying parties digest."""

from .names import NameAttr, encode_name, decode_name, common_name
from .resources import Prefix, AsRange, INHERIT
from .cert import CertContent, SiaInfo, build_certificate, parse_certificate, CertFieldIndex
from .crl import CrlContent, build_crl, parse_crl, CrlFieldIndex
from .roa import RoaContent, RoaFamilyBlock, RoaPrefix, encode_roa_econtent, decode_roa_econtent
from .manifest import ManifestContent, encode_manifest_econtent, decode_manifest_econtent
from .gbr import GbrContent, render_vcard, parse_vcard
from .aspa import AspaContent, encode_aspa_econtent, decode_aspa_econtent
from .cms import SignedObject, cms_assemble, parse_signed_object
from .rrdp import RrdpDocument, render_rrdp, parse_rrdp, DeltaElement, NotificationDelta
from .tal import TalDocument, render_tal, parse_tal

__all__ = [
    "NameAttr", "encode_name", "decode_name", "common_name",
    "Prefix", "AsRange", "INHERIT",
    "CertContent", "SiaInfo", "build_certificate", "parse_certificate", "CertFieldIndex",
    "CrlContent", "build_crl", "parse_crl", "CrlFieldIndex",
    "RoaContent", "RoaFamilyBlock", "RoaPrefix", "encode_roa_econtent", "decode_roa_econtent",
    "ManifestContent", "encode_manifest_econtent", "decode_manifest_econtent",
    "GbrContent", "render_vcard", "parse_vcard",
    "AspaContent", "encode_aspa_econtent", "decode_aspa_econtent",
    "SignedObject", "cms_assemble", "parse_signed_object",
    "RrdpDocument", "render_rrdp", "parse_rrdp", "DeltaElement", "NotificationDelta",
    "TalDocument", "render_tal", "parse_tal",
]
