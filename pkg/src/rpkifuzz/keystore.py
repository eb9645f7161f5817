"""Precomputed RSA-2048 signing identities.

Key generation dominates repository construction cost (one 2048-bit pair is
tens of milliseconds; a PKCS#1 signature is well under one), so campaigns load
keys from a pregenerated pool instead of minting them per object.  Key
uniqueness across test cases is a non-goal: the pool wraps with a warning
rather than stalling a long campaign.
"""

from __future__ import annotations

import hashlib
import logging
import random
import struct
import threading
from dataclasses import dataclass, field

import gmpy2
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

log = logging.getLogger(__name__)

_POOL_MAGIC = b"RPKIFUZZ-KEYPOOL"
_POOL_VERSION = 1

# Global signature counter; the scaffold reads deltas of this to report how
# many fresh signatures one repository build needed.
_sign_calls = 0
_sign_lock = threading.Lock()


def sign_call_count() -> int:
    return _sign_calls


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class PoolFileError(ValueError):
    """Raised when a pool file is corrupt or truncated; never a partial pool."""


@dataclass(frozen=True)
class KeyHandle:
    key_id: bytes  # SHA-1 of the subjectPublicKey bits (X.509 key identifier)
    spki: bytes  # DER SubjectPublicKeyInfo
    private: rsa.RSAPrivateKey = field(repr=False, compare=False)

    def private_der(self) -> bytes:
        return self.private.private_bytes(
            serialization.Encoding.DER,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )


def key_id_for_spki(spki: bytes) -> bytes:
    """Recompute the X.509 key identifier from a DER SubjectPublicKeyInfo.

    RFC 6487 mandates method (1) of RFC 5280 4.2.1.2: SHA-1 over the value of
    the subjectPublicKey BIT STRING, excluding tag, length and unused-bits.
    """
    from . import der

    tree = der.der_decode(spki)
    return hashlib.sha1(der.bit_string_content(tree.child(1))).digest()


def _handle_from_private(key: rsa.RSAPrivateKey) -> KeyHandle:
    spki = key.public_key().public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )
    return KeyHandle(key_id=key_id_for_spki(spki), spki=spki, private=key)


def sign(key: KeyHandle, message: bytes) -> bytes:
    """RSA PKCS#1 v1.5 over SHA-256; deterministic for (key, message)."""
    global _sign_calls
    with _sign_lock:
        _sign_calls += 1
    return key.private.sign(message, padding.PKCS1v15(), hashes.SHA256())


def verify(spki: bytes, message: bytes, signature: bytes) -> bool:
    pub = serialization.load_der_public_key(spki)
    try:
        pub.verify(signature, message, padding.PKCS1v15(), hashes.SHA256())
        return True
    except Exception:
        return False


# ---------------------------------------------------------------------------
# key generation

def generate_key() -> KeyHandle:
    return _handle_from_private(rsa.generate_private_key(public_exponent=65537, key_size=2048))


def _seeded_prime(rng: random.Random, bits: int, avoid: int = 0) -> int:
    """Deterministic prime: next_prime over a seeded candidate stream."""
    while True:
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        p = int(gmpy2.next_prime(cand))
        if p.bit_length() != bits or p == avoid:
            continue
        if gmpy2.gcd(p - 1, 65537) != 1:
            continue
        return p


def generate_key_seeded(rng: random.Random) -> KeyHandle:
    e = 65537
    p = _seeded_prime(rng, 1024)
    q = _seeded_prime(rng, 1024, avoid=p)
    if p < q:
        p, q = q, p
    n = p * q
    d = int(gmpy2.invert(e, gmpy2.lcm(p - 1, q - 1)))
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=d % (p - 1),
        dmq1=d % (q - 1),
        iqmp=int(gmpy2.invert(q, p)),
        public_numbers=rsa.RSAPublicNumbers(e=e, n=n),
    )
    return _handle_from_private(numbers.private_key())


# ---------------------------------------------------------------------------
# pool

class KeyPool:
    """Ordered collection of key handles with an atomic acquire cursor."""

    def __init__(self, keys: list[KeyHandle]):
        if not keys:
            raise ValueError("empty key pool")
        self.keys = keys
        self._cursor = 0
        self._lock = threading.Lock()
        self._wrapped = False
        self._by_spki = {k.spki: k for k in keys}

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def cursor(self) -> int:
        return self._cursor

    def acquire(self) -> KeyHandle:
        with self._lock:
            if self._cursor >= len(self.keys):
                if not self._wrapped:
                    log.warning("key pool exhausted after %d keys; wrapping", len(self.keys))
                    self._wrapped = True
                self._cursor = 0
            key = self.keys[self._cursor]
            self._cursor += 1
            return key

    def lookup_spki(self, spki: bytes) -> KeyHandle | None:
        return self._by_spki.get(spki)


def pool_create(n: int, seed: int | None = None) -> KeyPool:
    if n < 1:
        raise ValueError("pool size must be >= 1")
    if seed is None:
        keys = [generate_key() for _ in range(n)]
    else:
        rng = random.Random(seed)
        keys = [generate_key_seeded(rng) for _ in range(n)]
    ids = {k.key_id for k in keys}
    if len(ids) != n:
        # astronomically unlikely; regenerating beats silently shipping dupes
        raise RuntimeError("duplicate key ids in freshly generated pool")
    return KeyPool(keys)


def pool_save(pool: KeyPool, path) -> None:
    """Versioned header + length-prefixed PKCS#8 DER private keys."""
    blob = bytearray()
    blob += _POOL_MAGIC
    blob += struct.pack(">HI", _POOL_VERSION, len(pool.keys))
    for key in pool.keys:
        der_bytes = key.private_der()
        blob += struct.pack(">I", len(der_bytes))
        blob += der_bytes
    with open(path, "wb") as fh:
        fh.write(blob)


def pool_load(path) -> KeyPool:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_POOL_MAGIC) + 6 or not blob.startswith(_POOL_MAGIC):
        raise PoolFileError("pool file corrupt: bad header")
    version, count = struct.unpack_from(">HI", blob, len(_POOL_MAGIC))
    if version != _POOL_VERSION:
        raise PoolFileError(f"pool file corrupt: unsupported version {version}")
    pos = len(_POOL_MAGIC) + 6
    keys = []
    for _ in range(count):
        if pos + 4 > len(blob):
            raise PoolFileError("pool file corrupt: truncated")
        (length,) = struct.unpack_from(">I", blob, pos)
        pos += 4
        if pos + length > len(blob):
            raise PoolFileError("pool file corrupt: truncated")
        try:
            private = serialization.load_der_private_key(blob[pos : pos + length], password=None)
        except Exception as exc:
            raise PoolFileError(f"pool file corrupt: bad key DER ({exc})") from exc
        if not isinstance(private, rsa.RSAPrivateKey):
            raise PoolFileError("pool file corrupt: non-RSA key")
        keys.append(_handle_from_private(private))
        pos += length
    if pos != len(blob):
        raise PoolFileError("pool file corrupt: trailing bytes")
    return KeyPool(keys)
