"""ECIES on secp256k1 for wrapping record keys.

Ephemeral ECDH shared x-coordinate -> ANSI X9.63 KDF (SHA-256) -> 48 bytes,
split into a 16-byte AES-128-CTR key and a 32-byte HMAC-SHA-256 key. The MAC
covers ``iv || ciphertext``. Wire layout: ``ephemeral_public(65) || iv(16) ||
ciphertext || mac(32)``.
"""

from __future__ import annotations

import hmac
import hashlib
from dataclasses import dataclass

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.kdf.x963kdf import X963KDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ..errors import IntegrityError, InvalidPointError, ParseError
from .aead import SymmetricKey
from .keys import CURVE_ORDER, PUBLIC_KEY_SIZE, validate_public_key
from .rng import EntropySource, draw, system_rng

IV_SIZE = 16
MAC_SIZE = 32
DEM_KEY_SIZE = 16
MIN_WRAPPED_SIZE = PUBLIC_KEY_SIZE + IV_SIZE + 1 + MAC_SIZE


@dataclass(frozen=True)
class WrappedKey:
    ephemeral_public: bytes
    iv: bytes
    ciphertext: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self.ephemeral_public + self.iv + self.ciphertext + self.mac

    @classmethod
    def from_bytes(cls, data: bytes) -> "WrappedKey":
        data = bytes(data)
        if len(data) < MIN_WRAPPED_SIZE:
            raise ParseError(f"wrapped key too short ({len(data)} bytes)")
        eph = data[:PUBLIC_KEY_SIZE]
        try:
            validate_public_key(eph)
        except InvalidPointError as exc:
            raise ParseError(f"malformed ephemeral key: {exc}") from exc
        iv = data[PUBLIC_KEY_SIZE : PUBLIC_KEY_SIZE + IV_SIZE]
        return cls(eph, iv, data[PUBLIC_KEY_SIZE + IV_SIZE : -MAC_SIZE], data[-MAC_SIZE:])

    def __len__(self) -> int:
        return len(self.to_bytes())


def _derive(shared_x: bytes) -> tuple[bytes, bytes]:
    okm = X963KDF(algorithm=hashes.SHA256(), length=DEM_KEY_SIZE + MAC_SIZE, sharedinfo=None).derive(shared_x)
    return okm[:DEM_KEY_SIZE], okm[DEM_KEY_SIZE:]


def _ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return ctx.update(data) + ctx.finalize()


def _mac(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    return hmac.new(key, iv + ciphertext, hashlib.sha256).digest()


def _load_public(public_key: bytes) -> ec.EllipticCurvePublicKey:
    public_key = validate_public_key(public_key)
    return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256K1(), public_key)


def wrap_key(recipient_public: bytes, key: SymmetricKey, rng: EntropySource = system_rng) -> WrappedKey:
    peer = _load_public(recipient_public)
    while True:
        scalar = int.from_bytes(draw(rng, 32), "big")
        if 1 <= scalar < CURVE_ORDER:
            break
    eph = ec.derive_private_key(scalar, ec.SECP256K1())
    eph_public = eph.public_key().public_bytes(Encoding.X962, PublicFormat.UncompressedPoint)
    enc_key, mac_key = _derive(eph.exchange(ec.ECDH(), peer))
    iv = draw(rng, IV_SIZE)
    ct = _ctr(enc_key, iv, key.key)
    return WrappedKey(eph_public, iv, ct, _mac(mac_key, iv, ct))


def unwrap_key(recipient_private: int, wrapped: WrappedKey | bytes) -> SymmetricKey:
    if not isinstance(wrapped, WrappedKey):
        wrapped = WrappedKey.from_bytes(wrapped)
    try:
        peer = _load_public(wrapped.ephemeral_public)
    except InvalidPointError as exc:
        raise ParseError(f"malformed ephemeral key: {exc}") from exc
    priv = ec.derive_private_key(recipient_private, ec.SECP256K1())
    enc_key, mac_key = _derive(priv.exchange(ec.ECDH(), peer))
    if not hmac.compare_digest(_mac(mac_key, wrapped.iv, wrapped.ciphertext), wrapped.mac):
        raise IntegrityError("wrapped key MAC mismatch")
    plain = _ctr(enc_key, wrapped.iv, wrapped.ciphertext)
    if len(plain) != 32:
        raise IntegrityError("wrapped key has wrong length")
    return SymmetricKey(plain)

