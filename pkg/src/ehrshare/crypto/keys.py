"""secp256k1 key pairs, keccak-256 and address derivation."""

from __future__ import annotations

from dataclasses import dataclass

import coincurve
from Crypto.Hash import keccak

from ..errors import InvalidPointError
from .rng import EntropySource, draw, system_rng

# secp256k1 group order
CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
HALF_ORDER = CURVE_ORDER // 2
PUBLIC_KEY_SIZE = 65
ADDRESS_SIZE = 20


def keccak256(*parts: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    for part in parts:
        h.update(part)
    return h.digest()


def validate_public_key(public_key: bytes) -> bytes:
    """Return ``public_key`` if it is a valid uncompressed point, else raise."""
    public_key = bytes(public_key)
    if len(public_key) != PUBLIC_KEY_SIZE or public_key[0] != 0x04:
        raise InvalidPointError("expected 65-byte uncompressed point with 0x04 prefix")
    try:
        coincurve.PublicKey(public_key)
    except Exception as exc:
        raise InvalidPointError("point is not on secp256k1") from exc
    return public_key


def address_from_public_key(public_key: bytes) -> bytes:
    """Last 20 bytes of keccak-256 over the 64-byte X||Y coordinates."""
    public_key = validate_public_key(public_key)
    return keccak256(public_key[1:])[-ADDRESS_SIZE:]


@dataclass(frozen=True)
class KeyPair:
    private_scalar: int
    public_point: bytes
    address: bytes

    @classmethod
    def from_scalar(cls, scalar: int) -> "KeyPair":
        if not 1 <= scalar < CURVE_ORDER:
            raise ValueError("private scalar out of range")
        priv = coincurve.PrivateKey(scalar.to_bytes(32, "big"))
        public = priv.public_key.format(compressed=False)
        return cls(scalar, public, address_from_public_key(public))

    @classmethod
    def generate(cls, rng: EntropySource = system_rng) -> "KeyPair":
        while True:
            scalar = int.from_bytes(draw(rng, 32), "big")
            if 1 <= scalar < CURVE_ORDER:
                return cls.from_scalar(scalar)

    @property
    def private_bytes(self) -> bytes:
        return self.private_scalar.to_bytes(32, "big")

    def __repr__(self) -> str:
        return f"KeyPair(address=0x{self.address.hex()})"
