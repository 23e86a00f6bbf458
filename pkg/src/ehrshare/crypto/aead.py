"""Record encryption with AES-256-GCM and the content digest committed on-ledger."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import AuthenticationError
from .rng import EntropySource, draw, system_rng

KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16

# Version identifier; constant width so AD length never varies per record.
AD_MINIMAL = b"\x00\x01"
AD_SIZE = len(AD_MINIMAL)


@dataclass(frozen=True)
class SymmetricKey:
    key: bytes

    def __post_init__(self) -> None:
        if len(self.key) != KEY_SIZE:
            raise ValueError(f"symmetric key must be {KEY_SIZE} bytes, got {len(self.key)}")

    def __repr__(self) -> str:
        return "SymmetricKey(<redacted>)"


@dataclass(frozen=True)
class EncryptedEnvelope:
    """The off-ledger unit of storage: ciphertext, tag, nonce and associated data."""

    ciphertext: bytes
    tag: bytes
    nonce: bytes
    associated_data: bytes = AD_MINIMAL

    def __post_init__(self) -> None:
        if len(self.tag) != TAG_SIZE:
            raise ValueError(f"tag must be {TAG_SIZE} bytes")
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")

    @property
    def size(self) -> int:
        return len(self.ciphertext) + TAG_SIZE + NONCE_SIZE + len(self.associated_data)


def generate_symmetric_key(rng: EntropySource = system_rng) -> SymmetricKey:
    return SymmetricKey(draw(rng, KEY_SIZE))


def encrypt_record(
    key: SymmetricKey,
    plaintext: bytes,
    associated_data: bytes = AD_MINIMAL,
    rng: EntropySource = system_rng,
    *,
    nonce: bytes | None = None,
) -> EncryptedEnvelope:
    """Seal ``plaintext`` under ``key``.

    ``nonce`` is a test-mode override for known-answer vectors; normal callers
    leave it unset and a fresh 96-bit nonce is drawn from ``rng``.
    """
    if nonce is None:
        nonce = draw(rng, NONCE_SIZE)
    elif len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
    sealed = AESGCM(key.key).encrypt(nonce, bytes(plaintext), associated_data)
    return EncryptedEnvelope(
        ciphertext=sealed[:-TAG_SIZE],
        tag=sealed[-TAG_SIZE:],
        nonce=nonce,
        associated_data=associated_data,
    )


def decrypt_record(key: SymmetricKey, envelope: EncryptedEnvelope) -> bytes:
    try:
        return AESGCM(key.key).decrypt(
            envelope.nonce, envelope.ciphertext + envelope.tag, envelope.associated_data
        )
    except InvalidTag:
        # Wrong key and tampering are indistinguishable here by design.
        raise AuthenticationError("authentication failed") from None


def compute_digest(envelope) -> bytes:
    """SHA-256 over ``C || T || N || AD`` in that order."""
    h = hashlib.sha256()
    h.update(envelope.ciphertext)
    h.update(envelope.tag)
    h.update(envelope.nonce)
    h.update(envelope.associated_data)
    return h.digest()
