"""Shared test builders for ledger scenarios."""

from __future__ import annotations

from ehrshare.crypto import (
    EmergencyRequestMessage,
    KeyPair,
    PermissionMessage,
    hash_typed_emergency,
    hash_typed_permission,
    sign_digest,
)
from ehrshare.ledger import GasModel, PatientLedger, SimClock

GAS = GasModel.load()


def permission_sig(signer: KeyPair, ledger, rid, grantee, expiration, wrapped_key, nonce) -> bytes:
    msg = PermissionMessage.for_wrapped_key(rid, grantee, expiration, wrapped_key, nonce)
    return sign_digest(signer.private_scalar, hash_typed_permission(ledger.domain, msg)).to_bytes()


def emergency_sig(signer: KeyPair, ledger, rid, code, request_time, skew) -> bytes:
    msg = EmergencyRequestMessage(rid, code, request_time, skew)
    return sign_digest(signer.private_scalar, hash_typed_emergency(ledger.domain, msg)).to_bytes()


def new_ledger(patient: KeyPair, now: int = 1_000_000, profile: str = "l1", address: bytes | None = None):
    return PatientLedger(patient.address, clock=SimClock(now), gas=GAS, profile=profile, address=address)


def digest_of(i: int) -> bytes:
    return (i + 1).to_bytes(32, "big")
