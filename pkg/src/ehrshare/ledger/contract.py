"""In-process simulation of the single-patient authorization contract.

Every mutating call is a "transaction": it either reverts with the contract's
require string (no state change, no event, no gas) or commits state, appends
exactly one event and charges the profile's gas figure. Callers identify
themselves by address; there is no transaction signing layer.
"""

from __future__ import annotations

import threading
from typing import Iterable

from ..crypto.keys import keccak256
from ..crypto.signing import recover_signer
from ..crypto.typed_data import (
    DEFAULT_DOMAIN_NAME,
    DEFAULT_DOMAIN_VERSION,
    EmergencyRequestMessage,
    PermissionMessage,
    TypedDataDomain,
    encode_address,
    encode_uint,
    hash_typed_emergency,
    hash_typed_permission,
)
from ..errors import LedgerRevert, SignatureError
from .clock import SimClock
from .events import EventKind, LedgerEvent
from .gas import GasModel, Receipt
from .state import EmergencyGrant, LedgerState, Permission, RecordMetadata

EMERGENCY_DURATION = 2 * 3600
CONFIRMATION_WINDOW = 24 * 3600
ZERO_ADDRESS = bytes(20)


def _uint(value: int, bits: int, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < (1 << bits):
        raise LedgerRevert(f"Invalid argument: {name} is not a uint{bits}")
    return value


def _fixed(value: bytes, size: int, name: str) -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != size:
        raise LedgerRevert(f"Invalid argument: {name} must be {size} bytes")
    return bytes(value)


def nonce_hash(patient: bytes, nonce: int) -> bytes:
    """``keccak256(abi.encodePacked(patient, nonce))``."""
    return keccak256(patient, nonce.to_bytes(32, "big"))


def emergency_grant_id(rid: int, request_time: int, physician1: bytes, physician2: bytes) -> bytes:
    """``keccak256(abi.encode(rid, requestTime, physician1, physician2))``."""
    return keccak256(
        encode_uint(rid), encode_uint(request_time, 64), encode_address(physician1), encode_address(physician2)
    )


class PatientLedger:
    def __init__(
        self,
        patient: bytes,
        registry=None,
        clock: SimClock | None = None,
        gas: GasModel | None = None,
        profile: str = "l1",
        address: bytes | None = None,
        chain_id: int = 1,
    ) -> None:
        self.patient = _fixed(patient, 20, "patient")
        self.registry = registry
        self.clock = clock if clock is not None else SimClock()
        self.gas = gas if gas is not None else GasModel.load()
        self.profile = profile
        self.address = address if address is not None else keccak256(b"ledger", self.patient)[-20:]
        self.chain_id = chain_id
        self.state = LedgerState(self.patient)
        self.events: list[LedgerEvent] = []
        self.receipts: list[Receipt] = []
        self._lock = threading.RLock()
        self._charge("deploy", self.patient)

    # -- plumbing ---------------------------------------------------------

    @property
    def domain(self) -> TypedDataDomain:
        return TypedDataDomain(DEFAULT_DOMAIN_NAME, DEFAULT_DOMAIN_VERSION, self.chain_id, self.address)

    @property
    def now(self) -> int:
        return self.clock.now

    @property
    def gas_used(self) -> int:
        return sum(r.gas for r in self.receipts)

    def _charge(self, operation: str, caller: bytes) -> int:
        gas = self.gas.gas_of(operation, self.profile)
        self.receipts.append(Receipt(operation, gas, caller, self.now))
        return gas

    def _emit(self, kind: EventKind, **payload) -> LedgerEvent:
        ev = LedgerEvent(len(self.events) + 1, self.now, kind, payload)
        self.events.append(ev)
        return ev

    def _only_patient(self, caller: bytes) -> None:
        if caller != self.patient:
            raise LedgerRevert("Only patient")

    def _valid_record(self, rid: int) -> int:
        if not isinstance(rid, int) or not 0 < rid <= self.state.record_counter:
            raise LedgerRevert("Invalid record ID")
        return rid

    def _permission(self, rid: int, who: bytes) -> Permission:
        return self.state.permissions.get((rid, who), Permission())

    def _check_digest(self, digest: bytes) -> bytes:
        digest = _fixed(digest, 32, "digest")
        if not any(digest):
            raise LedgerRevert("Invalid digest")
        return digest

    # -- transactions -----------------------------------------------------

    def add_record(self, caller: bytes, ptr: str, digest: bytes, wrapped_key: bytes) -> int:
        with self._lock:
            self._only_patient(caller)
            digest = self._check_digest(digest)
            first = self.state.record_counter == 0
            self.state.record_counter += 1
            rid = self.state.record_counter
            self.state.records[rid] = RecordMetadata(str(ptr), digest, bytes(wrapped_key), self.now, self.now)
            self._emit(EventKind.RecordAdded, rid=rid, digest=digest, ptr=str(ptr), wrappedKeyOwner=bytes(wrapped_key))
            self._charge("addRecordFirst" if first else "addRecord", caller)
            return rid

    def grant_permission_by_sig(
        self, caller: bytes, rid: int, expiration: int, wrapped_key: bytes, nonce: int, signature: bytes
    ) -> None:
        with self._lock:
            self._valid_record(rid)
            _uint(expiration, 64, "expiration")
            _uint(nonce, 256, "nonce")
            caller = _fixed(caller, 20, "caller")
            nh = nonce_hash(self.patient, nonce)
            if nh in self.state.used_nonces:
                raise LedgerRevert("Nonce already used")
            msg = PermissionMessage.for_wrapped_key(rid, caller, expiration, bytes(wrapped_key), nonce)
            try:
                signer = recover_signer(hash_typed_permission(self.domain, msg), bytes(signature))
            except SignatureError:
                signer = None
            if signer != self.patient:
                raise LedgerRevert("Invalid signature")
            if not expiration > self.now:
                raise LedgerRevert("Expiration must be future")
            self.state.used_nonces.add(nh)
            self.state.permissions[(rid, caller)] = Permission(expiration, False, bytes(wrapped_key))
            self._emit(
                EventKind.PermissionGranted,
                rid=rid,
                grantee=caller,
                expiration=expiration,
                wrappedKey=bytes(wrapped_key),
                nonceHash=nh,
            )
            self._charge("grantPermissionBySig", caller)

    def update_record(
        self, caller: bytes, rid: int, new_ptr: str, new_digest: bytes, new_owner_wrapped_key: bytes
    ) -> None:
        with self._lock:
            self._only_patient(caller)
            self._valid_record(rid)
            new_digest = self._check_digest(new_digest)
            old = self.state.records[rid]
            self.state.records[rid] = RecordMetadata(
                str(new_ptr), new_digest, bytes(new_owner_wrapped_key), old.created_at, self.now
            )
            self._emit(
                EventKind.RecordUpdated,
                rid=rid,
                digest=new_digest,
                ptr=str(new_ptr),
                wrappedKeyOwner=bytes(new_owner_wrapped_key),
            )
            self._charge("updateRecord", caller)

    def revoke_permission(self, caller: bytes, rid: int, grantee: bytes) -> None:
        with self._lock:
            self._only_patient(caller)
            self._valid_record(rid)
            perm = self._permission(rid, grantee)
            if not perm.exists:
                raise LedgerRevert("No permission to revoke")
            self.state.permissions[(rid, grantee)] = Permission(perm.expiration, True, perm.wrapped_key)
            self._emit(EventKind.PermissionRevoked, rid=rid, grantee=grantee)
            self._charge("revokePermission", caller)

    def set_emergency_physician(self, caller: bytes, physician: bytes, enabled: bool) -> None:
        with self._lock:
            self._only_patient(caller)
            physician = _fixed(physician, 20, "physician")
            if enabled:
                self.state.emergency_physicians.add(physician)
            else:
                self.state.emergency_physicians.discard(physician)
            self._emit(EventKind.EmergencyPhysicianSet, physician=physician, enabled=bool(enabled))
            self._charge("setEmergencyPhysician", caller)

    def emergency_grant_access(
        self,
        caller: bytes,
        rid: int,
        physician2: bytes,
        justification_code: int,
        request_time: int,
        max_skew_seconds: int,
        wrapped_key1: bytes,
        wrapped_key2: bytes,
        signature1: bytes,
        signature2: bytes,
    ) -> bytes:
        with self._lock:
            self._valid_record(rid)
            _uint(justification_code, 8, "justificationCode")
            _uint(request_time, 64, "requestTime")
            _uint(max_skew_seconds, 64, "maxSkewSeconds")
            roster = self.state.emergency_physicians
            if caller not in roster:
                raise LedgerRevert("Not emergency physician")
            if physician2 not in roster:
                raise LedgerRevert("Not emergency physician")
            if caller == physician2:
                raise LedgerRevert("Different physicians required")
            if abs(self.now - request_time) > max_skew_seconds:
                raise LedgerRevert("Request time outside tolerance")
            digest = hash_typed_emergency(
                self.domain, EmergencyRequestMessage(rid, justification_code, request_time, max_skew_seconds)
            )
            try:
                signer1 = recover_signer(digest, bytes(signature1))
                signer2 = recover_signer(digest, bytes(signature2))
            except SignatureError:
                signer1 = signer2 = None
            if signer1 != caller or signer2 != physician2:
                raise LedgerRevert("Invalid signatures")

            expiration = self.now + EMERGENCY_DURATION
            self.state.permissions[(rid, caller)] = Permission(expiration, False, bytes(wrapped_key1))
            self.state.permissions[(rid, physician2)] = Permission(expiration, False, bytes(wrapped_key2))
            grant_id = emergency_grant_id(rid, request_time, caller, physician2)
            self.state.emergency_grants[grant_id] = EmergencyGrant(rid, caller, physician2, expiration, False)
            self._emit(
                EventKind.EmergencyAccessGranted,
                grantId=grant_id,
                rid=rid,
                physician1=caller,
                physician2=physician2,
                justificationCode=justification_code,
                expiration=expiration,
                requestTime=request_time,
                wrappedKey1=bytes(wrapped_key1),
                wrappedKey2=bytes(wrapped_key2),
            )
            self._charge("emergencyGrantAccess", caller)
            return grant_id

    def confirm_emergency_access(self, caller: bytes, grant_id: bytes, justification_hash: bytes) -> None:
        with self._lock:
            grant_id = _fixed(grant_id, 32, "grantId")
            justification_hash = _fixed(justification_hash, 32, "justificationHash")
            grant = self.state.emergency_grants.get(grant_id, EmergencyGrant())
            if caller not in (grant.physician1, grant.physician2) or caller == ZERO_ADDRESS:
                raise LedgerRevert("Not authorized physician")
            if grant.confirmed:
                raise LedgerRevert("Already confirmed")
            if not self.now <= grant.expiration + CONFIRMATION_WINDOW:
                raise LedgerRevert("Confirmation window expired")
            self.state.emergency_grants[grant_id] = EmergencyGrant(
                grant.record_id, grant.physician1, grant.physician2, grant.expiration, True
            )
            self._emit(
                EventKind.EmergencyAccessConfirmed,
                grantId=grant_id,
                rid=grant.record_id,
                physician=caller,
                justificationHash=justification_hash,
            )
            self._charge("confirmEmergencyAccess", caller)

    def log_access(self, caller: bytes, rid: int, details_hash: bytes) -> None:
        with self._lock:
            details_hash = _fixed(details_hash, 32, "detailsHash")
            if not self.has_valid_permission(caller, rid):
                raise LedgerRevert("Not authorized")
            self._emit(EventKind.AccessLogged, rid=rid, accessor=caller, detailsHash=details_hash)
            self._charge("logAccess", caller)

    # -- views ------------------------------------------------------------

    def has_valid_permission(self, caller: bytes, rid: int) -> bool:
        self._valid_record(rid)
        if caller == self.patient:
            return True
        p = self._permission(rid, caller)
        return not p.revoked and p.expiration > 0 and p.expiration > self.now

    def get_record_metadata(self, caller: bytes, rid: int) -> tuple[str, bytes]:
        if not self.has_valid_permission(caller, rid):
            raise LedgerRevert("Not authorized")
        rec = self.state.records[rid]
        return rec.storage_pointer, rec.content_digest

    def get_owner_wrapped_key(self, caller: bytes, rid: int) -> bytes:
        self._only_patient(caller)
        self._valid_record(rid)
        return self.state.records[rid].wrapped_key_owner

    def permissions(self, rid: int, grantee: bytes) -> Permission:
        """Public mapping getter: readable by anyone."""
        self._valid_record(rid)
        return self._permission(rid, grantee)

    get_grantee_wrapped_key = permissions

    def used_nonces(self, nonce_hash_: bytes) -> bool:
        return nonce_hash_ in self.state.used_nonces

    def is_nonce_used(self, nonce: int) -> bool:
        return nonce_hash(self.patient, nonce) in self.state.used_nonces

    def emergency_physicians(self, physician: bytes) -> bool:
        return physician in self.state.emergency_physicians

    def emergency_grants(self, grant_id: bytes) -> EmergencyGrant:
        return self.state.emergency_grants.get(grant_id, EmergencyGrant())

    @property
    def record_count(self) -> int:
        return self.state.record_counter

    def query_events(
        self,
        kind: EventKind | str | Iterable[EventKind | str] | None = None,
        rid: int | None = None,
        address: bytes | None = None,
        start: int | None = None,
        end: int | None = None,
    ) -> list[LedgerEvent]:
        """Events matching every given filter, in sequence order. ``start``/``end`` are inclusive."""
        if kind is None:
            kinds = None
        elif isinstance(kind, (str, EventKind)):
            kinds = {EventKind(kind)}
        else:
            kinds = {EventKind(k) for k in kind}
        out = []
        for ev in list(self.events):
            if kinds is not None and ev.kind not in kinds:
                continue
            if rid is not None and ev.payload.get("rid") != rid:
                continue
            if address is not None and not ev.involves(address):
                continue
            if start is not None and ev.sequence < start:
                continue
            if end is not None and ev.sequence > end:
                continue
            out.append(ev)
        return out

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "address": "0x" + self.address.hex(),
            "chainId": self.chain_id,
            "profile": self.profile,
            "state": self.state.to_dict(),
            "events": [ev.to_json() for ev in self.events],
            "receipts": [
                {"op": r.operation, "gas": r.gas, "caller": "0x" + r.caller.hex(), "time": r.time}
                for r in self.receipts
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, registry=None, clock: SimClock | None = None, gas: GasModel | None = None):
        obj = cls.__new__(cls)
        obj.state = LedgerState.from_dict(d["state"])
        obj.patient = obj.state.patient
        obj.registry = registry
        obj.clock = clock if clock is not None else SimClock()
        obj.gas = gas if gas is not None else GasModel.load()
        obj.profile = d["profile"]
        obj.address = bytes.fromhex(d["address"][2:])
        obj.chain_id = d["chainId"]
        obj.events = [LedgerEvent.from_json(e) for e in d["events"]]
        obj.receipts = [
            Receipt(r["op"], r["gas"], bytes.fromhex(r["caller"][2:]), r["time"]) for r in d["receipts"]
        ]
        obj._lock = threading.RLock()
        return obj
