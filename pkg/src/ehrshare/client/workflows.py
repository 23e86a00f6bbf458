"""Client-side orchestration of record creation, sharing, access, rotation and emergency access.

Each workflow touches the ledger last (or not at all) so a failure in any
local step leaves on-ledger state untouched.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..blobstore import StoragePointer
from ..crypto.aead import SymmetricKey, compute_digest, decrypt_record, encrypt_record, generate_symmetric_key
from ..crypto.ecies import wrap_key
from ..crypto.keys import keccak256
from ..crypto.rng import EntropySource, draw, system_rng
from ..crypto.signing import sign_digest
from ..crypto.typed_data import EmergencyRequestMessage, PermissionMessage, hash_typed_emergency, hash_typed_permission
from ..errors import EhrError, LedgerRevert, TamperError
from ..ledger.events import EventKind
from .actor import Actor
from .guardian import GuardianService
from .package import GrantPackage

DEFAULT_MAX_SKEW = 300
# An erased record keeps a nonzero digest (SHA-256 of the empty string) and an empty pointer.
ERASED_DIGEST = hashlib.sha256(b"").digest()
ERASED_POINTER = ""


@dataclass(frozen=True)
class CreatedRecord:
    rid: int
    ptr: StoragePointer
    digest: bytes


@dataclass(frozen=True)
class RotatedRecord:
    ptr: StoragePointer
    digest: bytes
    packages: dict[bytes, GrantPackage]


@dataclass(frozen=True)
class EmergencyOutcome:
    grant_id: bytes
    plaintext1: bytes
    plaintext2: bytes


def record_metadata_from_events(ledger, rid: int) -> tuple[str, bytes]:
    """Latest (ptr, digest) for ``rid`` read from the public event log, no authorization check."""
    events = ledger.query_events(kind=(EventKind.RecordAdded, EventKind.RecordUpdated), rid=rid)
    if not events:
        raise LedgerRevert("Invalid record")
    last = events[-1]
    return last["ptr"], last["digest"]


class EhrClient:
    def __init__(self, registry, store, rng: EntropySource = system_rng) -> None:
        self.registry = registry
        self.store = store
        self.rng = rng
        self.guardians: dict[bytes, GuardianService] = {}
        # test hook: called with (digest_ok: bool) right before any AEAD decryption decision
        self.before_decrypt = None

    # -- helpers ------------------------------------------------------------

    def _wrap_for(self, address: bytes, key: SymmetricKey) -> bytes:
        # registry lookup happens here, immediately before wrapping
        public, _ = self.registry.get_key(address)
        return wrap_key(public, key, self.rng).to_bytes()

    def record_key(self, patient: Actor, ledger, rid: int) -> SymmetricKey:
        cached = patient.key_cache.get((ledger.address, rid))
        if cached is not None:
            return cached
        key = patient.unwrap(ledger.get_owner_wrapped_key(patient.address, rid))
        patient.key_cache[(ledger.address, rid)] = key
        return key

    def _new_nonce(self, patient: Actor, ledger) -> int:
        while True:
            nonce = int.from_bytes(draw(self.rng, 32), "big")
            # a rewound RNG after a crash can repeat a journaled nonce; skip it
            if nonce not in patient.journal and not ledger.is_nonce_used(nonce):
                return nonce

    # -- Workflow 1: create --------------------------------------------------

    def create_record(
        self, patient: Actor, ledger, plaintext: bytes, guardian: GuardianService | None = None
    ) -> CreatedRecord:
        key = generate_symmetric_key(self.rng)
        envelope = encrypt_record(key, plaintext, rng=self.rng)
        owner_wrap = self._wrap_for(patient.address, key)
        guardian_wrap = wrap_key(guardian.public_key, key, self.rng) if guardian is not None else None
        ptr = self.store.put(envelope)
        digest = compute_digest(envelope)
        rid = ledger.add_record(patient.address, str(ptr), digest, owner_wrap)
        patient.key_cache[(ledger.address, rid)] = key
        if guardian is not None:
            guardian.store_envelope(ledger.address, rid, guardian_wrap)
            self.guardians[ledger.address] = guardian
        return CreatedRecord(rid, ptr, digest)

    # -- Workflow 2: grant ---------------------------------------------------

    def grant_access(self, patient: Actor, ledger, rid: int, grantee: bytes, expiration: int) -> GrantPackage:
        key = self.record_key(patient, ledger, rid)
        wrapped = self._wrap_for(grantee, key)
        nonce = self._new_nonce(patient, ledger)
        msg = PermissionMessage.for_wrapped_key(rid, grantee, expiration, wrapped, nonce)
        sig = sign_digest(patient.signing.private_scalar, hash_typed_permission(ledger.domain, msg))
        package = GrantPackage(rid, bytes(grantee), expiration, wrapped, nonce, sig.to_bytes())
        patient.journal.record(ledger.address, package)
        return package

    def submit_grant(self, grantee: Actor, ledger, package: GrantPackage) -> None:
        ledger.grant_permission_by_sig(
            grantee.address, package.rid, package.expiration, package.wrapped_key, package.nonce, package.signature
        )

    # -- Workflow 3: access --------------------------------------------------

    def fetch_verified(self, actor: Actor, ledger, rid: int, via_events: bool = False):
        """Fetch the envelope and check it against the registered digest; no decryption."""
        if via_events:
            ptr, digest = record_metadata_from_events(ledger, rid)
        else:
            ptr, digest = ledger.get_record_metadata(actor.address, rid)
        if ptr == ERASED_POINTER:
            raise EhrError(f"record {rid} has been erased")
        envelope = self.store.get(ptr)
        ok = compute_digest(envelope) == digest
        if self.before_decrypt is not None:
            self.before_decrypt(ok)
        if not ok:
            raise TamperError(f"stored blob for record {rid} does not match the registered digest")
        return envelope, digest

    def access_record(
        self, actor: Actor, ledger, rid: int, log_receipt: bool = False, via_events: bool = False
    ) -> bytes:
        envelope, digest = self.fetch_verified(actor, ledger, rid, via_events=via_events)
        if actor.address == ledger.patient:
            wrapped = ledger.get_owner_wrapped_key(actor.address, rid)
        else:
            if not ledger.has_valid_permission(actor.address, rid):
                raise LedgerRevert("Not authorized")
            wrapped = ledger.permissions(rid, actor.address).wrapped_key
        key = actor.unwrap(wrapped)
        plaintext = decrypt_record(key, envelope)
        actor.key_cache[(ledger.address, rid)] = key
        if log_receipt:
            ledger.log_access(actor.address, rid, keccak256(b"access", rid.to_bytes(32, "big"), digest))
        return plaintext

    # -- Workflow 4: revoke --------------------------------------------------

    def revoke_access(self, patient: Actor, ledger, rid: int, grantee: bytes) -> None:
        ledger.revoke_permission(patient.address, rid, grantee)

    def erase_record(self, patient: Actor, ledger, rid: int) -> bool:
        """Delete the off-ledger blob and point the record at nothing; the event history stays."""
        ptr, _ = ledger.get_record_metadata(patient.address, rid)
        removed = self.store.delete(ptr) if ptr != ERASED_POINTER else False
        ledger.update_record(patient.address, rid, ERASED_POINTER, ERASED_DIGEST, b"")
        patient.key_cache.pop((ledger.address, rid), None)
        return removed

    # -- Workflow 5: rotate --------------------------------------------------

    def rotate_record(
        self,
        patient: Actor,
        ledger,
        rid: int,
        new_plaintext: bytes,
        keep_grantees: list[bytes] = (),
        expiration: int | None = None,
        delete_old: bool = True,
    ) -> RotatedRecord:
        """Re-encrypt under a fresh key and re-issue grant packages to ``keep_grantees``.

        Each kept grantee keeps its current expiration unless ``expiration``
        overrides it. Packages still need submitting by their grantees.
        """
        old_ptr, _ = ledger.get_record_metadata(patient.address, rid)
        expirations = {}
        for g in keep_grantees:
            exp = expiration if expiration is not None else ledger.permissions(rid, g).expiration
            if exp <= ledger.now:
                raise EhrError(f"no future expiration for kept grantee 0x{bytes(g).hex()}")
            expirations[bytes(g)] = exp
        key = generate_symmetric_key(self.rng)
        envelope = encrypt_record(key, new_plaintext, rng=self.rng)
        owner_wrap = self._wrap_for(patient.address, key)
        guardian = self.guardians.get(ledger.address)
        guardian_wrap = None
        if guardian is not None and (ledger.address, rid) in guardian.envelopes:
            guardian_wrap = wrap_key(guardian.public_key, key, self.rng)
        ptr = self.store.put(envelope)
        digest = compute_digest(envelope)
        ledger.update_record(patient.address, rid, str(ptr), digest, owner_wrap)
        patient.key_cache[(ledger.address, rid)] = key
        if guardian_wrap is not None:
            guardian.store_envelope(ledger.address, rid, guardian_wrap)
        if delete_old and str(old_ptr) != str(ptr):
            self.store.delete(old_ptr)
        packages = {g: self.grant_access(patient, ledger, rid, g, exp) for g, exp in expirations.items()}
        return RotatedRecord(ptr, digest, packages)

    # -- emergency access ----------------------------------------------------

    def emergency_sign(self, physician: Actor, ledger, rid: int, code: int, request_time: int, max_skew: int) -> bytes:
        msg = EmergencyRequestMessage(rid, code, request_time, max_skew)
        return sign_digest(physician.signing.private_scalar, hash_typed_emergency(ledger.domain, msg)).to_bytes()

    def emergency_grant(
        self,
        physician1: Actor,
        physician2: Actor,
        guardian: GuardianService,
        ledger,
        rid: int,
        justification_code: int,
        request_time: int | None = None,
        max_skew: int = DEFAULT_MAX_SKEW,
    ) -> bytes:
        request_time = ledger.now if request_time is None else request_time
        w1 = guardian.guardian_rewrap(physician1.address, ledger.address, rid).to_bytes()
        w2 = guardian.guardian_rewrap(physician2.address, ledger.address, rid).to_bytes()
        s1 = self.emergency_sign(physician1, ledger, rid, justification_code, request_time, max_skew)
        s2 = self.emergency_sign(physician2, ledger, rid, justification_code, request_time, max_skew)
        return ledger.emergency_grant_access(
            physician1.address, rid, physician2.address, justification_code, request_time, max_skew, w1, w2, s1, s2
        )

    def confirm_emergency(self, physician: Actor, ledger, grant_id: bytes, justification: str) -> None:
        # only the hash of the free text reaches the ledger
        ledger.confirm_emergency_access(physician.address, grant_id, keccak256(justification.encode("utf-8")))

    def emergency_access(
        self,
        physician1: Actor,
        physician2: Actor,
        guardian: GuardianService,
        ledger,
        rid: int,
        justification_code: int,
        justification: str,
        max_skew: int = DEFAULT_MAX_SKEW,
    ) -> EmergencyOutcome:
        grant_id = self.emergency_grant(physician1, physician2, guardian, ledger, rid, justification_code, None, max_skew)
        p1 = self.access_record(physician1, ledger, rid)
        p2 = self.access_record(physician2, ledger, rid)
        self.confirm_emergency(physician1, ledger, grant_id, justification)
        return EmergencyOutcome(grant_id, p1, p2)
