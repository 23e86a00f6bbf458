"""Ledger storage layout and its JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..encoding import from_hex, to_hex


@dataclass(frozen=True)
class RecordMetadata:
    storage_pointer: str
    content_digest: bytes
    wrapped_key_owner: bytes
    created_at: int
    updated_at: int


@dataclass(frozen=True)
class Permission:
    expiration: int = 0  # 0 doubles as "never granted"
    revoked: bool = False
    wrapped_key: bytes = b""

    @property
    def exists(self) -> bool:
        return self.expiration > 0


@dataclass(frozen=True)
class EmergencyGrant:
    record_id: int = 0
    physician1: bytes = bytes(20)
    physician2: bytes = bytes(20)
    expiration: int = 0
    confirmed: bool = False


@dataclass
class LedgerState:
    patient: bytes
    record_counter: int = 0
    records: dict[int, RecordMetadata] = field(default_factory=dict)
    permissions: dict[tuple[int, bytes], Permission] = field(default_factory=dict)
    used_nonces: set[bytes] = field(default_factory=set)
    emergency_physicians: set[bytes] = field(default_factory=set)
    emergency_grants: dict[bytes, EmergencyGrant] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "patient": to_hex(self.patient),
            "recordCounter": self.record_counter,
            "records": {
                str(rid): {
                    "storagePointer": r.storage_pointer,
                    "contentDigest": to_hex(r.content_digest),
                    "wrappedKeyOwner": to_hex(r.wrapped_key_owner),
                    "createdAt": r.created_at,
                    "updatedAt": r.updated_at,
                }
                for rid, r in sorted(self.records.items())
            },
            "permissions": [
                {
                    "rid": rid,
                    "grantee": to_hex(grantee),
                    "expiration": p.expiration,
                    "revoked": p.revoked,
                    "wrappedKey": to_hex(p.wrapped_key),
                }
                for (rid, grantee), p in sorted(self.permissions.items())
            ],
            "usedNonces": sorted(to_hex(n) for n in self.used_nonces),
            "emergencyPhysicians": sorted(to_hex(a) for a in self.emergency_physicians),
            "emergencyGrants": {
                to_hex(gid): {
                    "recordId": g.record_id,
                    "physician1": to_hex(g.physician1),
                    "physician2": to_hex(g.physician2),
                    "expiration": g.expiration,
                    "confirmed": g.confirmed,
                }
                for gid, g in sorted(self.emergency_grants.items())
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerState":
        return cls(
            patient=from_hex(d["patient"]),
            record_counter=d["recordCounter"],
            records={
                int(rid): RecordMetadata(
                    r["storagePointer"],
                    from_hex(r["contentDigest"]),
                    from_hex(r["wrappedKeyOwner"]),
                    r["createdAt"],
                    r["updatedAt"],
                )
                for rid, r in d["records"].items()
            },
            permissions={
                (p["rid"], from_hex(p["grantee"])): Permission(p["expiration"], p["revoked"], from_hex(p["wrappedKey"]))
                for p in d["permissions"]
            },
            used_nonces={from_hex(n) for n in d["usedNonces"]},
            emergency_physicians={from_hex(a) for a in d["emergencyPhysicians"]},
            emergency_grants={
                from_hex(gid): EmergencyGrant(
                    g["recordId"], from_hex(g["physician1"]), from_hex(g["physician2"]), g["expiration"], g["confirmed"]
                )
                for gid, g in d["emergencyGrants"].items()
            },
        )
