"""Institutional key guardian (HSM stand-in).

The guardian holds one envelope wrap per record, made under its institutional
key when the record is created. Staff obtain a fresh wrap for their own
registry key; the record key never leaves ``guardian_rewrap`` in clear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto.ecies import WrappedKey, unwrap_key, wrap_key
from ..crypto.rng import EntropySource, system_rng
from ..errors import EhrError, KeyNotFound
from .actor import Actor


class GuardianRefusal(EhrError):
    """The guardian declined to re-wrap (not staff, or no envelope for the record)."""


@dataclass
class GuardianService:
    actor: Actor
    registry: object
    rng: EntropySource = system_rng
    staff: set[bytes] = field(default_factory=set)
    envelopes: dict[tuple[bytes, int], bytes] = field(default_factory=dict)

    @property
    def address(self) -> bytes:
        return self.actor.address

    @property
    def public_key(self) -> bytes:
        return self.actor.encryption_public

    def add_staff(self, clinician: bytes) -> None:
        self.staff.add(bytes(clinician))

    def remove_staff(self, clinician: bytes) -> None:
        self.staff.discard(bytes(clinician))

    def store_envelope(self, ledger_address: bytes, rid: int, wrapped: WrappedKey | bytes) -> None:
        data = wrapped.to_bytes() if isinstance(wrapped, WrappedKey) else bytes(wrapped)
        self.envelopes[(bytes(ledger_address), rid)] = data

    def guardian_rewrap(self, clinician: bytes, ledger_address: bytes, rid: int) -> WrappedKey:
        if bytes(clinician) not in self.staff:
            raise GuardianRefusal("Not authorized staff")
        envelope = self.envelopes.get((bytes(ledger_address), rid))
        if envelope is None:
            raise GuardianRefusal(f"No envelope key for record {rid}")
        try:
            target, _ = self.registry.get_key(bytes(clinician))
        except KeyNotFound as exc:
            raise GuardianRefusal(f"Clinician has no registered key: {exc}") from exc
        key = unwrap_key(self.actor.encryption.private_scalar, envelope)
        return wrap_key(target, key, self.rng)

    def to_dict(self) -> dict:
        return {
            "address": "0x" + self.address.hex(),
            "staff": sorted("0x" + s.hex() for s in self.staff),
            "envelopes": [
                {"ledger": "0x" + la.hex(), "rid": rid, "wrappedKey": "0x" + w.hex()}
                for (la, rid), w in sorted(self.envelopes.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, actor: Actor, registry, rng: EntropySource = system_rng) -> "GuardianService":
        g = cls(actor, registry, rng)
        g.staff = {bytes.fromhex(s[2:]) for s in d.get("staff", [])}
        for e in d.get("envelopes", []):
            g.envelopes[(bytes.fromhex(e["ledger"][2:]), e["rid"])] = bytes.fromhex(e["wrappedKey"][2:])
        return g
