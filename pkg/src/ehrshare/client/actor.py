"""Participants and the key material they hold locally."""

from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from ..crypto.aead import SymmetricKey
from ..crypto.ecies import WrappedKey, unwrap_key
from ..crypto.keys import KeyPair
from ..crypto.rng import EntropySource, system_rng
from ..encoding import from_hex, int_to_hex, to_hex
from ..errors import IntegrityError
from .package import GrantPackage


class Role(str, enum.Enum):
    patient = "patient"
    provider = "provider"
    physician = "physician"
    guardian = "guardian"


class NonceJournal:
    """Grant nonces issued but not yet seen on the ledger.

    With a ``path`` every change is written through atomically before the
    caller gets control back, so a crash after issuing a package cannot lose
    the entry.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.entries: dict[int, dict] = {}
        if self.path is not None and self.path.exists():
            self.load_dict(json.loads(self.path.read_text()))

    def __contains__(self, nonce: int) -> bool:
        return nonce in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, ledger_address: bytes, package: GrantPackage) -> None:
        self.entries[package.nonce] = {"ledger": to_hex(ledger_address), "package": package.to_dict()}
        self._flush()

    def confirm(self, nonce: int) -> None:
        if self.entries.pop(nonce, None) is not None:
            self._flush()

    def pending(self, ledger_address: bytes | None = None) -> list[GrantPackage]:
        want = to_hex(ledger_address) if ledger_address is not None else None
        return [
            GrantPackage.from_dict(e["package"])
            for e in self.entries.values()
            if want is None or e["ledger"] == want
        ]

    def reconcile(self, ledger) -> list[int]:
        """Drop entries whose nonce the ledger has consumed; returns them."""
        want = to_hex(ledger.address)
        done = [n for n, e in self.entries.items() if e["ledger"] == want and ledger.is_nonce_used(n)]
        for n in done:
            del self.entries[n]
        if done:
            self._flush()
        return done

    def to_dict(self) -> dict:
        return {int_to_hex(n): e for n, e in sorted(self.entries.items())}

    def load_dict(self, d: dict) -> None:
        self.entries = {int(n, 16): e for n, e in d.items()}

    def _flush(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".journal-")
        with os.fdopen(fd, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)


@dataclass
class Actor:
    """A participant: signing identity plus the encryption key published in the registry.

    The signing key's address is the actor's on-ledger identity. Retired
    encryption keys are kept so records wrapped before a routine rotation stay
    readable; ``rotate_encryption_key(discard_old=True)`` models compromise.
    """

    name: str
    role: Role
    signing: KeyPair
    encryption: KeyPair
    retired: list[KeyPair] = field(default_factory=list)
    key_cache: dict[tuple[bytes, int], SymmetricKey] = field(default_factory=dict)
    journal: NonceJournal = field(default_factory=NonceJournal)

    @classmethod
    def create(cls, name: str, role: Role | str, rng: EntropySource = system_rng, journal_path=None) -> "Actor":
        return cls(name, Role(role), KeyPair.generate(rng), KeyPair.generate(rng), journal=NonceJournal(journal_path))

    @property
    def address(self) -> bytes:
        return self.signing.address

    @property
    def encryption_public(self) -> bytes:
        return self.encryption.public_point

    def register(self, registry) -> int:
        return registry.register_key(self.address, self.encryption.public_point)

    def rotate_encryption_key(self, registry, rng: EntropySource = system_rng, discard_old: bool = False) -> int:
        new = KeyPair.generate(rng)
        version = registry.rotate_key(self.address, new.public_point)
        if not discard_old:
            self.retired.append(self.encryption)
        self.encryption = new
        return version

    def unwrap(self, wrapped: WrappedKey | bytes) -> SymmetricKey:
        """Try the current key, then retired ones; IntegrityError if none opens it."""
        last: Exception | None = None
        for kp in [self.encryption, *reversed(self.retired)]:
            try:
                return unwrap_key(kp.private_scalar, wrapped)
            except IntegrityError as exc:
                last = exc
        raise last if last is not None else IntegrityError("no key")

    def public_dict(self) -> dict:
        return {
            "name": self.name,
            "role": self.role.value,
            "address": to_hex(self.address),
            "encryptionPublicKey": to_hex(self.encryption.public_point),
        }

    def keystore_dict(self) -> dict:
        # the record-key cache is deliberately not persisted; it is rebuilt from wraps
        return {
            "name": self.name,
            "role": self.role.value,
            "signing": to_hex(self.signing.private_bytes),
            "encryption": to_hex(self.encryption.private_bytes),
            "retired": [to_hex(kp.private_bytes) for kp in self.retired],
            "journal": self.journal.to_dict(),
        }

    @classmethod
    def from_keystore(cls, d: dict, journal_path=None) -> "Actor":
        def kp(h: str) -> KeyPair:
            return KeyPair.from_scalar(int.from_bytes(from_hex(h), "big"))

        journal = NonceJournal(journal_path)
        if not journal.entries:
            journal.load_dict(d.get("journal", {}))
        return cls(
            d["name"],
            Role(d["role"]),
            kp(d["signing"]),
            kp(d["encryption"]),
            [kp(h) for h in d.get("retired", [])],
            journal=journal,
        )

    def __repr__(self) -> str:
        return f"Actor({self.name!r}, {self.role.value}, 0x{self.address.hex()})"
