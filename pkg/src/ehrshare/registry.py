"""Versioned registry of participants' encryption public keys.

``get_key`` always returns the latest non-revoked key. Clients are expected to
call it immediately before wrapping a record key for someone; a rotation
between lookup and wrap produces a wrapped key the new private key cannot open.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .crypto.keys import validate_public_key
from .encoding import from_hex, to_hex
from .errors import KeyNotFound, RegistryError


@dataclass(frozen=True)
class KeyEntry:
    public_key: bytes
    version: int
    revoked: bool = False


@dataclass(frozen=True)
class KeyEvent:
    sequence: int
    kind: str  # KeyRegistered | KeyRotated | KeyRevoked
    user: bytes
    public_key: bytes = b""
    version: int = 0

    def to_dict(self) -> dict:
        return {
            "seq": self.sequence,
            "kind": self.kind,
            "user": to_hex(self.user),
            "publicKey": to_hex(self.public_key),
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeyEvent":
        return cls(d["seq"], d["kind"], from_hex(d["user"]), from_hex(d["publicKey"]), d["version"])


@dataclass
class KeyRegistry:
    entries: dict[bytes, KeyEntry] = field(default_factory=dict)
    events: list[KeyEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def _emit(self, kind: str, user: bytes, public_key: bytes = b"", version: int = 0) -> None:
        self.events.append(KeyEvent(len(self.events) + 1, kind, user, public_key, version))

    def _active(self, user: bytes) -> KeyEntry | None:
        entry = self.entries.get(user)
        return entry if entry is not None and not entry.revoked else None

    def register_key(self, caller: bytes, public_key: bytes) -> int:
        public_key = validate_public_key(public_key)
        with self._lock:
            if self._active(caller) is not None:
                raise RegistryError("Key already registered")
            previous = self.entries.get(caller)
            if previous is None:
                self.entries[caller] = KeyEntry(public_key, 1)
                self._emit("KeyRegistered", caller, public_key, 1)
                return 1
            # re-registration after revoke continues the version counter
            version = previous.version + 1
            self.entries[caller] = KeyEntry(public_key, version)
            self._emit("KeyRotated", caller, public_key, version)
            return version

    def rotate_key(self, caller: bytes, new_public_key: bytes) -> int:
        new_public_key = validate_public_key(new_public_key)
        with self._lock:
            current = self._active(caller)
            if current is None:
                raise RegistryError("No active key")
            version = current.version + 1
            self.entries[caller] = KeyEntry(new_public_key, version)
            self._emit("KeyRotated", caller, new_public_key, version)
            return version

    def revoke_key(self, caller: bytes) -> None:
        with self._lock:
            current = self._active(caller)
            if current is None:
                raise RegistryError("No active key")
            self.entries[caller] = KeyEntry(current.public_key, current.version, revoked=True)
            self._emit("KeyRevoked", caller)

    def get_key(self, user: bytes) -> tuple[bytes, int]:
        entry = self._active(user)
        if entry is None:
            raise KeyNotFound(f"no active key for 0x{bytes(user).hex()}")
        return entry.public_key, entry.version

    @classmethod
    def replay(cls, events: list[KeyEvent]) -> "KeyRegistry":
        reg = cls()
        for ev in events:
            if ev.kind in ("KeyRegistered", "KeyRotated"):
                reg.entries[ev.user] = KeyEntry(ev.public_key, ev.version)
            elif ev.kind == "KeyRevoked":
                cur = reg.entries[ev.user]
                reg.entries[ev.user] = KeyEntry(cur.public_key, cur.version, revoked=True)
            else:
                raise ValueError(f"unknown registry event {ev.kind}")
            reg.events.append(ev)
        return reg

    def to_dict(self) -> dict:
        return {
            "entries": {
                to_hex(user): {"publicKey": to_hex(e.public_key), "version": e.version, "revoked": e.revoked}
                for user, e in self.entries.items()
            },
            "events": [ev.to_dict() for ev in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeyRegistry":
        return cls(
            entries={
                from_hex(user): KeyEntry(from_hex(e["publicKey"]), e["version"], e["revoked"])
                for user, e in d["entries"].items()
            },
            events=[KeyEvent.from_dict(ev) for ev in d["events"]],
        )
