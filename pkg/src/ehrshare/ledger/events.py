"""Append-only ledger events and their JSON Lines form."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from ..encoding import from_hex, to_hex


class EventKind(str, enum.Enum):
    RecordAdded = "RecordAdded"
    RecordUpdated = "RecordUpdated"
    PermissionGranted = "PermissionGranted"
    PermissionRevoked = "PermissionRevoked"
    EmergencyAccessGranted = "EmergencyAccessGranted"
    EmergencyAccessConfirmed = "EmergencyAccessConfirmed"
    AccessLogged = "AccessLogged"
    EmergencyPhysicianSet = "EmergencyPhysicianSet"


# Field name -> type tag. Binary fields ("bytes") are hex on the wire.
SCHEMA: dict[EventKind, dict[str, str]] = {
    EventKind.RecordAdded: {"rid": "int", "digest": "bytes", "ptr": "str", "wrappedKeyOwner": "bytes"},
    EventKind.RecordUpdated: {"rid": "int", "digest": "bytes", "ptr": "str", "wrappedKeyOwner": "bytes"},
    EventKind.PermissionGranted: {
        "rid": "int",
        "grantee": "bytes",
        "expiration": "int",
        "wrappedKey": "bytes",
        "nonceHash": "bytes",
    },
    EventKind.PermissionRevoked: {"rid": "int", "grantee": "bytes"},
    EventKind.EmergencyAccessGranted: {
        "grantId": "bytes",
        "rid": "int",
        "physician1": "bytes",
        "physician2": "bytes",
        "justificationCode": "int",
        "expiration": "int",
        "requestTime": "int",
        "wrappedKey1": "bytes",
        "wrappedKey2": "bytes",
    },
    EventKind.EmergencyAccessConfirmed: {
        "grantId": "bytes",
        "rid": "int",
        "physician": "bytes",
        "justificationHash": "bytes",
    },
    EventKind.AccessLogged: {"rid": "int", "accessor": "bytes", "detailsHash": "bytes"},
    EventKind.EmergencyPhysicianSet: {"physician": "bytes", "enabled": "bool"},
}

ADDRESS_FIELDS = ("grantee", "physician1", "physician2", "physician", "accessor")


@dataclass(frozen=True)
class LedgerEvent:
    sequence: int
    block_time: int
    kind: EventKind
    payload: dict[str, Any]

    def __getitem__(self, name: str) -> Any:
        return self.payload[name]

    def involves(self, address: bytes) -> bool:
        return any(self.payload.get(f) == address for f in ADDRESS_FIELDS)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"seq": self.sequence, "time": self.block_time, "kind": self.kind.value}
        for name, typ in SCHEMA[self.kind].items():
            value = self.payload[name]
            out[name] = to_hex(value) if typ == "bytes" else value
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LedgerEvent":
        kind = EventKind(data["kind"])
        payload: dict[str, Any] = {}
        for name, typ in SCHEMA[kind].items():
            value = data[name]
            payload[name] = from_hex(value) if typ == "bytes" else value
        return cls(data["seq"], data["time"], kind, payload)


def dump_jsonl(events: Iterable[LedgerEvent]) -> str:
    return "".join(json.dumps(ev.to_json(), sort_keys=False) + "\n" for ev in events)


def load_jsonl(text: str) -> Iterator[LedgerEvent]:
    for line in text.splitlines():
        if line.strip():
            yield LedgerEvent.from_json(json.loads(line))
