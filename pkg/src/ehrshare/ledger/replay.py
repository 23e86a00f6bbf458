"""Rebuild ledger storage purely from its event log."""

from __future__ import annotations

from typing import Iterable

from .events import EventKind, LedgerEvent
from .state import EmergencyGrant, LedgerState, Permission, RecordMetadata


def fold_events(patient: bytes, events: Iterable[LedgerEvent]) -> LedgerState:
    state = LedgerState(patient)
    expected_seq = 1
    for ev in events:
        if ev.sequence != expected_seq:
            raise ValueError(f"event sequence gap at {ev.sequence}, expected {expected_seq}")
        expected_seq += 1
        p = ev.payload
        if ev.kind is EventKind.RecordAdded:
            state.record_counter = p["rid"]
            state.records[p["rid"]] = RecordMetadata(p["ptr"], p["digest"], p["wrappedKeyOwner"], ev.block_time, ev.block_time)
        elif ev.kind is EventKind.RecordUpdated:
            created = state.records[p["rid"]].created_at
            state.records[p["rid"]] = RecordMetadata(p["ptr"], p["digest"], p["wrappedKeyOwner"], created, ev.block_time)
        elif ev.kind is EventKind.PermissionGranted:
            state.used_nonces.add(p["nonceHash"])
            state.permissions[(p["rid"], p["grantee"])] = Permission(p["expiration"], False, p["wrappedKey"])
        elif ev.kind is EventKind.PermissionRevoked:
            old = state.permissions[(p["rid"], p["grantee"])]
            state.permissions[(p["rid"], p["grantee"])] = Permission(old.expiration, True, old.wrapped_key)
        elif ev.kind is EventKind.EmergencyAccessGranted:
            state.permissions[(p["rid"], p["physician1"])] = Permission(p["expiration"], False, p["wrappedKey1"])
            state.permissions[(p["rid"], p["physician2"])] = Permission(p["expiration"], False, p["wrappedKey2"])
            state.emergency_grants[p["grantId"]] = EmergencyGrant(
                p["rid"], p["physician1"], p["physician2"], p["expiration"], False
            )
        elif ev.kind is EventKind.EmergencyAccessConfirmed:
            g = state.emergency_grants[p["grantId"]]
            state.emergency_grants[p["grantId"]] = EmergencyGrant(g.record_id, g.physician1, g.physician2, g.expiration, True)
        elif ev.kind is EventKind.EmergencyPhysicianSet:
            if p["enabled"]:
                state.emergency_physicians.add(p["physician"])
            else:
                state.emergency_physicians.discard(p["physician"])
        elif ev.kind is EventKind.AccessLogged:
            pass  # receipts do not touch storage
        else:  # pragma: no cover
            raise ValueError(f"unhandled event kind {ev.kind}")
    return state


def authorization_history(events: Iterable[LedgerEvent], rid: int | None = None, address: bytes | None = None):
    """Authorization-changing events, optionally narrowed to a record and/or an address."""
    kinds = {
        EventKind.RecordAdded,
        EventKind.RecordUpdated,
        EventKind.PermissionGranted,
        EventKind.PermissionRevoked,
        EventKind.EmergencyAccessGranted,
    }
    return [
        ev
        for ev in events
        if ev.kind in kinds
        and (rid is None or ev.payload.get("rid") == rid)
        and (address is None or ev.involves(address))
    ]


def access_history(events: Iterable[LedgerEvent], rid: int | None = None):
    return [ev for ev in events if ev.kind is EventKind.AccessLogged and (rid is None or ev["rid"] == rid)]
