from .clock import SimClock
from .contract import (
    CONFIRMATION_WINDOW,
    EMERGENCY_DURATION,
    PatientLedger,
    emergency_grant_id,
    nonce_hash,
)
from .events import EventKind, LedgerEvent, dump_jsonl, load_jsonl
from .gas import GasModel, Receipt
from .replay import access_history, authorization_history, fold_events
from .state import EmergencyGrant, LedgerState, Permission, RecordMetadata

__all__ = [
    "CONFIRMATION_WINDOW",
    "EMERGENCY_DURATION",
    "EmergencyGrant",
    "EventKind",
    "GasModel",
    "LedgerEvent",
    "LedgerState",
    "PatientLedger",
    "Permission",
    "Receipt",
    "RecordMetadata",
    "SimClock",
    "access_history",
    "authorization_history",
    "dump_jsonl",
    "emergency_grant_id",
    "fold_events",
    "load_jsonl",
    "nonce_hash",
]
