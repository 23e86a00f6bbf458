from .actor import Actor, NonceJournal, Role
from .guardian import GuardianRefusal, GuardianService
from .package import GrantPackage
from .workflows import CreatedRecord, EhrClient, EmergencyOutcome, RotatedRecord, record_metadata_from_events

__all__ = [
    "Actor",
    "CreatedRecord",
    "EhrClient",
    "EmergencyOutcome",
    "GrantPackage",
    "GuardianRefusal",
    "GuardianService",
    "NonceJournal",
    "Role",
    "RotatedRecord",
    "record_metadata_from_events",
]
