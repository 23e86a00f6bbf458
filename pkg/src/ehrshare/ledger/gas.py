"""Lookup-table gas model.

Figures are measured per-operation costs, not an EVM meter. L1 rows and the
L2 addRecord / grantPermissionBySig rows are measurements; entries listed
under ``estimated`` in the profile file are derived (L2: the L1 figure scaled
by that profile's grantPermissionBySig reduction ratio).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

OPERATIONS = (
    "deploy",
    "addRecordFirst",
    "addRecord",
    "grantPermissionBySig",
    "revokePermission",
    "updateRecord",
    "emergencyGrantAccess",
    "confirmEmergencyAccess",
    "logAccess",
    "setEmergencyPhysician",
)

PROFILE_ALIASES = {"l1": "l1", "mainnet": "l1", "arbitrum": "arbitrum", "arb": "arbitrum", "zksync": "zksync"}


@dataclass(frozen=True)
class GasModel:
    profiles: dict[str, dict[str, int]]
    estimated: dict[str, frozenset[str]] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "GasModel":
        if path is None:
            text = resources.files("ehrshare.ledger").joinpath("gas_profiles.json").read_text()
        else:
            text = Path(path).read_text()
        data = json.loads(text)
        profiles = {name: dict(p["ops"]) for name, p in data["profiles"].items()}
        for name, ops in profiles.items():
            missing = set(OPERATIONS) - set(ops)
            if missing:
                raise ValueError(f"gas profile {name!r} lacks {sorted(missing)}")
        estimated = {name: frozenset(p.get("estimated", ())) for name, p in data["profiles"].items()}
        return cls(profiles, estimated)

    def gas_of(self, operation: str, profile: str = "l1") -> int:
        prof = self.profiles.get(PROFILE_ALIASES.get(profile.lower(), profile.lower()))
        if prof is None:
            raise KeyError(f"unknown gas profile {profile!r}")
        if operation not in prof:
            raise KeyError(f"unknown operation {operation!r}")
        return prof[operation]


@dataclass(frozen=True)
class Receipt:
    """One successful transaction's gas charge."""

    operation: str
    gas: int
    caller: bytes
    time: int
