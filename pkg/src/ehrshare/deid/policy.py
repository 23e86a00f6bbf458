"""De-identification policy: path rules, quasi-identifiers and the date-shift key."""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..errors import DeidError

ACTIONS = ("remove", "generalize-zip3", "year-only", "shift-days")

# The 18 Safe Harbor identifier categories.
SAFE_HARBOR_CATEGORIES = (
    "names",
    "geographic",
    "dates",
    "phone",
    "fax",
    "email",
    "ssn",
    "mrn",
    "health_plan",
    "account",
    "license",
    "vehicle",
    "device",
    "urls",
    "ip",
    "biometric",
    "photos",
    "other_unique",
)

QUASI_IDENTIFIERS = ("birthYear", "gender", "zip3")


@lru_cache(maxsize=4096)
def _match(pattern: tuple[str, ...], path: tuple[str, ...]) -> bool:
    if not pattern:
        return not path
    head, rest = pattern[0], pattern[1:]
    if head == "**":
        return any(_match(rest, path[i:]) for i in range(len(path) + 1))
    if not path:
        return False
    return (head == "*" or head == path[0]) and _match(rest, path[1:])


@dataclass(frozen=True)
class Rule:
    """``path`` is dot-separated; ``*`` matches one key or list index, ``**`` any run of them."""

    path: str
    action: str
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.action not in ACTIONS:
            raise DeidError(f"unknown action {self.action!r}")
        bad = set(self.categories) - set(SAFE_HARBOR_CATEGORIES)
        if bad:
            raise DeidError(f"unknown identifier categories: {sorted(bad)}")

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.path.split("."))

    def matches(self, path: tuple[str, ...]) -> bool:
        return _match(self.segments, path)


@dataclass
class DeidPolicy:
    rules: list[Rule]
    quasi_identifiers: tuple[str, ...] = QUASI_IDENTIFIERS
    preserve: tuple[str, ...] = ()
    date_shift_range: int = 365
    reference_year: int = 2025
    shift_seed: bytes = b"\x00" * 32
    _segments: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.date_shift_range < 1:
            raise DeidError("date shift range must be at least one day")
        missing = set(SAFE_HARBOR_CATEGORIES) - {c for r in self.rules for c in r.categories}
        if missing:
            raise DeidError(f"policy leaves identifier categories uncovered: {sorted(missing)}")
        unknown = set(self.quasi_identifiers) - set(QUASI_IDENTIFIERS)
        if unknown:
            raise DeidError(f"unsupported quasi-identifiers: {sorted(unknown)}")
        self._preserve = [tuple(p.split(".")) for p in self.preserve]

    def rule_for(self, path: tuple[str, ...]) -> Rule | None:
        for rule in self.rules:
            if rule.matches(path):
                return rule
        return None

    def preserved(self, path: tuple[str, ...]) -> bool:
        return any(_match(p, path) for p in self._preserve)

    def date_shift_days(self, patient_id: str) -> int:
        """Keyed, per-patient, never zero, within +/- ``date_shift_range``."""
        mac = hmac.new(self.shift_seed, patient_id.encode("utf-8"), hashlib.sha256).digest()
        span = self.date_shift_range
        magnitude = int.from_bytes(mac[:8], "big") % span + 1
        return magnitude if mac[8] & 1 else -magnitude

    def coverage(self) -> dict[str, list[str]]:
        return {c: [r.path for r in self.rules if c in r.categories] for c in SAFE_HARBOR_CATEGORIES}

    @classmethod
    def from_dict(cls, d: dict, shift_seed: bytes | None = None) -> "DeidPolicy":
        try:
            rules = [Rule(r["path"], r["action"], tuple(r.get("categories", ()))) for r in d["rules"]]
        except (KeyError, TypeError) as exc:
            raise DeidError(f"malformed policy: {exc}") from exc
        seed = shift_seed if shift_seed is not None else bytes.fromhex(d.get("shiftSeed", "00" * 32))
        return cls(
            rules,
            tuple(d.get("quasiIdentifiers", QUASI_IDENTIFIERS)),
            tuple(d.get("preserve", ())),
            int(d.get("dateShiftRange", 365)),
            int(d.get("referenceYear", 2025)),
            seed,
        )

    @classmethod
    def load(cls, path: str | Path | None = None, shift_seed: bytes | None = None) -> "DeidPolicy":
        if path is None:
            text = resources.files(__package__).joinpath("default_policy.json").read_text()
        else:
            text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DeidError(f"policy is not valid JSON: {exc}") from exc
        return cls.from_dict(data, shift_seed)
