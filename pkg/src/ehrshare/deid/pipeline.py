"""Safe Harbor style de-identification over FHIR JSON bundles.

One pass over the tree: a path that matches a rule gets that rule's action;
any other string that parses as a calendar date is shifted by the patient's
offset, and remaining free text is swept for identifier-shaped substrings.
The output carries an ANONYED security label, and labelled input passes
through unchanged so the pipeline is idempotent.
"""

from __future__ import annotations

import copy
import datetime as dt
import json
import re
from typing import Any

from ..errors import ParseError
from .policy import DeidPolicy

ANONYED = {"system": "http://terminology.hl7.org/CodeSystem/v3-ObservationValue", "code": "ANONYED"}
REDACTED = "[REDACTED]"
AGE_CAP = 90
AGE_KEYS = ("valueAge", "onsetAge", "age")

_DATE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?((?:T\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?)?(?:Z|[+-]\d{2}:\d{2})?)$")
_YEAR = re.compile(r"^(\d{4})")
_SWEEP = [
    re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"),
    re.compile(r"\b(?:https?|ftp)://\S+", re.I),
    re.compile(r"\bwww\.\S+", re.I),
    re.compile(r"\b(?:\d{1,3}\.){3}\d{1,3}\b"),
    re.compile(r"\b\d{3}-\d{2}-\d{4}\b"),
    re.compile(r"(?:\+?1[ .-]?)?\(?\b\d{3}\)?[ .-]?\d{3}[ .-]\d{4}\b"),
]


def parse_bundle(data: str | bytes | dict) -> dict:
    if isinstance(data, (str, bytes, bytearray)):
        try:
            data = json.loads(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ParseError(f"bundle is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("entry", []), list):
        raise ParseError("bundle must be a JSON object with an 'entry' list")
    return data


def is_labelled(bundle: dict) -> bool:
    security = (bundle.get("meta") or {}).get("security") or []
    return any(isinstance(s, dict) and s.get("code") == ANONYED["code"] for s in security)


def patient_key(bundle: dict) -> str:
    """Stable id used to key the date shift: the first Patient's id or identifier."""
    for entry in bundle.get("entry", []):
        res = entry.get("resource") if isinstance(entry, dict) else None
        if isinstance(res, dict) and res.get("resourceType") == "Patient":
            if res.get("id"):
                return str(res["id"])
            for ident in res.get("identifier") or []:
                if isinstance(ident, dict) and ident.get("value"):
                    return str(ident["value"])
    return str(bundle.get("id", ""))


def shift_date(value: str, days: int) -> str:
    m = _DATE.match(value)
    if not m:
        return value
    year, month, day, rest = m.group(1), m.group(2), m.group(3), m.group(4)
    try:
        base = dt.date(int(year), int(month), int(day) if day else 1)
    except ValueError:
        return value
    shifted = base + dt.timedelta(days=days)
    if day is None:
        return f"{shifted.year:04d}-{shifted.month:02d}"
    return shifted.isoformat() + rest


def _year_only(value: str, reference_year: int) -> str:
    m = _YEAR.match(value)
    if not m:
        return REDACTED
    year = int(m.group(1))
    # ages over 89 collapse into one bucket
    return str(reference_year - AGE_CAP if reference_year - year >= AGE_CAP else year)


def _zip3(value: str) -> str:
    digits = re.sub(r"\D", "", value)
    return digits[:3] if len(digits) >= 3 else REDACTED


def sweep_text(value: str) -> str:
    for pattern in _SWEEP:
        value = pattern.sub(REDACTED, value)
    return value


class _Run:
    def __init__(self, policy: DeidPolicy, shift: int) -> None:
        self.policy = policy
        self.shift = shift

    def leaf(self, action: str, value: Any) -> Any:
        if isinstance(value, dict):
            return {k: self.leaf(action, v) for k, v in value.items()}
        if isinstance(value, list):
            return [self.leaf(action, v) for v in value]
        if not isinstance(value, str):
            return value
        if action == "generalize-zip3":
            return _zip3(value)
        if action == "year-only":
            return _year_only(value, self.policy.reference_year)
        if action == "shift-days":
            return shift_date(value, self.shift) if _DATE.match(value) else sweep_text(value)
        raise AssertionError(action)

    def walk(self, node: Any, path: tuple[str, ...]) -> Any:
        if isinstance(node, dict):
            out = {}
            for key, value in node.items():
                p = path + (key,)
                if self.policy.preserved(p):
                    out[key] = copy.deepcopy(value)
                    continue
                rule = self.policy.rule_for(p)
                if rule is not None and rule.action == "remove":
                    continue
                out[key] = self.leaf(rule.action, value) if rule is not None else self.walk(value, p)
            for key in AGE_KEYS:
                age = out.get(key)
                if isinstance(age, dict) and isinstance(age.get("value"), (int, float)) and age["value"] >= AGE_CAP:
                    out[key] = {**age, "value": AGE_CAP}
            return out
        if isinstance(node, list):
            out_list = []
            for i, value in enumerate(node):
                p = path + (str(i),)
                rule = self.policy.rule_for(p)
                if rule is not None and rule.action == "remove":
                    continue
                out_list.append(self.leaf(rule.action, value) if rule is not None else self.walk(value, p))
            return out_list
        if isinstance(node, str):
            if _DATE.match(node):
                return shift_date(node, self.shift)
            return sweep_text(node)
        return node


def deidentify(bundle: str | bytes | dict, policy: DeidPolicy) -> dict:
    bundle = parse_bundle(bundle)
    if is_labelled(bundle):
        return copy.deepcopy(bundle)
    shift = policy.date_shift_days(patient_key(bundle))
    out = _Run(policy, shift).walk(bundle, ())
    meta = out.setdefault("meta", {})
    meta["security"] = list(meta.get("security") or []) + [dict(ANONYED)]
    return out


def quasi_identifiers(bundle: dict, policy: DeidPolicy) -> tuple:
    """The policy's quasi-identifier tuple for the bundle's first Patient."""
    patient: dict = {}
    for entry in bundle.get("entry", []):
        res = entry.get("resource") if isinstance(entry, dict) else None
        if isinstance(res, dict) and res.get("resourceType") == "Patient":
            patient = res
            break
    values = {
        "birthYear": (patient.get("birthDate") or "")[:4] or None,
        "gender": patient.get("gender"),
        "zip3": next(
            (a.get("postalCode", "")[:3] for a in patient.get("address") or [] if isinstance(a, dict) and a.get("postalCode")),
            None,
        ),
    }
    return tuple(values[q] for q in policy.quasi_identifiers)
