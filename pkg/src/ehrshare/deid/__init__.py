from .kanon import KAnonymityReport, k_anonymity
from .pipeline import ANONYED, deidentify, parse_bundle, quasi_identifiers, shift_date
from .policy import SAFE_HARBOR_CATEGORIES, DeidPolicy, Rule
from .research import rewrap_for_research

__all__ = [
    "ANONYED",
    "DeidPolicy",
    "KAnonymityReport",
    "Rule",
    "SAFE_HARBOR_CATEGORIES",
    "deidentify",
    "k_anonymity",
    "parse_bundle",
    "quasi_identifiers",
    "rewrap_for_research",
    "shift_date",
]
