"""Exact k-anonymity report by grouping identical quasi-identifier tuples."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from ..errors import DeidError


@dataclass(frozen=True)
class KAnonymityReport:
    k: int
    k_min: int
    class_sizes: dict[int, int]  # class size -> number of classes of that size
    max_risk: Fraction
    avg_risk: Fraction
    records: int

    @property
    def satisfied(self) -> bool:
        return self.k_min >= self.k

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "kMin": self.k_min,
            "satisfied": self.satisfied,
            "records": self.records,
            "classes": sum(self.class_sizes.values()),
            "classSizes": {str(s): n for s, n in sorted(self.class_sizes.items())},
            "maxRisk": float(self.max_risk),
            "avgRisk": float(self.avg_risk),
        }


def k_anonymity(records: Sequence[Sequence[Hashable]], k: int = 5) -> KAnonymityReport:
    if not records:
        raise DeidError("k-anonymity needs at least one record")
    if k < 1:
        raise DeidError("k must be at least 1")
    classes = Counter(tuple(r) for r in records)
    k_min = min(classes.values())
    # each record's risk is 1/|its class|; a class of size s contributes s * 1/s = 1
    avg = Fraction(len(classes), len(records))
    return KAnonymityReport(k, k_min, dict(Counter(classes.values())), Fraction(1, k_min), avg, len(records))
