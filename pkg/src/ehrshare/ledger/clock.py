from __future__ import annotations

from dataclasses import dataclass

DEFAULT_GENESIS = 1_700_000_000


@dataclass
class SimClock:
    """Stand-in for ``block.timestamp``; moves only when the driver says so."""

    now: int = DEFAULT_GENESIS

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self.now += int(seconds)
        return self.now

    def set(self, timestamp: int) -> int:
        if timestamp < self.now:
            raise ValueError("clock cannot move backwards")
        self.now = int(timestamp)
        return self.now
