"""Entropy sources.

An entropy source is any callable ``rng(n) -> bytes``. Production code uses
:func:`system_rng`; simulations and tests use :class:`DeterministicRng` so a
whole run can be replayed from one seed.
"""

from __future__ import annotations

import hashlib
import secrets
from typing import Callable

EntropySource = Callable[[int], bytes]


def system_rng(n: int) -> bytes:
    return secrets.token_bytes(n)


class DeterministicRng:
    """SHA-256 counter-mode generator seeded once.

    Output block i is ``SHA-256(seed || i)``; the byte position is part of the
    state so a saved (seed, position) pair resumes the exact stream.
    """

    def __init__(self, seed: int | bytes, position: int = 0) -> None:
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "big", signed=False)
        self.seed = bytes(seed)
        self.position = position

    def _block(self, index: int) -> bytes:
        return hashlib.sha256(self.seed + index.to_bytes(8, "big")).digest()

    def __call__(self, n: int) -> bytes:
        out = bytearray()
        pos = self.position
        while len(out) < n:
            block, offset = divmod(pos, 32)
            chunk = self._block(block)[offset:]
            take = min(len(chunk), n - len(out))
            out += chunk[:take]
            pos += take
        self.position = pos
        return bytes(out)

    def state(self) -> dict:
        return {"seed": self.seed.hex(), "position": self.position}

    @classmethod
    def from_state(cls, state: dict) -> "DeterministicRng":
        return cls(bytes.fromhex(state["seed"]), state["position"])


def draw(rng: EntropySource, n: int) -> bytes:
    """Read ``n`` bytes from ``rng``, refusing short or all-zero output."""
    from ..errors import EntropyError

    try:
        out = rng(n)
    except Exception as exc:  # any source failure is fatal for key material
        raise EntropyError(f"entropy source failed: {exc}") from exc
    if not isinstance(out, (bytes, bytearray)) or len(out) != n:
        got = len(out) if isinstance(out, (bytes, bytearray)) else type(out).__name__
        raise EntropyError(f"entropy source returned {got}, wanted {n} bytes")
    # 2^-128 chance for a healthy source; a stuck one returns zeros.
    if n >= 16 and not any(out):
        raise EntropyError("entropy source returned all-zero output")
    return bytes(out)
