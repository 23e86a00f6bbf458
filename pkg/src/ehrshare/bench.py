"""Latency and storage-overhead characterization of the crypto primitives.

Absolute numbers are machine-specific; the useful outputs are ratios across
sizes and the exact per-envelope overhead. Run in a fresh process: allocator
state left by earlier work changes whether large buffers are page-faulted in,
which skews multi-megabyte timings.
"""

from __future__ import annotations

import math
import os
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable

from .blobstore import serialize_envelope
from .crypto.aead import compute_digest, decrypt_record, encrypt_record, generate_symmetric_key
from .crypto.ecies import unwrap_key, wrap_key
from .crypto.keys import KeyPair
from .crypto.signing import recover_signer, sign_digest
from .crypto.typed_data import (
    DEFAULT_DOMAIN_NAME,
    DEFAULT_DOMAIN_VERSION,
    PermissionMessage,
    TypedDataDomain,
    hash_typed_permission,
)

OPERATIONS = ("encrypt", "decrypt", "digest", "wrap", "unwrap", "sign", "recover")
SIZE_SUFFIXES = {"": 1, "B": 1, "KB": 1024, "K": 1024, "MB": 1024**2, "M": 1024**2}


def parse_size(text: str) -> int:
    t = text.strip().upper()
    for suffix in sorted(SIZE_SUFFIXES, key=len, reverse=True):
        if suffix and t.endswith(suffix):
            return int(float(t[: -len(suffix)]) * SIZE_SUFFIXES[suffix])
    return int(t)


def format_size(n: int) -> str:
    for unit, scale in (("MB", 1024**2), ("KB", 1024)):
        if n >= scale and n % scale == 0:
            return f"{n // scale}{unit}"
    return f"{n}B"


@dataclass(frozen=True)
class OpStats:
    mean_ms: float
    p95_ms: float
    median_ms: float
    trials: int

    @classmethod
    def of(cls, samples: list[float]) -> "OpStats":
        ordered = sorted(samples)
        rank = max(1, math.ceil(0.95 * len(ordered)))  # nearest-rank percentile
        ms = 1000.0
        return cls(statistics.fmean(ordered) * ms, ordered[rank - 1] * ms, statistics.median(ordered) * ms, len(ordered))


@dataclass
class BenchReport:
    sizes: list[int]
    trials: int
    stats: dict[tuple[str, int], OpStats] = field(default_factory=dict)
    overhead: dict[int, int] = field(default_factory=dict)

    def mean(self, op: str, size: int) -> float:
        return self.stats[(op, size)].mean_ms

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "sizes": self.sizes,
            "overheadBytes": {str(s): o for s, o in self.overhead.items()},
            "latencyMs": {
                op: {
                    str(size): {"mean": round(st.mean_ms, 4), "p95": round(st.p95_ms, 4), "median": round(st.median_ms, 4)}
                    for (o, size), st in self.stats.items()
                    if o == op
                }
                for op in OPERATIONS
            },
        }

    def table(self) -> str:
        head = f"{'operation':<10}" + "".join(f"{format_size(s):>22}" for s in self.sizes)
        lines = [head, f"{'':<10}" + "".join(f"{'mean / p95 (ms)':>22}" for _ in self.sizes)]
        for op in OPERATIONS:
            cells = "".join(f"{self.mean(op, s):>11.3f} /{self.stats[(op, s)].p95_ms:>9.3f}" for s in self.sizes)
            lines.append(f"{op:<10}{cells}")
        lines.append(f"{'overhead':<10}" + "".join(f"{str(self.overhead[s]) + ' B':>22}" for s in self.sizes))
        return "\n".join(lines)


def _time(fn: Callable[[], object], trials: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        fn()
    out = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return out


def run_bench(sizes: list[int], trials: int = 50, warmup: int = 2, rng=os.urandom) -> BenchReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not sizes:
        raise ValueError("at least one size is required")
    report = BenchReport(list(sizes), trials)
    signer = KeyPair.generate(rng)
    recipient = KeyPair.generate(rng)
    domain = TypedDataDomain(DEFAULT_DOMAIN_NAME, DEFAULT_DOMAIN_VERSION, 1, bytes(20))
    for size in sizes:
        plaintext = rng(size)
        key = generate_symmetric_key(rng)
        envelope = encrypt_record(key, plaintext, rng=rng)
        report.overhead[size] = len(serialize_envelope(envelope)) - size
        wrapped = wrap_key(recipient.public_point, key, rng)
        msg = PermissionMessage.for_wrapped_key(1, recipient.address, 2**40, wrapped.to_bytes(), size)
        digest = hash_typed_permission(domain, msg)
        signature = sign_digest(signer.private_scalar, digest)
        ops = {
            "encrypt": lambda: encrypt_record(key, plaintext, rng=rng),
            "decrypt": lambda: decrypt_record(key, envelope),
            "digest": lambda: compute_digest(envelope),
            "wrap": lambda: wrap_key(recipient.public_point, key, rng),
            "unwrap": lambda: unwrap_key(recipient.private_scalar, wrapped),
            "sign": lambda: sign_digest(signer.private_scalar, digest),
            "recover": lambda: recover_signer(digest, signature),
        }
        for op in OPERATIONS:
            report.stats[(op, size)] = OpStats.of(_time(ops[op], trials, warmup))
    return report
