"""Patient-controlled sharing of encrypted health records.

Records are sealed with AES-256-GCM and stored off-ledger; a simulated
per-patient authorization ledger keeps content digests, signed time-bounded
permissions and an append-only event log.
"""

__version__ = "0.1.0"
