"""Release a de-identified copy of a record to a research consortium."""

from __future__ import annotations

import json

from ..blobstore import StoragePointer
from ..crypto.aead import encrypt_record, generate_symmetric_key
from ..crypto.ecies import WrappedKey, wrap_key
from .pipeline import deidentify
from .policy import DeidPolicy


def rewrap_for_research(
    client, patient, ledger, rid: int, policy: DeidPolicy, consortium_public_key: bytes
) -> tuple[StoragePointer, WrappedKey]:
    """The original record and its ledger entry are left untouched."""
    plaintext = client.access_record(patient, ledger, rid)
    cleaned = json.dumps(deidentify(plaintext, policy), sort_keys=True).encode("utf-8")
    key = generate_symmetric_key(client.rng)
    ptr = client.store.put(encrypt_record(key, cleaned, rng=client.rng))
    return ptr, wrap_key(consortium_public_key, key, client.rng)
