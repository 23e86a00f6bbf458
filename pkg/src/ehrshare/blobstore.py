"""Content-addressed storage for encrypted envelopes.

A stored blob is exactly ``C || T || N || AD``: tag and nonce are fixed width
and AD is the fixed-width version identifier, so no framing bytes are needed.
Consequences: stored size is plaintext + 28 + |AD|, and the locator (SHA-256
of the blob) equals the content digest registered on the ledger.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .crypto.aead import AD_SIZE, NONCE_SIZE, TAG_SIZE, EncryptedEnvelope
from .errors import BlobNotFound, ParseError, StorageError

SCHEMES = ("mem", "file")


def serialize_envelope(envelope: EncryptedEnvelope) -> bytes:
    if len(envelope.associated_data) != AD_SIZE:
        raise ValueError(f"stored envelopes carry a {AD_SIZE}-byte associated data field")
    return envelope.ciphertext + envelope.tag + envelope.nonce + envelope.associated_data


def deserialize_envelope(blob: bytes) -> EncryptedEnvelope:
    tail = TAG_SIZE + NONCE_SIZE + AD_SIZE
    if len(blob) < tail:
        raise ParseError(f"blob of {len(blob)} bytes is shorter than the fixed {tail}-byte trailer")
    c_end = len(blob) - tail
    return EncryptedEnvelope(
        ciphertext=blob[:c_end],
        tag=blob[c_end : c_end + TAG_SIZE],
        nonce=blob[c_end + TAG_SIZE : c_end + TAG_SIZE + NONCE_SIZE],
        associated_data=blob[c_end + TAG_SIZE + NONCE_SIZE :],
    )


@dataclass(frozen=True)
class StoragePointer:
    scheme: str
    locator: str

    def __str__(self) -> str:
        return f"{self.scheme}://{self.locator}"

    @classmethod
    def parse(cls, text: str) -> "StoragePointer":
        scheme, sep, locator = str(text).partition("://")
        if not sep or scheme not in SCHEMES or not locator:
            raise ParseError(f"bad storage pointer {text!r}")
        if len(locator) != 64 or any(c not in "0123456789abcdef" for c in locator):
            raise ParseError(f"locator must be 64 lowercase hex chars: {text!r}")
        return cls(scheme, locator)


class BlobStore(Protocol):
    scheme: str

    def put(self, envelope: EncryptedEnvelope) -> StoragePointer: ...

    def get(self, ptr: StoragePointer | str) -> EncryptedEnvelope: ...

    def delete(self, ptr: StoragePointer | str) -> bool: ...


def _locator(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


class _Base:
    scheme = ""

    def _ptr(self, ptr: StoragePointer | str) -> StoragePointer:
        ptr = ptr if isinstance(ptr, StoragePointer) else StoragePointer.parse(ptr)
        if ptr.scheme != self.scheme:
            raise BlobNotFound(f"{ptr} is not a {self.scheme}:// pointer")
        return ptr


class MemoryBlobStore(_Base):
    scheme = "mem"

    def __init__(self) -> None:
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, envelope: EncryptedEnvelope) -> StoragePointer:
        blob = serialize_envelope(envelope)
        loc = _locator(blob)
        with self._lock:
            self._blobs[loc] = blob
        return StoragePointer(self.scheme, loc)

    def get_bytes(self, ptr: StoragePointer | str) -> bytes:
        ptr = self._ptr(ptr)
        with self._lock:
            blob = self._blobs.get(ptr.locator)
        if blob is None:
            raise BlobNotFound(str(ptr))
        return blob

    def get(self, ptr: StoragePointer | str) -> EncryptedEnvelope:
        return deserialize_envelope(self.get_bytes(ptr))

    def delete(self, ptr: StoragePointer | str) -> bool:
        ptr = self._ptr(ptr)
        with self._lock:
            return self._blobs.pop(ptr.locator, None) is not None

    def put_bytes(self, locator: str, blob: bytes) -> None:
        """Overwrite raw bytes at a locator; only for fault-injection tests."""
        with self._lock:
            self._blobs[locator] = blob

    def __iter__(self):
        with self._lock:
            return iter(list(self._blobs.values()))

    def __len__(self) -> int:
        return len(self._blobs)


class FileBlobStore(_Base):
    """Blobs under ``root/ab/cd/abcd...``; writes are atomic renames."""

    scheme = "file"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def path_for(self, locator: str) -> Path:
        return self.root / locator[0:2] / locator[2:4] / locator

    def put(self, envelope: EncryptedEnvelope) -> StoragePointer:
        blob = serialize_envelope(envelope)
        loc = _locator(blob)
        path = self.path_for(loc)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with self._lock:
                if not path.exists():
                    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
                    with os.fdopen(fd, "wb") as fh:
                        fh.write(blob)
                    os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"write failed for {loc}: {exc}") from exc
        return StoragePointer(self.scheme, loc)

    def get_bytes(self, ptr: StoragePointer | str) -> bytes:
        ptr = self._ptr(ptr)
        try:
            return self.path_for(ptr.locator).read_bytes()
        except FileNotFoundError:
            raise BlobNotFound(str(ptr)) from None
        except OSError as exc:
            raise StorageError(f"read failed for {ptr}: {exc}") from exc

    def get(self, ptr: StoragePointer | str) -> EncryptedEnvelope:
        return deserialize_envelope(self.get_bytes(ptr))

    def delete(self, ptr: StoragePointer | str) -> bool:
        ptr = self._ptr(ptr)
        with self._lock:
            try:
                self.path_for(ptr.locator).unlink()
                return True
            except FileNotFoundError:
                return False
            except OSError as exc:
                raise StorageError(f"delete failed for {ptr}: {exc}") from exc

    def __iter__(self):
        for path in sorted(self.root.glob("??/??/*")):
            if not path.name.startswith(".tmp-"):
                yield path.read_bytes()

    def __len__(self) -> int:
        return sum(1 for p in self.root.glob("??/??/*") if not p.name.startswith(".tmp-"))
