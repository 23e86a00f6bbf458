"""Exception hierarchy shared across the package."""


class EhrError(Exception):
    """Base class for every domain error raised by this package."""


class EntropyError(EhrError):
    """The entropy source failed or returned unusable output."""


class AuthenticationError(EhrError):
    """AEAD tag verification failed (tampered data or wrong key)."""


class IntegrityError(EhrError):
    """A MAC check on a wrapped key failed."""


class ParseError(EhrError):
    """Malformed serialized input (wrapped key, blob, pointer, signature)."""


class InvalidPointError(EhrError):
    """Bytes do not encode a valid uncompressed secp256k1 point."""


class SignatureError(EhrError):
    """Signature is malformed, non-canonical, or unrecoverable."""


class TamperError(EhrError):
    """A fetched blob does not match the digest registered on the ledger."""


class RegistryError(EhrError):
    """Key registry rejected an operation."""


class KeyNotFound(RegistryError):
    """No active key is registered for the address."""


class LedgerRevert(EhrError):
    """A ledger transaction or view reverted; the message mirrors the contract's require string."""


class StorageError(EhrError):
    """Blob store I/O failure."""


class BlobNotFound(StorageError):
    """No blob stored under the pointer."""


class DeidError(EhrError):
    """De-identification input or policy problem."""
