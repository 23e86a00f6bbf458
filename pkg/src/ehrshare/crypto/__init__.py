from .aead import (
    AD_MINIMAL,
    EncryptedEnvelope,
    SymmetricKey,
    compute_digest,
    decrypt_record,
    encrypt_record,
    generate_symmetric_key,
)
from .ecies import WrappedKey, unwrap_key, wrap_key
from .keys import KeyPair, address_from_public_key, keccak256, validate_public_key
from .rng import DeterministicRng, EntropySource, system_rng
from .signing import Signature, recover_signer, sign_digest
from .typed_data import (
    EmergencyRequestMessage,
    PermissionMessage,
    TypedDataDomain,
    hash_typed_emergency,
    hash_typed_permission,
)

__all__ = [
    "AD_MINIMAL",
    "DeterministicRng",
    "EmergencyRequestMessage",
    "EncryptedEnvelope",
    "EntropySource",
    "KeyPair",
    "PermissionMessage",
    "Signature",
    "SymmetricKey",
    "TypedDataDomain",
    "WrappedKey",
    "address_from_public_key",
    "compute_digest",
    "decrypt_record",
    "encrypt_record",
    "generate_symmetric_key",
    "hash_typed_emergency",
    "hash_typed_permission",
    "keccak256",
    "recover_signer",
    "sign_digest",
    "system_rng",
    "unwrap_key",
    "validate_public_key",
    "wrap_key",
]
