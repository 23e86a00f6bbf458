"""EIP-712 typed-data hashing for permission grants and emergency requests."""

from __future__ import annotations

from dataclasses import dataclass

from .keys import ADDRESS_SIZE, keccak256

DOMAIN_TYPE = "EIP712Domain(string name,string version,uint256 chainId,address verifyingContract)"
PERMISSION_TYPE = (
    "Permission(uint256 recordId,address grantee,uint64 expiration,bytes32 wrappedKeyHash,uint256 nonce)"
)
EMERGENCY_REQUEST_TYPE = (
    "EmergencyRequest(uint256 recordId,uint8 justificationCode,uint64 requestTime,uint64 maxSkewSeconds)"
)

DOMAIN_TYPEHASH = keccak256(DOMAIN_TYPE.encode())
PERMISSION_TYPEHASH = keccak256(PERMISSION_TYPE.encode())
EMERGENCY_REQUEST_TYPEHASH = keccak256(EMERGENCY_REQUEST_TYPE.encode())

DEFAULT_DOMAIN_NAME = "PatientHealthRecords"
DEFAULT_DOMAIN_VERSION = "1"


def encode_uint(value: int, bits: int = 256) -> bytes:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"value {value} does not fit uint{bits}")
    return value.to_bytes(32, "big")


def encode_address(address: bytes) -> bytes:
    if len(address) != ADDRESS_SIZE:
        raise ValueError("address must be 20 bytes")
    return bytes(12) + bytes(address)


def encode_bytes32(value: bytes) -> bytes:
    if len(value) != 32:
        raise ValueError("bytes32 value must be 32 bytes")
    return bytes(value)


@dataclass(frozen=True)
class TypedDataDomain:
    name: str
    version: str
    chain_id: int
    verifying_contract: bytes

    def separator(self) -> bytes:
        return keccak256(
            DOMAIN_TYPEHASH,
            keccak256(self.name.encode()),
            keccak256(self.version.encode()),
            encode_uint(self.chain_id),
            encode_address(self.verifying_contract),
        )


@dataclass(frozen=True)
class PermissionMessage:
    record_id: int
    grantee: bytes
    expiration: int
    wrapped_key_hash: bytes
    nonce: int

    @classmethod
    def for_wrapped_key(
        cls, record_id: int, grantee: bytes, expiration: int, wrapped_key: bytes, nonce: int
    ) -> "PermissionMessage":
        return cls(record_id, grantee, expiration, keccak256(wrapped_key), nonce)

    def struct_hash(self) -> bytes:
        return keccak256(
            PERMISSION_TYPEHASH,
            encode_uint(self.record_id),
            encode_address(self.grantee),
            encode_uint(self.expiration, 64),
            encode_bytes32(self.wrapped_key_hash),
            encode_uint(self.nonce),
        )


@dataclass(frozen=True)
class EmergencyRequestMessage:
    record_id: int
    justification_code: int
    request_time: int
    max_skew_seconds: int

    def struct_hash(self) -> bytes:
        return keccak256(
            EMERGENCY_REQUEST_TYPEHASH,
            encode_uint(self.record_id),
            encode_uint(self.justification_code, 8),
            encode_uint(self.request_time, 64),
            encode_uint(self.max_skew_seconds, 64),
        )


def hash_typed_data(domain: TypedDataDomain, struct_hash: bytes) -> bytes:
    return keccak256(b"\x19\x01", domain.separator(), struct_hash)


def hash_typed_permission(domain: TypedDataDomain, msg: PermissionMessage) -> bytes:
    return hash_typed_data(domain, msg.struct_hash())


def hash_typed_emergency(domain: TypedDataDomain, msg: EmergencyRequestMessage) -> bytes:
    return hash_typed_data(domain, msg.struct_hash())
