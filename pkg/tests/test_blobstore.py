import hashlib
import threading

import pytest
from hypothesis import given, settings, strategies as st

from ehrshare.blobstore import (
    FileBlobStore,
    MemoryBlobStore,
    StoragePointer,
    deserialize_envelope,
    serialize_envelope,
)
from ehrshare.crypto import EncryptedEnvelope, compute_digest, decrypt_record, encrypt_record, generate_symmetric_key
from ehrshare.errors import AuthenticationError, BlobNotFound, ParseError


@pytest.fixture(params=["mem", "file"])
def store(request, tmp_path):
    return MemoryBlobStore() if request.param == "mem" else FileBlobStore(tmp_path / "blobs")


@pytest.fixture
def envelope(rng):
    return encrypt_record(generate_symmetric_key(rng), b"record body", rng=rng)


def test_round_trip(store, envelope):
    ptr = store.put(envelope)
    assert store.get(ptr) == envelope
    assert store.get(str(ptr)) == envelope


def test_idempotent_put(store, envelope):
    assert store.put(envelope) == store.put(envelope)
    assert len(store) == 1


def test_locator_is_hash_of_blob_and_equals_digest(store, envelope):
    ptr = store.put(envelope)
    blob = envelope.ciphertext + envelope.tag + envelope.nonce + envelope.associated_data
    assert ptr.locator == hashlib.sha256(blob).hexdigest()
    assert ptr.locator == compute_digest(envelope).hex()
    assert str(ptr) == f"{store.scheme}://{ptr.locator}"


def test_unknown_pointer(store):
    with pytest.raises(BlobNotFound):
        store.get(StoragePointer(store.scheme, "ab" * 32))


def test_foreign_scheme(store, envelope):
    other = "file" if store.scheme == "mem" else "mem"
    with pytest.raises(BlobNotFound):
        store.get(StoragePointer(other, "ab" * 32))


def test_delete(store, envelope):
    ptr = store.put(envelope)
    assert store.delete(ptr) is True
    with pytest.raises(BlobNotFound):
        store.get(ptr)
    assert store.delete(ptr) is False


@pytest.mark.parametrize("text", ["", "mem:/x", "s3://" + "a" * 64, "mem://XYZ", "mem://" + "A" * 64, "file://"])
def test_bad_pointers(text):
    with pytest.raises(ParseError):
        StoragePointer.parse(text)


def test_short_blob_parse_error():
    with pytest.raises(ParseError):
        deserialize_envelope(b"\x00" * 29)


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=300), st.binary(min_size=16, max_size=16), st.binary(min_size=12, max_size=12),
       st.binary(min_size=2, max_size=2))
def test_serialization_canonical(c, t, n, ad):
    env = EncryptedEnvelope(c, t, n, ad)
    blob = serialize_envelope(env)
    assert deserialize_envelope(blob) == env
    assert len(blob) == len(c) + 30


def test_pointer_equality_iff_bytes_equal(rng):
    store = MemoryBlobStore()
    key = generate_symmetric_key(rng)
    envs = [encrypt_record(key, bytes([i % 3]), rng=rng) for i in range(30)]
    ptrs = [store.put(e) for e in envs]
    for a, pa in zip(envs, ptrs):
        for b, pb in zip(envs, ptrs):
            assert (pa == pb) == (serialize_envelope(a) == serialize_envelope(b))


def test_file_layout(tmp_path, envelope):
    store = FileBlobStore(tmp_path)
    ptr = store.put(envelope)
    loc = ptr.locator
    assert (tmp_path / loc[:2] / loc[2:4] / loc).read_bytes() == serialize_envelope(envelope)


def test_corrupted_file_detected_downstream(tmp_path, rng):
    key = generate_symmetric_key(rng)
    env = encrypt_record(key, b"x" * 64, rng=rng)
    store = FileBlobStore(tmp_path)
    ptr = store.put(env)
    registered = compute_digest(env)
    path = store.path_for(ptr.locator)
    original = path.read_bytes()
    for pos in range(len(original)):
        corrupted = bytearray(original)
        corrupted[pos] ^= 0x40
        path.write_bytes(bytes(corrupted))
        try:
            got = store.get(ptr)
        except ParseError:
            continue
        assert compute_digest(got) != registered
        with pytest.raises(AuthenticationError):
            decrypt_record(key, got)


def test_store_holds_no_plaintext(store, rng):
    key = generate_symmetric_key(rng)
    sentinels = [f"SENTINEL-{i:04d}-{rng(6).hex()}".encode() for i in range(50)]
    for s in sentinels:
        store.put(encrypt_record(key, b"{\"note\": \"" + s * 3 + b"\"}", rng=rng))
    stored = b"".join(store)
    assert not any(s in stored for s in sentinels)


def test_concurrent_puts(tmp_path, rng):
    store = FileBlobStore(tmp_path)
    key = generate_symmetric_key(rng)
    envs = [encrypt_record(key, bytes([i]) * 100, rng=rng) for i in range(40)]
    ptrs = [None] * len(envs)

    def worker(i):
        ptrs[i] = store.put(envs[i])

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(len(envs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [store.get(p) for p in ptrs] == envs
