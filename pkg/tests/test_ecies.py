import hashlib
import hmac

import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ehrshare.crypto import KeyPair, generate_symmetric_key, unwrap_key, wrap_key
from ehrshare.crypto.ecies import WrappedKey
from ehrshare.errors import IntegrityError, InvalidPointError, ParseError

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F


def _point_mul(k, point):
    """Affine double-and-add on secp256k1 (y^2 = x^3 + 7); slow but independent."""

    def add(a, b):
        if a is None:
            return b
        if b is None:
            return a
        if a[0] == b[0] and (a[1] + b[1]) % P == 0:
            return None
        if a == b:
            lam = 3 * a[0] * a[0] * pow(2 * a[1], -1, P)
        else:
            lam = (b[1] - a[1]) * pow(b[0] - a[0], -1, P)
        x = (lam * lam - a[0] - b[0]) % P
        return x, (lam * (a[0] - x) - a[1]) % P

    acc = None
    while k:
        if k & 1:
            acc = add(acc, point)
        point = add(point, point)
        k >>= 1
    return acc


def _x963(z, length):
    out, counter = b"", 1
    while len(out) < length:
        out += hashlib.sha256(z + counter.to_bytes(4, "big")).digest()
        counter += 1
    return out[:length]


def test_round_trip(rng):
    kp = KeyPair.generate(rng)
    key = generate_symmetric_key(rng)
    assert unwrap_key(kp.private_scalar, wrap_key(kp.public_point, key, rng)) == key


def test_layout_matches_independent_decoder(rng):
    kp = KeyPair.generate(rng)
    key = generate_symmetric_key(rng)
    blob = wrap_key(kp.public_point, key, rng).to_bytes()
    eph, iv, ct, mac = blob[:65], blob[65:81], blob[81:-32], blob[-32:]
    assert eph[0] == 4
    shared = _point_mul(kp.private_scalar, (int.from_bytes(eph[1:33], "big"), int.from_bytes(eph[33:], "big")))
    okm = _x963(shared[0].to_bytes(32, "big"), 48)
    assert hmac.new(okm[16:], iv + ct, hashlib.sha256).digest() == mac
    dec = Cipher(algorithms.AES(okm[:16]), modes.CTR(iv)).decryptor()
    assert dec.update(ct) + dec.finalize() == key.key


def test_size_within_reported_range(rng):
    kp = KeyPair.generate(rng)
    size = len(wrap_key(kp.public_point, generate_symmetric_key(rng), rng).to_bytes())
    assert 110 <= size <= 150


def test_fresh_ephemeral_per_call(rng):
    kp = KeyPair.generate(rng)
    key = generate_symmetric_key(rng)
    assert wrap_key(kp.public_point, key, rng).ephemeral_public != wrap_key(kp.public_point, key, rng).ephemeral_public


def test_wrong_private_key_fails_mac(rng):
    a, b = KeyPair.generate(rng), KeyPair.generate(rng)
    wrapped = wrap_key(a.public_point, generate_symmetric_key(rng), rng)
    with pytest.raises(IntegrityError):
        unwrap_key(b.private_scalar, wrapped)


def test_truncated_is_parse_error(rng):
    kp = KeyPair.generate(rng)
    blob = wrap_key(kp.public_point, generate_symmetric_key(rng), rng).to_bytes()
    for cut in (0, 10, 65, 100, 113):
        with pytest.raises(ParseError):
            unwrap_key(kp.private_scalar, blob[:cut])


def test_every_mac_bit_flip_detected(rng):
    kp = KeyPair.generate(rng)
    blob = wrap_key(kp.public_point, generate_symmetric_key(rng), rng).to_bytes()
    for bit in range(32 * 8):
        bad = bytearray(blob)
        bad[len(blob) - 32 + bit // 8] ^= 1 << (bit % 8)
        with pytest.raises(IntegrityError):
            unwrap_key(kp.private_scalar, bytes(bad))


def test_iv_and_ciphertext_flips_detected(rng):
    kp = KeyPair.generate(rng)
    blob = wrap_key(kp.public_point, generate_symmetric_key(rng), rng).to_bytes()
    for pos in range(65, len(blob) - 32):
        bad = bytearray(blob)
        bad[pos] ^= 0x01
        with pytest.raises(IntegrityError):
            unwrap_key(kp.private_scalar, bytes(bad))


def test_malformed_ephemeral_point(rng):
    kp = KeyPair.generate(rng)
    blob = bytearray(wrap_key(kp.public_point, generate_symmetric_key(rng), rng).to_bytes())
    blob[0] = 0x02
    with pytest.raises(ParseError):
        WrappedKey.from_bytes(bytes(blob))
    blob[0] = 0x04
    blob[1:65] = bytes(64)  # (0, 0) is not on the curve
    with pytest.raises(ParseError):
        unwrap_key(kp.private_scalar, bytes(blob))


@pytest.mark.parametrize(
    "public", [b"", bytes(65), b"\x04" + bytes(64), b"\x04" + b"\xff" * 64, b"\x02" + bytes(32)]
)
def test_wrap_rejects_invalid_points(public, rng):
    with pytest.raises(InvalidPointError):
        wrap_key(public, generate_symmetric_key(rng), rng)
