"""ECVRF over edwards25519 with SHA-512 and try-and-increment hashing to the curve.

The construction follows the RFC 9381 ECVRF layout (suite 0x03): the proof is
``Gamma || c || s`` (80 bytes) and the pseudorandom output is derived from
``cofactor * Gamma``. All point arithmetic goes through libsodium via PyNaCl.

The 32-byte ``VrfOutput.hash`` exposed to the protocol is a domain-separated
SHA-256 of the 64-byte ECVRF output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from nacl import bindings as _na

from vixify.crypto.hashing import VRF_OUTPUT, hash_digest

SUITE = b"\x03"
SEED_MIN_BYTES = 32
PROOF_BYTES = 80

_P = 2**255 - 19
_L = 2**252 + 27742317777372353535851937790883648493
_C_LEN = 16
_EIGHT = (8).to_bytes(32, "little")


class VrfError(ValueError):
    pass


@dataclass(frozen=True)
class VrfKeyPair:
    secret_key: bytes
    public_key: bytes


@dataclass(frozen=True)
class VrfOutput:
    hash: bytes
    proof: bytes


_IDENTITY = (1).to_bytes(32, "little")


def _hash_to_curve(public_key: bytes, message: bytes) -> bytes:
    for ctr in range(256):
        digest = hashlib.sha512(
            SUITE + b"\x01" + public_key + message + bytes((ctr,)) + b"\x00"
        ).digest()
        candidate = digest[:32]
        if int.from_bytes(candidate, "little") & ((1 << 255) - 1) >= _P:
            continue
        # libsodium's point addition only checks curve membership, so three
        # doublings both validate the encoding and clear the cofactor.
        try:
            pt = candidate
            for _ in range(3):
                pt = _na.crypto_core_ed25519_add(pt, pt)
        except Exception:
            continue
        if pt != _IDENTITY:
            return pt
    raise VrfError("hash to curve failed")  # probability ~2^-256


# -- key handling --------------------------------------------------------------


def _checked(secret_key: bytes) -> bytes:
    if not isinstance(secret_key, (bytes, bytearray)) or len(secret_key) != 32:
        raise VrfError("malformed secret key")
    return bytes(secret_key)


def _expand(secret_key: bytes) -> tuple[int, bytes]:
    h = hashlib.sha512(secret_key).digest()
    a = bytearray(h[:32])
    a[0] &= 248
    a[31] &= 127
    a[31] |= 64
    return int.from_bytes(a, "little") % _L, h[32:]


@lru_cache(maxsize=4096)
def _key_material(secret_key: bytes) -> tuple[int, bytes, bytes]:
    x, prefix = _expand(secret_key)
    return x, prefix, _na.crypto_scalarmult_ed25519_base_noclamp(x.to_bytes(32, "little"))


def _scalar(n: int) -> bytes:
    return n.to_bytes(32, "little")


def _challenge(*points: bytes) -> int:
    digest = hashlib.sha512(SUITE + b"\x02" + b"".join(points) + b"\x00").digest()
    return int.from_bytes(digest[:_C_LEN], "little")


def _gamma_to_hash(cofactor_gamma: bytes) -> bytes:
    beta = hashlib.sha512(SUITE + b"\x03" + cofactor_gamma + b"\x00").digest()
    return hash_digest(VRF_OUTPUT, beta)


def public_key_of(secret_key: bytes) -> bytes:
    return _key_material(_checked(secret_key))[2]


def vrf_keygen(seed: bytes) -> VrfKeyPair:
    """Derive a key pair deterministically from ``seed`` (at least 32 bytes).

    A 32-byte seed is used directly as the edwards25519 secret; longer seeds
    are compressed with SHA-256 first.
    """
    seed = bytes(seed)
    if len(seed) < SEED_MIN_BYTES:
        raise VrfError("seed too short")
    sk = seed if len(seed) == 32 else hashlib.sha256(seed).digest()
    return VrfKeyPair(secret_key=sk, public_key=public_key_of(sk))


# -- evaluation / verification ------------------------------------------------


def vrf_eval(secret_key: bytes, message: bytes) -> VrfOutput:
    x, prefix, pk = _key_material(_checked(secret_key))
    h = _hash_to_curve(pk, bytes(message))
    gamma = _na.crypto_scalarmult_ed25519_noclamp(_scalar(x), h)
    k = int.from_bytes(hashlib.sha512(prefix + h).digest(), "little") % _L
    k_b = _na.crypto_scalarmult_ed25519_base_noclamp(_scalar(k))
    k_h = _na.crypto_scalarmult_ed25519_noclamp(_scalar(k), h)
    c = _challenge(pk, h, gamma, k_b, k_h)
    s = (k + c * x) % _L
    proof = gamma + c.to_bytes(_C_LEN, "little") + _scalar(s)
    out_point = _na.crypto_scalarmult_ed25519_noclamp(_EIGHT, gamma)
    return VrfOutput(hash=_gamma_to_hash(out_point), proof=proof)


def vrf_hash(secret_key: bytes, message: bytes) -> bytes:
    """The ``hash`` field of ``vrf_eval`` without building the proof."""
    x, _, pk = _key_material(_checked(secret_key))
    h = _hash_to_curve(pk, bytes(message))
    out_point = _na.crypto_scalarmult_ed25519_noclamp(_scalar(8 * x % _L), h)
    return _gamma_to_hash(out_point)


def vrf_verify(public_key: bytes, message: bytes, out: VrfOutput) -> bool:
    try:
        return _verify(bytes(public_key), bytes(message), out)
    except Exception:
        return False


def _verify(pk: bytes, message: bytes, out: VrfOutput) -> bool:
    proof = bytes(out.proof)
    if len(pk) != 32 or len(proof) != PROOF_BYTES or len(out.hash) != 32:
        return False
    if not _na.crypto_core_ed25519_is_valid_point(pk):
        return False
    gamma = proof[:32]
    if not _na.crypto_core_ed25519_is_valid_point(gamma):
        return False
    c = int.from_bytes(proof[32:48], "little")
    s = int.from_bytes(proof[48:], "little")
    if s >= _L:
        return False
    h = _hash_to_curve(pk, message)
    u = _na.crypto_core_ed25519_sub(
        _na.crypto_scalarmult_ed25519_base_noclamp(_scalar(s)),
        _na.crypto_scalarmult_ed25519_noclamp(_scalar(c), pk),
    )
    v = _na.crypto_core_ed25519_sub(
        _na.crypto_scalarmult_ed25519_noclamp(_scalar(s), h),
        _na.crypto_scalarmult_ed25519_noclamp(_scalar(c), gamma),
    )
    if _challenge(pk, h, gamma, u, v) != c:
        return False
    out_point = _na.crypto_scalarmult_ed25519_noclamp(_EIGHT, gamma)
    return _gamma_to_hash(out_point) == bytes(out.hash)


def vrf_eval_int(secret_key: bytes, message: bytes, n: int) -> int:
    return vrf_output_int(vrf_eval(secret_key, message), n)


def vrf_output_int(out: VrfOutput | bytes, n: int) -> int:
    """Reduce a VRF hash (big-endian unsigned) into ``[0, n)``."""
    if n < 1:
        raise VrfError("n must be positive")
    h = out.hash if isinstance(out, VrfOutput) else out
    return int.from_bytes(h, "big") % n
