"""Sloth: iterated modular square roots over a prime p = 3 (mod 4).

One forward round flips the low bit of ``x`` and takes a canonical square
root: the even root when the flipped value is a quadratic residue, otherwise
the odd root of its negation. That choice makes every round a permutation of
``[0, p)``, so the backward round (one squaring plus a parity test) is its
exact inverse. A forward round costs a full modular exponentiation, a
backward round a single multiplication, which is where the evaluation /
verification asymmetry comes from.
"""

from __future__ import annotations

import hashlib
import secrets
from collections.abc import Callable
from dataclasses import dataclass

import gmpy2

from vixify.crypto.hashing import int_to_bytes

MIN_BITS = 16
_MR_ROUNDS = 32  # error <= 4^-32 = 2^-64
_CANCEL_EVERY = 4096
_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


class VdfError(ValueError):
    pass


class VdfCancelled(Exception):
    """Raised when an evaluation is abandoned through ``should_stop``."""


@dataclass(frozen=True)
class VdfParams:
    modulus: int
    bit_length: int


@dataclass(frozen=True)
class VdfProof:
    input: int
    output: int
    steps: int


def is_probable_prime(n: int, rounds: int = _MR_ROUNDS) -> bool:
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = 2 + secrets.randbelow(n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def vdf_setup(bit_length: int, seed: bytes | None = None) -> VdfParams:
    """Pick a ``bit_length``-bit prime congruent to 3 mod 4.

    With a seed the candidate stream (and hence the prime) is deterministic.
    """
    if bit_length < MIN_BITS:
        raise VdfError(f"bit_length must be >= {MIN_BITS}")
    if seed is None:
        seed = secrets.token_bytes(32)
    nbytes = (bit_length + 7) // 8
    counter = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < nbytes:
            stream += hashlib.sha256(
                b"vixify/vdf-setup" + seed + counter.to_bytes(8, "big") + block.to_bytes(4, "big")
            ).digest()
            block += 1
        counter += 1
        cand = int.from_bytes(stream[:nbytes], "big") & ((1 << bit_length) - 1)
        cand |= (1 << (bit_length - 1)) | 3
        if is_probable_prime(cand):
            return VdfParams(modulus=cand, bit_length=bit_length)


def sloth_forward(x: int, steps: int, p: int, should_stop: Callable[[], bool] | None = None) -> int:
    p = gmpy2.mpz(p)
    x = gmpy2.mpz(x)
    e = (p + 1) // 4
    powmod = gmpy2.powmod
    for i in range(steps):
        if should_stop is not None and i % _CANCEL_EVERY == 0 and should_stop():
            raise VdfCancelled(i)
        w = x ^ 1
        if w >= p:
            w = x
        r = powmod(w, e, p)
        if r * r % p == w:
            x = r if r & 1 == 0 else p - r
        else:
            x = r if r & 1 else p - r
    return int(x)


def sloth_backward(y: int, steps: int, p: int) -> int:
    p = gmpy2.mpz(p)
    y = gmpy2.mpz(y)
    for _ in range(steps):
        s = y * y % p
        w = s if y & 1 == 0 else p - s
        y = w ^ 1
        if y >= p:
            y = w
    return int(y)


def reduce_input(params: VdfParams, data: bytes) -> int:
    return int.from_bytes(bytes(data), "big") % params.modulus


def vdf_eval(
    params: VdfParams,
    data: bytes,
    steps: int,
    should_stop: Callable[[], bool] | None = None,
) -> VdfProof:
    if steps < 0:
        raise VdfError("steps must be non-negative")
    x0 = reduce_input(params, data)
    y = sloth_forward(x0, steps, params.modulus, should_stop)
    return VdfProof(input=x0, output=y, steps=steps)


def vdf_verify(params: VdfParams, data: bytes, proof: VdfProof) -> bool:
    p = params.modulus
    try:
        x0 = reduce_input(params, data)
        if proof.input != x0 or not 0 <= proof.output < p:
            return False
        if not isinstance(proof.steps, int) or proof.steps < 0:
            return False
        return sloth_backward(proof.output, proof.steps, p) == x0
    except (TypeError, ValueError):
        return False


def params_to_json(params: VdfParams) -> dict:
    return {"modulus": int_to_bytes(params.modulus).hex(), "bit_length": params.bit_length}


def params_from_json(obj: dict) -> VdfParams:
    p = int(obj["modulus"], 16)
    bits = int(obj["bit_length"])
    if p.bit_length() != bits or p % 4 != 3 or not is_probable_prime(p):
        raise VdfError("modulus is not a prime = 3 mod 4 of the stated size")
    return VdfParams(modulus=p, bit_length=bits)
