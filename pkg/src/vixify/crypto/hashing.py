"""Domain-separated SHA-256 and canonical integer encoding."""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32

# One-byte domain tags. Every digest in the protocol is prefixed by exactly one.
LEAF = 0x00
NODE = 0x01
EMPTY_TREE = 0x02
SECTION_A = 0x10
SECTION_AB = 0x11
SEAL = 0x12
ADDRESS = 0x20
TX = 0x30
VRF_OUTPUT = 0x40
VDF_ORACLE = 0x50
POW = 0x60
SIM = 0x70


def hash_digest(domain_tag: int, payload: bytes = b"") -> bytes:
    if not 0 <= domain_tag <= 0xFF:
        raise ValueError("domain tag must fit in one byte")
    return hashlib.sha256(bytes((domain_tag,)) + bytes(payload)).digest()


def int_to_bytes(n: int) -> bytes:
    """Minimal big-endian encoding; zero encodes as the empty string."""
    if n < 0:
        raise ValueError("negative integers have no canonical encoding")
    return n.to_bytes((n.bit_length() + 7) // 8, "big")


def bytes_to_int(data: bytes, *, strict: bool = True) -> int:
    if strict and data[:1] == b"\x00":
        raise ValueError("non-minimal integer encoding")
    return int.from_bytes(data, "big")
