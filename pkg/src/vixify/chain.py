"""Blocks, transactions, Merkle trees, the ledger, and canonical byte layouts.

A block is split in two. Section A holds only what is fixed before the miner
picks a transaction set (parent hash A, miner address, slot VRF), so the
slot lottery cannot be re-rolled by shuffling transactions. Section B holds
everything that depends on the payload.

All integers are big-endian. Variable-size fields carry a length prefix and
big integers use their minimal encoding, so every valid block has exactly one
serialization.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from nacl.exceptions import BadSignatureError
from nacl.signing import SigningKey, VerifyKey

from vixify.crypto.hashing import (
    ADDRESS,
    EMPTY_TREE,
    LEAF,
    NODE,
    SEAL,
    SECTION_A,
    SECTION_AB,
    TX,
    bytes_to_int,
    hash_digest,
    int_to_bytes,
)
from vixify.crypto.vdf import VdfProof
from vixify.crypto.vrf import VrfOutput

ADDRESS_BYTES = 20
ZERO_HASH = bytes(32)
ZERO_ADDRESS = bytes(ADDRESS_BYTES)
TX_BYTES = 32 + ADDRESS_BYTES + 8 + 8 + 64

Address = bytes


class DecodeError(ValueError):
    pass


class InvalidTransaction(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"transaction {index}: {reason}")
        self.index = index
        self.reason = reason


def address_of(public_key: bytes) -> Address:
    return hash_digest(ADDRESS, public_key)[:ADDRESS_BYTES]


# -- transactions --------------------------------------------------------------


@dataclass(frozen=True)
class Transaction:
    """A signed transfer. ``public_key`` is the sender's key; the sender
    address is derived from it."""

    public_key: bytes
    recipient: Address
    amount: int
    nonce: int
    signature: bytes = b""

    @property
    def sender(self) -> Address:
        return address_of(self.public_key)

    def signing_bytes(self) -> bytes:
        return (
            self.public_key
            + self.recipient
            + struct.pack(">QQ", self.amount, self.nonce)
        )

    def to_bytes(self) -> bytes:
        if len(self.public_key) != 32 or len(self.recipient) != ADDRESS_BYTES:
            raise ValueError("malformed transaction key or recipient")
        if len(self.signature) != 64:
            raise ValueError("transaction is not signed")
        return self.signing_bytes() + self.signature

    @classmethod
    def from_bytes(cls, data: bytes) -> Transaction:
        if len(data) != TX_BYTES:
            raise DecodeError("bad transaction length")
        amount, nonce = struct.unpack(">QQ", data[52:68])
        return cls(data[:32], data[32:52], amount, nonce, data[68:])

    def signature_ok(self) -> bool:
        try:
            VerifyKey(self.public_key).verify(
                hash_digest(TX, self.signing_bytes()), self.signature
            )
            return True
        except (BadSignatureError, ValueError, TypeError):
            return False


def sign_transaction(
    secret_key: bytes, recipient: Address, amount: int, nonce: int
) -> Transaction:
    sk = SigningKey(secret_key)
    unsigned = Transaction(bytes(sk.verify_key), recipient, amount, nonce)
    sig = sk.sign(hash_digest(TX, unsigned.signing_bytes())).signature
    return replace(unsigned, signature=sig)


def merkle_root(transactions: Iterable[Transaction]) -> bytes:
    level = [hash_digest(LEAF, tx.to_bytes()) for tx in transactions]
    if not level:
        return hash_digest(EMPTY_TREE, b"")
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hash_digest(NODE, level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


# -- block sections ------------------------------------------------------------


def _lp16(data: bytes) -> bytes:
    if len(data) > 0xFFFF:
        raise ValueError("field too long")
    return struct.pack(">H", len(data)) + data


def _lp_int(n: int) -> bytes:
    raw = int_to_bytes(n)
    if len(raw) > 0xFF:
        raise ValueError("integer too large")
    return bytes((len(raw),)) + raw


@dataclass(frozen=True)
class SectionA:
    prev_hash_a: bytes
    miner_address: Address
    slot_vrf: VrfOutput

    def to_bytes(self) -> bytes:
        return (
            self.prev_hash_a
            + self.miner_address
            + self.slot_vrf.hash
            + _lp16(self.slot_vrf.proof)
        )


@dataclass(frozen=True)
class SectionB:
    prev_hash_ab: bytes
    vdf_proof: VdfProof
    merkle_root: bytes
    merkle_vrf: VrfOutput
    timestamp: int  # milliseconds
    seal: bytes = b""  # miner's Ed25519 signature over the rest of the block

    def unsealed_bytes(self) -> bytes:
        return (
            self.prev_hash_ab
            + _lp_int(self.vdf_proof.input)
            + _lp_int(self.vdf_proof.output)
            + struct.pack(">Q", self.vdf_proof.steps)
            + self.merkle_root
            + self.merkle_vrf.hash
            + _lp16(self.merkle_vrf.proof)
            + struct.pack(">Q", self.timestamp)
        )

    def to_bytes(self) -> bytes:
        return self.unsealed_bytes() + _lp16(self.seal)


@dataclass(frozen=True)
class Block:
    section_a: SectionA
    section_b: SectionB
    transactions: tuple[Transaction, ...] = ()
    height: int = 0

    @property
    def miner(self) -> Address:
        return self.section_a.miner_address

    @property
    def steps(self) -> int:
        return self.section_b.vdf_proof.steps

    @property
    def timestamp(self) -> int:
        return self.section_b.timestamp


def hash_a(section_a: SectionA) -> bytes:
    """Commit to section A.

    The VRF proof is left out on purpose: only the VRF hash is unique, and a
    miner able to re-randomise its proof could otherwise grind the message
    that seeds everyone's next slot.
    """
    return hash_digest(
        SECTION_A,
        section_a.prev_hash_a + section_a.miner_address + section_a.slot_vrf.hash,
    )


def hash_ab(block: Block) -> bytes:
    return hash_digest(
        SECTION_AB, block.section_a.to_bytes() + block.section_b.unsealed_bytes()
    )


def seal_message(block: Block) -> bytes:
    return hash_digest(
        SEAL,
        struct.pack(">Q", block.height)
        + block.section_a.to_bytes()
        + block.section_b.unsealed_bytes(),
    )


def seal_block(block: Block, secret_key: bytes) -> Block:
    sig = SigningKey(secret_key).sign(seal_message(block)).signature
    return replace(block, section_b=replace(block.section_b, seal=sig))


def seal_ok(block: Block, public_key: bytes) -> bool:
    try:
        VerifyKey(public_key).verify(seal_message(block), block.section_b.seal)
        return True
    except (BadSignatureError, ValueError, TypeError):
        return False


def genesis_block(timestamp: int = 0) -> Block:
    return Block(
        section_a=SectionA(ZERO_HASH, ZERO_ADDRESS, VrfOutput(ZERO_HASH, b"")),
        section_b=SectionB(
            prev_hash_ab=ZERO_HASH,
            vdf_proof=VdfProof(0, 0, 0),
            merkle_root=merkle_root([]),
            merkle_vrf=VrfOutput(ZERO_HASH, b""),
            timestamp=timestamp,
        ),
        transactions=(),
        height=0,
    )


# -- serialization -------------------------------------------------------------


def serialize_block(block: Block) -> bytes:
    txs = b"".join(tx.to_bytes() for tx in block.transactions)
    return (
        struct.pack(">Q", block.height)
        + block.section_a.to_bytes()
        + block.section_b.to_bytes()
        + struct.pack(">I", len(block.transactions))
        + txs
    )


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated block")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp16(self) -> bytes:
        return self.take(self.u16())

    def lp_int(self) -> int:
        raw = self.take(self.u8())
        try:
            return bytes_to_int(raw)
        except ValueError as exc:
            raise DecodeError(str(exc)) from None


def deserialize_block(data: bytes) -> Block:
    r = _Reader(bytes(data))
    height = r.u64()
    sa = SectionA(r.take(32), r.take(ADDRESS_BYTES), VrfOutput(r.take(32), r.lp16()))
    prev_ab = r.take(32)
    proof = VdfProof(r.lp_int(), r.lp_int(), r.u64())
    sb = SectionB(
        prev_hash_ab=prev_ab,
        vdf_proof=proof,
        merkle_root=r.take(32),
        merkle_vrf=VrfOutput(r.take(32), r.lp16()),
        timestamp=r.u64(),
        seal=r.lp16(),
    )
    count = r.u32()
    if count * TX_BYTES > len(r.data) - r.pos:
        raise DecodeError("truncated block")
    txs = tuple(Transaction.from_bytes(r.take(TX_BYTES)) for _ in range(count))
    if r.pos != len(r.data):
        raise DecodeError("trailing bytes after block")
    return Block(sa, sb, txs, height)


def write_chain(path: str | Path, blocks: Iterable[Block]) -> None:
    with open(path, "wb") as fh:
        for block in blocks:
            raw = serialize_block(block)
            fh.write(struct.pack(">I", len(raw)) + raw)


def iter_chain_records(data: bytes) -> Iterator[bytes]:
    """Split a chain file into per-block records; raises DecodeError on bad framing."""
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise DecodeError("truncated length prefix")
        (n,) = struct.unpack(">I", data[pos : pos + 4])
        pos += 4
        if pos + n > len(data):
            raise DecodeError("truncated block record")
        yield data[pos : pos + n]
        pos += n


# -- ledger --------------------------------------------------------------------


@dataclass(frozen=True)
class Ledger:
    """Account balances plus the replay and key state needed to validate
    transfers. Treated as an immutable value: ``apply_block`` returns a copy."""

    balances: Mapping[Address, int] = field(default_factory=dict)
    total_supply: int = 0
    nonces: Mapping[Address, int] = field(default_factory=dict)
    keys: Mapping[Address, bytes] = field(default_factory=dict)

    @classmethod
    def genesis(cls, allocations: Iterable[tuple[bytes, int]]) -> Ledger:
        """Build a ledger from ``(public_key, amount)`` pairs."""
        balances: dict[Address, int] = {}
        keys: dict[Address, bytes] = {}
        for pk, amount in allocations:
            if amount < 0:
                raise ValueError("negative allocation")
            addr = address_of(pk)
            balances[addr] = balances.get(addr, 0) + amount
            keys[addr] = pk
        return cls(balances, sum(balances.values()), {}, keys)

    def balance(self, address: Address) -> int:
        return self.balances.get(address, 0)

    def with_transfer(self, src: Address, dst: Address, amount: int) -> Ledger:
        """Move coins outside of a block (used by simulated stake events)."""
        if amount > self.balance(src):
            raise ValueError("insufficient balance")
        balances = dict(self.balances)
        balances[src] -= amount
        balances[dst] = balances.get(dst, 0) + amount
        return replace(self, balances=balances)


def stake_fraction(ledger: Ledger, address: Address) -> Fraction:
    if ledger.total_supply == 0:
        return Fraction(0)
    return Fraction(ledger.balance(address), ledger.total_supply)


def apply_transactions(ledger: Ledger, transactions: Iterable[Transaction]) -> Ledger:
    balances = dict(ledger.balances)
    nonces = dict(ledger.nonces)
    keys = dict(ledger.keys)
    for i, tx in enumerate(transactions):
        if len(tx.public_key) != 32 or len(tx.recipient) != ADDRESS_BYTES:
            raise InvalidTransaction(i, "malformed")
        if not tx.signature_ok():
            raise InvalidTransaction(i, "bad signature")
        sender = tx.sender
        if tx.nonce <= nonces.get(sender, -1):
            raise InvalidTransaction(i, "bad nonce")
        if tx.amount > balances.get(sender, 0):
            raise InvalidTransaction(i, "insufficient balance")
        balances[sender] -= tx.amount
        balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
        nonces[sender] = tx.nonce
        keys.setdefault(sender, tx.public_key)
    return Ledger(balances, ledger.total_supply, nonces, keys)


def apply_block(ledger: Ledger, block: Block, reward: int) -> Ledger:
    if reward < 0:
        raise ValueError("negative reward")
    after = apply_transactions(ledger, block.transactions)
    balances = dict(after.balances)
    miner = block.section_a.miner_address
    balances[miner] = balances.get(miner, 0) + reward
    return replace(after, balances=balances, total_supply=after.total_supply + reward)
