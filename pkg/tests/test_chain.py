import random
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vixify import chain
from vixify.chain import (
    Block,
    DecodeError,
    InvalidTransaction,
    Ledger,
    SectionA,
    SectionB,
    address_of,
    apply_block,
    deserialize_block,
    hash_a,
    hash_ab,
    merkle_root,
    serialize_block,
    sign_transaction,
    stake_fraction,
)
from vixify.crypto.hashing import EMPTY_TREE, LEAF, NODE, hash_digest
from vixify.crypto.vdf import VdfProof
from vixify.crypto.vrf import VrfOutput, vrf_keygen

ALICE = vrf_keygen(b"a" * 32)
BOB = vrf_keygen(b"b" * 32)
A, B = address_of(ALICE.public_key), address_of(BOB.public_key)


def _tx(nonce, amount=1, key=ALICE, to=B):
    return sign_transaction(key.secret_key, to, amount, nonce)


def _ledger():
    return Ledger.genesis([(ALICE.public_key, 50), (BOB.public_key, 50)])


def test_merkle_base_cases():
    assert merkle_root([]) == hash_digest(EMPTY_TREE, b"")
    tx = _tx(0)
    assert merkle_root([tx]) == hash_digest(LEAF, tx.to_bytes())


def test_merkle_three_leaves_duplicates_last():
    txs = [_tx(i) for i in range(3)]
    leaf = [hash_digest(LEAF, t.to_bytes()) for t in txs]
    left = hash_digest(NODE, leaf[0] + leaf[1])
    right = hash_digest(NODE, leaf[2] + leaf[2])
    assert merkle_root(txs) == hash_digest(NODE, left + right)


def test_merkle_order_sensitive():
    txs = [_tx(i) for i in range(4)]
    assert merkle_root(txs) != merkle_root(txs[::-1])


def test_address_is_truncated_digest():
    assert A == hash_digest(chain.ADDRESS, ALICE.public_key)[:20]


def test_transaction_bytes_round_trip():
    tx = _tx(3, 7)
    assert chain.Transaction.from_bytes(tx.to_bytes()) == tx
    assert tx.signature_ok()
    assert not replace(tx, amount=8).signature_ok()


def test_stake_fraction_exact():
    led = Ledger({A: 1, B: 2}, 3)
    assert stake_fraction(led, A) == Fraction(1, 3)
    assert stake_fraction(_ledger(), A) == Fraction(1, 2)
    assert stake_fraction(_ledger(), b"\x00" * 20) == 0


def _random_block(rng: random.Random, txs=()) -> Block:
    rb = rng.randbytes
    sa = SectionA(rb(32), rb(20), VrfOutput(rb(32), rb(80)))
    sb = SectionB(
        prev_hash_ab=rb(32),
        vdf_proof=VdfProof(rng.getrandbits(128), rng.getrandbits(128), rng.getrandbits(40)),
        merkle_root=rb(32),
        merkle_vrf=VrfOutput(rb(32), rb(80)),
        timestamp=rng.getrandbits(48),
        seal=rb(64),
    )
    return Block(sa, sb, tuple(txs), rng.getrandbits(32))


def test_apply_block_reward():
    block = replace(_random_block(random.Random(0)), transactions=())
    after = apply_block(_ledger(), block, 10)
    assert after.balance(block.miner) == 10
    assert after.total_supply == 110


def test_apply_block_errors_identify_index():
    led = _ledger()
    with pytest.raises(InvalidTransaction) as exc:
        chain.apply_transactions(led, [_tx(0, 51)])
    assert exc.value.index == 0
    with pytest.raises(InvalidTransaction) as exc:
        chain.apply_transactions(led, [_tx(2), _tx(1)])
    assert exc.value.index == 1
    forged = replace(_tx(0), recipient=A)
    with pytest.raises(InvalidTransaction, match="signature"):
        chain.apply_transactions(led, [forged])


def test_nonce_gaps_allowed_but_no_replay():
    led = chain.apply_transactions(_ledger(), [_tx(0), _tx(5)])
    assert led.nonces[A] == 5
    with pytest.raises(InvalidTransaction):
        chain.apply_transactions(led, [_tx(5)])


@settings(max_examples=100)
@given(amounts=st.lists(st.integers(0, 30), max_size=6), reward=st.integers(0, 100))
def test_ledger_conservation(amounts, reward):
    led = _ledger()
    txs = [_tx(i, amt, *((ALICE, B) if i % 2 else (BOB, A))) for i, amt in enumerate(amounts)]
    block = replace(_random_block(random.Random(1)), transactions=())
    try:
        led = chain.apply_transactions(led, txs)
    except InvalidTransaction:
        return
    after = apply_block(led, block, reward)
    assert sum(after.balances.values()) == 100 + reward == after.total_supply


def test_serialization_round_trip_random_blocks():
    rng = random.Random(42)
    seen = set()
    txs = [_tx(i) for i in range(3)]
    for i in range(1000):
        block = _random_block(rng, txs[: i % 4])
        raw = serialize_block(block)
        assert deserialize_block(raw) == block
        assert serialize_block(deserialize_block(raw)) == raw
        seen.add(raw)
    assert len(seen) == 1000


def test_deserialize_rejects_truncation_and_trailing():
    raw = serialize_block(_random_block(random.Random(3), [_tx(0)]))
    with pytest.raises(DecodeError):
        deserialize_block(raw[:-1])
    with pytest.raises(DecodeError):
        deserialize_block(raw + b"\x00")


def test_genesis_hashes():
    g = chain.genesis_block(5)
    assert g.height == 0 and g.section_a.prev_hash_a == bytes(32)
    assert len(hash_a(g.section_a)) == 32
    assert deserialize_block(serialize_block(g)) == g


def _flip(b: bytes) -> bytes:
    return bytes([b[0] ^ 1]) + b[1:]


@pytest.mark.parametrize(
    "field, mutate",
    [
        ("prev_hash_ab", _flip),
        ("merkle_root", _flip),
        ("merkle_vrf", lambda v: VrfOutput(_flip(v.hash), v.proof)),
        ("vdf_proof", lambda p: VdfProof(p.input, p.output, p.steps + 1)),
        ("timestamp", lambda t: t + 1),
    ],
)
def test_section_b_mutations_leave_hash_a(field, mutate):
    block = _random_block(random.Random(9))
    sb = replace(block.section_b, **{field: mutate(getattr(block.section_b, field))})
    mutated = replace(block, section_b=sb)
    assert hash_a(mutated.section_a) == hash_a(block.section_a)
    assert hash_ab(mutated) != hash_ab(block)


@pytest.mark.parametrize(
    "field, mutate",
    [
        ("prev_hash_a", _flip),
        ("miner_address", _flip),
        ("slot_vrf", lambda v: VrfOutput(_flip(v.hash), v.proof)),
    ],
)
def test_section_a_mutations_change_both(field, mutate):
    block = _random_block(random.Random(9))
    sa = replace(block.section_a, **{field: mutate(getattr(block.section_a, field))})
    mutated = replace(block, section_a=sa)
    assert hash_a(sa) != hash_a(block.section_a)
    assert hash_ab(mutated) != hash_ab(block)


def test_seal_covers_block(keys):
    block = chain.seal_block(_random_block(random.Random(4)), keys[0].secret_key)
    assert chain.seal_ok(block, keys[0].public_key)
    assert not chain.seal_ok(block, keys[1].public_key)
    later = replace(block, section_b=replace(block.section_b, timestamp=block.timestamp + 1))
    assert not chain.seal_ok(later, keys[0].public_key)


def test_chain_file_framing(tmp_path):
    blocks = [_random_block(random.Random(i)) for i in range(3)]
    path = tmp_path / "c.bin"
    chain.write_chain(path, blocks)
    records = list(chain.iter_chain_records(path.read_bytes()))
    assert [deserialize_block(r) for r in records] == blocks
    with pytest.raises(DecodeError):
        list(chain.iter_chain_records(path.read_bytes()[:-1]))
