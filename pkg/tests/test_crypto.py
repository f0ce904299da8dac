import hashlib
import random
import statistics
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ed25519_ref
from vixify.crypto import hashing, vdf, vrf
from vixify.crypto.hashing import EMPTY_TREE, LEAF, NODE, hash_digest, int_to_bytes, bytes_to_int
from vixify.crypto.vdf import VdfError, VdfProof, vdf_eval, vdf_setup, vdf_verify
from vixify.crypto.vrf import VrfError, VrfOutput, vrf_eval, vrf_eval_int, vrf_keygen, vrf_verify

K0 = vrf_keygen(bytes(32))
K1 = vrf_keygen(b"\x01" + bytes(31))

# frozen output of the reference ECVRF for (K0, "abc")
K0_ABC_HASH = "3be3920a1bde58867044cb748fe58c9a4f1d92ea784d478513e1347289a85c4a"


# -- hashing -------------------------------------------------------------------


def test_hash_digest_is_domain_separated_sha256():
    assert hash_digest(LEAF, b"x") == hashlib.sha256(b"\x00x").digest()
    assert hash_digest(LEAF, b"x") != hash_digest(NODE, b"x")
    assert len(hash_digest(EMPTY_TREE)) == 32


def test_domain_tags_are_distinct():
    tags = [v for k, v in vars(hashing).items() if k.isupper() and k != "DIGEST_SIZE"]
    assert len(tags) == len(set(tags))


@pytest.mark.parametrize("n, raw", [(0, b""), (1, b"\x01"), (256, b"\x01\x00")])
def test_minimal_big_endian(n, raw):
    assert int_to_bytes(n) == raw
    assert bytes_to_int(raw) == n


def test_non_minimal_encoding_rejected():
    with pytest.raises(ValueError):
        bytes_to_int(b"\x00\x01")


# -- VRF -----------------------------------------------------------------------


def test_keygen_is_deterministic():
    assert vrf_keygen(bytes(32)) == K0
    flipped = bytearray(32)
    flipped[5] ^= 0x10
    assert vrf_keygen(bytes(flipped)).public_key != K0.public_key


def test_keygen_short_seed():
    with pytest.raises(VrfError, match="seed too short"):
        vrf_keygen(bytes(8))


def test_keygen_matches_reference_curve():
    for k in (K0, K1):
        assert ed25519_ref.public_key(k.secret_key) == k.public_key


def test_fixed_vector():
    out = vrf_eval(K0.secret_key, b"abc")
    assert out.hash.hex() == K0_ABC_HASH
    assert len(out.proof) == vrf.PROOF_BYTES


def test_eval_is_deterministic_and_message_sensitive():
    a = vrf_eval(K0.secret_key, b"abc")
    assert vrf_eval(K0.secret_key, b"abc") == a
    assert vrf_eval(K0.secret_key, b"abd").hash != a.hash
    assert vrf_eval(K1.secret_key, b"abc").hash != a.hash


def test_fast_hash_agrees_with_eval():
    for m in (b"", b"abc", bytes(range(64))):
        assert vrf.vrf_hash(K1.secret_key, m) == vrf_eval(K1.secret_key, m).hash


def test_hash_to_curve_matches_reference():
    rng = random.Random(7)
    for _ in range(50):
        m = rng.randbytes(rng.randrange(64))
        assert vrf._hash_to_curve(K0.public_key, m) == ed25519_ref.hash_to_curve(K0.public_key, m)


def test_verify_wrong_key_or_message():
    out = vrf_eval(K0.secret_key, b"m")
    assert vrf_verify(K0.public_key, b"m", out)
    assert not vrf_verify(K1.public_key, b"m", out)
    assert not vrf_verify(K0.public_key, b"n", out)
    assert not vrf_verify(K0.public_key, b"m", VrfOutput(out.hash, out.proof[:-1]))
    assert not vrf_verify(b"junk", b"m", out)


def test_proof_bit_flips_rejected():
    out = vrf_eval(K0.secret_key, b"flip")
    rng = random.Random(1)
    for _ in range(1000):
        bit = rng.randrange(len(out.proof) * 8)
        proof = bytearray(out.proof)
        proof[bit // 8] ^= 1 << (bit % 8)
        assert not vrf_verify(K0.public_key, b"flip", VrfOutput(out.hash, bytes(proof)))


def test_hash_bit_flip_rejected():
    out = vrf_eval(K0.secret_key, b"flip")
    h = bytes([out.hash[0] ^ 1]) + out.hash[1:]
    assert not vrf_verify(K0.public_key, b"flip", VrfOutput(h, out.proof))


@settings(max_examples=1000)
@given(seed=st.binary(min_size=32, max_size=48), message=st.binary(max_size=80))
def test_vrf_round_trip(seed, message):
    kp = vrf_keygen(seed)
    out = vrf_eval(kp.secret_key, message)
    assert vrf_verify(kp.public_key, message, out)
    assert vrf_eval(kp.secret_key, message).hash == out.hash


def test_eval_int():
    out = vrf_eval(K0.secret_key, b"abc")
    assert vrf_eval_int(K0.secret_key, b"abc", 1) == 0
    assert vrf_eval_int(K0.secret_key, b"abc", 4) == int(K0_ABC_HASH, 16) % 4
    assert vrf.vrf_output_int(bytes(31) + b"\x05", 4) == 1
    assert vrf.vrf_output_int(out, 2**256) == int.from_bytes(out.hash, "big")
    with pytest.raises(VrfError):
        vrf_eval_int(K0.secret_key, b"abc", 0)


# -- VDF -----------------------------------------------------------------------


def test_setup_sizes():
    p16 = vdf_setup(16, b"s")
    assert p16.modulus.bit_length() == 16 and p16.modulus % 4 == 3
    assert vdf_setup(16, b"s") == p16
    p256 = vdf_setup(256, b"s")
    assert p256.modulus.bit_length() == 256 and vdf.is_probable_prime(p256.modulus)
    with pytest.raises(VdfError):
        vdf_setup(8)


def test_tiny_prime_single_round():
    # w = 5 xor 1 = 4 is a residue mod 23; 4^6 mod 23 = 2, already even
    assert vdf.sloth_forward(5, 1, 23) == 2
    assert vdf.sloth_backward(2, 1, 23) == 5


def _round_oracle(x, p):
    w = x ^ 1
    if w >= p:
        w = x
    for cand in (w, p - w):
        r = pow(cand, (p + 1) // 4, p)
        if r * r % p == cand % p:
            break
    evens = [v for v in (r, p - r) if v % 2 == 0]
    odds = [v for v in (r, p - r) if v % 2 == 1]
    return evens[0] if cand == w else odds[0]


@pytest.mark.parametrize("p", [23, 10007, 65519])
def test_round_is_bijection(p):
    images = [vdf.sloth_forward(x, 1, p) for x in range(p)]
    assert sorted(images) == list(range(p))
    if p < 100:
        assert images == [_round_oracle(x, p) for x in range(p)]


def test_tiny_prime_ten_steps():
    params = vdf.VdfParams(23, 5)
    for x in range(23):
        proof = vdf_eval(params, bytes([x]), 10)
        assert vdf_verify(params, bytes([x]), proof)


@pytest.mark.parametrize("t", [0, 1, 1000])
def test_eval_verify_round_trip(small_params, t):
    proof = vdf_eval(small_params, b"input", t)
    if t == 0:
        assert proof.output == proof.input
    assert vdf_verify(small_params, b"input", proof)


def test_verify_rejects_mutations(small_params):
    proof = vdf_eval(small_params, b"input", 500)
    p = small_params.modulus
    bad = [
        VdfProof(proof.input, (proof.output + 1) % p, proof.steps),
        VdfProof(proof.input, proof.output, proof.steps - 1),
        VdfProof(proof.input, proof.output, proof.steps + 1),
        VdfProof((proof.input + 1) % p, proof.output, proof.steps),
        VdfProof(proof.input, proof.output + p, proof.steps),
    ]
    assert not any(vdf_verify(small_params, b"input", b) for b in bad)
    assert not vdf_verify(small_params, b"other", proof)


@settings(max_examples=200)
@given(data=st.binary(max_size=40), t=st.integers(0, 10_000))
def test_vdf_round_trip_property(small_params, data, t):
    proof = vdf_eval(small_params, data, t)
    assert vdf_verify(small_params, data, proof)
    assert not vdf_verify(small_params, data, VdfProof(proof.input, proof.output, t + 1))


def test_cancellation(small_params):
    with pytest.raises(vdf.VdfCancelled):
        vdf_eval(small_params, b"x", 10**6, should_stop=lambda: True)


def test_params_json_round_trip(small_params):
    assert vdf.params_from_json(vdf.params_to_json(small_params)) == small_params
    with pytest.raises(VdfError):
        vdf.params_from_json({"modulus": "15", "bit_length": 5})


@pytest.mark.slow
def test_eval_time_linear_in_steps():
    params = vdf_setup(256, b"linear")
    ts, secs = [], []
    for t in (1000, 10_000, 100_000):
        start = time.perf_counter()
        vdf_eval(params, b"x", t)
        ts.append(t)
        secs.append(time.perf_counter() - start)
    assert statistics.correlation(ts, secs) ** 2 > 0.99


@pytest.mark.slow
def test_verification_asymmetry():
    params = vdf_setup(256, b"asym")
    start = time.perf_counter()
    proof = vdf_eval(params, b"x", 50_000)
    t_eval = time.perf_counter() - start
    start = time.perf_counter()
    assert vdf_verify(params, b"x", proof)
    t_verify = time.perf_counter() - start
    assert t_eval / t_verify >= 10
