"""Mining puzzle, block verification, difficulty control and fork choice.

Each miner draws a private slot from a VRF over the parent's section-A hash,
reduced modulo ``floor(1 / stake)``. The slot fixes how many sequential VDF
steps the miner must run, ``floor(q * r**slot)``; whoever needs the fewest
steps proposes the block. ``q`` tracks the target block time and ``r`` reacts
to VDF speed-ups. Everything consensus-critical is exact integer or
``Fraction`` arithmetic.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Any

from vixify import chain
from vixify.chain import Address, Block, Ledger, SectionA, SectionB, Transaction
from vixify.crypto.hashing import POW, hash_digest
from vixify.crypto.vdf import (
    VdfParams,
    VdfProof,
    params_from_json,
    params_to_json,
    reduce_input,
    vdf_eval,
    vdf_verify,
)
from vixify.crypto.vrf import VrfKeyPair, VrfOutput, vrf_eval, vrf_hash, vrf_verify

R_MIN_DEFAULT = 1 + Fraction(1, 2**20)
_Q_DENOM = 2**32
_R_DENOM = 2**64


class ConsensusError(ValueError):
    pass


class ZeroStakeError(ConsensusError):
    pass


class StepCeilingExceeded(ConsensusError):
    pass


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class ConsensusConfig:
    alpha: Fraction = Fraction(1, 100)
    beta: Fraction = Fraction(1, 1000)
    target_block_time_ms: int = 10_000
    window_a: int = 100
    window_b: int = 1000
    q0: Fraction = Fraction(10**7)
    r0: Fraction = Fraction(2)
    q_min: Fraction = Fraction(16)
    q_max: Fraction = Fraction(2**40)
    r_min: Fraction = R_MIN_DEFAULT
    r_max: Fraction = Fraction(4)
    block_reward: int = 10
    bind_merkle: bool = True
    alg5_literal: bool = False
    adjust_q_enabled: bool = True
    adjust_r_enabled: bool = True
    compound_rewards: bool = True  # whether rewards count toward future stake
    step_ceiling: int = 2**40
    future_drift_ms: int = 60_000
    median_span: int = 11

    def __post_init__(self):
        for name in ("alpha", "beta", "q0", "r0", "q_min", "q_max", "r_min", "r_max"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if not (0 <= self.alpha < 1 and 0 <= self.beta < 1):
            raise ConsensusError("alpha and beta must lie in [0, 1)")
        if self.r_min < 1 or self.r_max < self.r_min or self.q_max < self.q_min or self.q_min <= 0:
            raise ConsensusError("inconsistent difficulty clamps")
        if self.window_a < 1 or self.window_b < 1 or self.target_block_time_ms <= 0:
            raise ConsensusError("windows and target must be positive")

    def to_json(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Fraction) else v
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ConsensusConfig:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in obj.items():
            if key not in known:
                raise ConsensusError(f"unknown consensus field: {key}")
            default = known[key].default
            if isinstance(default, Fraction):
                value = Fraction(value)
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ConsensusError(f"{key}: expected a boolean")
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConsensusError(f"{key}: expected an integer")
            kwargs[key] = value
        return cls(**kwargs)


# -- difficulty ----------------------------------------------------------------


@dataclass(frozen=True)
class DifficultyState:
    q: Fraction
    r: Fraction
    alpha: Fraction = Fraction(1, 100)
    beta: Fraction = Fraction(1, 1000)
    target_block_time: int = 10_000  # ms
    window_a: int = 100
    window_b: int = 1000
    block_time_window: tuple[int, ...] = ()
    speed_window: tuple[tuple[int, int], ...] = ()  # (steps, elapsed ms)
    max_speed_seen: Fraction = Fraction(0)
    last_speed: Fraction | None = None
    q_min: Fraction = Fraction(16)
    q_max: Fraction = Fraction(2**40)
    r_min: Fraction = R_MIN_DEFAULT
    r_max: Fraction = Fraction(4)
    alg5_literal: bool = False
    adjust_q_enabled: bool = True
    adjust_r_enabled: bool = True
    step_ceiling: int = 2**40
    block_time_sum: int = 0
    speed_steps_sum: int = 0
    speed_ms_sum: int = 0

    @classmethod
    def initial(cls, config: ConsensusConfig) -> DifficultyState:
        return cls(
            q=config.q0,
            r=config.r0,
            alpha=config.alpha,
            beta=config.beta,
            target_block_time=config.target_block_time_ms,
            window_a=config.window_a,
            window_b=config.window_b,
            q_min=config.q_min,
            q_max=config.q_max,
            r_min=config.r_min,
            r_max=config.r_max,
            alg5_literal=config.alg5_literal,
            adjust_q_enabled=config.adjust_q_enabled,
            adjust_r_enabled=config.adjust_r_enabled,
            step_ceiling=config.step_ceiling,
        )

    def average_block_time(self) -> Fraction | None:
        if not self.block_time_window:
            return None
        return Fraction(self.block_time_sum, len(self.block_time_window))

    def average_speed(self) -> Fraction | None:
        """Windowed VDF speed in steps per second."""
        if self.speed_ms_sum <= 0:
            return None
        return Fraction(self.speed_steps_sum * 1000, self.speed_ms_sum)


def _quantize(x: Fraction, denom: int) -> Fraction:
    if x.denominator <= denom * denom:
        return x
    return Fraction(x.numerator * denom // x.denominator, denom)


def _clamp(x: Fraction, lo: Fraction, hi: Fraction) -> Fraction:
    return max(lo, min(hi, x))


def adjust_q(diff: DifficultyState, observed_avg_block_time: Fraction | int) -> Fraction:
    """One step of the block-time controller: slower blocks mean fewer steps."""
    if observed_avg_block_time >= diff.target_block_time:
        q = diff.q * (1 - diff.alpha)
    else:
        q = diff.q * (1 + diff.alpha)
    return _clamp(_quantize(q, _Q_DENOM), diff.q_min, diff.q_max)


def adjust_r(diff: DifficultyState, observed_speed: Fraction | int) -> Fraction:
    """One step of the slot-base controller.

    By default ``r`` grows only while the windowed speed sets a new high and
    relaxes otherwise. With ``alg5_literal`` the comparison is against the
    previous windowed speed and the signs are swapped.
    """
    if diff.alg5_literal:
        prev = diff.last_speed if diff.last_speed is not None else observed_speed
        grow = not observed_speed >= prev
    else:
        grow = observed_speed > diff.max_speed_seen
    r = diff.r * (1 + diff.beta) if grow else diff.r * (1 - diff.beta)
    return _clamp(_quantize(r, _R_DENOM), diff.r_min, diff.r_max)


def next_difficulty(diff: DifficultyState, parent: Block, block: Block) -> DifficultyState:
    """Difficulty for the children of ``block`` given the state used to mine it."""
    dt = max(block.timestamp - parent.timestamp, 0)

    times = diff.block_time_window + (dt,)
    bt_sum = diff.block_time_sum + dt
    if len(times) > diff.window_a:
        bt_sum -= times[0]
        times = times[1:]

    speeds = diff.speed_window + ((block.steps, dt),)
    st_sum = diff.speed_steps_sum + block.steps
    ms_sum = diff.speed_ms_sum + dt
    if len(speeds) > diff.window_b:
        st_sum -= speeds[0][0]
        ms_sum -= speeds[0][1]
        speeds = speeds[1:]

    new = replace(
        diff,
        block_time_window=times,
        block_time_sum=bt_sum,
        speed_window=speeds,
        speed_steps_sum=st_sum,
        speed_ms_sum=ms_sum,
    )
    q = diff.q
    if diff.adjust_q_enabled:
        q = adjust_q(diff, new.average_block_time())
    r = diff.r
    max_seen = diff.max_speed_seen
    speed = new.average_speed()
    last = diff.last_speed
    if speed is not None:
        if diff.adjust_r_enabled:
            r = adjust_r(diff, speed)
        max_seen = max(max_seen, speed)
        last = speed
    return replace(new, q=q, r=r, max_speed_seen=max_seen, last_speed=last)


# -- the puzzle ----------------------------------------------------------------


def compute_range(stake: Fraction) -> int:
    stake = Fraction(stake)
    if stake <= 0:
        raise ZeroStakeError("zero stake: the slot range 1/stake is undefined")
    if stake > 1:
        raise ConsensusError("stake fraction above 1")
    return stake.denominator // stake.numerator


def slot_from_hash(vrf_digest: bytes, range_: int) -> int:
    if range_ < 1:
        raise ConsensusError("range must be positive")
    return int.from_bytes(vrf_digest, "big") % range_


def compute_slot(secret_key: bytes, prev_meta_hash: bytes, range_: int) -> tuple[int, VrfOutput]:
    if range_ < 1:
        raise ConsensusError("range must be positive")
    out = vrf_eval(secret_key, prev_meta_hash)
    return slot_from_hash(out.hash, range_), out


def vdf_message(prev_hash_ab: bytes, merkle_root: bytes, bind_merkle: bool = True) -> bytes:
    if len(prev_hash_ab) != 32 or len(merkle_root) != 32:
        raise ConsensusError("digests must be 32 bytes")
    if not bind_merkle:
        return bytes(prev_hash_ab)
    return bytes(a ^ b for a, b in zip(prev_hash_ab, merkle_root))


def compute_vdf_input(
    secret_key: bytes, prev_hash_ab: bytes, merkle_root: bytes, bind_merkle: bool = True
) -> tuple[bytes, VrfOutput]:
    out = vrf_eval(secret_key, vdf_message(prev_hash_ab, merkle_root, bind_merkle))
    return out.hash, out


def compute_steps(diff: DifficultyState, slot: int, ceiling: int | None = None) -> int:
    if slot < 0:
        raise ConsensusError("slot must be non-negative")
    ceiling = diff.step_ceiling if ceiling is None else ceiling
    q, r = diff.q, diff.r
    # cheap float pre-check so a huge slot never builds a gigantic power
    if slot and math.log2(q) + slot * math.log2(r) > math.log2(ceiling) + 1:
        raise StepCeilingExceeded(f"slot {slot} exceeds the step ceiling {ceiling}")
    steps = (q.numerator * r.numerator**slot) // (q.denominator * r.denominator**slot)
    if steps > ceiling:
        raise StepCeilingExceeded(f"{steps} steps exceeds the ceiling {ceiling}")
    return steps


@dataclass(frozen=True)
class MiningSolution:
    slot: int
    range: int
    steps: int
    vdf_input: bytes
    vdf_proof: VdfProof | None = None
    slot_vrf: VrfOutput | None = None
    merkle_vrf: VrfOutput | None = None


def select_proposer(candidates: Sequence[tuple[Any, MiningSolution]]):
    """Fewest steps wins; equal steps fall back to the smaller (pseudorandom) VDF input."""
    if not candidates:
        raise ConsensusError("no candidates")
    return min(candidates, key=lambda c: (c[1].steps, c[1].vdf_input))[0]


@dataclass(frozen=True)
class ChainTip:
    height: int
    cumulative_steps: int
    tip_hash: bytes
    ref: Any = field(default=None, compare=False)


def fork_choice(tips: Sequence[ChainTip]) -> ChainTip:
    if not tips:
        raise ConsensusError("no tips")
    return min(tips, key=lambda t: (-t.height, t.cumulative_steps, t.tip_hash))


# -- assembling and checking blocks --------------------------------------------


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


def miner_context(
    keys: VrfKeyPair, ledger: Ledger, parent: Block, diff: DifficultyState, *, prove: bool = True
) -> tuple[int, int, int, VrfOutput]:
    """Range, slot, steps and slot VRF for mining on ``parent``."""
    stake = chain.stake_fraction(ledger, chain.address_of(keys.public_key))
    range_ = compute_range(stake)
    message = chain.hash_a(parent.section_a)
    if prove:
        slot_vrf = vrf_eval(keys.secret_key, message)
    else:
        slot_vrf = VrfOutput(vrf_hash(keys.secret_key, message), b"")
    slot = slot_from_hash(slot_vrf.hash, range_)
    return range_, slot, compute_steps(diff, slot), slot_vrf


def mine_block(
    keys: VrfKeyPair,
    ledger: Ledger,
    parent: Block,
    diff: DifficultyState,
    transactions: Iterable[Transaction],
    config: ConsensusConfig,
    params: VdfParams,
    *,
    timestamp: int | None = None,
    should_stop: Callable[[], bool] | None = None,
    vdf: Callable[[bytes, int], VdfProof] | None = None,
    prove: bool = True,
    slot_vrf: VrfOutput | None = None,
) -> Block:
    """Run the puzzle for one miner on top of ``parent``.

    ``vdf`` replaces the Sloth evaluation (the simulator's abstract mode) and
    ``prove=False`` omits VRF proofs and the seal; such blocks only pass
    ``verify_block(..., check_crypto=False)``.
    """
    txs = tuple(transactions)
    chain.apply_transactions(ledger, txs)
    address = chain.address_of(keys.public_key)
    if slot_vrf is None:
        _, _, steps, slot_vrf = miner_context(keys, ledger, parent, diff, prove=prove)
    else:
        range_ = compute_range(chain.stake_fraction(ledger, address))
        steps = compute_steps(diff, slot_from_hash(slot_vrf.hash, range_))
    root = chain.merkle_root(txs)
    prev_ab = chain.hash_ab(parent)
    message = vdf_message(prev_ab, root, config.bind_merkle)
    if prove:
        merkle_vrf = vrf_eval(keys.secret_key, message)
    else:
        merkle_vrf = VrfOutput(vrf_hash(keys.secret_key, message), b"")
    if vdf is None:
        proof = vdf_eval(params, merkle_vrf.hash, steps, should_stop)
    else:
        proof = vdf(merkle_vrf.hash, steps)
    block = Block(
        section_a=SectionA(chain.hash_a(parent.section_a), address, slot_vrf),
        section_b=SectionB(
            prev_hash_ab=prev_ab,
            vdf_proof=proof,
            merkle_root=root,
            merkle_vrf=merkle_vrf,
            timestamp=_now_ms() if timestamp is None else timestamp,
        ),
        transactions=txs,
        height=parent.height + 1,
    )
    return chain.seal_block(block, keys.secret_key) if prove else block


@dataclass(frozen=True)
class Verdict:
    ok: bool
    check: int = 0
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


ACCEPT = Verdict(True)


def verify_block(
    block: Block,
    parent: Block,
    ledger_at_parent: Ledger,
    diff: DifficultyState,
    config: ConsensusConfig,
    local_time: int,
    params: VdfParams,
    recent_timestamps: Sequence[int] | None = None,
    *,
    check_crypto: bool = True,
) -> Verdict:
    """Validate ``block`` on top of ``parent``; the first failing check is reported.

    ``recent_timestamps`` lists up to ``median_span`` ancestor timestamps
    ending with the parent's. ``local_time`` is the receiver's clock in ms.
    """
    sa, sb = block.section_a, block.section_b

    # 1. linkage
    if block.height != parent.height + 1:
        return Verdict(False, 1, "height does not follow parent")
    if sa.prev_hash_a != chain.hash_a(parent.section_a):
        return Verdict(False, 1, "prev_hash_a mismatch")
    if sb.prev_hash_ab != chain.hash_ab(parent):
        return Verdict(False, 1, "prev_hash_ab mismatch")

    # 2. stake
    stake = chain.stake_fraction(ledger_at_parent, sa.miner_address)
    if stake <= 0:
        return Verdict(False, 2, "miner has zero stake")
    public_key = ledger_at_parent.keys.get(sa.miner_address)
    if public_key is None:
        return Verdict(False, 2, "miner key unknown")

    # 3. slot VRF over the parent's section-A hash
    if check_crypto and not vrf_verify(public_key, chain.hash_a(parent.section_a), sa.slot_vrf):
        return Verdict(False, 3, "slot VRF does not verify")

    # 4. range and slot
    try:
        range_ = compute_range(stake)
        slot = slot_from_hash(sa.slot_vrf.hash, range_)
        expected_steps = compute_steps(diff, slot)
    except ConsensusError as exc:
        return Verdict(False, 4, str(exc))

    # 5. payload
    try:
        root = chain.merkle_root(block.transactions)
    except ValueError as exc:
        return Verdict(False, 5, f"malformed transaction: {exc}")
    if root != sb.merkle_root:
        return Verdict(False, 5, "merkle root mismatch")
    try:
        chain.apply_transactions(ledger_at_parent, block.transactions)
    except chain.InvalidTransaction as exc:
        return Verdict(False, 5, str(exc))

    # 6. transaction-bound VRF feeding the VDF
    message = vdf_message(sb.prev_hash_ab, sb.merkle_root, config.bind_merkle)
    if check_crypto and not vrf_verify(public_key, message, sb.merkle_vrf):
        return Verdict(False, 6, "merkle VRF does not verify")
    if sb.vdf_proof.input != reduce_input(params, sb.merkle_vrf.hash):
        return Verdict(False, 6, "VDF input is not the merkle VRF output")

    # 7. step count and VDF
    if sb.vdf_proof.steps != expected_steps:
        return Verdict(False, 7, f"expected {expected_steps} steps, got {sb.vdf_proof.steps}")
    if check_crypto and not vdf_verify(params, sb.merkle_vrf.hash, sb.vdf_proof):
        return Verdict(False, 7, "VDF proof does not verify")

    # 8. timestamps
    if sb.timestamp > local_time + config.future_drift_ms:
        return Verdict(False, 8, "timestamp too far in the future")
    recent = list(recent_timestamps) if recent_timestamps else [parent.timestamp]
    if sb.timestamp <= statistics.median_low(recent[-config.median_span :]):
        return Verdict(False, 8, "timestamp not after the median of recent blocks")

    # 9. seal
    if check_crypto and not chain.seal_ok(block, public_key):
        return Verdict(False, 9, "block seal does not verify")
    return ACCEPT


# -- proof-of-work baseline ----------------------------------------------------


@dataclass(frozen=True)
class PowParams:
    difficulty_threshold: int

    def __post_init__(self):
        if not 0 <= self.difficulty_threshold < 2**256:
            raise ConsensusError("threshold must lie in [0, 2^256)")


def pow_hash(merkle_root: bytes, prev_hash: bytes, nonce: int) -> int:
    digest = hash_digest(POW, merkle_root + prev_hash + nonce.to_bytes(8, "big"))
    return int.from_bytes(digest, "big")


def pow_baseline_mine(
    merkle_root: bytes, prev_hash: bytes, threshold: PowParams, max_iterations: int = 1 << 20
) -> int:
    """Smallest nonce whose hash exceeds the threshold (the comparison points up)."""
    target = threshold.difficulty_threshold
    for t in range(max_iterations):
        if pow_hash(merkle_root, prev_hash, t) > target:
            return t
    raise ConsensusError(f"no nonce found in {max_iterations} iterations")


# -- genesis and whole-chain verification --------------------------------------


@dataclass(frozen=True)
class GenesisConfig:
    allocations: tuple[tuple[bytes, int], ...]
    consensus: ConsensusConfig
    vdf: VdfParams
    timestamp_ms: int = 0

    def block(self) -> Block:
        return chain.genesis_block(self.timestamp_ms)

    def ledger(self) -> Ledger:
        return Ledger.genesis(self.allocations)

    def to_json(self) -> dict[str, Any]:
        return {
            "timestamp_ms": self.timestamp_ms,
            "vdf": params_to_json(self.vdf),
            "consensus": self.consensus.to_json(),
            "allocations": [
                {"public_key": pk.hex(), "amount": amount} for pk, amount in self.allocations
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> GenesisConfig:
        allocs = tuple(
            (bytes.fromhex(a["public_key"]), int(a["amount"])) for a in obj["allocations"]
        )
        return cls(
            allocations=allocs,
            consensus=ConsensusConfig.from_json(obj.get("consensus", {})),
            vdf=params_from_json(obj["vdf"]),
            timestamp_ms=int(obj.get("timestamp_ms", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> GenesisConfig:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class ChainValidator:
    """Incrementally validates a chain from genesis, one block at a time."""

    genesis: GenesisConfig
    tip: Block = field(init=False)
    ledger: Ledger = field(init=False)
    diff: DifficultyState = field(init=False)
    timestamps: list[int] = field(init=False)

    def __post_init__(self):
        self.tip = self.genesis.block()
        self.ledger = self.genesis.ledger()
        self.diff = DifficultyState.initial(self.genesis.consensus)
        self.timestamps = [self.tip.timestamp]

    def push(self, block: Block, local_time: int | None = None) -> Verdict:
        cfg = self.genesis.consensus
        now = _now_ms() if local_time is None else local_time
        verdict = verify_block(
            block, self.tip, self.ledger, self.diff, cfg, now, self.genesis.vdf, self.timestamps
        )
        if verdict:
            reward = cfg.block_reward if cfg.compound_rewards else 0
            self.ledger = chain.apply_block(self.ledger, block, reward)
            self.diff = next_difficulty(self.diff, self.tip, block)
            self.tip = block
            self.timestamps = (self.timestamps + [block.timestamp])[-cfg.median_span :]
        return verdict
