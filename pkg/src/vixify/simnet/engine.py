"""Deterministic discrete-event network of miners.

Every miner is also a relay node with its own view of the chain. A node that
adopts a new tip starts a VDF run whose duration is ``steps / vdf_speed``;
finished blocks are broadcast with per-link latency. Nodes adopt any valid
block that extends a longer chain, and switch between blocks of equal height
only if the newcomer arrives within the receive window and is preferred:
fewer steps, or equal steps and a smaller slot VRF hash. Everything random (keys, latency, drops, the abstract VDF) is
derived by hashing the seed, so a configuration replays bit for bit.

Mining continues ``confirmations`` blocks past ``blocks_to_run`` so that the
reported prefix is settled across nodes.
"""

from __future__ import annotations

import heapq
import struct
from collections import defaultdict
from collections.abc import Callable
from dataclasses import dataclass, field

from vixify import chain
from vixify.chain import Block, Ledger, Transaction
from vixify.consensus import (
    ChainTip,
    ConsensusError,
    DifficultyState,
    GenesisConfig,
    compute_range,
    compute_steps,
    fork_choice,
    mine_block,
    next_difficulty,
    slot_from_hash,
    verify_block,
)
from vixify.crypto.hashing import SIM, VDF_ORACLE, hash_digest
from vixify.crypto.vdf import VdfParams, VdfProof, reduce_input, vdf_setup
from vixify.crypto.vrf import VrfKeyPair, VrfOutput, vrf_eval, vrf_hash, vrf_keygen
from vixify.simnet.config import PASSIVE, SimConfig, stake_shares

TxSource = Callable[[int, dict[str, VrfKeyPair], Ledger, int], list[Transaction]]
TieHook = Callable[[int, int], bool]  # (new miner index, current miner index) -> switch?

_FAR_FUTURE_MS = 2**62
_MINE_DONE, _ARRIVE = 0, 1


def miner_keys(seed: int, name: str) -> VrfKeyPair:
    return vrf_keygen(hash_digest(SIM, b"key" + struct.pack(">Q", seed) + name.encode()))


def sim_vdf_params(seed: int, bits: int) -> VdfParams:
    return vdf_setup(bits, hash_digest(SIM, b"vdf" + struct.pack(">Q", seed)))


def abstract_vdf(seed: int, params: VdfParams) -> Callable[[bytes, int], VdfProof]:
    """Seeded stand-in for Sloth keyed by the VRF-derived input and the step count."""
    prefix = struct.pack(">Q", seed)

    def evaluate(data: bytes, steps: int) -> VdfProof:
        out = hash_digest(VDF_ORACLE, prefix + data + struct.pack(">Q", steps))
        return VdfProof(reduce_input(params, data), int.from_bytes(out, "big") % params.modulus, steps)

    return evaluate


def _preference(block: Block) -> tuple[int, bytes]:
    # Equal step counts fall back to the slot VRF hash: pseudorandom, fixed
    # before any transaction is chosen, and independent of the VDF output.
    return block.steps, block.section_a.slot_vrf.hash


def _unit_pair(seed: int, tag: bytes, receiver: int) -> tuple[float, float]:
    d = hash_digest(SIM, b"net" + struct.pack(">QI", seed, receiver) + tag)
    a, b = struct.unpack(">QQ", d[:16])
    return a / 2**64, b / 2**64


@dataclass(frozen=True)
class Check:
    experiment: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class Metrics:
    miners: tuple[str, ...]
    addresses: tuple[str, ...]
    groups: tuple[str, ...]
    stake_share: tuple[float, ...]
    blocks_won: tuple[int, ...]
    reward_share: tuple[float, ...]
    heights: tuple[int, ...]
    timestamps: tuple[int, ...]  # ms
    interblock: tuple[int, ...]  # ms
    q: tuple[float, ...]
    r: tuple[float, ...]
    winners: tuple[int, ...]  # miner index per height
    orphans: int
    rejected: int
    constants: dict[str, str]
    verdicts: list[Check] = field(default_factory=list)
    blocks: tuple[Block, ...] = field(default=(), compare=False, repr=False)
    genesis: GenesisConfig | None = field(default=None, compare=False, repr=False)

    def share_of(self, names) -> float:
        names = {names} if isinstance(names, str) else set(names)
        return sum(s for n, s in zip(self.miners, self.reward_share) if n in names)

    def rolling_share(self, name: str, window: int) -> list[float]:
        idx = self.miners.index(name)
        wins = [1 if w == idx else 0 for w in self.winners]
        out, acc = [], 0
        for i, w in enumerate(wins):
            acc += w
            if i >= window:
                acc -= wins[i - window]
            if i + 1 >= window:
                out.append(acc / window)
        return out


@dataclass
class _Rec:
    block: Block
    parent: int
    ledger: Ledger  # state for children
    diff: DifficultyState  # state for children
    cum_steps: int
    recent: tuple[int, ...]
    miner: int
    valid: bool
    hash_a: bytes


@dataclass
class _Node:
    tip: int = 0
    adopted_at: float = 0.0
    token: int = 0
    pending: tuple[int, tuple[int, bytes]] | None = None  # height, preference of the run


class _Sim:
    def __init__(self, cfg: SimConfig, tx_source: TxSource | None, tie_hook: TieHook | None):
        self.cfg = cfg
        self.tx_source = tx_source
        self.tie_hook = tie_hook
        self.real = cfg.vdf_mode == "real"
        self.names = [m.name for m in cfg.miners]
        self.keys = {name: miner_keys(cfg.seed, name) for name in self.names + [PASSIVE]}
        self.addr = {n: chain.address_of(k.public_key) for n, k in self.keys.items()}
        allocations = [(self.keys[m.name].public_key, m.stake) for m in cfg.miners]
        if cfg.unallocated_stake:
            allocations.append((self.keys[PASSIVE].public_key, cfg.unallocated_stake))
        self.params = sim_vdf_params(cfg.seed, cfg.vdf_bits)
        self.genesis = GenesisConfig(tuple(allocations), cfg.consensus, self.params, 0)
        self.oracle = abstract_vdf(cfg.seed, self.params)
        self.reward = cfg.consensus.block_reward if cfg.consensus.compound_rewards else 0
        self.target = cfg.blocks_to_run + cfg.confirmations

        self.stake_events = defaultdict(list)
        for ev in cfg.stake_events:
            self.stake_events[ev.height].append(ev)

        g = self.genesis.block()
        ledger = self._after_events(self.genesis.ledger(), 0)
        self.store = [_Rec(g, -1, ledger, DifficultyState.initial(cfg.consensus), 0,
                           (g.timestamp,), -1, True, chain.hash_a(g.section_a))]
        self.nodes = [_Node() for _ in cfg.miners]
        self.events: list = []
        self.seq = 0
        self.slot_cache: dict[tuple[int, int], VrfOutput] = {}
        self.finished: set[tuple[int, int]] = set()
        self.rejected = 0

    # -- helpers ---------------------------------------------------------------

    def _after_events(self, ledger: Ledger, height: int) -> Ledger:
        for ev in self.stake_events.get(height, ()):
            ledger = ledger.with_transfer(self.addr[ev.src], self.addr[ev.dst], ev.amount)
        return ledger

    def _push(self, t: float, kind: int, payload: tuple) -> None:
        heapq.heappush(self.events, (t, self.seq, kind, payload))
        self.seq += 1

    def _speed(self, i: int, height: int) -> float:
        spec = self.cfg.miners[i]
        speed = spec.vdf_speed
        for ev in self.cfg.speed_events:
            if ev.miner == spec.name and height > ev.height:
                speed *= ev.factor
        return speed

    def _slot_vrf(self, i: int, parent: int) -> VrfOutput:
        key = (i, parent)
        out = self.slot_cache.get(key)
        if out is None:
            sk = self.keys[self.names[i]].secret_key
            message = self.store[parent].hash_a
            out = vrf_eval(sk, message) if self.real else VrfOutput(vrf_hash(sk, message), b"")
            self.slot_cache[key] = out
        return out

    # -- node behaviour ----------------------------------------------------------

    def _start_mining(self, i: int, now: float) -> None:
        node = self.nodes[i]
        node.token += 1
        node.pending = None
        parent = self.store[node.tip]
        height = parent.block.height + 1
        if height > self.target or (i, node.tip) in self.finished:
            return
        stake = chain.stake_fraction(parent.ledger, self.addr[self.names[i]])
        if stake <= 0:
            return
        slot_vrf = self._slot_vrf(i, node.tip)
        try:
            steps = compute_steps(parent.diff, slot_from_hash(slot_vrf.hash, compute_range(stake)))
        except ConsensusError:
            return
        done = now + steps / self._speed(i, height)
        node.pending = (height, (steps, slot_vrf.hash))
        self._push(done, _MINE_DONE, (i, node.token, node.tip, slot_vrf))

    def _adopt(self, i: int, rec_id: int, now: float) -> None:
        node = self.nodes[i]
        node.tip = rec_id
        node.adopted_at = now
        self._start_mining(i, now)

    def _on_mine_done(self, now: float, i: int, token: int, parent_id: int, slot_vrf: VrfOutput) -> None:
        node = self.nodes[i]
        if token != node.token:
            return
        node.pending = None
        self.finished.add((i, parent_id))
        parent = self.store[parent_id]
        spec = self.cfg.miners[i]
        keys = self.keys[spec.name]
        txs = []
        if self.tx_source is not None:
            txs = self.tx_source(i, self.keys, parent.ledger, parent.block.height + 1)
        timestamp = round(now * 1000)
        if spec.behavior == "timestamp_liar":
            timestamp += round(spec.liar_offset * 1000)
        timestamp = max(timestamp, 0)
        block = mine_block(
            keys, parent.ledger, parent.block, parent.diff, txs, self.cfg.consensus, self.params,
            timestamp=timestamp,
            vdf=None if self.real else self.oracle,
            prove=self.real,
            slot_vrf=slot_vrf,
        )
        verdict = verify_block(
            block, parent.block, parent.ledger, parent.diff, self.cfg.consensus, _FAR_FUTURE_MS,
            self.params, parent.recent, check_crypto=self.real,
        )
        rec_id = len(self.store)
        if verdict:
            ledger = chain.apply_block(parent.ledger, block, self.reward)
            ledger = self._after_events(ledger, block.height)
            rec = _Rec(block, parent_id, ledger, next_difficulty(parent.diff, parent.block, block),
                       parent.cum_steps + block.steps,
                       (parent.recent + (block.timestamp,))[-self.cfg.consensus.median_span:],
                       i, True, chain.hash_a(block.section_a))
        else:
            self.rejected += 1
            rec = _Rec(block, parent_id, parent.ledger, parent.diff, 0, (), i, False,
                       chain.hash_a(block.section_a))
        self.store.append(rec)
        cur = self.store[node.tip]
        if (verdict or spec.behavior == "timestamp_liar") and (
            block.height > cur.block.height
            or (block.height == cur.block.height
                and now - node.adopted_at <= self.cfg.receive_window
                and _preference(block) < _preference(cur.block))
        ):
            self._adopt(i, rec_id, now)
        else:
            self._start_mining(i, now)
        lo, hi = self.cfg.network.latency
        for j in range(len(self.nodes)):
            if j == i:
                continue
            u_lat, u_drop = _unit_pair(self.cfg.seed, rec.hash_a, j)
            if u_drop < self.cfg.network.drop_rate:
                continue
            self._push(now + lo + (hi - lo) * u_lat, _ARRIVE, (j, rec_id))

    def _on_arrive(self, now: float, j: int, rec_id: int) -> None:
        rec = self.store[rec_id]
        if not rec.valid:
            return
        limit = round(now * 1000) + self.cfg.consensus.future_drift_ms
        if rec.block.timestamp > limit:
            self.rejected += 1
            return
        node = self.nodes[j]
        cur = self.store[node.tip]
        h, ch = rec.block.height, cur.block.height
        if h > ch:
            if node.pending and node.pending[0] == h and node.pending[1] < _preference(rec.block):
                # our own run for this height will beat it: keep going
                node.tip = rec_id
                node.adopted_at = now
            else:
                self._adopt(j, rec_id, now)
        elif h == ch and rec_id != node.tip and now - node.adopted_at <= self.cfg.receive_window:
            if rec.block.steps == cur.block.steps and self.tie_hook is not None:
                switch = self.tie_hook(rec.miner, cur.miner)
            else:
                switch = _preference(rec.block) < _preference(cur.block)
            if switch:
                self._adopt(j, rec_id, now)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> Metrics:
        for i in range(len(self.nodes)):
            self._start_mining(i, 0.0)
        while self.events:
            now, _, kind, payload = heapq.heappop(self.events)
            if kind == _MINE_DONE:
                self._on_mine_done(now, *payload)
            else:
                self._on_arrive(now, *payload)
        return self._metrics()

    def _canonical(self) -> list[_Rec]:
        # the chain is read off the honest nodes; a liar's own view may hold
        # blocks nobody else accepted
        honest = [n for n, spec in zip(self.nodes, self.cfg.miners) if spec.behavior == "honest"]
        tips = []
        for node in honest or self.nodes:
            rec = self.store[node.tip]
            if rec.valid:
                tips.append(ChainTip(rec.block.height, rec.cum_steps, chain.hash_ab(rec.block), node.tip))
        best = fork_choice(tips).ref
        path = []
        while best > 0:
            path.append(self.store[best])
            best = self.store[best].parent
        path.reverse()
        if len(path) < self.cfg.blocks_to_run:
            raise ConsensusError(f"network stalled at height {len(path)}")
        return path[: self.cfg.blocks_to_run]

    def _metrics(self) -> Metrics:
        cfg = self.cfg
        path = self._canonical()
        n = len(cfg.miners)
        won = [0] * n
        for rec in path:
            won[rec.miner] += 1
        total = len(path)
        valid_blocks = sum(1 for r in self.store[1:] if r.valid and r.block.height <= cfg.blocks_to_run)
        prev_ts = [self.store[0].block.timestamp] + [r.block.timestamp for r in path[:-1]]
        parents = [self.store[r.parent] for r in path]
        shares = stake_shares(cfg)
        return Metrics(
            miners=tuple(self.names),
            addresses=tuple(self.addr[nm].hex() for nm in self.names),
            groups=tuple(m.group or m.name for m in cfg.miners),
            stake_share=tuple(float(s) for s in shares),
            blocks_won=tuple(won),
            reward_share=tuple(w / total for w in won),
            heights=tuple(r.block.height for r in path),
            timestamps=tuple(r.block.timestamp for r in path),
            interblock=tuple(r.block.timestamp - p for r, p in zip(path, prev_ts)),
            q=tuple(float(p.diff.q) for p in parents),
            r=tuple(float(p.diff.r) for p in parents),
            winners=tuple(r.miner for r in path),
            orphans=valid_blocks - total,
            rejected=self.rejected,
            constants=_constants(cfg),
            blocks=tuple(r.block for r in path),
            genesis=self.genesis,
        )


def _constants(cfg: SimConfig) -> dict[str, str]:
    out = {k: str(v) for k, v in cfg.consensus.to_json().items()}
    out.update(
        seed=str(cfg.seed),
        vdf_mode=cfg.vdf_mode,
        blocks_to_run=str(cfg.blocks_to_run),
        receive_window=repr(cfg.receive_window),
        latency=f"{cfg.network.latency[0]!r}-{cfg.network.latency[1]!r}",
        drop_rate=repr(cfg.network.drop_rate),
    )
    return out


def run_simulation(
    config: SimConfig,
    *,
    tx_source: TxSource | None = None,
    tie_hook: TieHook | None = None,
) -> Metrics:
    """Run one network simulation. ``tie_hook`` exists for negative-control tests."""
    return _Sim(config, tx_source, tie_hook).run()

