"""The standard experiment scenarios with their fixed parameters.

All of them start from the same five-miner population with stake shares
2/5, 3/10, 3/20, 1/10 and 1/20, equal VDF speeds, abstract VDFs and block
rewards kept out of stake so the share under test stays put.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from vixify.consensus import ConsensusConfig
from vixify.simnet.config import MinerSpec, SimConfig, Tolerances
from vixify.simnet.experiments import (
    ExperimentResult,
    experiment_difficulty_convergence,
    experiment_fairness,
    experiment_fast_hardware,
    experiment_pool_merge,
    experiment_sybil_split,
    split_config,
)

POPULATION = (("whale", 40), ("m30", 30), ("m15", 15), ("m10", 10), ("m05", 5))
COIN_UNIT = 1000
DEFAULT_SEED = 20240611
LONG_RUN = 20_000
CONVERGENCE_WINDOW = 20


def population(names: tuple[str, ...] | None = None) -> tuple[MinerSpec, ...]:
    return tuple(
        MinerSpec(name, pct * COIN_UNIT) for name, pct in POPULATION if names is None or name in names
    )


def base_config(seed: int = DEFAULT_SEED, **consensus: Any) -> SimConfig:
    cc = ConsensusConfig(compound_rewards=False, **consensus)
    return SimConfig(miners=population(), consensus=cc, blocks_to_run=LONG_RUN, seed=seed)


def truncated_config(seed: int = DEFAULT_SEED) -> SimConfig:
    """The three largest miners, the other 15% held by a passive account.

    Slot ranges stay 2, 3 and 6, so the win distribution is the same three-way
    enumeration the full population truncates to.
    """
    cfg = base_config(seed)
    kept = population(("whale", "m30", "m15"))
    passive = sum(m.stake for m in cfg.miners) - sum(m.stake for m in kept)
    return replace(cfg, miners=kept, unallocated_stake=passive)


def fairness(seed: int = DEFAULT_SEED) -> list[ExperimentResult]:
    trunc = truncated_config(seed)
    trunc = replace(trunc, tolerances=Tolerances(oracle_points=0.02))
    full = base_config(seed)
    full = replace(full, tolerances=Tolerances(stake_points=0.03))
    return [
        experiment_fairness(trunc, name="fairness_truncated"),
        experiment_fairness(full, name="fairness_population"),
    ]


def sybil(seed: int = DEFAULT_SEED) -> list[ExperimentResult]:
    cfg = base_config(seed)
    two = experiment_sybil_split(cfg, "whale", 2)
    return [two, experiment_sybil_split(cfg, "whale", 4, baseline=two.runs["whole"])]


def pool(seed: int = DEFAULT_SEED) -> list[ExperimentResult]:
    # two 0.2 miners, i.e. the whale already split in two, merged back together
    cfg = split_config(base_config(seed), "whale", 2)
    cfg = replace(cfg, miners=tuple(replace(m, group=None) for m in cfg.miners))
    return [experiment_pool_merge(cfg, ["whale.0", "whale.1"])]


def fast_hardware(seed: int = DEFAULT_SEED, blocks: int = 12_000) -> list[ExperimentResult]:
    cfg = replace(base_config(seed), blocks_to_run=blocks)
    return [experiment_fast_hardware(cfg, "m10", 5.0)]


def convergence(seed: int = DEFAULT_SEED, window_a: int = CONVERGENCE_WINDOW) -> list[ExperimentResult]:
    # With the default 100-block window the bang-bang q update lags far enough
    # behind to keep overshooting the band; a short window settles within a few percent.
    cfg = base_config(seed, window_a=window_a)
    return [experiment_difficulty_convergence(cfg, q_factor=100.0, fragment_at=5000)]


SCENARIOS = {
    "fairness": fairness,
    "sybil": sybil,
    "pool": pool,
    "fast_hardware": fast_hardware,
    "convergence": convergence,
}
