"""Discrete-event simulation of a Vixify network and the experiment suite."""

from vixify.simnet.config import (
    ConfigError,
    MinerSpec,
    NetworkModel,
    SimConfig,
    SpeedEvent,
    StakeEvent,
    Tolerances,
    config_from_json,
    config_to_json,
    load_config,
    stake_shares,
)
from vixify.simnet.engine import Check, Metrics, run_simulation
from vixify.simnet.experiments import (
    EXPERIMENTS,
    ExperimentResult,
    experiment_difficulty_convergence,
    experiment_fairness,
    experiment_fast_hardware,
    experiment_pool_merge,
    experiment_sybil_split,
    run_experiment,
)
from vixify.simnet.oracle import exact_win_distribution
from vixify.simnet.report import metrics_to_csv
