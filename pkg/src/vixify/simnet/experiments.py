"""Experiments that probe fairness, splitting, pooling, fast hardware and difficulty.

Each experiment returns an ``ExperimentResult`` holding pass/fail ``Check``
rows (written to ``verdicts.csv``) and the metrics of every run it made.
Tolerances come from ``SimConfig.tolerances``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from fractions import Fraction
from statistics import mean
from typing import Any

from vixify.simnet.config import MinerSpec, SimConfig, SpeedEvent, StakeEvent, stake_shares
from vixify.simnet.engine import Check, Metrics, TieHook, run_simulation
from vixify.simnet.oracle import (
    OracleError,
    binomial_sigma,
    equilibrium_q,
    exact_win_distribution,
)


@dataclass
class ExperimentResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    runs: dict[str, Metrics] = field(default_factory=dict)
    table: list[dict[str, Any]] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, value: float, threshold: float, detail: str = "") -> None:
        self.checks.append(Check(self.name, name, bool(passed), float(value), float(threshold), detail))


def basic_checks(cfg: SimConfig, m: Metrics) -> list[Check]:
    """Invariants every run must satisfy."""
    out = [
        Check("run", "conservation", sum(m.blocks_won) == cfg.blocks_to_run,
              sum(m.blocks_won), cfg.blocks_to_run, "blocks won sum to chain height"),
        Check("run", "series_length", len(m.interblock) == cfg.blocks_to_run,
              len(m.interblock), cfg.blocks_to_run),
    ]
    for spec, won in zip(cfg.miners, m.blocks_won):
        if spec.stake == 0 and not _ever_funded(cfg, spec.name):
            out.append(Check("run", f"zero_stake:{spec.name}", won == 0, won, 0))
    return out


def _ever_funded(cfg: SimConfig, name: str) -> bool:
    return any(ev.dst == name and ev.amount > 0 for ev in cfg.stake_events)


def _equal_speeds(cfg: SimConfig) -> bool:
    return len({m.vdf_speed for m in cfg.miners}) == 1 and not cfg.speed_events


# -- fairness ------------------------------------------------------------------


def experiment_fairness(
    cfg: SimConfig,
    *,
    metrics: Metrics | None = None,
    tie_hook: TieHook | None = None,
    name: str = "fairness",
) -> ExperimentResult:
    res = ExperimentResult(name)
    m = metrics if metrics is not None else run_simulation(cfg, tie_hook=tie_hook)
    res.runs["main"] = m
    shares = stake_shares(cfg)
    n = cfg.blocks_to_run
    tol = cfg.tolerances

    staked = [i for i, s in enumerate(shares) if s > 0]
    oracle: list[float | None] = [0.0 if s == 0 else None for s in shares]
    if _equal_speeds(cfg):
        try:
            probs = exact_win_distribution([shares[i] for i in staked])
            for i, p in zip(staked, probs):
                oracle[i] = float(p)
        except OracleError as exc:
            res.add("oracle", False, 0, 0, f"oracle unavailable: {exc}")

    for i, miner in enumerate(m.miners):
        share = m.reward_share[i]
        row = {"miner": miner, "stake_share": float(shares[i]), "oracle": oracle[i],
               "blocks_won": m.blocks_won[i], "reward_share": share}
        res.table.append(row)
        if oracle[i] is not None:
            bound = tol.oracle_points if tol.oracle_points is not None else 3 * binomial_sigma(oracle[i], n)
            if oracle[i] in (0.0, 1.0):
                bound = 0.0
            res.add(f"oracle:{miner}", abs(share - oracle[i]) <= bound + 1e-12,
                    abs(share - oracle[i]), bound, f"share {share:.4f} vs exact {oracle[i]:.4f}")
        if tol.stake_points is not None:
            gap = abs(share - float(shares[i]))
            res.add(f"stake:{miner}", gap <= tol.stake_points, gap, tol.stake_points,
                    f"share {share:.4f} vs stake {float(shares[i]):.4f}")
    res.checks.extend(basic_checks(cfg, m))
    return res


# -- splitting and pooling -----------------------------------------------------


def split_config(cfg: SimConfig, name: str, splits: int) -> SimConfig:
    if splits < 1:
        raise ValueError("splits must be >= 1")
    if splits == 1:
        return cfg
    miners = []
    for spec in cfg.miners:
        if spec.name != name:
            miners.append(spec)
            continue
        base, extra = divmod(spec.stake, splits)
        for k in range(splits):
            miners.append(replace(spec, name=f"{name}.{k}", stake=base + (extra if k == 0 else 0),
                                  group=spec.group or name))
    return replace(cfg, miners=tuple(miners))


def merge_config(cfg: SimConfig, names: list[str]) -> SimConfig:
    if len(names) < 2:
        return cfg
    chosen = [cfg.miner(n) for n in names]
    merged = MinerSpec(
        name="+".join(names),
        stake=sum(s.stake for s in chosen),
        vdf_speed=chosen[0].vdf_speed,
        behavior=chosen[0].behavior,
        liar_offset=chosen[0].liar_offset,
    )
    miners, placed = [], False
    for spec in cfg.miners:
        if spec.name in names:
            if not placed:
                miners.append(merged)
                placed = True
        else:
            miners.append(spec)
    return replace(cfg, miners=tuple(miners))


def experiment_sybil_split(
    cfg: SimConfig, miner: str | None = None, splits: int = 2, *, baseline: Metrics | None = None
) -> ExperimentResult:
    """Same coins, same seed: one address versus ``splits`` addresses.

    ``baseline`` may carry an existing run of ``cfg`` to skip re-running it.
    """
    miner = miner or max(cfg.miners, key=lambda s: s.stake).name
    res = ExperimentResult(f"sybil_split_{splits}")
    whole = baseline if baseline is not None else run_simulation(cfg)
    split_cfg = split_config(cfg, miner, splits)
    parts = whole if split_cfg is cfg else run_simulation(split_cfg)
    res.runs.update(whole=whole, split=parts)
    names = [s.name for s in split_cfg.miners if (s.group or s.name) == miner] or [miner]
    before, after = whole.share_of(miner), parts.share_of(names)
    tol = cfg.tolerances.pairing_points
    res.table.append({"miner": miner, "splits": splits, "share_whole": before, "share_split": after})
    res.add("aggregate_share_change", abs(after - before) <= tol, abs(after - before), tol,
            f"{miner}: {before:.4f} as one address, {after:.4f} across {splits}")
    if cfg.miner(miner).stake == 0:
        res.add("zero_stake_rewards", before == 0 and after == 0, before + after, 0)
    return res


def experiment_pool_merge(cfg: SimConfig, names: list[str] | None = None) -> ExperimentResult:
    """Two (or more) miners combined into one address, compared on the same seed."""
    if names is None:
        ranked = sorted(cfg.miners, key=lambda s: -s.stake)
        names = [s.name for s in ranked[:2]]
    res = ExperimentResult("pool_merge")
    separate = run_simulation(cfg)
    merged_cfg = merge_config(cfg, names)
    merged = separate if merged_cfg is cfg else run_simulation(merged_cfg)
    res.runs.update(separate=separate, merged=merged)
    before = separate.share_of(names)
    after = merged.share_of("+".join(names)) if len(names) > 1 else before
    tol = cfg.tolerances.pairing_points
    res.table.append({"miners": "+".join(names), "share_separate": before, "share_merged": after})
    res.add("combined_share_change", abs(after - before) <= tol, abs(after - before), tol,
            f"{'+'.join(names)}: {before:.4f} apart, {after:.4f} merged")
    return res


# -- fast hardware -------------------------------------------------------------


def experiment_fast_hardware(
    cfg: SimConfig,
    miner: str | None = None,
    speedup: float = 5.0,
    at_height: int | None = None,
    control: bool = True,
) -> ExperimentResult:
    """Speed one miner up mid-run and follow its rolling reward share.

    The transient is the first rolling window after the speed-up; the
    post-adjustment share is the last window of the run. The control repeats
    the run with the slot-base controller switched off.
    """
    tol = cfg.tolerances
    window = tol.rolling_window
    shares = stake_shares(cfg)
    names = [s.name for s in cfg.miners]
    if miner is None:
        miner = names[min(range(len(names)), key=lambda i: abs(shares[i] - Fraction(1, 10)))]
    stake = float(shares[names.index(miner)])
    at = tol.warmup if at_height is None else at_height
    if cfg.blocks_to_run < at + 2 * window:
        raise ValueError("run too short for a transient and a post-adjustment window")
    fast_cfg = replace(cfg, speed_events=cfg.speed_events + (SpeedEvent(at, miner, speedup),))
    res = ExperimentResult("fast_hardware")

    def measure(m: Metrics) -> tuple[float, float, list[float]]:
        roll = m.rolling_share(miner, window)
        # roll[k] covers blocks k+1 .. k+window
        return roll[at], roll[-1], roll

    protected = run_simulation(fast_cfg)
    transient, post, roll = measure(protected)
    res.runs["protected"] = protected
    res.series["rolling_share"] = roll
    res.series["r"] = list(protected.r)
    res.table.append({"run": "protected", "stake": stake, "transient_share": transient, "post_share": post})
    if speedup > 1:
        res.add("transient_elevated", transient > stake, transient, stake,
                f"share over the {window} blocks after the speed-up: {transient:.4f}")
    res.add("post_adjustment_share", abs(post - stake) <= tol.fast_hardware_points,
            abs(post - stake), tol.fast_hardware_points, f"final rolling share {post:.4f} vs stake {stake:.4f}")

    if control and speedup > 1:
        ctl_cfg = replace(fast_cfg, consensus=replace(cfg.consensus, adjust_r_enabled=False))
        unprotected = run_simulation(ctl_cfg)
        _, ctl_post, ctl_roll = measure(unprotected)
        res.runs["control"] = unprotected
        res.series["control_rolling_share"] = ctl_roll
        res.table.append({"run": "control", "stake": stake, "post_share": ctl_post})
        res.add("control_stays_elevated", ctl_post > stake + tol.fast_hardware_points,
                ctl_post, stake + tol.fast_hardware_points,
                f"without slot-base adjustment the final rolling share is {ctl_post:.4f}")
    return res


# -- difficulty ----------------------------------------------------------------


def windowed_mean(values: list[int], window: int) -> list[float]:
    out, acc = [], 0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def fragment_config(cfg: SimConfig, at_height: int, pieces: int = 8) -> SimConfig:
    """Half of the largest holder's coins move to ``pieces`` fresh miners after ``at_height``."""
    whale = max(cfg.miners, key=lambda s: s.stake)
    chunk = whale.stake // 2 // pieces
    fresh = tuple(MinerSpec(f"fragment{k}", 0, whale.vdf_speed) for k in range(pieces))
    events = tuple(StakeEvent(at_height, whale.name, f.name, chunk) for f in fresh)
    return replace(cfg, miners=cfg.miners + fresh, stake_events=cfg.stake_events + events)


def experiment_difficulty_convergence(
    cfg: SimConfig, q_factor: float = 100.0, fragment_at: int | None = 5000, hold: int = 8000
) -> ExperimentResult:
    """Start ``q`` at ``q_factor`` times its equilibrium and track the windowed block time."""
    tol = cfg.tolerances
    cc = cfg.consensus
    target = cc.target_block_time_ms
    shares = [s for s in stake_shares(cfg) if s > 0]
    speed = mean(m.vdf_speed for m in cfg.miners)
    q_eq = equilibrium_q(shares, cc.r0, speed, target)
    q0 = Fraction(q_eq * Fraction(q_factor)).limit_denominator(2**16)
    lo, hi = target * (1 - tol.band), target * (1 + tol.band)
    res = ExperimentResult("difficulty_convergence")
    res.table.append({"q_equilibrium": float(q_eq), "q0": float(q0), "target_ms": target})

    def band_check(label: str, m: Metrics, start: int, stop: int) -> None:
        avg = windowed_mean(list(m.interblock), cc.window_a)
        res.series[f"{label}_windowed_block_time_ms"] = avg
        res.series[f"{label}_q"] = list(m.q)
        seg = avg[start:stop]
        outside = [a for a in seg if not lo <= a <= hi]
        worst = max((abs(a - target) / target for a in seg), default=0.0)
        first_in = next((i + 1 for i, a in enumerate(avg) if lo <= a <= hi), None)
        res.add(f"{label}_in_band", not outside, worst, tol.band,
                f"heights {start + 1}-{stop}: {len(outside)} of {len(seg)} windowed means outside "
                f"+/-{tol.band:.0%}; first in band at height {first_in}")

    base = replace(cfg, consensus=replace(cc, q0=q0), blocks_to_run=tol.warmup + hold)
    m = run_simulation(base)
    res.runs["converge"] = m
    band_check("converge", m, tol.warmup, tol.warmup + hold)

    if fragment_at is not None:
        frag = fragment_config(base, fragment_at)
        frag = replace(frag, blocks_to_run=max(base.blocks_to_run, fragment_at + tol.warmup + 1))
        fm = run_simulation(frag)
        res.runs["fragmented"] = fm
        band_check("fragmented", fm, fragment_at + tol.warmup, frag.blocks_to_run)
    return res


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "fairness": experiment_fairness,
    "sybil_split": experiment_sybil_split,
    "pool_merge": experiment_pool_merge,
    "fast_hardware": experiment_fast_hardware,
    "difficulty_convergence": experiment_difficulty_convergence,
}


def run_experiment(cfg: SimConfig, spec: dict[str, Any], metrics: Metrics | None = None) -> ExperimentResult:
    params = {k: v for k, v in spec.items() if k != "name"}
    name = spec["name"]
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}")
    if name == "fairness" and metrics is not None and not params:
        return experiment_fairness(cfg, metrics=metrics)
    return EXPERIMENTS[name](cfg, **params)
