"""CSV output for simulation runs."""

from __future__ import annotations

import csv
from collections.abc import Iterable
from pathlib import Path

from vixify.simnet.engine import Metrics

SUMMARY_COLUMNS = ("address", "miner", "group", "stake_share", "blocks_won", "reward_share")
TIMESERIES_COLUMNS = ("height", "timestamp_ms", "interblock_s", "q", "r", "winner")
VERDICT_COLUMNS = ("experiment", "check", "passed", "value", "threshold", "detail")


def _num(x: float) -> str:
    return f"{x:.6f}"


def _write(path: Path, columns: tuple[str, ...], rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def metrics_to_csv(metrics: Metrics, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    _write(summary, SUMMARY_COLUMNS, (
        (addr, name, group, _num(stake), won, _num(share))
        for addr, name, group, stake, won, share in zip(
            metrics.addresses, metrics.miners, metrics.groups,
            metrics.stake_share, metrics.blocks_won, metrics.reward_share,
        )
    ))
    series = out / "timeseries.csv"
    _write(series, TIMESERIES_COLUMNS, (
        (h, ts, f"{dt / 1000:.3f}", f"{q:.6f}", f"{r:.9f}", metrics.miners[w])
        for h, ts, dt, q, r, w in zip(
            metrics.heights, metrics.timestamps, metrics.interblock,
            metrics.q, metrics.r, metrics.winners,
        )
    ))
    verdicts = out / "verdicts.csv"
    _write(verdicts, VERDICT_COLUMNS, (
        (c.experiment, c.name, "PASS" if c.passed else "FAIL", _num(c.value), _num(c.threshold), c.detail)
        for c in metrics.verdicts
    ))
    return [summary, series, verdicts]
