"""Run the experiment scenarios and write a markdown summary next to the CSVs."""

import argparse
from pathlib import Path

from vixify.simnet import scenarios
from vixify.simnet.report import metrics_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", nargs="+", choices=list(scenarios.SCENARIOS))
    ap.add_argument("--seed", type=int, default=scenarios.DEFAULT_SEED)
    ap.add_argument("--out", type=Path, default=Path("experiments-out"))
    args = ap.parse_args()

    lines = ["| experiment | check | verdict | value | threshold | detail |", "|---|---|---|---|---|---|"]
    for name in args.only or scenarios.SCENARIOS:
        for res in scenarios.SCENARIOS[name](args.seed):
            for label, m in res.runs.items():
                m.verdicts = res.checks
                metrics_to_csv(m, args.out / res.name / label)
            for c in res.checks:
                verdict = "PASS" if c.passed else "FAIL"
                lines.append(f"| {res.name} | {c.name} | {verdict} | {c.value:.4f} | {c.threshold:.4f} | {c.detail} |")
                print(f"{verdict} {res.name}/{c.name} {c.detail}", flush=True)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.md").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
