"""Command-line entry point.

Exit status: 0 on success, 1 when a verification or experiment verdict fails,
2 on usage errors (bad flags, unreadable inputs, malformed configs).
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from vixify import chain
from vixify.chain import DecodeError, address_of
from vixify.consensus import ChainValidator, ConsensusConfig, GenesisConfig, Verdict
from vixify.crypto.vdf import MIN_BITS, VdfError, vdf_eval, vdf_setup, vdf_verify
from vixify.crypto.vrf import SEED_MIN_BYTES, vrf_keygen
from vixify.simnet import scenarios
from vixify.simnet.config import ConfigError, MinerSpec, SimConfig, load_config
from vixify.simnet.engine import run_simulation
from vixify.simnet.experiments import EXPERIMENTS, basic_checks, run_experiment
from vixify.simnet.report import metrics_to_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(**pairs) -> None:
    for k, v in pairs.items():
        print(f"{k}={v}")


# -- keygen --------------------------------------------------------------------


def cmd_keygen(args) -> int:
    if args.seed is None:
        seed = secrets.token_bytes(32)
    else:
        try:
            seed = bytes.fromhex(args.seed)
        except ValueError:
            raise UsageError("--seed must be hex") from None
        if len(seed) < SEED_MIN_BYTES:
            raise UsageError(f"--seed needs at least {SEED_MIN_BYTES} bytes")
    keys = vrf_keygen(seed)
    address = address_of(keys.public_key).hex()
    record = {"address": address, "public_key": keys.public_key.hex(), "secret_key": keys.secret_key.hex()}
    try:
        fd = os.open(args.out, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")
        os.chmod(args.out, 0o600)
    except OSError as exc:
        raise UsageError(f"cannot write key file: {exc}") from None
    _emit(address=address, public_key=record["public_key"], key_file=args.out)
    return EXIT_OK


# -- bench-vdf -----------------------------------------------------------------


def cmd_bench_vdf(args) -> int:
    if args.bits < MIN_BITS:
        raise UsageError(f"--bits must be at least {MIN_BITS}")
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    params = vdf_setup(args.bits, args.seed.encode())
    data = b"vixify bench input"
    t0 = time.perf_counter()
    proof = vdf_eval(params, data, args.steps)
    t1 = time.perf_counter()
    ok = vdf_verify(params, data, proof)
    t2 = time.perf_counter()
    eval_s, verify_s = t1 - t0, t2 - t1
    ratio = eval_s / verify_s if verify_s > 0 else float("nan")
    _emit(bits=args.bits, steps=args.steps, eval_seconds=f"{eval_s:.6f}",
          verify_seconds=f"{verify_s:.6f}", ratio=f"{ratio:.2f}", verified=str(ok).lower())
    return EXIT_OK if ok else EXIT_FAIL


# -- demo-mine -----------------------------------------------------------------


def _demo_transfers(i, keys, ledger, height):
    names = sorted(n for n in keys if not n.startswith("__"))
    sender = keys[names[i]]
    recipient = keys[names[(i + 1) % len(names)]]
    if ledger.balance(address_of(sender.public_key)) < 1:
        return []
    return [chain.sign_transaction(sender.secret_key, address_of(recipient.public_key), 1, height)]


def cmd_demo_mine(args) -> int:
    if args.blocks < 1 or args.miners < 1 or args.q < 16:
        raise UsageError("--blocks and --miners must be positive and --q at least 16")
    out_chain, out_genesis = Path(args.out_chain), Path(args.out_genesis)
    for p in (out_chain, out_genesis):
        if not p.parent.is_dir():
            raise UsageError(f"output directory does not exist: {p.parent}")
    cc = ConsensusConfig(q0=args.q, target_block_time_ms=args.target_ms, q_min=16)
    miners = tuple(MinerSpec(f"miner{k:02d}", 1000, vdf_speed=args.speed) for k in range(args.miners))
    cfg = SimConfig(miners=miners, consensus=cc, blocks_to_run=args.blocks, seed=args.seed,
                    vdf_mode="real", vdf_bits=args.bits)
    m = run_simulation(cfg, tx_source=_demo_transfers if args.transactions else None)
    try:
        chain.write_chain(out_chain, m.blocks)
        m.genesis.save(out_genesis)
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from None
    _emit(blocks=len(m.blocks), orphans=m.orphans, tip_hash_ab=chain.hash_ab(m.blocks[-1]).hex(),
          chain=out_chain, genesis=out_genesis)
    return EXIT_OK


# -- verify-chain --------------------------------------------------------------


def _fail(height: int, verdict: Verdict) -> int:
    _emit(status="FAIL", height=height, check=verdict.check, reason=json.dumps(verdict.reason))
    return EXIT_FAIL


def cmd_verify_chain(args) -> int:
    try:
        genesis = GenesisConfig.load(args.genesis)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load genesis: {exc}") from None
    try:
        data = Path(args.chain).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read chain: {exc}") from None
    if not data:
        raise UsageError("chain file is empty")
    validator = ChainValidator(genesis)
    height = 0
    try:
        for record in chain.iter_chain_records(data):
            height += 1
            try:
                block = chain.deserialize_block(record)
            except DecodeError as exc:
                return _fail(height, Verdict(False, 0, f"undecodable block: {exc}"))
            verdict = validator.push(block)
            if args.verbose:
                _emit(height=height, status="ok" if verdict else "FAIL")
            if not verdict:
                return _fail(height, verdict)
    except DecodeError as exc:
        return _fail(height + 1, Verdict(False, 0, f"bad framing: {exc}"))
    _emit(status="OK", blocks=height, tip_hash_ab=chain.hash_ab(validator.tip).hex())
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _resolve_config(name: str):
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("vixify").joinpath("configs").joinpath(path.name)
    if bundled.is_file():
        return bundled
    raise UsageError(f"config not found: {name}")


def cmd_simulate(args) -> int:
    source = _resolve_config(args.config)
    try:
        with resources.as_file(source) as path:
            cfg = load_config(path)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.blocks is not None:
            changes["blocks_to_run"] = args.blocks
        if changes:
            cfg = replace(cfg, **changes)
    except ConfigError as exc:
        raise UsageError(f"invalid config: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out is not a directory: {out}")
    for spec in cfg.experiments:
        if spec["name"] not in EXPERIMENTS:
            raise UsageError(f"invalid config: experiments: unknown experiment {spec['name']!r}")

    m = run_simulation(cfg)
    checks = basic_checks(cfg, m)
    for spec in cfg.experiments:
        try:
            res = run_experiment(cfg, spec, metrics=m)
        except (TypeError, ValueError, KeyError) as exc:
            raise UsageError(f"invalid config: experiments: {exc}") from None
        checks.extend(c for c in res.checks if c.experiment != "run")
    m.verdicts = checks
    try:
        files = metrics_to_csv(m, out)
    except OSError as exc:
        raise UsageError(f"cannot write outputs: {exc}") from None
    passed = all(c.passed for c in checks)
    failed = [f"{c.experiment}/{c.name}" for c in checks if not c.passed]
    _emit(blocks=cfg.blocks_to_run, orphans=m.orphans, checks=len(checks),
          failed=",".join(failed) or "none", verdict="PASS" if passed else "FAIL",
          outputs=",".join(f.name for f in files))
    return EXIT_OK if passed else EXIT_FAIL


# -- experiments ---------------------------------------------------------------


def cmd_experiments(args) -> int:
    names = args.only or list(scenarios.SCENARIOS)
    unknown = [n for n in names if n not in scenarios.SCENARIOS]
    if unknown:
        raise UsageError(f"unknown scenario(s): {', '.join(unknown)}")
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out is not a directory: {out}")
    all_passed = True
    for name in names:
        for res in scenarios.SCENARIOS[name](args.seed):
            for c in res.checks:
                print(f"{'PASS' if c.passed else 'FAIL'} {res.name}/{c.name} "
                      f"value={c.value:.4f} threshold={c.threshold:.4f} {c.detail}")
            all_passed &= res.passed
            main = next(iter(res.runs.values()))
            main.verdicts = res.checks
            try:
                metrics_to_csv(main, out / res.name)
            except OSError as exc:
                raise UsageError(f"cannot write outputs: {exc}") from None
    _emit(verdict="PASS" if all_passed else "FAIL")
    return EXIT_OK if all_passed else EXIT_FAIL


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vixify", description="Vixify proof-of-stake toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("keygen", help="create a key pair and write it as JSON")
    k.add_argument("--seed", help="hex seed of at least 32 bytes (default: random)")
    k.add_argument("--out", default="vixify-key.json", help="key file path (default: %(default)s)")
    k.set_defaults(func=cmd_keygen)

    b = sub.add_parser("bench-vdf", help="time VDF evaluation against verification")
    b.add_argument("--steps", type=int, default=50_000, help="sequential steps (default: %(default)s)")
    b.add_argument("--bits", type=int, default=256, help="modulus size (default: %(default)s)")
    b.add_argument("--seed", default="bench", help="prime selection seed (default: %(default)s)")
    b.set_defaults(func=cmd_bench_vdf)

    d = sub.add_parser("demo-mine", help="mine a short chain with real VRFs and VDFs")
    d.add_argument("--blocks", type=int, default=20, help="chain length (default: %(default)s)")
    d.add_argument("--miners", type=int, default=3, help="equal-stake miners (default: %(default)s)")
    d.add_argument("--seed", type=int, default=1, help="simulation seed (default: %(default)s)")
    d.add_argument("--q", type=int, default=200, help="initial base step count (default: %(default)s)")
    d.add_argument("--speed", type=float, default=100.0, help="simulated steps/second (default: %(default)s)")
    d.add_argument("--target-ms", type=int, default=10_000, help="target block time (default: %(default)s)")
    d.add_argument("--bits", type=int, default=128, help="VDF modulus size (default: %(default)s)")
    d.add_argument("--transactions", action="store_true", help="include a signed transfer per block")
    d.add_argument("--out-chain", default="chain.bin", help="chain file (default: %(default)s)")
    d.add_argument("--out-genesis", default="genesis.json", help="genesis file (default: %(default)s)")
    d.set_defaults(func=cmd_demo_mine)

    v = sub.add_parser("verify-chain", help="validate a chain file from genesis")
    v.add_argument("--chain", required=True, help="chain file written by demo-mine")
    v.add_argument("--genesis", required=True, help="genesis JSON")
    v.add_argument("--verbose", action="store_true", help="print a line per block")
    v.set_defaults(func=cmd_verify_chain)

    s = sub.add_parser("simulate", help="run a simulation config and write CSV results")
    s.add_argument("--config", required=True, help="SimConfig JSON path or bundled config name")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--blocks", type=int, help="override blocks_to_run")
    s.add_argument("--out", default="sim-out", help="output directory (default: %(default)s)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiments", help="run the standard experiment scenarios")
    e.add_argument("--only", nargs="+", metavar="NAME",
                   help=f"subset of: {', '.join(scenarios.SCENARIOS)}")
    e.add_argument("--seed", type=int, default=scenarios.DEFAULT_SEED, help="seed (default: %(default)s)")
    e.add_argument("--out", default="experiments-out", help="output directory (default: %(default)s)")
    e.set_defaults(func=cmd_experiments)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VdfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
