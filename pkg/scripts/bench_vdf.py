"""Sloth evaluation time against step count, and the verify/eval asymmetry."""

import argparse
import statistics
import time

from vixify.crypto.vdf import vdf_eval, vdf_setup, vdf_verify


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bits", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--steps", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    args = ap.parse_args()
    for bits in args.bits:
        params = vdf_setup(bits, b"bench")
        evals = []
        for t in args.steps:
            proof, t_eval = timed(vdf_eval, params, b"x", t)
            ok, t_verify = timed(vdf_verify, params, b"x", proof)
            evals.append(t_eval)
            print(f"bits={bits} steps={t} eval={t_eval:.4f}s verify={t_verify:.4f}s "
                  f"ratio={t_eval / t_verify:.1f} ok={ok}")
        if len(args.steps) > 2:
            r2 = statistics.correlation(args.steps, evals) ** 2
            print(f"bits={bits} linear fit R^2={r2:.5f}")


if __name__ == "__main__":
    main()
