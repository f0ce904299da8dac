"""Exact win probabilities behind the fairness, splitting, pooling and fast-hardware runs.

Prints what the slot lottery itself predicts, independent of any simulation,
so simulated shares can be read against it.
"""

from fractions import Fraction as F

from vixify.simnet.oracle import exact_win_distribution

POPULATION = [F(2, 5), F(3, 10), F(3, 20), F(1, 10), F(1, 20)]


def row(label, probs, stakes):
    cells = "  ".join(f"{float(p):.4f}/{float(s):.2f}" for p, s in zip(probs, stakes))
    print(f"{label:<28} {cells}")


def main():
    print("win probability / stake share")
    row("population", exact_win_distribution(POPULATION), POPULATION)
    row("truncated (15% passive)", exact_win_distribution(POPULATION[:3]), POPULATION[:3])
    for k in (2, 4):
        split = [POPULATION[0] / k] * k + POPULATION[1:]
        probs = exact_win_distribution(split)
        print(f"{'whale split into ' + str(k):<28} aggregate {float(sum(probs[:k])):.4f} "
              f"(whole {float(exact_win_distribution(POPULATION)[0]):.4f})")
    dyadic = [F(1, 2), F(1, 4), F(1, 8), F(1, 8)]
    row("dyadic", exact_win_distribution(dyadic), dyadic)

    print("\nshare of a 0.1-stake miner running 5x faster, by slot base r")
    speeds = [1, 1, 1, 5, 1]
    for r in (F(1), F(3, 2), F(2), F(3), F(4), F(6), F(8), F(16)):
        fast = exact_win_distribution(POPULATION, q=F(1), r=r, speeds=speeds)[3]
        print(f"  r = {str(r):>4}: {float(fast):.4f}")


if __name__ == "__main__":
    main()
