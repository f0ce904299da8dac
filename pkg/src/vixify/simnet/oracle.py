"""Closed-form win probabilities for the slot lottery at equal VDF speeds.

Each miner's slot is uniform on ``[0, floor(1/stake))``; the lowest step count
wins and ties split uniformly. Instead of enumerating slot tuples, the
probability is accumulated per step value with a polynomial in the number of
tied opponents, which keeps the cost linear in the total range size.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from fractions import Fraction

from vixify.consensus import compute_range

DEFAULT_MAX_STATES = 10**6


class OracleError(ValueError):
    pass


def _step_value(slot: int, q: Fraction | None, r: Fraction | None) -> int:
    if q is None:
        return slot
    return (q.numerator * r.numerator**slot) // (q.denominator * r.denominator**slot)


def _value_tables(stakes, q, r, max_states, speeds=None) -> tuple[list, list[Counter], list[int]]:
    if (q is None) != (r is None):
        raise OracleError("give both q and r or neither")
    if q is not None:
        q, r = Fraction(q), Fraction(r)
        if r < 1:
            raise OracleError("r must be at least 1")
    if speeds is not None:
        if q is None:
            raise OracleError("unequal speeds need q and r")
        if len(speeds) != len(stakes) or min(speeds) <= 0:
            raise OracleError("one positive speed per miner")
    ranges = [compute_range(Fraction(s)) for s in stakes]
    if sum(ranges) > max_states:
        raise OracleError(f"state space too large: {sum(ranges)} slots")
    if speeds is None:
        tables = [Counter(_step_value(s, q, r) for s in range(n)) for n in ranges]
    else:
        # compare finishing times rather than step counts
        tables = [Counter(Fraction(_step_value(s, q, r)) / Fraction(v) for s in range(n))
                  for n, v in zip(ranges, speeds)]
    values = sorted(set().union(*tables))
    return values, tables, ranges


def exact_win_distribution(
    stakes: Sequence[Fraction],
    q: Fraction | None = None,
    r: Fraction | None = None,
    max_states: int = DEFAULT_MAX_STATES,
    speeds: Sequence[Fraction] | None = None,
) -> list[Fraction]:
    """Exact probability that each miner proposes the next block.

    Without ``q`` and ``r`` the step count is taken to be strictly increasing
    in the slot (any ``r > 1``), so only slot order matters. ``speeds``
    (relative VDF speeds, requires ``q`` and ``r``) ranks by finishing time.
    """
    if not stakes:
        raise OracleError("no miners")
    values, tables, ranges = _value_tables(stakes, q, r, max_states, speeds)
    n = len(stakes)
    wins = [Fraction(0)] * n
    # above[j]: slots of miner j whose value exceeds the current one
    above = list(ranges)
    for v in values:
        for j in range(n):
            above[j] -= tables[j][v]
        for k in range(n):
            here = tables[k][v]
            if not here:
                continue
            poly = [Fraction(1)]  # coefficient m: probability exactly m opponents tie at v
            for j in range(n):
                if j == k:
                    continue
                tie = Fraction(tables[j][v], ranges[j])
                higher = Fraction(above[j], ranges[j])
                nxt = [Fraction(0)] * (len(poly) + 1)
                for m, c in enumerate(poly):
                    if c:
                        nxt[m] += c * higher
                        nxt[m + 1] += c * tie
                poly = nxt
            wins[k] += Fraction(here, ranges[k]) * sum(c / (m + 1) for m, c in enumerate(poly))
    return wins


def min_slot_distribution(stakes: Sequence[Fraction], max_states: int = DEFAULT_MAX_STATES) -> list[Fraction]:
    """``P(lowest slot across miners == s)`` for ``s = 0, 1, ...``."""
    values, tables, ranges = _value_tables(stakes, None, None, max_states)
    above = list(ranges)
    survive = Fraction(1)  # P(min >= s)
    out = []
    for v in values:
        beyond = Fraction(1)
        for j, n in enumerate(ranges):
            above[j] -= tables[j][v]
            beyond *= Fraction(above[j], n)
        out.append(survive - beyond)
        survive = beyond
    return out


def equilibrium_q(stakes: Sequence[Fraction], r: Fraction, speed: float, target_ms: int) -> Fraction:
    """Base step count giving the target mean block time at equal speeds, ignoring latency."""
    mean_factor = sum(p * Fraction(r) ** s for s, p in enumerate(min_slot_distribution(stakes)))
    return Fraction(target_ms, 1000) * Fraction(speed) / mean_factor


def binomial_sigma(p: float, n: int) -> float:
    return (p * (1 - p) / n) ** 0.5 if n else 0.0
