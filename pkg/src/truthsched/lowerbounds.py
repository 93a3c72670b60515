"""Exact checks of the two lower-bound constructions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from truthsched.core import served_jobs, total_welfare
from truthsched.instances import (
    NC_LB_ROUND,
    clairvoyant_lb_instance,
    nc_lb_forfeit,
    nc_lb_instance,
    nc_lb_long_first_prob,
    nc_lb_round_values,
)
from truthsched.mechanisms import ppf_clairvoyant, ppf_nonclairvoyant, run
from truthsched.switching import switch_nonclairvoyant

LOSS_GRID = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1))


def _round_value(price, middle: tuple[bool, bool], outer: tuple[bool, ...]) -> Fraction:
    """Value of round 1 in a three-round stream whose rounds 0 and 2 use
    the coins in ``outer``."""
    first = (outer[0], middle[0], outer[1])
    third = (outer[2], middle[1], outer[3])
    inst = nc_lb_instance(first, third)
    served = served_jobs(run(ppf_nonclairvoyant(price), inst).allocation, inst)
    return nc_lb_round_values(inst, served)[1]


def round_value_table(price) -> dict[tuple[bool, bool], Fraction]:
    """Round value for each (long first job, long third job) outcome.

    Raises if the neighbouring rounds' coins change it.
    """
    table = {}
    for middle in itertools.product((False, True), repeat=2):
        seen = {_round_value(price, middle, outer) for outer in itertools.product((False, True), repeat=4)}
        if len(seen) != 1:
            raise AssertionError(f"round value depends on other rounds: {sorted(seen)}")
        table[middle] = seen.pop()
    return table


def expected_round_value(price, loss_first, loss_third) -> Fraction:
    """Exact expectation over the round's two length coins."""
    p1 = nc_lb_long_first_prob(Fraction(loss_first))
    p3 = Fraction(loss_third)
    table = round_value_table(price)
    total = Fraction(0)
    for (a, b), v in table.items():
        total += (p1 if a else 1 - p1) * (p3 if b else 1 - p3) * v
    return total


@dataclass(frozen=True)
class RoundValueRow:
    loss_first: Fraction
    loss_third: Fraction
    price: int
    expected: Fraction
    claimed: Fraction

    @property
    def ok(self) -> bool:
        return self.expected == self.claimed


def round_value_rows(grid=LOSS_GRID) -> list[RoundValueRow]:
    """Price 1 should earn ``10 - 2 loss_first``, price 2 ``10 - 2 loss_third``."""
    rows = []
    for l1, l2 in itertools.product(grid, repeat=2):
        rows.append(RoundValueRow(l1, l2, 1, expected_round_value(1, l1, l2), 10 - 2 * l1))
        rows.append(RoundValueRow(l1, l2, 2, expected_round_value(2, l1, l2), 10 - 2 * l2))
    return rows


def switch_forfeits(rounds: int = 4, round_: int = 1) -> list[tuple[tuple[bool, ...], int, Fraction]]:
    """Every (coins, switch slot, forfeited value) for a price-2 to price-1
    switch placed inside round ``round_``."""
    out = []
    lo = NC_LB_ROUND * round_ + 1
    for coins in itertools.product((False, True), repeat=2 * rounds):
        inst = nc_lb_instance(coins[:rounds], coins[rounds:])
        low = served_jobs(run(ppf_nonclairvoyant(1), inst).allocation, inst)
        high = served_jobs(run(ppf_nonclairvoyant(2), inst).allocation, inst)
        for s in range(lo, lo + NC_LB_ROUND):
            mech = switch_nonclairvoyant(ppf_nonclairvoyant(2), ppf_nonclairvoyant(1), s)
            served = served_jobs(run(mech, inst).allocation, inst)
            out.append((coins, s, Fraction(nc_lb_forfeit(inst, served, low, high, round_))))
    return out


def clairvoyant_lb_totals(heads) -> tuple[int, int]:
    """Welfare of price 1 and price 2 on the clairvoyant lower-bound stream."""
    inst = clairvoyant_lb_instance(heads)
    return tuple(
        total_welfare(run(ppf_clairvoyant(p), inst).allocation, inst) for p in (1, 2)
    )
