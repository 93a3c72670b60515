"""Exhaustive incentive checks on small instances.

Every check reruns a mechanism with one report changed and compares what the
affected job gets.  Randomized mechanisms are checked per fixed seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from truthsched.core import Instance, Job, Value, utility
from truthsched.mechanisms import (
    Mechanism,
    NCJob,
    Outcome,
    PostedPriceClairvoyant,
    PostedPriceNonClairvoyant,
    Decision,
    run,
)
from truthsched.combiners import FollowTheBanditSwitcher

TOLERANCE = 1e-9

Maker = Callable[[int], Mechanism]  # seed -> fresh mechanism


@dataclass(frozen=True)
class Violation:
    kind: str  # "utility" or "order"
    instance: Instance
    job_id: int
    truth: Job
    report: Job | None  # misreport, or the mutated later job
    utility_truth: Value
    utility_lie: Value
    seed: int
    detail: str = ""

    def record(self) -> dict:
        return {
            "kind": self.kind,
            "job": self.job_id,
            "truth": _job_dict(self.truth),
            "report": _job_dict(self.report) if self.report else None,
            "u_truth": str(self.utility_truth),
            "u_lie": str(self.utility_lie),
            "seed": self.seed,
            "detail": self.detail,
        }


def _job_dict(j: Job) -> dict:
    return {"id": j.id, "a": j.arrival, "d": j.deadline, "l": j.length, "v": str(j.value)}


@dataclass
class CheckReport:
    violations: list[Violation] = field(default_factory=list)
    reruns: int = 0
    partial: bool = False

    def __bool__(self) -> bool:
        return not self.violations

    def extend(self, other: "CheckReport") -> None:
        self.violations.extend(other.violations)
        self.reruns += other.reruns
        self.partial = self.partial or other.partial

    def lines(self) -> list[str]:
        return [json.dumps(v.record()) for v in self.violations]


@dataclass(frozen=True)
class MisreportGrid:
    """Which alternative reports to try for each job."""

    arrival_shifts: tuple[int, ...] = (0, 1, 2)
    value_levels: int = 5
    length_deltas: tuple[int, ...] = (-1, 0, 1)

    def values(self, inst: Instance) -> list[Value]:
        k = self.value_levels
        if k <= 1:
            return [inst.v_max]
        return sorted({_exact(Fraction(inst.v_max) * i / (k - 1)) for i in range(k)})

    def reports(self, inst: Instance, job: Job) -> list[Job]:
        out = []
        seen = {(job.arrival, job.deadline, job.length, job.value)}
        for shift in self.arrival_shifts:
            a = job.arrival + shift
            if a > inst.horizon:
                continue
            for d in self._deadlines(inst, job, a):
                for ln in self._lengths(inst, job, a, d):
                    for v in self.values(inst) + [job.value]:
                        key = (a, d, ln, v)
                        if key in seen:
                            continue
                        seen.add(key)
                        out.append(Job(job.id, a, d, ln, v))
        return out

    def _deadlines(self, inst: Instance, job: Job, a: int) -> list[int]:
        if inst.clairvoyant:
            hi = min(a + inst.d_max - 1, inst.horizon)
            cands = {job.deadline - 1, job.deadline, job.deadline + 1, a + job.length - 1, hi}
            return sorted(d for d in cands if a <= d <= hi)
        cands = {job.deadline - 1, job.deadline, job.deadline + 1, 0, inst.d_max}
        return sorted(d for d in cands if 0 <= d <= inst.d_max)

    def _lengths(self, inst: Instance, job: Job, a: int, d: int) -> list[int]:
        if not inst.clairvoyant:
            return [job.length]  # lengths are never reported
        cands = {job.length + k for k in self.length_deltas}
        return sorted(n for n in cands if 1 <= n <= min(inst.l_max, d - a + 1))


def _exact(x: Fraction) -> Value:
    return int(x) if x.denominator == 1 else x


def _outcome(make: Maker, inst: Instance, seed: int) -> Outcome:
    return run(make(seed), inst)


def job_utility(out: Outcome, truth: Job, clairvoyant: bool) -> Value:
    slots = out.allocation.slots.get(truth.id, ())
    return utility(truth, slots, out.allocation.payment(truth.id), clairvoyant)


def _better(lie: Value, honest: Value) -> bool:
    if isinstance(lie, float) or isinstance(honest, float):
        return lie > honest + TOLERANCE
    return lie > honest


def check_truthful(
    make: Maker,
    inst: Instance,
    grid: MisreportGrid | None = None,
    seeds: Sequence[int] = (0,),
    budget: int = 1_000_000,
) -> CheckReport:
    """Try every grid misreport of every job, one job at a time, per seed.

    Utilities are measured against the job's true type.  Stops early with
    ``partial`` set once ``budget`` reruns have been spent.
    """
    grid = grid or MisreportGrid()
    rep = CheckReport()
    for seed in seeds:
        base = _outcome(make, inst, seed)
        rep.reruns += 1
        for truth in inst.jobs:
            honest = job_utility(base, truth, inst.clairvoyant)
            for lie in grid.reports(inst, truth):
                if rep.reruns >= budget:
                    rep.partial = True
                    return rep
                out = _outcome(make, inst.with_job(lie), seed)
                rep.reruns += 1
                u = job_utility(out, truth, inst.clairvoyant)
                if _better(u, honest):
                    rep.violations.append(
                        Violation("utility", inst, truth.id, truth, lie, honest, u, seed)
                    )
    return rep


def replay(v: Violation, make: Maker) -> tuple[Value, Value]:
    """Recompute the utilities a violation claims (for checking the checker)."""
    inst = v.instance
    honest = job_utility(_outcome(make, inst, v.seed), v.truth, inst.clairvoyant)
    if v.kind == "utility":
        lie = job_utility(_outcome(make, inst.with_job(v.report), v.seed), v.truth, inst.clairvoyant)
    else:
        mutated = inst.without(v.report.id) if v.detail == "delete" else inst.with_job(v.report)
        lie = job_utility(_outcome(make, mutated, v.seed), v.truth, inst.clairvoyant)
    return honest, lie


def _mutations(inst: Instance, job: Job) -> Iterable[tuple[str, Job, Instance]]:
    yield "delete", job, inst.without(job.id)
    for v in {0, inst.v_max} - {job.value}:
        j = job.replace(value=v)
        yield "value", j, inst.with_job(j)
    if inst.clairvoyant:
        hi = min(job.arrival + inst.d_max - 1, inst.horizon)
        if hi != job.deadline:
            j = job.replace(deadline=hi)
            yield "deadline", j, inst.with_job(j)
    else:
        for d in {0, inst.d_max} - {job.deadline}:
            j = job.replace(deadline=d)
            yield "deadline", j, inst.with_job(j)


def check_order_respecting(
    make: Maker, inst: Instance, seeds: Sequence[int] = (0,), budget: int = 1_000_000
) -> CheckReport:
    """Mutate or delete each later job and check that every earlier job's
    slots and payment stay put."""
    rep = CheckReport()
    for seed in seeds:
        base = _outcome(make, inst, seed)
        rep.reruns += 1
        for later in inst.jobs:
            earlier = [j for j in inst.jobs if j.order_key < later.order_key]
            if not earlier:
                continue
            for kind, mutated_job, mutated in _mutations(inst, later):
                if rep.reruns >= budget:
                    rep.partial = True
                    return rep
                out = _outcome(make, mutated, seed)
                rep.reruns += 1
                for j in earlier:
                    a = (base.allocation.slots.get(j.id, ()), base.allocation.payment(j.id))
                    b = (out.allocation.slots.get(j.id, ()), out.allocation.payment(j.id))
                    if a != b:
                        rep.violations.append(
                            Violation(
                                "order",
                                inst,
                                j.id,
                                j,
                                mutated_job,
                                job_utility(base, j, inst.clairvoyant),
                                job_utility(out, j, inst.clairvoyant),
                                seed,
                                kind,
                            )
                        )
    return rep


def coin_trace(make: Maker, inst: Instance, seed: int) -> tuple:
    """Coin flips and restart request slots of a restart-driven run."""
    mech = make(seed)
    run(mech, inst)
    coins = tuple(bool(c) for c in getattr(mech, "coins", ()))
    requests = tuple(t for t, kind in getattr(mech, "events", ()) if kind in ("restart", "deferred"))
    return coins, requests


def check_restart_report_independence(
    make: Maker, inst: Instance, altered: Instance, seed: int
) -> bool:
    """Whether two runs that differ only in reports flip identical coins."""
    return coin_trace(make, inst, seed) == coin_trace(make, altered, seed)


# ---------------------------------------------------------------- controls
# Deliberately broken mechanisms; each check above must catch its target.


class PayYourBid(PostedPriceClairvoyant):
    """Charges the reported value instead of the price: shading pays."""

    def __init__(self, price: Value):
        super().__init__(price)
        self.name = f"broken-pay:{self.price}"

    def on_arrival(self, job: Job) -> Decision:
        d = super().on_arrival(job)
        return Decision(d.job_id, d.slots, job.value * job.length) if d.accepted else d


class SurgePricing(PostedPriceNonClairvoyant):
    """Adds a surcharge for every job arriving while one runs."""

    def __init__(self, price: Value):
        super().__init__(price)
        self.name = f"broken-reprice:{self.price}"

    def reset(self, params) -> None:
        super().reset(params)
        self.surcharge: dict[int, int] = {}

    def tick(self, t: int, arrivals: list[NCJob]):
        for jid in self.lanes:
            if jid is not None:
                self.surcharge[jid] = self.surcharge.get(jid, 0) + len(arrivals)
        return super().tick(t, arrivals)

    def complete(self, job_id: int, length: int) -> Value:
        return super().complete(job_id, length) + self.surcharge.pop(job_id, 0)


class ReportSeededCoins(FollowTheBanditSwitcher):
    """Flips its restart coins from a hash of the reports seen so far."""

    def reset(self, params) -> None:
        super().reset(params)
        self._digest = hashlib.sha256(b"coins")
        self.coins = self.coins.copy()

    def tick(self, t: int, arrivals):
        for job in arrivals:
            self._digest.update(f"{job.id}:{job.value}:{job.deadline}".encode())
        if t <= len(self.coins):
            self.coins[t - 1] = self._digest.digest()[0] < 256 * max(self.gamma_used, 0.05)
        return super().tick(t, arrivals)
