"""Combiners that learn which roster mechanism to follow, online and truthfully.

:class:`FollowTheSwitcher` (clairvoyant) simulates every roster member on the
full stream, asks an experts learner with switching cost which one to follow
in each slot, and realizes a change of mind as a clairvoyant switch.

:class:`FollowTheBanditSwitcher` (non-clairvoyant) only sees its own
welfare.  It flips a report-independent coin each slot; on heads the welfare
of the batch since the previous heads (minus a sync prefix) is fed to a
bandit as the reward of the arm that was active, and the bandit's next arm
is installed through a restart window.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from truthsched.core import Allocation, Instance, Job, Params, Value, is_served
from truthsched.learners import LazyFPL, exp3_doubling
from truthsched.mechanisms import (
    ClairvoyantMechanism,
    Decision,
    MechanismFactory,
    NCJob,
    TickResult,
    build,
    run,
)
from truthsched.switching import RestartConfig, RestartDriver, SwitchedClairvoyant


@dataclass
class RunLog:
    """What a combiner did, slot by slot."""

    choices: list[int] = field(default_factory=list)  # arm in force at slot t (index t - 1)
    coins: list[bool] = field(default_factory=list)
    heads: list[int] = field(default_factory=list)
    batches: list[tuple[int, int, int, float]] = field(default_factory=list)  # (t', t, arm, reward)
    events: list[tuple[int, str, int]] = field(default_factory=list)  # (slot, kind, arm)
    rewards: list[tuple] = field(default_factory=list)  # per-slot reward vectors (FTS)
    welfare: list[Value] = field(default_factory=list)
    member_welfare: list[list[Value]] = field(default_factory=list)

    @property
    def switches(self) -> int:
        return sum(1 for _, kind, _ in self.events if kind == "switch")

    def records(self) -> list[dict]:
        out = [{"slot": t, "event": kind, "arm": arm, "reward": None} for t, kind, arm in self.events]
        out += [
            {"slot": t, "event": "batch", "arm": arm, "reward": r, "from": tp}
            for tp, t, arm, r in self.batches
        ]
        out.sort(key=lambda r: (r["slot"], r["event"]))
        return out

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, default=str) + "\n")


@dataclass(frozen=True)
class CombinerConfig:
    roster: tuple
    switch_cost: Value | None = None  # FTS: defaults to 2 v_max d_max m
    gamma: float | None = None  # FTBS: defaults to default_gamma(...)
    seed: int = 0
    learner: Callable | None = None  # FTS: (n, R, C, T, seed) -> experts learner

    def __post_init__(self):
        if len(self.roster) < 1:
            raise ValueError("roster must not be empty")
        if self.switch_cost is not None and self.switch_cost < 0:
            raise ValueError("switch cost must be non-negative")
        if self.gamma is not None and not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")


# ---------------------------------------------------------------- clairvoyant


def fts_switch_cost(params: Params) -> Value:
    return 2 * params.v_max * params.d_max * params.machines


class FollowTheSwitcher(ClairvoyantMechanism):
    def __init__(
        self,
        roster: Sequence[MechanismFactory],
        switch_cost: Value | None = None,
        seed=0,
        learner: Callable | None = None,
    ):
        if not roster:
            raise ValueError("roster must not be empty")
        self.roster = tuple(roster)
        self.switch_cost = switch_cost
        self.seed = seed
        self.learner_factory = learner or _lazy_fpl
        self.name = "fts(" + ",".join(getattr(f, "name", "?") for f in roster) + ")"

    def reset(self, params: Params) -> None:
        self.params = params
        n = len(self.roster)
        self.cost = fts_switch_cost(params) if self.switch_cost is None else self.switch_cost
        bound = params.v_max * params.machines
        self.learner = self.learner_factory(
            n, float(bound), float(self.cost), params.horizon, self.seed
        )
        self.sims = [build(f, params) for f in self.roster]
        self.arm = self.learner.choose()
        self.mech = build(self.roster[self.arm], params)
        size = params.horizon + 2
        self._member = [[0] * size for _ in range(n)]
        self._own = [0] * size
        self.log = RunLog()
        self.log.events.append((1, "start", self.arm))

    def begin_slot(self, t: int) -> None:
        arm = self.learner.choose()
        if arm != self.arm:
            self.mech = SwitchedClairvoyant.attach(
                self.mech, self.sims[arm].clone(), t, self.params
            )
            self.arm = arm
            self.log.events.append((t, "switch", arm))
        self.log.choices.append(self.arm)
        self.mech.begin_slot(t)
        for sim in self.sims:
            sim.begin_slot(t)

    def on_arrival(self, job: Job) -> Decision:
        for sim, acc in zip(self.sims, self._member):
            _credit(acc, job, sim.on_arrival(job))
        dec = self.mech.on_arrival(job)
        _credit(self._own, job, dec)
        return dec

    def end_slot(self, t: int) -> None:
        self.mech.end_slot(t)
        for sim in self.sims:
            sim.end_slot(t)
        rewards = tuple(acc[t] for acc in self._member)
        self.log.rewards.append(rewards)
        self.learner.feed([float(r) for r in rewards])

    def load(self, t: int) -> int:
        return self.mech.load(t)

    def loads(self) -> list[int]:
        return self.mech.loads()

    def finish_log(self) -> RunLog:
        T = self.params.horizon
        self.log.welfare = self._own[1 : T + 1]
        self.log.member_welfare = [acc[1 : T + 1] for acc in self._member]
        return self.log


def _lazy_fpl(n, R, C, T, seed):
    return LazyFPL(n, R, C, T, seed=seed)


def _credit(acc: list, job: Job, dec: Decision) -> None:
    if dec.slots and is_served(job, dec.slots):
        for t, _ in dec.slots:
            if t < len(acc):
                acc[t] += job.value


def fts_run(cfg: CombinerConfig, inst: Instance) -> tuple[Allocation, RunLog]:
    mech = FollowTheSwitcher(cfg.roster, cfg.switch_cost, cfg.seed, cfg.learner)
    out = run(mech, inst)
    return out.allocation, mech.finish_log()


# ------------------------------------------------------------ non-clairvoyant


def default_gamma(window: int, horizon: int, n: int) -> float:
    """Restart probability balancing sync losses against bandit regret."""
    if n <= 1:
        return 0.0
    g = window ** (-2 / 3) * horizon ** (-1 / 3) * (n * math.log(n)) ** (1 / 3)
    return min(1.0, g)


def batch_rewards(series, t_prev: int, t: int, window: int) -> tuple[list, Value]:
    """Rewards for slots ``t_prev .. t - 1``: zero through ``t_prev + window``
    (the sync prefix), the combiner's own welfare afterwards.

    ``series`` maps a slot to its welfare (a sequence indexed by ``t - 1``,
    or any object with an ``at`` method).
    """
    if t_prev >= t:
        raise ValueError("need t_prev < t")
    at = series.at if hasattr(series, "at") else (lambda x: series[x - 1])
    cut = min(t_prev + window, t - 1)
    per = [0 if x <= cut else at(x) for x in range(t_prev, t)]
    return per, sum(per, 0)


class FollowTheBanditSwitcher(RestartDriver):
    def __init__(
        self,
        roster: Sequence[MechanismFactory],
        gamma: float | None = None,
        seed=0,
        bandit: Callable | None = None,
        coin_seed=None,
    ):
        if not roster:
            raise ValueError("roster must not be empty")
        self.roster = tuple(roster)
        self.gamma = gamma
        self.seed = seed
        self.coin_seed = coin_seed
        self.bandit_factory = bandit or _bandit
        self.name = "ftbs(" + ",".join(getattr(f, "name", "?") for f in roster) + ")"
        super().__init__(roster[0], name=self.name)

    def reset(self, params: Params) -> None:
        n = len(self.roster)
        gamma = default_gamma(params.window, params.horizon, n) if self.gamma is None else self.gamma
        coin_seed, bandit_seed = np.random.SeedSequence(self.seed).spawn(2)
        if self.coin_seed is not None:
            coin_seed = self.coin_seed
        self.gamma_used = gamma
        self.restarts = RestartConfig(gamma, coin_seed)
        self.bandit = self.bandit_factory(n, bandit_seed)
        self.arm = self.bandit.choose()
        self.initial = self.roster[self.arm]
        super().reset(params)
        self.last_heads = 1
        self.values: dict[int, Value] = {}
        self.running_value: Value = 0
        self.own: list[Value] = []
        self.log = RunLog(coins=[bool(c) for c in self.coins])
        self.log.events.append((1, "start", self.arm))

    def requests(self, t: int):
        if not self.heads(t):
            return []
        self.log.heads.append(t)
        if t > self.last_heads:
            _, total = batch_rewards(self.own, self.last_heads, t, self.w)
            self.bandit.feed(self.arm, float(total))
            self.log.batches.append((self.last_heads, t, self.arm, float(total)))
        self.last_heads = t
        arm = self.bandit.choose()
        self.log.events.append((t, "switch" if arm != self.arm else "restart", arm))
        self.arm = arm
        return [self.roster[arm]]

    def tick(self, t: int, arrivals: list[NCJob]) -> TickResult:
        for job in arrivals:
            self.values[job.id] = job.value
        res = super().tick(t, arrivals)
        for jid, _ in res.starts:
            self.running_value += self.values[jid]
        if t <= self.params.horizon:
            self.own.append(self.running_value)
            self.log.choices.append(self.arm)
        return res

    def complete(self, job_id: int, length: int):
        self.running_value -= self.values[job_id]
        return super().complete(job_id, length)

    def finish_log(self) -> RunLog:
        self.log.welfare = list(self.own)
        return self.log


def _bandit(n, seed):
    return exp3_doubling(n, seed=seed)


def ftbs_run(cfg: CombinerConfig, inst: Instance) -> tuple[Allocation, RunLog]:
    mech = FollowTheBanditSwitcher(cfg.roster, cfg.gamma, cfg.seed)
    out = run(mech, inst)
    return out.allocation, mech.finish_log()


@dataclass(frozen=True)
class BenchmarkResult:
    means: tuple[float, ...]
    std_errors: tuple[float, ...]
    samples: tuple[tuple[float, ...], ...]

    @property
    def best(self) -> float:
        return max(self.means)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.means))


def restart_benchmark(
    roster: Sequence[MechanismFactory],
    gamma: float,
    inst: Instance,
    n_samples: int,
    seed=0,
) -> BenchmarkResult:
    """Welfare of each roster member under independent random restarts.

    Sample ``k`` uses the coin sequence seeded by ``(seed, k)`` for every
    member, so the comparison across members is paired.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    table = []
    for f in roster:
        row = []
        for k in range(n_samples):
            cfg = RestartConfig(gamma, np.random.SeedSequence([_seed_int(seed), k]))
            row.append(float(run(RestartDriver(f, restarts=cfg), inst).total))
        table.append(tuple(row))
    means = tuple(float(np.mean(r)) for r in table)
    ses = tuple(
        float(np.std(r, ddof=1) / math.sqrt(len(r))) if len(r) > 1 else 0.0 for r in table
    )
    return BenchmarkResult(means, ses, tuple(table))


def _seed_int(seed) -> int:
    return seed if isinstance(seed, int) else int(np.random.SeedSequence(seed).generate_state(1)[0])
