"""Switching between mechanisms mid-stream without breaking truthfulness.

Clairvoyant: :class:`SwitchedClairvoyant` mimics a first mechanism for jobs
arriving before the switch slot and then follows a second mechanism that has
seen the whole stream, patching over slots that are no longer available.

Non-clairvoyant: :class:`RestartDriver` implements restarts (fresh state after
a quiet window during which new arrivals are held back), random restarts and
switches; all three are the same mechanism with different restart events.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from truthsched.core import Allocation, Instance, Params
from truthsched.mechanisms import (
    ClairvoyantMechanism,
    Decision,
    Mechanism,
    MechanismFactory,
    NCJob,
    NonClairvoyantMechanism,
    TickResult,
    build,
    run,
)


@dataclass(frozen=True)
class Replacement:
    job_id: int
    replaced: int
    replacement: int


class SwitchedClairvoyant(ClairvoyantMechanism):
    """Follow ``first`` for arrivals before ``switch_time``, then ``second``.

    ``second`` is fed every job, pre-switch ones included.  On the first
    post-switch arrival the schedule of ``first`` is copied and every slot in
    ``[s, s + d_max - 1]`` is closed.  A post-switch job is rejected (price 0)
    if its deadline falls in that closed range or if ``second`` rejects it.
    Otherwise it keeps the slots ``second`` chose that are still open and each
    closed one is replaced by the earliest open slot in the job's window that
    is later than it.  If that fails the job is rejected.
    """

    def __init__(
        self,
        first: Mechanism | MechanismFactory,
        second: Mechanism | MechanismFactory,
        switch_time: int,
    ):
        if switch_time < 1:
            raise ValueError("switch time must be at least 1")
        self._first_src = first
        self._second_src = second
        self.switch_time = switch_time
        self.name = f"switch({_name(first)}->{_name(second)}@{switch_time})"

    def reset(self, params: Params) -> None:
        self.params = params
        self.first = build(self._first_src, params)
        self.second = build(self._second_src, params)
        self.active = False
        self._load: list[int] | None = None
        self.replacements: list[Replacement] = []
        self.closed_until = self.switch_time + params.d_max - 1

    @classmethod
    def attach(
        cls,
        first: ClairvoyantMechanism,
        second: ClairvoyantMechanism,
        switch_time: int,
        params: Params,
    ) -> "SwitchedClairvoyant":
        """Switch between two live states without resetting either; both
        must already have seen every arrival before ``switch_time``."""
        c = cls(first, second, switch_time)
        c.params = params
        c.first, c.second = first, second
        c.active = False
        c._load = None
        c.replacements = []
        c.closed_until = switch_time + params.d_max - 1
        return c

    def begin_slot(self, t: int) -> None:
        if t < self.switch_time:
            self.first.begin_slot(t)
        self.second.begin_slot(t)

    def end_slot(self, t: int) -> None:
        if t < self.switch_time:
            self.first.end_slot(t)
        self.second.end_slot(t)

    def load(self, t: int) -> int:
        if not self.active:
            return self.first.load(t)
        return self._load[t] if 0 <= t < len(self._load) else 0

    def loads(self) -> list[int]:
        return list(self._load) if self.active else self.first.loads()

    def _activate(self) -> None:
        self._load = self.first.loads()
        self.active = True

    def _open(self, t: int) -> bool:
        return (
            t > self.closed_until
            and t <= self.params.horizon
            and self._load[t] < self.params.machines
        )

    def on_arrival(self, job) -> Decision:
        if job.arrival < self.switch_time:
            self.second.on_arrival(job)
            return self.first.on_arrival(job)
        if not self.active:
            self._activate()
        b = self.second.on_arrival(job)
        if job.deadline <= self.closed_until or not b.accepted:
            return Decision(job.id)
        chosen = sorted(set(b.times))
        keep = [t for t in chosen if self._open(t)]
        taken = set(keep)
        patches = []
        for u in (t for t in chosen if not self._open(t)):
            r = next(
                (
                    t
                    for t in range(max(job.arrival, u + 1), job.deadline + 1)
                    if t not in taken and self._open(t)
                ),
                None,
            )
            if r is None:
                return Decision(job.id)
            taken.add(r)
            patches.append(Replacement(job.id, u, r))
        self.replacements.extend(patches)
        slots = []
        for t in sorted(taken):
            slots.append((t, self._load[t]))
            self._load[t] += 1
        return Decision(job.id, tuple(slots), b.payment)


def _name(m) -> str:
    return getattr(m, "name", repr(m))


def switch_clairvoyant(
    first: Mechanism | MechanismFactory,
    second: Mechanism | MechanismFactory,
    switch_time: int,
) -> SwitchedClairvoyant:
    return SwitchedClairvoyant(first, second, switch_time)


def compose_chain(
    roster: Sequence[Mechanism | MechanismFactory],
    switches: Iterable[tuple[int, int]],
) -> ClairvoyantMechanism | MechanismFactory:
    """Left fold of switches: start with ``roster[0]`` and at each
    ``(slot, index)`` switch to ``roster[index]``.  Slots must increase."""
    if not roster:
        raise ValueError("empty roster")
    mech = roster[0]
    last = 0
    for s, i in switches:
        if s <= last:
            raise ValueError("switch slots must be strictly increasing")
        last = s
        mech = SwitchedClairvoyant(mech, roster[i], s)
    return mech


@dataclass(frozen=True)
class FreeSlotAudit:
    first_free: int | None
    total: int
    support: tuple[int, ...]
    counts: dict


def audit_free_slots(
    c_alloc: Allocation, b_alloc: Allocation, switch_time: int, d_max: int
) -> FreeSlotAudit:
    """Slots after the closed range where the follower schedule runs fewer
    jobs than the full-stream schedule of the second mechanism."""
    occ_c = c_alloc.occupancy()
    occ_b = b_alloc.occupancy()
    lo = switch_time + d_max
    counts = {}
    for t in sorted(set(occ_b) | set(occ_c)):
        if t >= lo:
            gap = occ_b.get(t, 0) - occ_c.get(t, 0)
            if gap > 0:
                counts[t] = gap
    support = tuple(sorted(counts))
    return FreeSlotAudit(
        support[0] if support else None, sum(counts.values()), support, counts
    )


# ---------------------------------------------------------------- non-clairvoyant


@dataclass(frozen=True)
class RestartConfig:
    gamma: float
    seed: int = 0
    window: int | None = None  # defaults to l_max + d_max

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


def coin_flips(gamma: float, seed, horizon: int) -> np.ndarray:
    """Restart coins for slots ``1..horizon``; entry ``t - 1`` is slot ``t``.

    Depends on nothing but its arguments, so it is independent of reports.
    """
    if gamma <= 0:
        return np.zeros(horizon, dtype=bool)
    rng = np.random.default_rng(seed)
    return rng.random(horizon) < gamma


class RestartDriver(NonClairvoyantMechanism):
    """Runs one inner mechanism state at a time and restarts it on request.

    A restart requested at slot ``t`` opens the window ``[t, t + w]``: the
    running state keeps serving jobs that arrived before ``t`` while new
    arrivals are held back.  At ``t + w + 1`` a fresh state of the target
    mechanism is created and the held jobs are handed to it with arrival
    ``t + w + 1`` and their latest start kept (negative budgets are
    rejected), ahead of that slot's own arrivals.  A request made while a
    window is open, or at its release slot, pushes the release back by
    another ``w + 1`` slots and replaces the target.
    """

    def __init__(
        self,
        initial: MechanismFactory,
        schedule: Mapping[int, MechanismFactory] | None = None,
        restarts: RestartConfig | None = None,
        name: str | None = None,
    ):
        self.initial = initial
        self.schedule = dict(schedule or {})
        self.restarts = restarts
        self.name = name or self._default_name()

    def _default_name(self) -> str:
        parts = [_name(self.initial)]
        for s, f in sorted(self.schedule.items()):
            parts.append(f"@{s}->{_name(f)}")
        if self.restarts and self.restarts.gamma > 0:
            parts.append(f"~{self.restarts.gamma}")
        return "restart(" + " ".join(parts) + ")"

    def reset(self, params: Params) -> None:
        self.params = params
        cfg = self.restarts
        self.w = cfg.window if cfg and cfg.window is not None else params.window
        self.coins = (
            coin_flips(cfg.gamma, cfg.seed, params.horizon)
            if cfg
            else np.zeros(params.horizon, dtype=bool)
        )
        self.active = self.initial
        self.current = build(self.initial, params)
        self.window_end: int | None = None
        self.target: MechanismFactory | None = None
        self.buffer: list[NCJob] = []
        self.owner: dict[int, NonClairvoyantMechanism] = {}
        self.events: list[tuple[int, str]] = []

    def heads(self, t: int) -> bool:
        return 1 <= t <= len(self.coins) and bool(self.coins[t - 1])

    def requests(self, t: int) -> list[MechanismFactory]:
        """Restart targets requested at slot ``t``."""
        if t in self.schedule:
            return [self.schedule[t]]
        return [self.active] if self.heads(t) else []

    def request(self, t: int, target: MechanismFactory) -> None:
        if self.window_end is not None and t <= self.window_end + 1:
            self.window_end += self.w + 1
            self.events.append((t, "deferred"))
        else:
            self.window_end = t + self.w
            self.events.append((t, "restart"))
        self.target = target
        self.active = target

    def _release(self, t: int, res: TickResult) -> list[NCJob]:
        self.current = build(self.target, self.params)
        self.window_end = None
        self.target = None
        out = []
        for job in self.buffer:
            budget = job.latest_start - t
            if budget < 0:
                res.rejected.append(job.id)
            else:
                out.append(job._replace(arrival=t, deadline=budget))
        self.buffer = []
        return out

    def tick(self, t: int, arrivals: list[NCJob]) -> TickResult:
        for target in self.requests(t):
            self.request(t, target)
        res = TickResult()
        feed: list[NCJob] = []
        if self.window_end is not None and t == self.window_end + 1:
            feed = self._release(t, res)
        if self.window_end is not None and t <= self.window_end:
            self.buffer.extend(arrivals)
        else:
            feed.extend(arrivals)
        inner = self.current.tick(t, feed)
        res.rejected.extend(inner.rejected)
        res.starts.extend(inner.starts)
        for jid, _ in inner.starts:
            self.owner[jid] = self.current
        return res

    def complete(self, job_id: int, length: int):
        return self.owner.pop(job_id).complete(job_id, length)

    def busy(self) -> bool:
        return self.current.busy() or any(m.busy() for m in self.owner.values())

    def work_state(self):
        return (self.window_end, tuple(self.buffer), self.current.work_state())

    def next_event(self) -> int | None:
        return None if self.window_end is None else self.window_end + 1

    def live_state(self):
        """Everything that shapes future decisions.

        While a window is open the running state only finishes old work, so
        only its queue and lanes count, not which mechanism it is.
        """
        if self.window_end is not None:
            inner = self.current.work_state()
            pending = _name(self.target)
        else:
            inner = self.current.live_state()
            pending = None
        return (self.window_end, pending, tuple(self.buffer), inner)


def restart(mech: MechanismFactory, t: int) -> RestartDriver:
    """``mech`` restarted once at slot ``t``."""
    return RestartDriver(mech, {t: mech})


def with_random_restarts(mech: MechanismFactory, cfg: RestartConfig) -> RestartDriver:
    return RestartDriver(mech, restarts=cfg)


def switch_nonclairvoyant(
    first: MechanismFactory,
    second: MechanismFactory,
    switch_time: int,
    restarts: RestartConfig | None = None,
) -> RestartDriver:
    """Serve with ``first`` and hand over to a fresh ``second`` via a restart
    window opened at ``switch_time``."""
    return RestartDriver(first, {switch_time: second}, restarts)



def state_match(
    first: MechanismFactory, second: MechanismFactory, switch_time: int, inst: Instance
) -> list[tuple[int, object, object]]:
    """Slots from ``switch_time - 1 + w`` on where the switched driver's live
    state differs from ``second`` run alone and restarted at ``switch_time``.

    Each entry is ``(slot, switched state, restarted state)``; an empty
    list means the two agree from that slot to the end of the run.
    """
    w = inst.params.window
    lo = switch_time - 1 + w
    seen: dict[str, dict[int, object]] = {"c": {}, "r": {}}

    def recorder(key):
        def observe(t, mech):
            if t >= lo:
                seen[key][t] = mech.live_state()

        return observe

    run(switch_nonclairvoyant(first, second, switch_time), inst, observe=recorder("c"))
    run(restart(second, switch_time), inst, observe=recorder("r"))
    out = []
    for t in sorted(set(seen["c"]) | set(seen["r"])):
        a, b = seen["c"].get(t), seen["r"].get(t)
        if a != b:
            out.append((t, a, b))
    return out
