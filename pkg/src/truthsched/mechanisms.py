"""Online scheduling mechanisms and the slot-by-slot runners that drive them.

Two contracts exist.  A :class:`ClairvoyantMechanism` is prompt: it answers
each arriving job with a final :class:`Decision` (slots and total payment).
A :class:`NonClairvoyantMechanism` keeps a waiting queue and ``m`` lanes; it
never sees job lengths, learns them at completion, and charges then.

Every mechanism can be cloned, reset, snapshotted and restored.
"""

from __future__ import annotations

import copy
import pickle
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from truthsched.core import (
    Allocation,
    Instance,
    Job,
    Params,
    Slot,
    Value,
    WelfareSeries,
    as_value,
    welfare_series,
)


class SnapshotError(TypeError):
    """A snapshot was restored into a mechanism of a different kind."""


@dataclass(frozen=True)
class Snapshot:
    kind: str
    state: bytes


@dataclass(frozen=True)
class Decision:
    job_id: int
    slots: tuple[Slot, ...] = ()
    payment: Value = 0

    @property
    def accepted(self) -> bool:
        return bool(self.slots)

    @property
    def times(self) -> list[int]:
        return [t for t, _ in self.slots]


class Mechanism:
    """Shared plumbing: naming, cloning and snapshots."""

    name = "mechanism"
    clairvoyant = True

    def reset(self, params: Params) -> None:
        self.params = params

    @property
    def kind(self) -> str:
        return type(self).__name__

    def clone(self):
        return copy.deepcopy(self)

    def snapshot(self) -> Snapshot:
        return Snapshot(self.kind, pickle.dumps(self.__dict__, protocol=4))

    def restore(self, token: Snapshot) -> None:
        if token.kind != self.kind:
            raise SnapshotError(
                f"cannot restore a {token.kind} snapshot into {self.kind}"
            )
        self.__dict__ = pickle.loads(token.state)

    def __repr__(self) -> str:
        return f"<{self.kind} {self.name}>"


class ClairvoyantMechanism(Mechanism):
    clairvoyant = True

    def begin_slot(self, t: int) -> None:
        """Called once per slot before that slot's arrivals."""

    def end_slot(self, t: int) -> None:
        """Called once per slot after that slot's arrivals."""

    def on_arrival(self, job: Job) -> Decision:
        raise NotImplementedError

    def load(self, t: int) -> int:
        """Number of jobs this mechanism has placed in slot ``t``."""
        raise NotImplementedError

    def loads(self) -> list[int]:
        """Copy of the per-slot load, indexed by slot (index 0 unused)."""
        return [self.load(t) for t in range(self.params.horizon + 2)]


class PostedPriceClairvoyant(ClairvoyantMechanism):
    """Posted price with best-effort FIFO placement.

    A job is rejected if its value is below the price or if its window holds
    fewer than ``length`` slots with a free unit.  Otherwise it takes the
    earliest such slots, lowest unit first, and pays ``price * length``.
    """

    def __init__(self, price: Value):
        if price < 0:
            raise ValueError("price must be non-negative")
        self.price = as_value(price)
        self.name = f"ppf:{self.price}"

    def reset(self, params: Params) -> None:
        self.params = params
        self._load = [0] * (params.horizon + 2)

    def load(self, t: int) -> int:
        return self._load[t] if 0 <= t < len(self._load) else 0

    def loads(self) -> list[int]:
        return list(self._load)

    def on_arrival(self, job: Job) -> Decision:
        if job.value < self.price:
            return Decision(job.id)
        m = self.params.machines
        hi = min(job.deadline, self.params.horizon)
        load = self._load
        times = []
        for t in range(job.arrival, hi + 1):
            if load[t] < m:
                times.append(t)
                if len(times) == job.length:
                    break
        if len(times) < job.length:
            return Decision(job.id)
        slots = []
        for t in times:
            slots.append((t, load[t]))
            load[t] += 1
        return Decision(job.id, tuple(slots), self.price * job.length)


class NCJob(NamedTuple):
    """What a non-clairvoyant mechanism is told about an arriving job."""

    id: int
    arrival: int
    deadline: int  # wait budget
    value: Value
    order: tuple[int, int]

    @property
    def latest_start(self) -> int:
        return self.arrival + self.deadline

    @classmethod
    def of(cls, job: Job) -> "NCJob":
        return cls(job.id, job.arrival, job.deadline, job.value, job.order_key)


@dataclass
class TickResult:
    rejected: list[int] = field(default_factory=list)
    starts: list[tuple[int, int]] = field(default_factory=list)  # (job id, lane)


class NonClairvoyantMechanism(Mechanism):
    clairvoyant = False

    def tick(self, t: int, arrivals: list[NCJob]) -> TickResult:
        """Admit this slot's arrivals and start jobs on idle lanes."""
        raise NotImplementedError

    def complete(self, job_id: int, length: int) -> Value:
        """Job finished after ``length`` slots; returns its payment."""
        raise NotImplementedError

    def busy(self) -> bool:
        """Whether any admitted job is still queued or running."""
        raise NotImplementedError

    def next_event(self) -> int | None:
        """Earliest future slot at which an idle mechanism will act."""
        return None

    def live_state(self):
        """Comparable view of everything that influences future decisions."""
        raise NotImplementedError

    def work_state(self):
        """Queued and running work, without the decision rule."""
        raise NotImplementedError


class PostedPriceNonClairvoyant(NonClairvoyantMechanism):
    """Reject below the price, then serve in arrival order.

    Queued jobs whose wait would exceed their budget are deleted.  A started
    job pays ``price`` per unit once its length is revealed at completion.
    """

    def __init__(self, price: Value):
        if price < 0:
            raise ValueError("price must be non-negative")
        self.price = as_value(price)
        self.name = f"ppf:{self.price}:nc"

    def reset(self, params: Params) -> None:
        self.params = params
        self.queue: deque[NCJob] = deque()
        self.lanes: list[int | None] = [None] * params.machines

    def tick(self, t: int, arrivals: list[NCJob]) -> TickResult:
        res = TickResult()
        for job in arrivals:
            if job.value < self.price:
                res.rejected.append(job.id)
            else:
                self.queue.append(job)
        if any(q.latest_start < t for q in self.queue):
            keep: deque[NCJob] = deque()
            for q in self.queue:
                if q.latest_start >= t:
                    keep.append(q)
                else:
                    res.rejected.append(q.id)
            self.queue = keep
        for lane, busy in enumerate(self.lanes):
            if busy is None and self.queue:
                job = self.queue.popleft()
                self.lanes[lane] = job.id
                res.starts.append((job.id, lane))
        return res

    def complete(self, job_id: int, length: int) -> Value:
        self.lanes[self.lanes.index(job_id)] = None
        return self.price * length

    def busy(self) -> bool:
        return bool(self.queue) or any(x is not None for x in self.lanes)

    def live_state(self):
        return (self.kind, self.price, tuple(self.queue), tuple(self.lanes))

    def work_state(self):
        return (tuple(self.queue), tuple(self.lanes))


MechanismFactory = Callable[[Params], Mechanism]


@dataclass(frozen=True)
class MechanismSpec:
    """Descriptor-level handle: builds fresh mechanism states on demand."""

    kind: str
    price: Value
    clairvoyant: bool = True

    def __call__(self, params: Params) -> Mechanism:
        if self.kind != "ppf":
            raise ValueError(f"unknown mechanism kind {self.kind!r}")
        mech = (
            PostedPriceClairvoyant(self.price)
            if self.clairvoyant
            else PostedPriceNonClairvoyant(self.price)
        )
        mech.reset(params)
        return mech

    @property
    def name(self) -> str:
        return f"ppf:{self.price}" + ("" if self.clairvoyant else ":nc")

    def descriptor(self) -> str:
        setting = "clairvoyant" if self.clairvoyant else "nonclairvoyant"
        return f"{self.kind}:price={self.price}:{setting}"


_SETTINGS = {
    "clairvoyant": True,
    "c": True,
    "nonclairvoyant": False,
    "non-clairvoyant": False,
    "nc": False,
}


def parse_mechanism(descriptor: str, clairvoyant: bool | None = None) -> MechanismSpec:
    """Parse ``ppf:price=1.0:clairvoyant``, ``ppf:2``, ``ppf:3/2:nc`` and the like.

    A setting named in the descriptor wins over ``clairvoyant``; with neither
    the mechanism is clairvoyant.
    """
    parts = [p.strip() for p in descriptor.strip().split(":") if p.strip()]
    if not parts or parts[0] != "ppf":
        raise ValueError(f"bad mechanism descriptor {descriptor!r}")
    price = None
    setting = None
    for p in parts[1:]:
        key, _, val = p.partition("=")
        if val:
            if key != "price":
                raise ValueError(f"unknown mechanism option {key!r}")
            price = val
        elif key.lower() in _SETTINGS:
            setting = _SETTINGS[key.lower()]
        elif re.fullmatch(r"[0-9./]+", key):
            price = key
        else:
            raise ValueError(f"bad mechanism descriptor {descriptor!r}")
    if price is None:
        raise ValueError(f"mechanism descriptor {descriptor!r} has no price")
    try:
        value = as_value(price)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad price in {descriptor!r}") from exc
    if value < 0:
        raise ValueError("price must be non-negative")
    if setting is None:
        setting = True if clairvoyant is None else clairvoyant
    return MechanismSpec("ppf", value, setting)


def parse_roster(text: str, clairvoyant: bool | None = None) -> list[MechanismSpec]:
    return [parse_mechanism(d, clairvoyant) for d in text.split(",") if d.strip()]


def ppf_clairvoyant(price: Value) -> MechanismSpec:
    return MechanismSpec("ppf", as_value(price), True)


def ppf_nonclairvoyant(price: Value) -> MechanismSpec:
    return MechanismSpec("ppf", as_value(price), False)


@dataclass
class Outcome:
    """Result of running one mechanism over one instance."""

    allocation: Allocation
    welfare: WelfareSeries
    mechanism: Mechanism | None = None

    @property
    def total(self) -> Value:
        return self.welfare.total

    def payment(self, job_id: int) -> Value:
        return self.allocation.payment(job_id)


def build(mech: Mechanism | MechanismFactory, params: Params) -> Mechanism:
    """Fresh mechanism state from a factory, or reset a given state."""
    if isinstance(mech, Mechanism):
        mech.reset(params)
        return mech
    return mech(params)


Observer = Callable[[int, Mechanism], None]


def run(
    mech: Mechanism | MechanismFactory,
    inst: Instance,
    start: int = 1,
    observe: Observer | None = None,
) -> Outcome:
    """Feed ``inst`` to ``mech`` slot by slot from slot ``start``.

    Jobs arriving before ``start`` are never shown to the mechanism.  A
    factory is built fresh; a mechanism object is reset first.  ``observe``
    is called with the slot and the mechanism at the end of every slot.
    """
    m = build(mech, inst.params)
    if m.clairvoyant != inst.clairvoyant:
        raise ValueError(
            f"{m.name} expects a {'clairvoyant' if m.clairvoyant else 'non-clairvoyant'} instance"
        )
    if m.clairvoyant:
        alloc = _run_clairvoyant(m, inst, start, observe)
    else:
        alloc = _run_nonclairvoyant(m, inst, start, observe)
    alloc.check_feasible()
    return Outcome(alloc, welfare_series(alloc, inst), m)


def _run_clairvoyant(
    m: ClairvoyantMechanism, inst: Instance, start: int, observe: Observer | None
) -> Allocation:
    alloc = Allocation(inst.machines)
    arrivals = inst.arrivals()
    for t in range(max(start, 1), inst.horizon + 1):
        m.begin_slot(t)
        for job in arrivals.get(t, ()):
            d = m.on_arrival(job)
            alloc.assign(job.id, d.slots, d.payment)
        m.end_slot(t)
        if observe:
            observe(t, m)
    return alloc


def _run_nonclairvoyant(
    m: NonClairvoyantMechanism, inst: Instance, start: int, observe: Observer | None
) -> Allocation:
    alloc = Allocation(inst.machines)
    arrivals = inst.arrivals()
    lengths = {j.id: j.length for j in inst.jobs}
    ending: dict[int, list[int]] = {}
    running = 0
    t = max(start, 1)
    while True:
        for jid in ending.pop(t - 1, ()):
            alloc.payments[jid] = m.complete(jid, lengths[jid])
            running -= 1
        if t > inst.horizon and not running:
            if not m.busy():
                nxt = m.next_event()
                if nxt is None:
                    break
                t = max(t, nxt)
        jobs = arrivals.get(t, ()) if t <= inst.horizon else ()
        res = m.tick(t, [NCJob.of(j) for j in jobs])
        for jid in res.rejected:
            alloc.assign(jid, (), 0)
        for jid, lane in res.starts:
            n = lengths[jid]
            alloc.slots[jid] = tuple((t + k, lane) for k in range(n))
            alloc.payments[jid] = 0
            ending.setdefault(t + n - 1, []).append(jid)
            running += 1
        if observe:
            observe(t, m)
        t += 1
    return alloc
