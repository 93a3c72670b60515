"""Job and instance model, allocations, welfare accounting and job utility.

Time is slotted and 1-based.  In the clairvoyant setting a job's deadline is
the last slot in which it may be processed; in the non-clairvoyant setting it
is the number of slots the job is willing to wait before it starts, so its
latest start slot is ``arrival + deadline``.

Values are kept exact (``int`` or :class:`fractions.Fraction`) so welfare
inequalities can be checked without tolerances.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Union

Value = Union[int, Fraction]
Slot = tuple[int, int]  # (time, machine unit)


class FeasibilityError(ValueError):
    """An allocation puts more than ``m`` jobs into one time slot."""

    def __init__(self, time: int, occupancy: int, machines: int):
        self.time = time
        self.occupancy = occupancy
        self.machines = machines
        super().__init__(
            f"slot {time} is overfull: {occupancy} jobs on {machines} machine(s)"
        )


def as_value(x) -> Value:
    """Coerce a number or ``"p/q"`` string to an exact value."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a value")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        x = Fraction(str(x))
    elif isinstance(x, str):
        x = Fraction(x.strip())
    elif not isinstance(x, Fraction):
        x = Fraction(x)
    return int(x) if x.denominator == 1 else x


@dataclass(frozen=True)
class Job:
    id: int
    arrival: int
    deadline: int
    length: int
    value: Value

    @property
    def order_key(self) -> tuple[int, int]:
        return (self.arrival, self.id)

    @property
    def latest_start(self) -> int:
        """Latest start slot under non-clairvoyant (wait budget) semantics."""
        return self.arrival + self.deadline

    def replace(self, **changes) -> "Job":
        return replace(self, **changes)


@dataclass(frozen=True)
class Params:
    """Instance-level constants a mechanism may know in advance."""

    horizon: int
    machines: int
    v_max: Value
    d_max: int
    l_max: int
    clairvoyant: bool = True

    @property
    def window(self) -> int:
        """Length ``l_max + d_max`` of a restart / sync window."""
        return self.l_max + self.d_max


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    horizon: int
    machines: int
    v_max: Value
    d_max: int
    l_max: int
    clairvoyant: bool = True

    def __post_init__(self):
        object.__setattr__(
            self, "jobs", tuple(sorted(self.jobs, key=lambda j: j.order_key))
        )

    @property
    def params(self) -> Params:
        return Params(
            self.horizon,
            self.machines,
            self.v_max,
            self.d_max,
            self.l_max,
            self.clairvoyant,
        )

    def job(self, job_id: int) -> Job:
        for j in self.jobs:
            if j.id == job_id:
                return j
        raise KeyError(job_id)

    def with_job(self, job: Job) -> "Instance":
        """Copy with the job of the same id replaced by ``job``."""
        jobs = [job if j.id == job.id else j for j in self.jobs]
        return replace(self, jobs=tuple(jobs))

    def without(self, job_id: int) -> "Instance":
        return replace(self, jobs=tuple(j for j in self.jobs if j.id != job_id))

    def with_jobs(self, jobs: Iterable[Job]) -> "Instance":
        return replace(self, jobs=tuple(jobs))

    def arrivals(self) -> dict[int, list[Job]]:
        """Jobs grouped by arrival slot, each group in order-key order."""
        out: dict[int, list[Job]] = {}
        for j in self.jobs:
            out.setdefault(j.arrival, []).append(j)
        return out


@dataclass
class Allocation:
    """Slots and total payment per job.

    ``slots[j]`` holds ``(time, unit)`` pairs; a job absent from ``slots`` got
    nothing.  ``payments[j]`` is the total charge (not per unit).
    """

    machines: int
    slots: dict[int, tuple[Slot, ...]] = field(default_factory=dict)
    payments: dict[int, Value] = field(default_factory=dict)

    def assign(self, job_id: int, slots: Iterable[Slot], payment: Value = 0):
        self.slots[job_id] = tuple(sorted(slots))
        self.payments[job_id] = payment

    def times(self, job_id: int) -> list[int]:
        return [t for t, _ in self.slots.get(job_id, ())]

    def payment(self, job_id: int) -> Value:
        return self.payments.get(job_id, 0)

    def occupancy(self) -> Counter:
        occ: Counter = Counter()
        for slots in self.slots.values():
            for t, _ in slots:
                occ[t] += 1
        return occ

    def check_feasible(self) -> None:
        seen: set[Slot] = set()
        for slots in self.slots.values():
            for s in slots:
                if s in seen:
                    raise FeasibilityError(s[0], 2, self.machines)
                seen.add(s)
        for t, n in sorted(self.occupancy().items()):
            if n > self.machines:
                raise FeasibilityError(t, n, self.machines)

    def last_slot(self) -> int:
        return max((t for s in self.slots.values() for t, _ in s), default=0)


@dataclass(frozen=True)
class WelfareSeries:
    """Per-slot welfare ``W_t``; ``values[t - 1]`` is slot ``t``."""

    values: tuple[Value, ...]

    def __len__(self) -> int:
        return len(self.values)

    def at(self, t: int) -> Value:
        return self.values[t - 1] if 1 <= t <= len(self.values) else 0

    def window_sum(self, lo: int, hi: int) -> Value:
        """Sum of ``W_t`` over ``lo <= t <= hi`` (clipped to the series)."""
        lo = max(lo, 1)
        hi = min(hi, len(self.values))
        return sum(self.values[lo - 1 : hi], 0)

    @property
    def total(self) -> Value:
        return sum(self.values, 0)


def is_served(job: Job, slots: Iterable[Slot], clairvoyant: bool = True) -> bool:
    """Whether ``slots`` meet ``job``'s service requirement.

    Clairvoyant: at least ``length`` distinct slots inside ``[arrival,
    deadline]``.  Non-clairvoyant: ``length`` consecutive slots starting no
    later than the latest start slot.
    """
    if clairvoyant:
        times = {t for t, _ in slots}
        if len(times) < job.length:
            return False
        inside = sum(1 for t in times if job.arrival <= t <= job.deadline)
        return inside >= job.length
    times = sorted({t for t, _ in slots})
    if len(times) < job.length or not times:
        return False
    start = times[0]
    if start < job.arrival or start > job.latest_start:
        return False
    return times[: job.length] == list(range(start, start + job.length))


def served_jobs(alloc: Allocation, inst: Instance) -> frozenset[int]:
    alloc.check_feasible()
    return frozenset(
        j.id
        for j in inst.jobs
        if j.id in alloc.slots and is_served(j, alloc.slots[j.id], inst.clairvoyant)
    )


def welfare_series(
    alloc: Allocation, inst: Instance, length: int | None = None
) -> WelfareSeries:
    """Per-slot welfare; ``length`` defaults to the horizon or last used slot."""
    served = served_jobs(alloc, inst)
    n = max(inst.horizon, alloc.last_slot()) if length is None else length
    w: list[Value] = [0] * n
    for j in inst.jobs:
        if j.id not in served:
            continue
        for t, _ in alloc.slots[j.id]:
            if 1 <= t <= n:
                w[t - 1] += j.value
    return WelfareSeries(tuple(w))


def total_welfare(alloc: Allocation, inst: Instance) -> Value:
    served = served_jobs(alloc, inst)
    return sum((j.value * j.length for j in inst.jobs if j.id in served), 0)


def utility(
    true_type: Job,
    slots: Iterable[Slot],
    payment: Value,
    clairvoyant: bool = True,
) -> Value:
    """Quasi-linear utility measured against the job's true type.

    The job owes ``payment`` whatever it reported; it collects
    ``value * length`` only if its true requirement is met.
    """
    if is_served(true_type, slots, clairvoyant):
        return true_type.value * true_type.length - payment
    return -payment


def validate_instance(inst: Instance) -> list[str]:
    """All invariant violations of ``inst``; an empty list means well formed."""
    out: list[str] = []
    ids = [j.id for j in inst.jobs]
    if len(set(ids)) != len(ids):
        out.append("ids not unique")
    if inst.horizon < 1:
        out.append("horizon must be at least 1")
    if inst.machines < 1:
        out.append("machine count must be at least 1")
    if inst.l_max < 1:
        out.append("l_max must be at least 1")
    if inst.d_max < (1 if inst.clairvoyant else 0):
        out.append("d_max out of range")
    if inst.v_max < 0:
        out.append("v_max must be non-negative")
    for j in inst.jobs:
        tag = f"job {j.id}:"
        if not 1 <= j.arrival <= inst.horizon:
            out.append(f"{tag} arrival outside [1, T]")
        if inst.clairvoyant:
            if j.deadline < j.arrival:
                out.append(f"{tag} deadline before arrival")
            if j.deadline > j.arrival + inst.d_max - 1:
                out.append(f"{tag} deadline exceeds arrival + d_max - 1")
            if j.deadline > inst.horizon:
                out.append(f"{tag} deadline beyond horizon")
        elif not 0 <= j.deadline <= inst.d_max:
            out.append(f"{tag} wait budget outside [0, d_max]")
        if j.length < 1:
            out.append(f"{tag} length below 1")
        if j.length > inst.l_max:
            out.append(f"{tag} length exceeds l_max")
        if j.value < 0:
            out.append(f"{tag} negative value")
        if j.value > inst.v_max:
            out.append(f"{tag} value exceeds v_max")
    return out


def payments_total(payments: Mapping[int, Value]) -> Value:
    return sum(payments.values(), 0)
