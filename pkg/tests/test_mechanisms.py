from fractions import Fraction

import pytest

from truthsched.core import Instance, Job
from truthsched.instances import gen_random, gen_syncing_example
from truthsched.mechanisms import (
    MechanismSpec,
    NCJob,
    PostedPriceClairvoyant,
    PostedPriceNonClairvoyant,
    SnapshotError,
    parse_mechanism,
    parse_roster,
    ppf_clairvoyant,
    ppf_nonclairvoyant,
    run,
)


def clair(*jobs, T=10, m=1):
    return Instance(tuple(jobs), T, m, 4, 5, 5, True)


def nonclair(*jobs, T=10, m=1):
    return Instance(tuple(jobs), T, m, 4, 3, 4, False)


def test_example_first_job_takes_slots_one_to_three():
    out = run(ppf_clairvoyant(1), gen_syncing_example(10))
    assert out.allocation.times(0) == [1, 2, 3]


def test_below_price_rejected():
    out = run(ppf_clairvoyant(1), clair(Job(0, 1, 1, 1, Fraction(1, 2))))
    assert out.allocation.slots[0] == () and out.allocation.payment(0) == 0


def test_value_equal_to_price_is_admitted():
    out = run(ppf_clairvoyant(2), clair(Job(0, 1, 1, 1, 2)))
    assert out.allocation.payment(0) == 2


def test_example_second_job_rejected_when_slots_busy():
    out = run(ppf_clairvoyant(1), gen_syncing_example(10))
    assert out.allocation.slots[1] == ()


def test_example_total_welfare():
    assert run(ppf_clairvoyant(1), gen_syncing_example(20)).total == 19
    assert run(ppf_clairvoyant(1), gen_syncing_example(20), start=2).total == 3


def test_empty_instance():
    assert run(ppf_clairvoyant(1), clair()).total == 0
    assert run(ppf_nonclairvoyant(1), nonclair()).total == 0


def test_clairvoyant_payment_is_price_times_length():
    out = run(ppf_clairvoyant(3), clair(Job(0, 2, 5, 3, 4)))
    assert out.allocation.times(0) == [2, 3, 4]
    assert out.allocation.payment(0) == 9


def test_nc_idle_machine_starts_on_arrival():
    out = run(ppf_nonclairvoyant(1), nonclair(Job(0, 3, 0, 2, 2)))
    assert out.allocation.times(0) == [3, 4]
    assert out.allocation.payment(0) == 2


def test_nc_below_price_rejected_free():
    out = run(ppf_nonclairvoyant(2), nonclair(Job(0, 1, 0, 1, 1)))
    assert out.allocation.slots[0] == () and out.allocation.payment(0) == 0


def test_nc_same_slot_fifo_by_id():
    out = run(ppf_nonclairvoyant(1), nonclair(Job(5, 1, 3, 2, 1), Job(2, 1, 3, 2, 1)))
    assert out.allocation.times(2) == [1, 2]
    assert out.allocation.times(5) == [3, 4]


def test_nc_waiting_past_budget_deletes_job():
    out = run(ppf_nonclairvoyant(1), nonclair(Job(0, 1, 0, 4, 1), Job(1, 2, 2, 1, 1)))
    assert out.allocation.slots[1] == ()


def test_nc_runs_past_horizon_until_done():
    out = run(ppf_nonclairvoyant(1), nonclair(Job(0, 9, 0, 4, 1), T=10))
    assert out.allocation.times(0) == [9, 10, 11, 12]
    assert out.total == 4


def test_nc_mechanism_never_sees_length():
    seen = []

    class Spy(PostedPriceNonClairvoyant):
        def tick(self, t, arrivals):
            seen.extend(arrivals)
            return super().tick(t, arrivals)

    run(Spy(1), nonclair(Job(0, 1, 0, 3, 2)))
    assert seen and all(isinstance(j, NCJob) and not hasattr(j, "length") for j in seen)


def test_nonpreemptive_slots_are_consecutive_on_one_lane():
    for seed in range(30):
        inst = gen_random(seed, False)
        out = run(ppf_nonclairvoyant(1), inst)
        for slots in out.allocation.slots.values():
            if slots:
                times = [t for t, _ in slots]
                assert times == list(range(times[0], times[0] + len(times)))
                assert len({u for _, u in slots}) == 1


def test_setting_mismatch_is_an_error():
    with pytest.raises(ValueError):
        run(ppf_nonclairvoyant(1), clair())


def test_snapshot_restore_roundtrip():
    inst = clair(Job(0, 1, 3, 2, 2), Job(1, 2, 4, 2, 3), T=6)
    m = PostedPriceClairvoyant(1)
    m.reset(inst.params)
    token = m.snapshot()
    m.restore(token)
    assert m.snapshot() == token


def test_snapshot_replay_is_deterministic():
    inst = clair(Job(0, 1, 3, 2, 2), Job(1, 2, 4, 2, 3), T=6)
    m = PostedPriceClairvoyant(1)
    m.reset(inst.params)
    token = m.snapshot()
    first = [m.on_arrival(j) for j in inst.jobs]
    m.restore(token)
    assert [m.on_arrival(j) for j in inst.jobs] == first


def test_restore_wrong_kind_raises():
    a = PostedPriceClairvoyant(1)
    b = PostedPriceNonClairvoyant(1)
    a.reset(clair().params)
    b.reset(nonclair().params)
    with pytest.raises(SnapshotError):
        a.restore(b.snapshot())


def test_prompt_decisions_ignore_the_future():
    inst = gen_random(3, True, max_jobs=6)
    base = run(ppf_clairvoyant(1), inst).allocation
    for cut in range(len(inst.jobs)):
        prefix = inst.with_jobs(inst.jobs[: cut + 1])
        alloc = run(ppf_clairvoyant(1), prefix).allocation
        for j in prefix.jobs:
            assert alloc.slots[j.id] == base.slots[j.id]


@pytest.mark.parametrize(
    "text, price, clairvoyant",
    [
        ("ppf:1", 1, True),
        ("ppf:price=1.0:clairvoyant", 1, True),
        ("ppf:3/2:nc", Fraction(3, 2), False),
        ("ppf:price=2:nonclairvoyant", 2, False),
    ],
)
def test_parse_mechanism(text, price, clairvoyant):
    spec = parse_mechanism(text)
    assert spec == MechanismSpec("ppf", price, clairvoyant)


@pytest.mark.parametrize("text", ["", "fifo:1", "ppf", "ppf:x", "ppf:-1", "ppf:color=2"])
def test_parse_mechanism_rejects(text):
    with pytest.raises(ValueError):
        parse_mechanism(text)


def test_parse_roster_applies_setting():
    roster = parse_roster("ppf:1,ppf:2", clairvoyant=False)
    assert [m.name for m in roster] == ["ppf:1:nc", "ppf:2:nc"]
