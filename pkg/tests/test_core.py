from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from truthsched.core import (
    Allocation,
    FeasibilityError,
    Instance,
    Job,
    as_value,
    is_served,
    served_jobs,
    total_welfare,
    utility,
    validate_instance,
    welfare_series,
)
from truthsched.instances import gen_syncing_example
from truthsched.mechanisms import ppf_clairvoyant, run


def one_job(a=1, d=3, l=2, v=5, clairvoyant=True):
    job = Job(0, a, d, l, v)
    return job, Instance((job,), 10, 1, 10, 5, 5, clairvoyant)


def test_empty_allocation_serves_nobody():
    _, inst = one_job()
    assert served_jobs(Allocation(1), inst) == frozenset()
    assert total_welfare(Allocation(1), inst) == 0


def test_requirement_met_exactly():
    job, inst = one_job()
    alloc = Allocation(1)
    alloc.assign(0, [(1, 0), (2, 0)])
    assert served_jobs(alloc, inst) == {0}
    assert total_welfare(alloc, inst) == 10


def test_one_slot_short_is_not_served():
    _, inst = one_job()
    alloc = Allocation(1)
    alloc.assign(0, [(1, 0)])
    assert served_jobs(alloc, inst) == frozenset()


def test_slots_outside_window_do_not_count():
    job, _ = one_job()
    assert not is_served(job, [(3, 0), (4, 0)])


def test_nonclairvoyant_needs_consecutive_slots_from_a_timely_start():
    job = Job(0, 2, 1, 3, 1)  # may start at 2 or 3
    assert is_served(job, [(3, 0), (4, 0), (5, 0)], clairvoyant=False)
    assert not is_served(job, [(4, 0), (5, 0), (6, 0)], clairvoyant=False)
    assert not is_served(job, [(2, 0), (4, 0), (5, 0)], clairvoyant=False)


def test_overfull_slot_raises():
    _, inst = one_job()
    alloc = Allocation(1)
    alloc.assign(0, [(1, 0)])
    alloc.assign(1, [(1, 1)])
    with pytest.raises(FeasibilityError) as err:
        alloc.check_feasible()
    assert err.value.time == 1


def test_welfare_series_sums_to_total():
    inst = gen_syncing_example(12)
    out = run(ppf_clairvoyant(1), inst)
    assert sum(out.welfare.values) == total_welfare(out.allocation, inst) == 11


def test_syncing_example_from_slot_two():
    inst = gen_syncing_example(20)
    assert run(ppf_clairvoyant(1), inst, start=2).total == 3
    assert run(ppf_clairvoyant(1), inst).total == 19


def test_utility_served_at_price():
    job, _ = one_job(v=5, l=2)
    assert utility(job, [(1, 0), (2, 0)], 6) == 4


def test_utility_rejected_is_zero():
    job, _ = one_job()
    assert utility(job, (), 0) == 0


def test_utility_outside_true_window_is_minus_payment():
    job, _ = one_job(a=1, d=3, l=2)
    assert utility(job, [(4, 0), (5, 0)], 6) == -6


def test_validate_well_formed():
    _, inst = one_job()
    assert validate_instance(inst) == []


def test_validate_value_above_vmax():
    inst = Instance((Job(0, 1, 1, 1, 11),), 10, 1, 10, 5, 5)
    assert any("value exceeds v_max" in p for p in validate_instance(inst))


def test_validate_duplicate_ids():
    inst = Instance((Job(0, 1, 1, 1, 1), Job(0, 2, 2, 1, 1)), 10, 1, 10, 5, 5)
    assert "ids not unique" in validate_instance(inst)


def test_instance_orders_jobs_by_arrival_then_id():
    inst = Instance((Job(2, 1, 1, 1, 1), Job(1, 3, 3, 1, 1), Job(0, 1, 1, 1, 1)), 5, 1, 1, 1, 1)
    assert [j.id for j in inst.jobs] == [0, 2, 1]


def test_as_value_is_exact():
    assert as_value("3/2") == Fraction(3, 2)
    assert as_value(0.5) == Fraction(1, 2)
    assert as_value(Fraction(4, 2)) == 2 and isinstance(as_value(Fraction(4, 2)), int)


@given(st.sets(st.integers(1, 8)), st.integers(1, 8))
def test_adding_window_slots_never_unserves(times, extra):
    job = Job(0, 1, 8, 3, 1)
    slots = [(t, 0) for t in times]
    if is_served(job, slots):
        assert is_served(job, slots + [(extra, 0)])


@given(st.lists(st.tuples(st.integers(1, 6), st.integers(1, 3), st.integers(0, 4)), max_size=6))
def test_welfare_decomposition(specs):
    jobs = tuple(Job(i, a, min(a + l - 1, 8), l, v) for i, (a, l, v) in enumerate(specs))
    inst = Instance(jobs, 8, 2, 4, 3, 3)
    alloc = run(ppf_clairvoyant(1), inst).allocation
    assert sum(welfare_series(alloc, inst).values) == total_welfare(alloc, inst)
