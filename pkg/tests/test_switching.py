import random

import numpy as np
import pytest

from truthsched.core import Instance, Job
from truthsched.instances import gen_random
from truthsched.mechanisms import ppf_clairvoyant as C, ppf_nonclairvoyant as N, run
from truthsched.switching import (
    RestartConfig,
    RestartDriver,
    audit_free_slots,
    coin_flips,
    compose_chain,
    restart,
    state_match,
    switch_clairvoyant,
    switch_nonclairvoyant,
    with_random_restarts,
)


# ---------------------------------------------------------------- clairvoyant


def test_no_post_switch_jobs_means_first_mechanism():
    inst = Instance((Job(0, 1, 2, 1, 3), Job(1, 2, 4, 2, 1)), 10, 1, 4, 3, 2)
    a = run(C(2), inst)
    c = run(switch_clairvoyant(C(2), C(0), 6), inst)
    assert c.welfare == a.welfare
    assert c.allocation.slots == a.allocation.slots


def test_deadline_in_closed_range_is_rejected_free():
    inst = Instance((Job(0, 5, 6, 1, 4),), 10, 1, 4, 3, 1)
    c = run(switch_clairvoyant(C(1), C(1), 5), inst)
    assert c.allocation.slots[0] == () and c.allocation.payment(0) == 0


def test_post_switch_job_pays_second_price():
    inst = Instance((Job(0, 5, 9, 1, 4),), 10, 1, 4, 3, 1)
    c = run(switch_clairvoyant(C(1), C(3), 5), inst)
    assert c.allocation.times(0) == [8]  # slot 5 is closed, next open one after it
    assert c.allocation.payment(0) == 3


def test_replacements_are_strictly_later():
    rng = random.Random(0)
    seen = 0
    for seed in range(300):
        inst = gen_random(seed, True, max_horizon=40)
        s = rng.randint(1, inst.horizon)
        mech = switch_clairvoyant(C(rng.randint(0, 4)), C(rng.randint(0, 4)), s)
        run(mech, inst)
        for r in mech.replacements:
            seen += 1
            assert r.replacement > r.replaced
    assert seen > 0


def test_switch_welfare_bound_random():
    rng = random.Random(1)
    for seed in range(200):
        inst = gen_random(seed, True, max_horizon=40)
        s = rng.randint(1, inst.horizon)
        A, B = C(rng.randint(0, 4)), C(rng.randint(0, 4))
        wa, wb = run(A, inst).welfare, run(B, inst).welfare
        wc = run(switch_clairvoyant(A, B, s), inst).total
        bound = wa.window_sum(1, s - 1) + wb.window_sum(s, len(wb))
        assert wc >= bound - 2 * inst.v_max * inst.d_max * inst.machines


def test_no_early_completion_after_switch():
    rng = random.Random(2)
    for seed in range(200):
        inst = gen_random(seed, True, max_horizon=40)
        s = rng.randint(1, inst.horizon)
        B = C(rng.randint(0, 4))
        c = run(switch_clairvoyant(C(rng.randint(0, 4)), B, s), inst).allocation
        b = run(B, inst).allocation
        for j in inst.jobs:
            if j.arrival >= s and c.slots.get(j.id):
                assert max(c.times(j.id)) >= max(b.times(j.id))


def test_chain_of_length_zero_and_one():
    inst = gen_random(5, True)
    assert compose_chain((C(1),), []) == C(1)
    one = run(compose_chain((C(1), C(2)), [(4, 1)]), inst).allocation.slots
    assert one == run(switch_clairvoyant(C(1), C(2), 4), inst).allocation.slots


def test_chain_of_three_switches_bound():
    rng = random.Random(3)
    for seed in range(100):
        inst = gen_random(seed, True, max_horizon=40)
        roster = [C(p) for p in (1, 2, 3, 4)]
        slots = sorted(rng.sample(range(2, inst.horizon + 1), min(3, inst.horizon - 1)))
        plan = [(s, rng.randrange(4)) for s in slots]
        w = run(compose_chain(roster, plan), inst).total
        edges = [1] + slots + [inst.horizon + 1]
        order = [0] + [i for _, i in plan]
        ref = sum(
            run(roster[i], inst).welfare.window_sum(lo, hi - 1)
            for i, lo, hi in zip(order, edges, edges[1:])
        )
        assert w >= ref - 2 * len(plan) * inst.v_max * inst.machines * inst.d_max


def test_chain_slots_must_increase():
    with pytest.raises(ValueError):
        compose_chain((C(1), C(2)), [(5, 1), (5, 0)])


def test_free_slots_zero_when_identical():
    inst = gen_random(7, True)
    a = run(C(1), inst).allocation
    assert audit_free_slots(a, a, 3, inst.d_max).total == 0


# ------------------------------------------------------------ non-clairvoyant


def nc(*jobs, T=20, d_max=3, l_max=3):
    return Instance(tuple(jobs), T, 1, 4, d_max, l_max, False)


def test_restart_shifts_window_arrivals():
    # w = l_max + d_max = 6; request at 5, job at 8 starts at 12
    inst = nc(Job(0, 8, 5, 1, 1), d_max=5, l_max=1)
    out = run(restart(N(1), 5), inst)
    assert out.allocation.times(0) == [12]


def test_restart_rejects_exhausted_budget():
    inst = nc(Job(0, 8, 1, 1, 1), d_max=5, l_max=1)  # latest start 9 < release 12
    out = run(restart(N(1), 5), inst)
    assert out.allocation.slots[0] == ()


def test_running_job_finishes_inside_window():
    inst = nc(Job(0, 4, 0, 3, 1))
    out = run(restart(N(1), 5), inst)
    assert out.allocation.times(0) == [4, 5, 6]


def test_zero_gamma_is_plain_mechanism():
    for seed in range(20):
        inst = gen_random(seed, False)
        plain = run(N(1), inst).allocation.slots
        assert run(with_random_restarts(N(1), RestartConfig(0.0, seed)), inst).allocation.slots == plain


def test_coin_flips_depend_only_on_seed():
    a = coin_flips(0.3, 9, 100)
    assert np.array_equal(a, coin_flips(0.3, 9, 100))
    assert not coin_flips(0.0, 9, 100).any()
    assert coin_flips(1.0, 9, 100).all()


def test_single_heads_at_one_releases_at_w_plus_two():
    class FirstSlotOnly(RestartDriver):
        def heads(self, t):
            return t == 1

    inst = nc(Job(0, 2, 6, 1, 1), T=20)
    out = run(FirstSlotOnly(N(1), restarts=RestartConfig(1.0, 0)), inst)
    assert out.allocation.times(0) == [inst.params.window + 2]
    assert [e for e in out.mechanism.events] == [(1, "restart")]


def test_request_during_window_extends_it():
    # w = 12: window [5, 17], a second request at 8 pushes release to 31
    inst = nc(Job(0, 28, 10, 1, 2), Job(1, 9, 10, 1, 2), T=40, d_max=10, l_max=2)
    out = run(RestartDriver(N(1), {5: N(1), 8: N(2)}), inst)
    assert [kind for _, kind in out.mechanism.events] == ["restart", "deferred"]
    assert out.allocation.times(0) == [31]
    assert out.allocation.slots[1] == ()  # latest start 19 < 31


def test_switch_same_mechanism_equals_restart():
    for seed in range(30):
        inst = gen_random(seed, False, max_horizon=30)
        a = run(switch_nonclairvoyant(N(2), N(2), 6), inst).allocation.slots
        assert a == run(restart(N(2), 6), inst).allocation.slots


def test_nc_switch_welfare_splits_at_release():
    rng = random.Random(5)
    for seed in range(150):
        inst = gen_random(seed, False, max_horizon=40, max_jobs=12)
        w = inst.params.window
        s = rng.randint(1, inst.horizon)
        A, B = N(rng.randint(0, 4)), N(rng.randint(0, 4))
        wc = run(switch_nonclairvoyant(A, B, s), inst).total
        wa = run(restart(A, s), inst).welfare
        wb = run(restart(B, s), inst).welfare
        assert wc == wa.window_sum(1, s + w) + wb.window_sum(s + w + 1, len(wb))


def test_state_match_after_window():
    rng = random.Random(6)
    for seed in range(60):
        inst = gen_random(seed, False, max_horizon=40, max_jobs=12)
        s = rng.randint(1, max(1, inst.horizon - inst.params.window))
        assert state_match(N(rng.randint(0, 4)), N(rng.randint(0, 4)), s, inst) == []
