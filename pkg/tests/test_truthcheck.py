import json
from fractions import Fraction

from truthsched.combiners import FollowTheBanditSwitcher
from truthsched.core import Instance, Job
from truthsched.experiments import make_instance
from truthsched.instances import gen_random
from truthsched.mechanisms import ppf_clairvoyant as C, ppf_nonclairvoyant as N
from truthsched.switching import RestartDriver, compose_chain, switch_clairvoyant
from truthsched.truthcheck import (
    MisreportGrid,
    PayYourBid,
    ReportSeededCoins,
    SurgePricing,
    check_order_respecting,
    check_restart_report_independence,
    check_truthful,
    replay,
)


def test_ppf_clairvoyant_is_truthful():
    for seed in range(50):
        inst = gen_random(seed, True)
        assert check_truthful(lambda s: C(1), inst).violations == []


def test_switch_at_eight_is_truthful():
    for seed in range(30):
        inst = gen_random(seed, True)
        rep = check_truthful(lambda s: switch_clairvoyant(C(1), C(2), 8), inst)
        assert rep.violations == []


def test_chain_is_truthful():
    for seed in range(15):
        inst = gen_random(seed, True)
        make = lambda s: compose_chain((C(1), C(3), C(0)), [(4, 1), (9, 2)])
        assert check_truthful(make, inst).violations == []


def test_pay_your_bid_caught_on_two_jobs():
    inst = Instance((Job(0, 1, 1, 1, 3), Job(1, 2, 2, 1, 2)), 3, 1, 4, 2, 1)
    rep = check_truthful(lambda s: PayYourBid(1), inst)
    assert rep.violations
    assert any(v.report.value < v.truth.value for v in rep.violations)


def test_violations_replay_exactly():
    inst = Instance((Job(0, 1, 2, 1, 4), Job(1, 1, 2, 2, 3)), 4, 1, 4, 2, 2)
    rep = check_truthful(lambda s: PayYourBid(1), inst)
    assert rep.violations
    for v in rep.violations:
        assert replay(v, lambda s: PayYourBid(1)) == (v.utility_truth, v.utility_lie)


def test_grid_never_reports_earlier_arrivals():
    grid = MisreportGrid()
    for seed in range(20):
        for clair in (True, False):
            inst = gen_random(seed, clair)
            for job in inst.jobs:
                for lie in grid.reports(inst, job):
                    assert job.arrival <= lie.arrival <= inst.horizon
                    assert lie.value <= inst.v_max
                    if clair:
                        assert lie.arrival <= lie.deadline <= lie.arrival + inst.d_max - 1
                        assert lie.length <= lie.deadline - lie.arrival + 1
                    else:
                        assert lie.length == job.length
                        assert 0 <= lie.deadline <= inst.d_max


def test_grid_values_are_exact():
    inst = Instance((), 5, 1, 3, 2, 1)
    assert MisreportGrid(value_levels=4).values(inst) == [0, 1, 2, 3]
    assert Fraction(3, 4) in MisreportGrid(value_levels=5).values(inst)


def test_budget_sets_partial_flag():
    inst = gen_random(4, True, max_jobs=6)
    rep = check_truthful(lambda s: C(1), inst, budget=5)
    assert rep.partial and rep.reruns == 5
    assert not check_truthful(lambda s: C(1), inst).partial


def test_nc_ppf_order_respecting():
    for seed in range(40):
        inst = gen_random(seed, False, max_jobs=8)
        assert check_order_respecting(lambda s: N(1), inst).violations == []


def test_fixed_restarts_order_respecting_and_truthful():
    for seed in range(30):
        inst = gen_random(seed, False, max_jobs=8)
        make = lambda s: RestartDriver(N(1), {3: N(1), 9: N(2)})
        assert check_order_respecting(make, inst).violations == []
        assert check_truthful(make, inst).violations == []


def test_surge_pricing_caught():
    inst = Instance((Job(0, 1, 0, 3, 2), Job(1, 2, 0, 1, 2)), 6, 1, 2, 1, 3, False)
    rep = check_order_respecting(lambda s: SurgePricing(1), inst)
    assert rep.violations and rep.violations[0].job_id == 0


def test_ftbs_coins_ignore_reports():
    inst = make_instance("stoch:nc-gap", 80, 2)
    make = lambda s: FollowTheBanditSwitcher((N(1), N(2)), gamma=0.3, seed=s)
    zeroed = inst.with_jobs(tuple(j.replace(value=0) for j in inst.jobs))
    assert check_restart_report_independence(make, inst, zeroed, 5)
    lie = inst.jobs[0].replace(value=inst.v_max, deadline=0)
    assert check_restart_report_independence(make, inst, inst.with_job(lie), 5)


def test_report_seeded_coins_caught():
    inst = make_instance("stoch:nc-gap", 80, 2)
    make = lambda s: ReportSeededCoins((N(1), N(2)), gamma=0.3, seed=s)
    zeroed = inst.with_jobs(tuple(j.replace(value=0) for j in inst.jobs))
    assert not check_restart_report_independence(make, inst, zeroed, 5)


def test_report_lines_are_json():
    inst = Instance((Job(0, 1, 1, 1, 3), Job(1, 2, 2, 1, 2)), 3, 1, 4, 2, 1)
    rep = check_truthful(lambda s: PayYourBid(1), inst)
    recs = [json.loads(line) for line in rep.lines()]
    assert recs and all(r["job"] in (0, 1) for r in recs)
