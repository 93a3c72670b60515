"""Online learners used by the combiners.

* :class:`LazyFPL` - full-information experts with switching cost: follow the
  perturbed leader with a single exponential perturbation per expert, drawn
  once, so the choice only moves when the perturbed leader changes.
* :class:`Exp3` - adversarial bandit, exponential weights over importance
  weighted rewards, weights kept in log domain.
* :class:`Doubling` - wraps either learner when the reward range and horizon
  are unknown: guesses start at 1 and double, restarting the inner learner.
"""

from __future__ import annotations

import math
from functools import partial
from typing import Callable, Sequence

import numpy as np


class RewardRangeError(ValueError):
    """A reward fell outside ``[0, R]``."""

    def __init__(self, reward: float, bound: float):
        self.reward = reward
        self.bound = bound
        super().__init__(f"reward {reward} outside [0, {bound}]")


def fpl_rate(n: int, horizon: int, reward_bound: float, switch_cost: float) -> float:
    if n <= 1:
        return 1.0
    eps = math.sqrt(math.log(n) / (max(horizon, 1) * (reward_bound + switch_cost)))
    return min(1.0, eps)


def exp3_rate(n: int, horizon: int) -> float:
    if n <= 1:
        return 1.0
    return min(1.0, math.sqrt(n * math.log(n) / ((math.e - 1) * max(horizon, 1))))


class LazyFPL:
    def __init__(
        self,
        n: int,
        reward_bound: float,
        switch_cost: float,
        horizon: int,
        seed=None,
        eps: float | None = None,
    ):
        if n < 1:
            raise ValueError("need at least one expert")
        self.n = n
        self.reward_bound = float(reward_bound)
        self.switch_cost = float(switch_cost)
        self.horizon = horizon
        self.eps = fpl_rate(n, horizon, reward_bound, switch_cost) if eps is None else eps
        rng = np.random.default_rng(seed)
        # plain lists: n is small and this runs once per slot
        self.perturbation = [float(x) for x in rng.exponential(1.0 / self.eps, n)]
        self.cumulative = [0.0] * n
        self.choice = self._leader()
        self.switches = 0

    def _leader(self) -> int:
        score = [c + p for c, p in zip(self.cumulative, self.perturbation)]
        return score.index(max(score))

    def choose(self) -> int:
        return self.choice

    def feed(self, rewards: Sequence[float]) -> None:
        if len(rewards) != self.n:
            raise ValueError(f"expected {self.n} rewards")
        for r in rewards:
            if not 0 <= r <= self.reward_bound:
                raise RewardRangeError(float(r), self.reward_bound)
        self.cumulative = [c + r for c, r in zip(self.cumulative, rewards)]
        new = self._leader()
        if new != self.choice:
            self.switches += 1
            self.choice = new


class Exp3:
    def __init__(
        self,
        n: int,
        reward_bound: float,
        horizon: int,
        seed=None,
        exploration: float | None = None,
    ):
        if n < 1:
            raise ValueError("need at least one arm")
        self.n = n
        self.reward_bound = float(reward_bound)
        self.horizon = horizon
        self.exploration = exp3_rate(n, horizon) if exploration is None else exploration
        self.rate = self.exploration / n
        self.log_weights = np.zeros(n)
        self.rng = np.random.default_rng(seed)
        self.arm: int | None = None

    def probabilities(self) -> np.ndarray:
        z = self.log_weights - self.log_weights.max()
        w = np.exp(z)
        return (1.0 - self.exploration) * w / w.sum() + self.exploration / self.n

    def choose(self) -> int:
        p = self.probabilities()
        self.arm = int(min(np.searchsorted(np.cumsum(p), self.rng.random(), side="right"), self.n - 1))
        return self.arm

    def feed(self, arm: int, reward: float) -> None:
        reward = float(reward)
        if not 0 <= reward <= self.reward_bound:
            raise RewardRangeError(reward, self.reward_bound)
        p = self.probabilities()[arm]
        self.log_weights[arm] += self.rate * (reward / self.reward_bound) / p


class Doubling:
    """Unknown ``R`` and ``T``: start both guesses at 1 and double.

    ``factory(R, T, seed)`` builds the inner learner.  An out-of-range reward
    doubles ``R`` until it fits (possibly several times at once), restarts
    the inner learner and is otherwise discarded.  After ``T`` rounds on the
    current guess ``T`` doubles and the learner restarts.
    """

    def __init__(self, factory: Callable, seed=None, bandit: bool = True):
        self.factory = factory
        self.bandit = bandit
        self.reward_bound = 1.0
        self.horizon = 1
        self.rounds = 0
        self.range_doublings = 0
        self.horizon_doublings = 0
        self._seeds = np.random.default_rng(seed)
        self._restart()

    def _restart(self) -> None:
        seed = int(self._seeds.integers(2**63))
        self.inner = self.factory(self.reward_bound, self.horizon, seed)
        self.rounds = 0

    @property
    def n(self) -> int:
        return self.inner.n

    def choose(self) -> int:
        return self.inner.choose()

    def feed(self, *args) -> None:
        rewards = [float(args[-1])] if self.bandit else [float(r) for r in args[-1]]
        if min(rewards) < 0:
            raise RewardRangeError(min(rewards), self.reward_bound)
        reward = max(rewards)
        if reward > self.reward_bound:
            while reward > self.reward_bound:
                self.reward_bound *= 2
                self.range_doublings += 1
            self._restart()
            return
        self.inner.feed(*args)
        self.rounds += 1
        if self.rounds >= self.horizon:
            self.horizon *= 2
            self.horizon_doublings += 1
            self._restart()


def _exp3(n, R, T, seed):
    return Exp3(n, R, T, seed=seed)


def _fpl(n, cost_per_unit, R, T, seed):
    return LazyFPL(n, R, cost_per_unit * R, T, seed=seed)


def exp3_doubling(n: int, seed=None) -> Doubling:
    return Doubling(partial(_exp3, n), seed=seed, bandit=True)


def fpl_doubling(n: int, switch_cost_per_unit: float = 0.0, seed=None) -> Doubling:
    """Experts learner with unknown range; the switching cost scales with
    the current range guess."""
    return Doubling(partial(_fpl, n, switch_cost_per_unit), seed=seed, bandit=False)


def harmonic(k: int) -> float:
    return float(sum(1.0 / i for i in range(1, k + 1)))


def geometric_max_check(
    k: int, gamma: float, samples: int, seed=0, chunk: int = 10_000
) -> tuple[float, float, float]:
    """Monte Carlo mean of the max of ``k`` i.i.d. Geometric(gamma) draws
    (support 1, 2, ...), its standard error, and the bound ``H_k / gamma``."""
    if k < 1 or samples < 1 or not 0 < gamma <= 1:
        raise ValueError("need k >= 1, samples >= 1 and gamma in (0, 1]")
    rng = np.random.default_rng(seed)
    maxima = np.empty(samples)
    for lo in range(0, samples, chunk):
        hi = min(samples, lo + chunk)
        maxima[lo:hi] = rng.geometric(gamma, size=(hi - lo, k)).max(axis=1)
    se = float(maxima.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(maxima.mean()), se, harmonic(k) / gamma
