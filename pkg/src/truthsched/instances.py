"""Instance generators and the line-delimited instance file format.

File format: the first line is a JSON header with ``T``, ``m``, ``v_max``,
``d_max``, ``l_max`` and ``setting`` (``"clairvoyant"`` or
``"nonclairvoyant"``); every further non-blank line is one job
``{"id", "a", "d", "l", "v"}``.  Non-integral values are written as
``"p/q"`` strings so files round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from truthsched.core import Instance, Job, Value, as_value, validate_instance


class InstanceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InstanceValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


# ------------------------------------------------------------------ file I/O


def _dump_value(v: Value):
    return v if isinstance(v, int) else f"{v.numerator}/{v.denominator}"


def instance_lines(inst: Instance) -> list[str]:
    header = {
        "T": inst.horizon,
        "m": inst.machines,
        "v_max": _dump_value(inst.v_max),
        "d_max": inst.d_max,
        "l_max": inst.l_max,
        "setting": "clairvoyant" if inst.clairvoyant else "nonclairvoyant",
    }
    out = [json.dumps(header)]
    for j in inst.jobs:
        out.append(
            json.dumps(
                {"id": j.id, "a": j.arrival, "d": j.deadline, "l": j.length, "v": _dump_value(j.value)}
            )
        )
    return out


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text("\n".join(instance_lines(inst)) + "\n")


def parse_instance(text: str) -> Instance:
    header = None
    jobs = []
    for n, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(n, f"not JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise InstanceFormatError(n, "expected a JSON object")
        try:
            if header is None:
                if "id" in rec:
                    raise InstanceFormatError(n, "job before header")
                setting = rec.get("setting", "clairvoyant")
                if setting not in ("clairvoyant", "nonclairvoyant"):
                    raise InstanceFormatError(n, f"unknown setting {setting!r}")
                header = dict(
                    horizon=_int(rec["T"]),
                    machines=_int(rec["m"]),
                    v_max=as_value(rec["v_max"]),
                    d_max=_int(rec["d_max"]),
                    l_max=_int(rec["l_max"]),
                    clairvoyant=setting == "clairvoyant",
                )
            else:
                jobs.append(
                    Job(
                        _int(rec["id"]),
                        _int(rec["a"]),
                        _int(rec["d"]),
                        _int(rec["l"]),
                        as_value(rec["v"]),
                    )
                )
        except KeyError as exc:
            raise InstanceFormatError(n, f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, InstanceFormatError):
                raise
            raise InstanceFormatError(n, f"bad field value ({exc})") from None
    if header is None:
        raise InstanceFormatError(0, "missing header")
    inst = Instance(tuple(jobs), **header)
    problems = validate_instance(inst)
    if problems:
        raise InstanceValidationError(problems)
    return inst


def _int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise TypeError(f"expected an integer, got {x!r}")
    return x


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())


# ------------------------------------------------------------ lower bounds


def gen_clairvoyant_lb(rounds: int, seed) -> Instance:
    """Two slots per round on one machine.

    Round ``i`` starts at ``t = 2i + 1`` with a value-1 job that must run at
    ``t`` and a value-2 job that may run at ``t`` or ``t + 1``; with
    probability 1/2 a second value-2 job arrives at ``t + 1`` and must run
    then.  Price 1 earns 3 every round, price 2 earns 2 plus 2 on heads.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    heads = np.random.default_rng(seed).random(rounds) < 0.5
    return clairvoyant_lb_instance(heads)


def clairvoyant_lb_instance(heads: Sequence[bool]) -> Instance:
    jobs = []
    for i, h in enumerate(heads):
        t = 2 * i + 1
        jobs.append(Job(3 * i, t, t, 1, 1))
        jobs.append(Job(3 * i + 1, t, t + 1, 1, 2))
        if h:
            jobs.append(Job(3 * i + 2, t + 1, t + 1, 1, 2))
    return Instance(tuple(jobs), 2 * len(heads), 1, 2, 2, 1, True)


@dataclass(frozen=True)
class LossSequence:
    """Per-round losses of the two actions, each in ``[0, 1]``."""

    pairs: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        pairs = tuple((Fraction(a), Fraction(b)) for a, b in self.pairs)
        for a, b in pairs:
            if not (0 <= a <= 1 and 0 <= b <= 1):
                raise ValueError("losses must lie in [0, 1]")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def constant(cls, first, second, rounds: int) -> "LossSequence":
        return cls(((first, second),) * rounds)

    @classmethod
    def parse(cls, text: str) -> "LossSequence":
        pairs = []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InstanceFormatError(n, "expected two losses per line")
            try:
                pairs.append((Fraction(parts[0]), Fraction(parts[1])))
            except (ValueError, ZeroDivisionError):
                raise InstanceFormatError(n, "bad loss value") from None
        return cls(tuple(pairs))

    @classmethod
    def read(cls, path) -> "LossSequence":
        return cls.parse(Path(path).read_text())


NC_LB_ROUND = 8


def nc_lb_long_first_prob(loss: Fraction) -> Fraction:
    """Probability that a round's value-1 job has length 8 (else 6)."""
    return Fraction(1, 2) + Fraction(loss) / 2


def gen_nc_lb(losses: LossSequence, seed) -> Instance:
    """Non-clairvoyant lower-bound stream, eight slots per round, one machine.

    Round ``i`` covers slots ``8i + 1 .. 8i + 8``.  A value-1 job arrives at
    the first slot (length 8 with probability ``1/2 + loss1/2``, else 6), a
    value-2 job at the sixth (length 4 with probability ``loss2``, else 2)
    and value-3 jobs of length 2 at the seventh and eighth.  Nobody waits.
    """
    rng = np.random.default_rng(seed)
    long1, long3 = [], []
    for l1, l2 in losses.pairs:
        u1, u3 = rng.random(2)
        long1.append(u1 < float(nc_lb_long_first_prob(l1)))
        long3.append(u3 < float(l2))
    return nc_lb_instance(long1, long3)


def nc_lb_instance(long_first: Sequence[bool], long_third: Sequence[bool]) -> Instance:
    """Lower-bound stream with the length coins fixed explicitly."""
    if len(long_first) != len(long_third):
        raise ValueError("one coin pair per round")
    jobs = []
    for i, (a, b) in enumerate(zip(long_first, long_third)):
        t = NC_LB_ROUND * i + 1
        k = 4 * i
        jobs.append(Job(k, t, 0, 8 if a else 6, 1))
        jobs.append(Job(k + 1, t + 5, 0, 4 if b else 2, 2))
        jobs.append(Job(k + 2, t + 6, 0, 2, 3))
        jobs.append(Job(k + 3, t + 7, 0, 2, 3))
    return Instance(tuple(jobs), NC_LB_ROUND * len(long_first), 1, 3, 0, 8, False)


def nc_lb_round_values(inst: Instance, served) -> list[Value]:
    """Welfare of each round's four jobs (ids ``4i .. 4i + 3``)."""
    out = [0] * (len(inst.jobs) // 4)
    for j in inst.jobs:
        if j.id in served:
            out[j.id // 4] += j.value * j.length
    return out


def nc_lb_forfeit(inst: Instance, served_switch, served_low, served_high, round_: int) -> Value:
    """Value the switching run fails to collect from the jobs the reference
    serves, where the reference follows price 2 through ``round_`` and
    price 1 after it.  ``served_low``/``served_high`` are the served sets of
    the price-1 and price-2 runs."""
    ref = {j for j in served_high if j // 4 <= round_}
    ref |= {j for j in served_low if j // 4 > round_}
    return sum(
        (inst.job(j).value * inst.job(j).length for j in ref - set(served_switch)), 0
    )


# ---------------------------------------------------------------- examples


def gen_syncing_example(horizon: int) -> Instance:
    """Three value-1 jobs with no slack: (a, l) = (1, 3), (3, 3), (4, T - 4).

    Price-1 FIFO from slot 1 collects ``T - 1``; started at slot 2 it only
    collects 3.
    """
    if horizon < 5:
        raise ValueError("horizon must be at least 5")
    spec = [(1, 3), (3, 3), (4, horizon - 4)]
    jobs = tuple(Job(i, a, a + n - 1, n, 1) for i, (a, n) in enumerate(spec))
    longest = max(3, horizon - 4)
    return Instance(jobs, horizon, 1, 1, longest, longest, True)


@dataclass(frozen=True)
class StochasticSpec:
    """i.i.d. stream: Poisson arrivals per slot, discrete type distributions.

    ``slack`` is the extra window beyond the length (clairvoyant) or the wait
    budget (non-clairvoyant).
    """

    horizon: int
    rate: float
    values: dict = field(default_factory=lambda: {1: 0.5, 2: 0.5})
    lengths: dict = field(default_factory=lambda: {1: 1.0})
    slack: dict = field(default_factory=lambda: {0: 1.0})
    machines: int = 1
    clairvoyant: bool = False

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        for name in ("values", "lengths", "slack"):
            dist = getattr(self, name)
            if not dist or abs(sum(dist.values()) - 1.0) > 1e-9:
                raise ValueError(f"{name} distribution must sum to 1")
            if any(p < 0 for p in dist.values()):
                raise ValueError(f"{name} distribution has a negative weight")
        if min(self.lengths) < 1 or min(self.slack) < 0:
            raise ValueError("lengths must be >= 1 and slack >= 0")

    @property
    def v_max(self) -> Value:
        return max(as_value(v) for v in self.values)

    @property
    def l_max(self) -> int:
        return max(self.lengths)

    @property
    def d_max(self) -> int:
        if self.clairvoyant:
            return self.l_max + max(self.slack)
        return max(self.slack)


def gen_stochastic(spec: StochasticSpec, seed) -> Instance:
    rng = np.random.default_rng(seed)
    counts = rng.poisson(spec.rate, spec.horizon) if spec.rate > 0 else np.zeros(spec.horizon, int)
    n = int(counts.sum())

    def draw(dist):
        keys = list(dist)
        idx = rng.choice(len(keys), size=n, p=np.array([dist[k] for k in keys], float))
        return [keys[i] for i in idx]

    values = [as_value(v) for v in draw(spec.values)] if n else []
    lengths = draw(spec.lengths) if n else []
    slack = draw(spec.slack) if n else []
    arrivals = np.repeat(np.arange(1, spec.horizon + 1), counts)
    jobs = []
    for k in range(n):
        a = int(arrivals[k])
        ln = int(lengths[k])
        if spec.clairvoyant:
            d = min(a + ln - 1 + int(slack[k]), spec.horizon)
            if d - a + 1 < ln:
                continue  # cannot fit before the horizon
        else:
            d = int(slack[k])
        jobs.append(Job(k, a, d, ln, values[k]))
    return Instance(
        tuple(jobs), spec.horizon, spec.machines, spec.v_max, spec.d_max, spec.l_max, spec.clairvoyant
    )


def gen_random(
    seed,
    clairvoyant: bool = True,
    max_horizon: int = 20,
    max_machines: int = 2,
    max_jobs: int = 6,
    v_max: int = 4,
    max_d: int = 5,
) -> Instance:
    """Small random instance for exhaustive checks."""
    rng = np.random.default_rng(seed)
    T = int(rng.integers(3, max_horizon + 1))
    m = int(rng.integers(1, max_machines + 1))
    d_max = int(rng.integers(1, max_d + 1))
    l_max = int(rng.integers(1, d_max + 1)) if clairvoyant else int(rng.integers(1, 4))
    jobs = []
    for i in range(int(rng.integers(1, max_jobs + 1))):
        a = int(rng.integers(1, T + 1))
        v = int(rng.integers(0, v_max + 1))
        if clairvoyant:
            d = min(T, a + int(rng.integers(0, d_max)))
            ln = int(rng.integers(1, min(l_max, d - a + 1) + 1))
        else:
            d = int(rng.integers(0, d_max + 1))
            ln = int(rng.integers(1, l_max + 1))
        jobs.append(Job(i, a, d, ln, v))
    return Instance(tuple(jobs), T, m, v_max, d_max, l_max, clairvoyant)
