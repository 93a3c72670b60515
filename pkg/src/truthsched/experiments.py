"""Regret experiments: one CSV row per (T, seed), plus a log-log slope fit."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from truthsched.combiners import (
    CombinerConfig,
    default_gamma,
    fts_run,
    ftbs_run,
    restart_benchmark,
)
from truthsched.core import Instance, total_welfare
from truthsched.instances import (
    StochasticSpec,
    gen_clairvoyant_lb,
    gen_stochastic,
)
from truthsched.mechanisms import MechanismSpec, parse_mechanism, run

# Named i.i.d. streams.  "nc-gap" has a clear best price among {1, 4}.
STOCHASTIC_PRESETS = {
    "nc-gap": dict(
        rate=0.5, values={1: 0.8, 4: 0.2}, lengths={1: 0.5, 3: 0.5}, slack={0: 0.5, 1: 0.5}
    ),
    "nc-congested": dict(
        rate=0.9, values={1: 0.7, 4: 0.3}, lengths={2: 0.5, 4: 0.5}, slack={0: 0.5, 2: 0.5}
    ),
    "c-mixed": dict(
        rate=0.8,
        values={1: 0.5, 2: 0.3, 4: 0.2},
        lengths={1: 0.5, 2: 0.5},
        slack={0: 0.5, 2: 0.5},
        clairvoyant=True,
    ),
}


def make_instance(generator: str, T: int, seed: int) -> Instance:
    """``clb`` (T counts rounds) or ``stoch:<preset>`` (T is the horizon)."""
    if generator == "clb":
        return gen_clairvoyant_lb(T, seed)
    kind, _, preset = generator.partition(":")
    if kind == "stoch":
        if preset not in STOCHASTIC_PRESETS:
            raise ValueError(f"unknown stochastic preset {preset!r}")
        return gen_stochastic(StochasticSpec(T, **STOCHASTIC_PRESETS[preset]), seed)
    raise ValueError(f"unknown generator {generator!r}")


@dataclass(frozen=True)
class RegretConfig:
    combiner: str  # "fts" or "ftbs"
    roster: tuple[MechanismSpec, ...]
    generator: str
    horizons: tuple[int, ...]
    seeds: tuple[int, ...]
    gamma: float | None = None  # None: default formula (FTBS only)
    bench_samples: int = 2

    def __post_init__(self):
        if self.combiner not in ("fts", "ftbs"):
            raise ValueError("combiner must be fts or ftbs")
        if not self.roster:
            raise ValueError("empty roster")
        if not self.seeds or not self.horizons:
            raise ValueError("need at least one seed and one T")


COLUMNS = ("T", "seed", "gamma", "combiner_welfare", "best", "regret")


def regret_row(cfg: RegretConfig, T: int, seed: int) -> dict:
    clair = cfg.combiner == "fts"
    roster = tuple(
        MechanismSpec(m.kind, m.price, clair) if m.clairvoyant != clair else m for m in cfg.roster
    )
    inst = make_instance(cfg.generator, T, seed)
    if inst.clairvoyant != clair:
        raise ValueError(f"generator {cfg.generator!r} does not suit {cfg.combiner}")
    row: dict = {"T": T, "seed": seed}
    if clair:
        alloc, log = fts_run(CombinerConfig(roster, seed=seed), inst)
        members = [sum(w, 0) for w in log.member_welfare]
        row["gamma"] = ""
        row["combiner_welfare"] = total_welfare(alloc, inst)
        for m, w in zip(roster, members):
            row[f"W[{m.name}]"] = w
        best = max(members)
    else:
        gamma = cfg.gamma
        if gamma is None:
            gamma = default_gamma(inst.params.window, inst.horizon, len(roster))
        alloc, _ = ftbs_run(CombinerConfig(roster, gamma=gamma, seed=seed), inst)
        bench = restart_benchmark(roster, gamma, inst, cfg.bench_samples, seed + 2**32)
        row["gamma"] = gamma
        row["combiner_welfare"] = total_welfare(alloc, inst)
        for m, w in zip(roster, bench.means):
            row[f"bar W[{m.name}]"] = w
        best = bench.best
    row["best"] = best
    row["regret"] = best - row["combiner_welfare"]
    return row


def regret_rows(cfg: RegretConfig) -> list[dict]:
    return [regret_row(cfg, T, s) for T in cfg.horizons for s in cfg.seeds]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(round(x, 9))
    return str(x)


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    fields = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in sorted(rows, key=lambda r: (r["T"], r["seed"])):
        w.writerow([_fmt(r[f]) for f in fields])
    return buf.getvalue()


def mean_regret(rows: Sequence[dict]) -> dict[int, float]:
    out: dict[int, list[float]] = {}
    for r in rows:
        out.setdefault(r["T"], []).append(float(r["regret"]))
    return {T: float(np.mean(v)) for T, v in sorted(out.items())}


def loglog_slope(horizons: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(T); needs positive values."""
    if any(v <= 0 for v in values):
        return math.nan
    slope, _ = np.polyfit(np.log(horizons), np.log(values), 1)
    return float(slope)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"1..50"``, ``"3"`` or ``"1,4,9"`` (ranges inclusive, may be mixed)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty seed range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("no seeds given")
    return tuple(out)


def standalone_welfare(descriptor: str, inst: Instance, start: int = 1):
    return run(parse_mechanism(descriptor, inst.clairvoyant), inst, start=start).total
