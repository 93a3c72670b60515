"""Command-line front end: ``truthsched {gen,run,regret,truthcheck,lb-verify}``.

Exit codes: 0 clean, 1 violations or failed checks, 2 usage or I/O errors.
Relative output paths are resolved against ``$TRUTHSCHED_OUT`` when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from truthsched.combiners import FollowTheBanditSwitcher, FollowTheSwitcher
from truthsched.core import Instance, served_jobs
from truthsched.experiments import (
    STOCHASTIC_PRESETS,
    RegretConfig,
    loglog_slope,
    make_instance,
    mean_regret,
    parse_seeds,
    regret_row,
    rows_to_csv,
)
from truthsched.instances import (
    InstanceFormatError,
    InstanceValidationError,
    LossSequence,
    gen_nc_lb,
    gen_random,
    gen_syncing_example,
    instance_lines,
    read_instance,
)
from truthsched.mechanisms import parse_mechanism, parse_roster, run

OUT_ENV = "TRUTHSCHED_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def output_path(path: str | None) -> Path | None:
    """``None`` or ``-`` means stdout."""
    if path is None or path == "-":
        return None
    p = Path(path)
    if not p.is_absolute() and os.environ.get(OUT_ENV):
        p = Path(os.environ[OUT_ENV]) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def emit(text: str, path: str | None) -> None:
    p = output_path(path)
    if p is None:
        sys.stdout.write(text)
    else:
        p.write_text(text)


def parse_horizons(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad T list {text!r}") from None
    if not out or min(out) < 1:
        raise UsageError("T list must hold positive integers")
    return out


def parse_gamma(text: str | None) -> float | None:
    if text is None or text == "auto":
        return None
    try:
        g = float(text)
    except ValueError:
        raise UsageError(f"bad gamma {text!r}") from None
    if not 0 <= g <= 1:
        raise UsageError("gamma must lie in [0, 1]")
    return g


def load_instance(source: str) -> Instance:
    """A file path, ``syncing[:T]``, ``clb:ROUNDS[:SEED]`` or
    ``stoch:PRESET:T[:SEED]``."""
    if Path(source).is_file():
        return read_instance(source)
    head, *rest = source.split(":")
    try:
        if head == "syncing":
            return gen_syncing_example(int(rest[0]) if rest else 10)
        if head == "clb" and rest:
            return make_instance("clb", int(rest[0]), int(rest[1]) if len(rest) > 1 else 0)
        if head == "stoch" and len(rest) >= 2:
            seed = int(rest[2]) if len(rest) > 2 else 0
            return make_instance(f"stoch:{rest[0]}", int(rest[1]), seed)
    except ValueError as exc:
        raise UsageError(f"bad instance source {source!r}: {exc}") from None
    raise UsageError(f"no such instance file or generator: {source!r}")


def mechanism_maker(args, clairvoyant: bool | None) -> tuple[str, Callable[[int], object], bool]:
    """(name, seed -> mechanism, clairvoyant) from ``--mech`` or ``--combiner``."""
    from truthsched import truthcheck as tc

    if getattr(args, "combiner", None):
        if not args.roster:
            raise UsageError("--combiner needs --roster")
        clair = args.combiner == "fts"
        roster = tuple(parse_roster(args.roster, clair))
        if args.combiner == "fts":
            return FollowTheSwitcher(roster).name, lambda s: FollowTheSwitcher(roster, seed=s), True
        gamma = parse_gamma(getattr(args, "gamma", None))
        name = FollowTheBanditSwitcher(roster).name
        return name, lambda s: FollowTheBanditSwitcher(roster, gamma, seed=s), False
    if not args.mech:
        raise UsageError("need --mech or --combiner")
    desc = args.mech
    if desc.startswith("broken:"):
        parts = desc.split(":")
        if len(parts) != 3 or parts[1] not in ("pay", "reprice"):
            raise UsageError("broken controls: broken:pay:PRICE or broken:reprice:PRICE")
        price = parse_mechanism(f"ppf:{parts[2]}").price
        if parts[1] == "pay":
            return desc, lambda s: tc.PayYourBid(price), True
        return desc, lambda s: tc.SurgePricing(price), False
    spec = parse_mechanism(desc, clairvoyant)
    return spec.name, lambda s: spec, spec.clairvoyant


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "nclb":
        if not args.losses:
            raise UsageError("gen --kind nclb needs --losses FILE")
        inst = gen_nc_lb(LossSequence.read(args.losses), args.seed)
    elif kind == "clb":
        inst = make_instance("clb", args.rounds, args.seed)
    elif kind == "syncing":
        inst = gen_syncing_example(args.T or 10)
    elif kind == "stoch":
        if args.preset not in STOCHASTIC_PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; have {sorted(STOCHASTIC_PRESETS)}")
        inst = make_instance(f"stoch:{args.preset}", args.T or 1000, args.seed)
    else:  # random
        inst = gen_random(args.seed, clairvoyant=args.setting == "c")
    emit("\n".join(instance_lines(inst)) + "\n", args.output)
    return EXIT_OK


def cmd_run(args) -> int:
    inst = load_instance(args.instance)
    name, make, clair = mechanism_maker(args, inst.clairvoyant)
    if clair != inst.clairvoyant:
        raise UsageError(f"{name} does not match the instance setting")
    out = run(make(args.seed), inst, start=args.start)
    served = served_jobs(out.allocation, inst)
    lines = [
        f"mechanism {name}",
        f"welfare {out.total}",
        f"served {len(served)}/{len(inst.jobs)}",
        f"payments {sum(out.allocation.payments.values(), 0)}",
    ]
    emit("\n".join(lines) + "\n", args.output)
    if args.log:
        finish = getattr(out.mechanism, "finish_log", None)
        if finish is None:
            raise UsageError("--log needs --combiner")
        finish().write_jsonl(output_path(args.log))
    return EXIT_OK


def _regret_cell(job):
    cfg, T, seed = job
    return regret_row(cfg, T, seed)


def cmd_regret(args) -> int:
    try:
        roster = tuple(parse_roster(args.roster, args.combiner == "fts"))
        cfg = RegretConfig(
            args.combiner,
            roster,
            args.gen,
            parse_horizons(args.T),
            parse_seeds(args.seeds),
            parse_gamma(args.gamma),
            args.samples,
        )
        make_instance(args.gen, min(cfg.horizons), cfg.seeds[0])  # validate early
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cells = [(cfg, T, s) for T in cfg.horizons for s in cfg.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_regret_cell, cells))
    else:
        rows = [_regret_cell(c) for c in cells]
    emit(rows_to_csv(rows), args.output)
    means = mean_regret(rows)
    for T, m in means.items():
        print(f"T={T} mean_regret={m:.6g}", file=sys.stderr)
    if len(means) > 1:
        print(f"loglog_slope={loglog_slope(list(means), list(means.values())):.4f}", file=sys.stderr)
    if args.figure:
        from truthsched.plotting import regret_figure

        regret_figure(rows, output_path(args.figure), f"{args.combiner} on {args.gen}")
    return EXIT_OK


def corpus(source: str, clairvoyant: bool) -> list[Instance]:
    if source == "small":
        base = 0 if clairvoyant else 1000
        return [gen_random(base + s, clairvoyant) for s in range(50)]
    p = Path(source)
    if p.is_dir():
        return [read_instance(f) for f in sorted(p.glob("*.jsonl"))]
    if p.is_file():
        return [read_instance(p)]
    raise UsageError(f"no such corpus: {source!r}")


def cmd_truthcheck(args) -> int:
    from truthsched import truthcheck as tc

    name, make, clair = mechanism_maker(args, None)
    insts = corpus(args.corpus, clair)
    if any(i.clairvoyant != clair for i in insts):
        raise UsageError(f"{name} does not match the corpus setting")
    seeds = parse_seeds(args.seeds)
    grid = tc.MisreportGrid(value_levels=args.value_levels)
    budget = int(float(args.budget))
    report = tc.CheckReport()
    coin_mismatch = 0
    for inst in insts:
        report.extend(tc.check_truthful(make, inst, grid, seeds, budget - report.reruns))
        report.extend(tc.check_order_respecting(make, inst, seeds, budget - report.reruns))
        if args.combiner == "ftbs":
            zeroed = inst.with_jobs(j.replace(value=0) for j in inst.jobs)
            coin_mismatch += sum(
                not tc.check_restart_report_independence(make, inst, zeroed, s) for s in seeds
            )
        if report.partial:
            break
    lines = report.lines()
    if args.output:
        emit("".join(x + "\n" for x in lines), args.output)
    else:
        for x in lines:
            print(x)
    print(f"{len(report.violations)} violations ({report.reruns} reruns, {len(insts)} instances)")
    if args.combiner == "ftbs":
        print(f"{coin_mismatch} coin sequence mismatches")
    if report.partial:
        print("partial: budget exhausted")
    return EXIT_FAIL if report.violations or coin_mismatch else EXIT_OK


def cmd_lb_verify(args) -> int:
    from truthsched import lowerbounds as lb

    ok = True
    out = []
    if args.kind in ("nclb", "all"):
        out.append("check,loss_first,loss_third,price,expected,claimed,ok")
        for r in lb.round_value_rows():
            out.append(f"round_value,{r.loss_first},{r.loss_third},{r.price},{r.expected},{r.claimed},{r.ok}")
            ok &= r.ok
        worst = min(f for _, _, f in lb.switch_forfeits())
        out.append(f"switch_forfeit_min,,,,{worst},6,{worst >= 6}")
        ok &= worst >= 6
    if args.kind in ("clb", "all"):
        ids = {j.id for j in make_instance("clb", args.rounds, args.seed).jobs}
        heads = [3 * i + 2 in ids for i in range(args.rounds)]
        w1, w2 = lb.clairvoyant_lb_totals(heads)
        good = w1 == 3 * args.rounds and w2 == 2 * args.rounds + 2 * sum(heads)
        out.append(f"clb,rounds={args.rounds},seed={args.seed},price1={w1},price2={w2},{good}")
        ok &= good
    emit("\n".join(out) + "\n", args.output)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="truthsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file (JSONL)")
    g.add_argument("--kind", required=True, choices=["clb", "nclb", "syncing", "stoch", "random"])
    g.add_argument("--rounds", type=int, default=100)
    g.add_argument("--losses", help="loss file: one 'l1 l2' pair per line")
    g.add_argument("--T", type=int)
    g.add_argument("--preset", default="nc-gap")
    g.add_argument("--setting", choices=["c", "nc"], default="c")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a mechanism or combiner on an instance")
    r.add_argument("--instance", required=True)
    r.add_argument("--mech")
    r.add_argument("--combiner", choices=["fts", "ftbs"])
    r.add_argument("--roster")
    r.add_argument("--gamma")
    r.add_argument("--start", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--log", help="write the combiner's event log (JSONL)")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("regret", help="regret table (CSV) over T values and seeds")
    q.add_argument("--combiner", required=True, choices=["fts", "ftbs"])
    q.add_argument("--roster", required=True)
    q.add_argument("--gen", required=True, help="clb or stoch:<preset>")
    q.add_argument("--T", required=True, help="comma-separated horizons")
    q.add_argument("--seeds", required=True, help="e.g. 1..50 or 1,3,5")
    q.add_argument("--gamma", default="auto")
    q.add_argument("--samples", type=int, default=2, help="restart benchmark samples")
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--figure", help="also write a log-log PNG")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_regret)

    t = sub.add_parser("truthcheck", help="exhaustive misreport and order checks")
    t.add_argument("--mech")
    t.add_argument("--combiner", choices=["fts", "ftbs"])
    t.add_argument("--roster")
    t.add_argument("--gamma")
    t.add_argument("--corpus", default="small")
    t.add_argument("--budget", default="1e6")
    t.add_argument("--seeds", default="0")
    t.add_argument("--value-levels", type=int, default=5)
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_truthcheck)

    v = sub.add_parser("lb-verify", help="exact checks of the lower-bound streams")
    v.add_argument("--kind", choices=["nclb", "clb", "all"], default="all")
    v.add_argument("--rounds", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_lb_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InstanceFormatError, InstanceValidationError) as exc:
        print(f"truthsched {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"truthsched {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"truthsched {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
