"""Command-line front end: one subcommand per run, plot-ready tables out."""
from __future__ import annotations

import argparse
import asyncio
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from delibsched.deadlines import DeadlineDistribution, ExponentialDeadline, Stochastic, parse_model
from delibsched.errors import DelibError, ParameterError, RegimeError
from delibsched.learning import BernoulliSampler, DeterministicSampler, verify_deficit
from delibsched.mailsort import (SorterConfig, SweepKind, accuracy_curve, arrival_pmfs,
                                 build_comparators, default_config, make_network_rules,
                                 run_episodes, summarize_sweep, sweep_experiment)
from delibsched.optimizers import (optimize, optimize_exponential, optimize_general,
                                   optimize_long_uniform, optimize_short_uniform)
from delibsched.oracle import SearchSpace, oracle_optimize
from delibsched.profiles import profile_of
from delibsched.report import Report, write_report
from delibsched.rules import RuleSet, Schedule, load_rules, save_rules
from delibsched.universal import (Aspiration, Herald, MachineSpeedup, build_universal,
                                  check_dominance, run_universal, stage_rows, universal_profile)
from delibsched.values import evaluate, uniform_width

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Everything a run depends on: subcommand, inputs, parameters, seed, output."""
    subcommand: str
    inputs: dict[str, str]
    params: dict[str, Any]
    seed: int = 0
    out: Optional[str] = None
    form: str = "csv"

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> RunManifest:
        inputs = {k: v for k in ("rules", "config", "path")
                  if (v := getattr(ns, k, None)) is not None}
        skip = {"command", "rules", "config", "path", "seed", "out", "format", "verbose"}
        params = {k: v for k, v in vars(ns).items() if k not in skip}
        return cls(ns.command, inputs, params, ns.seed, ns.out, ns.format)

    def check_inputs(self) -> None:
        for name, path in self.inputs.items():
            if path.startswith("preset:"):
                continue
            if not Path(path).exists():
                raise ParameterError(f"--{name} {path}: no such file")

    def param(self, name: str) -> Any:
        return self.params.get(name)


# ---------------------------------------------------------------------------
# Subcommands

def _rules(m: RunManifest) -> RuleSet:
    if "rules" not in m.inputs:
        raise ParameterError(f"{m.subcommand} needs --rules")
    return load_rules(m.inputs["rules"])


def _model(m: RunManifest) -> Any:
    return parse_model(m.param("regime"), m.param("deadline"), m.param("cost"), m.param("dist"))


def _schedule(m: RunManifest) -> Schedule:
    return Schedule.parse(m.param("schedule") or "")


def _config(m: RunManifest, base: Optional[SorterConfig] = None) -> SorterConfig:
    if "config" in m.inputs:
        config = SorterConfig.load(m.inputs["config"])
    else:
        config = base or SorterConfig()
    if m.param("episodes") is not None:
        config = dataclasses.replace(config, episodes=m.param("episodes"))
    if m.param("seed_given"):
        config = dataclasses.replace(config, seed=m.seed)
    if m.param("dist"):
        config = dataclasses.replace(config, arrival=m.param("dist"))
    return config


def _floats(text: Optional[str]) -> Optional[list[float]]:
    if not text:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ParameterError(f"expected comma separated numbers, got {text!r}") from e


def _optimize_with(m: RunManifest, rules: RuleSet, model: Any) -> Any:
    method = m.param("method") or "auto"
    if method == "auto":
        return optimize(rules, model)
    if not isinstance(model, Stochastic):
        raise RegimeError(f"--method {method} needs --regime stochastic")
    dist = model.dist
    if method == "general":
        return optimize_general(rules, dist)
    if method == "exponential":
        if not isinstance(dist, ExponentialDeadline):
            raise RegimeError(f"exponential optimizer needs an exp:beta distribution, got {dist}")
        return optimize_exponential(rules, dist.beta)
    width = uniform_width(dist)
    if method == "long-uniform":
        return optimize_long_uniform(rules, width)
    return optimize_short_uniform(rules, width)


def cmd_optimize(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    result = _optimize_with(m, rules, _model(m))
    report.note("regime", str(result.regime))
    report.note("method", result.method)
    t = report.table("optimum", "field", "value")
    t.add("schedule", str(result.schedule))
    t.add("value", result.value)
    t.add("table_rows", result.table_stats.rows)
    t.add("table_cols", result.table_stats.cols)
    t.add("table_filled", result.table_stats.filled)
    t.add("total_runtime", result.table_stats.total_runtime)


def cmd_evaluate(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    model = _model(m)
    schedule = _schedule(m)
    report.note("regime", str(model))
    t = report.table("value", "schedule", "value")
    t.add(str(schedule), evaluate(schedule, rules, model))


def cmd_profile(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    schedule = _schedule(m)
    horizon = m.param("horizon")
    if horizon is None:
        horizon = schedule.total_runtime(rules)
    report.note("schedule", str(schedule))
    rows = profile_of(schedule, rules).rows(horizon)
    if not m.param("dist"):
        t = report.table("profile", "t", "quality")
        for time, q in rows:
            t.add(time, q)
        return
    dist = DeadlineDistribution.parse(m.param("dist"))
    report.note("dist", str(dist))
    t = report.table("profile", "t", "quality", "deadline_mass")
    for time, q in rows:
        t.add(time, q, dist.pmf(time))


def cmd_oracle(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    model = _model(m)
    space = SearchSpace.ALL_PERMUTATIONS if m.param("all_permutations") else SearchSpace.SORTED_ONLY
    result = oracle_optimize(rules, model, space, include_table=bool(m.param("candidates")))
    report.note("regime", str(model))
    report.note("search_space", space.value)
    report.note("best_value", result.best_value)
    report.note("candidates_evaluated", result.candidates_evaluated)
    report.note("preferred", str(result.preferred))
    t = report.table("oracle", "schedule", "value", "optimal")
    if result.table is not None:
        best = set(result.best_schedules)
        for s, v in result.table:
            t.add(str(s), v, s in best)
    else:
        for s in result.best_schedules:
            t.add(str(s), result.best_value, True)


def cmd_universal(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    speedup = MachineSpeedup(m.param("speedup") or 1.0)
    termination: Any = Herald()
    if m.param("aspiration") is not None:
        if m.param("act_time") is None:
            raise ParameterError("--aspiration needs --act-time")
        termination = Aspiration(m.param("aspiration"), m.param("act_time"))
    prog = build_universal(rules, m.param("epsilon") or 1, termination)
    report.note("epsilon", prog.epsilon)
    report.note("speedup", speedup.k)

    stages = report.table("stages", "stage", "deadline", "schedule", "quality", "completes_at")
    for row in stage_rows(prog, speedup):
        stages.add(*row)

    if isinstance(termination, Aspiration) or m.param("herald") is not None:
        outcome = run_universal(prog, speedup, m.param("herald"))
        report.note("status", outcome.status.value)
        report.note("delivered_quality", outcome.delivered_quality)
        report.note("act_time", outcome.act_time)

    ours = universal_profile(prog, speedup)
    reference = _schedule(m) if m.param("schedule") else None
    theirs = None
    if reference is not None:
        check = check_dominance(prog, speedup, reference)
        report.note("reference", str(reference))
        report.note("dominates", check.dominates)
        theirs = check.reference
    horizon = max([0, *ours.times, *(theirs.times if theirs else [])])
    prof = report.table("profiles", "t", "universal", "reference")
    for time in range(horizon + 1):
        prof.add(time, ours(time), theirs(time) if theirs else "")


def cmd_learn(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    model = _model(m)
    if not isinstance(model, Stochastic):
        raise ParameterError("learn needs --regime stochastic")
    sampler = DeterministicSampler() if m.param("sampler") == "deterministic" else BernoulliSampler()
    result = verify_deficit(rules, model.dist, m.param("epsilon_q"), m.param("delta_q"),
                            m.param("trials"), m.seed, sampler)
    report.note("optimum_value", result.optimum_value)
    report.note("exceedance_rate", result.exceedance_rate)
    report.note("allowed_rate", result.allowed_rate)
    t = report.table("deficits", "trial", "N", "deficit", "bound", "exceeded")
    for r in result.rows:
        t.add(r.trial, r.sample_count, r.deficit, r.bound, r.exceeded)


def cmd_simulate(m: RunManifest, report: Report) -> None:
    config = _config(m)
    report.seed = config.seed
    rules = load_rules(m.inputs["rules"]) if "rules" in m.inputs else make_network_rules(config)
    report.note("arrival", config.arrival)
    report.note("episodes", config.episodes)
    if m.param("schedule"):
        programs = [("schedule", _schedule(m))]
    else:
        programs = build_comparators(rules, config.arrival_dist()).items()
    t = report.table("simulation", "program", "schedule", "utility_per_sec", "stderr",
                     "mean_utility", "accuracy", "reject_rate", "mean_act_time")
    for label, schedule in programs:
        s = run_episodes(schedule, rules, config)
        t.add(label, str(schedule), s.utility_per_second, s.utility_per_second_stderr,
              s.mean_utility, s.accuracy, s.reject_rate, s.mean_act_time)


def cmd_sweep(m: RunManifest, report: Report) -> None:
    kind = SweepKind(m.param("kind"))
    config = _config(m, default_config(kind))
    report.seed = config.seed
    report.note("kind", kind.value)
    report.note("lambda", config.lambda_)
    report.note("episodes", config.episodes)
    report.note("weights", f"{config.w_quality:g},{config.w_reject:g},{config.w_speed:g}")
    rows = sweep_experiment(kind, config, _floats(m.param("grid")))
    if kind is not SweepKind.UNIVERSAL_SPEEDUP:
        metric = m.param("metric") or "utility_per_sec"
        points = {r.sweep_param for r in rows}
        at = m.param("at")
        at = at if at is not None else (10.0 if 10.0 in points else min(points))
        summary = summarize_sweep(rows, at, metric)
        report.note("metric", metric)
        report.note("bo_advantage_at", summary.point)
        report.note("bo_advantage", summary.bo_advantage)
        report.note("bo_peak", summary.bo_peak)
    t = report.table(kind.value, "sweep_param", "program", "utility_per_sec", "stderr",
                     "accuracy", "reject_rate", "score")
    for r in rows:
        t.add(r.sweep_param, r.program, r.utility_per_sec, r.stderr, r.accuracy, r.reject_rate,
              r.score)


def cmd_curves(m: RunManifest, report: Report) -> None:
    horizon = m.param("horizon")
    if m.param("kind") == "accuracy":
        config = _config(m)
        report.note("lambda", config.lambda_)
        t = report.table("accuracy", "t", "accuracy")
        for time, p in accuracy_curve(config, horizon):
            t.add(time, p)
        return
    means = _floats(m.param("means")) or [1.0, 5.0, 9.0]
    t = report.table("arrivals", "t", *(f"poisson:{mu:g}" for mu in means))
    for row in arrival_pmfs(means, horizon):
        t.add(*row)


def cmd_rules(m: RunManifest, report: Report) -> None:
    rules = _rules(m)
    if m.out:
        save_rules(rules, m.out)
        return
    t = report.table("rules", "id", "quality", "runtime")
    for r in rules:
        t.add(r.id, r.quality, r.runtime)


COMMANDS: dict[str, Callable[[RunManifest, Report], None]] = {
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "profile": cmd_profile,
    "oracle": cmd_oracle,
    "universal": cmd_universal,
    "learn": cmd_learn,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "curves": cmd_curves,
    "rules": cmd_rules,
}


def dispatch(m: RunManifest) -> int:
    """Run one subcommand and write its report. Returns the exit status."""
    m.check_inputs()
    if m.subcommand == "view":
        from delibsched.viewer import ResultsApp

        ResultsApp.from_csv(m.inputs["path"]).run()
        return 0
    if m.subcommand == "serve":
        from delibsched.backend import DelibBackend

        asyncio.run(DelibBackend(m.param("host"), m.param("port")).start_server())
        return 0
    try:
        command = COMMANDS[m.subcommand]
    except KeyError:
        raise ParameterError(f"unknown subcommand {m.subcommand!r}") from None

    report = Report(m.subcommand, m.seed)
    command(m, report)
    if m.subcommand == "rules" and m.out:
        return 0
    if m.out:
        with open(m.out, "w", encoding="utf-8", newline="") as f:
            write_report(report, f, m.form)
    else:
        write_report(report, sys.stdout, m.form)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _regime(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--regime", choices=("deadline", "cost", "stochastic"),
                   required=required, default=None if required else "stochastic")
    p.add_argument("--deadline", type=int, help="fixed deadline t_d")
    p.add_argument("--cost", type=float, help="time cost per step")
    p.add_argument("--dist", help="uniform:a:b | exp:beta | poisson:mu | pmf:path | point:t")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delibsched", description="Bounded-optimal deliberation scheduling")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("optimize", help="bounded-optimal schedule for a regime")
    p.add_argument("--rules", required=True)
    p.add_argument("--method", choices=("auto", "general", "long-uniform", "short-uniform",
                                         "exponential"), default="auto")
    _regime(p)
    _common(p)

    p = sub.add_parser("evaluate", help="value of a schedule")
    p.add_argument("--rules", required=True)
    p.add_argument("--schedule", default="", help="comma separated rule ids (empty is Λ)")
    _regime(p)
    _common(p)

    p = sub.add_parser("profile", help="performance profile rows of a schedule")
    p.add_argument("--rules", required=True)
    p.add_argument("--schedule", default="")
    p.add_argument("--horizon", type=int)
    p.add_argument("--dist", help="deadline distribution drawn alongside the profile")
    _common(p)

    p = sub.add_parser("oracle", help="exhaustive search over schedules")
    p.add_argument("--rules", required=True)
    p.add_argument("--all-permutations", action="store_true")
    p.add_argument("--candidates", action="store_true", help="emit every candidate")
    _regime(p)
    _common(p)

    p = sub.add_parser("universal", help="doubling universal program")
    p.add_argument("--rules", required=True)
    p.add_argument("--epsilon", type=int, default=1)
    p.add_argument("--speedup", type=float, default=1.0)
    p.add_argument("--schedule", help="reference schedule for the dominance check")
    p.add_argument("--herald", type=int, help="heralded deadline to run against")
    p.add_argument("--aspiration", type=float)
    p.add_argument("--act-time", type=int)
    _common(p)

    p = sub.add_parser("learn", help="quality estimation deficit check")
    p.add_argument("--rules", required=True)
    p.add_argument("--epsilon-q", type=float, default=0.05)
    p.add_argument("--delta-q", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sampler", choices=("bernoulli", "deterministic"), default="bernoulli")
    _regime(p, required=False)
    _common(p)

    p = sub.add_parser("simulate", help="mail-sorter episodes for the comparison programs")
    p.add_argument("--config")
    p.add_argument("--rules")
    p.add_argument("--schedule")
    p.add_argument("--dist", help="arrival distribution (overrides the config)")
    p.add_argument("--episodes", type=int)
    _common(p)

    p = sub.add_parser("sweep", help="mail-sorter sweep")
    p.add_argument("--kind", choices=[k.value for k in SweepKind], required=True)
    p.add_argument("--config")
    p.add_argument("--episodes", type=int)
    p.add_argument("--grid", help="comma separated sweep points")
    p.add_argument("--at", type=float, help="sweep point for the BO advantage (default 10)")
    p.add_argument("--metric", choices=("utility_per_sec", "score"), default="utility_per_sec")
    _common(p)

    p = sub.add_parser("curves", help="accuracy profile or arrival pmfs of the sorter")
    p.add_argument("--kind", choices=("accuracy", "arrivals"), required=True)
    p.add_argument("--config")
    p.add_argument("--means", help="comma separated Poisson means (default 1,5,9)")
    p.add_argument("--horizon", type=int)
    _common(p)

    p = sub.add_parser("rules", help="write a rule set (e.g. a preset) to a file")
    p.add_argument("--rules", required=True)
    _common(p)

    p = sub.add_parser("view", help="browse a CSV result file")
    p.add_argument("path")
    _common(p)

    p = sub.add_parser("serve", help="websocket JSON service")
    p.add_argument("--host", default="localhost")
    p.add_argument("--port", type=int, default=8765)
    _common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING)
    ns.seed_given = ns.seed is not None
    if ns.seed is None:
        ns.seed = 0
    try:
        return dispatch(RunManifest.from_args(ns))
    except (DelibError, OSError) as e:
        print(f"delibsched: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
