"""Automated mail sorter: recognizer networks racing letter arrivals.

Each episode a letter arrives and the next one heralds the deadline. The
sorter runs its recognizers in order and, when the herald comes or the
schedule ends, routes the letter by the best recognizer finished so far,
or rejects it. A network running for t steps reads a zipcode correctly with
probability p = 1 - exp(-lambda t).

Outcome utilities: u1 correct, u2 misrouted, u3 rejected. Jams cannot occur
because arrivals are heralded. Programs are compared on utility per second;
the optional weights score an episode as a linear combination of outcome
utility, rejection and letters per step instead.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from delibsched.deadlines import DeadlineDistribution, poisson
from delibsched.errors import FormatError, ParameterError
from delibsched.optimizers import is_tied, optimize_general, prefer
from delibsched.rules import Rule, RuleSet, Schedule
from delibsched.universal import MachineSpeedup, build_universal, universal_timeline
from delibsched.values import value_stochastic

logger = logging.getLogger(__name__)

REJECT_ID = "reject"
UNIVERSAL_SWEEP_LAMBDA = 0.2


@dataclasses.dataclass(frozen=True)
class SorterConfig:
    lambda_: float = 0.9
    n_networks: int = 40
    runtimes: Optional[tuple[int, ...]] = None
    u1: float = 1.0
    u2: float = 0.0
    u3: float = 0.25
    arrival: str = "poisson:9"
    episodes: int = 100_000
    seed: int = 0
    w_quality: float = 1.0
    w_reject: float = 0.0
    w_speed: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.lambda_) or self.lambda_ <= 0:
            raise ParameterError(f"lambda must be > 0, got {self.lambda_}")
        if self.n_networks < 1:
            raise ParameterError(f"need at least one network, got {self.n_networks}")
        if self.runtimes is not None:
            object.__setattr__(self, "runtimes", tuple(int(t) for t in self.runtimes))
            if len(self.runtimes) != self.n_networks:
                raise ParameterError(
                    f"{len(self.runtimes)} runtimes given for {self.n_networks} networks")
            if any(t < 1 for t in self.runtimes):
                raise ParameterError("network runtimes must be >= 1")
        if not self.u2 <= self.u3 <= self.u1 or self.u2 == self.u1:
            raise ParameterError(
                f"utilities must satisfy u2 <= u3 <= u1 with u2 < u1, "
                f"got u1={self.u1}, u2={self.u2}, u3={self.u3}")
        if self.episodes < 0:
            raise ParameterError(f"episodes must be >= 0, got {self.episodes}")
        if not all(math.isfinite(w) for w in (self.w_quality, self.w_reject, self.w_speed)):
            raise ParameterError("utility weights must be finite")
        DeadlineDistribution.parse(self.arrival)

    def network_runtimes(self) -> tuple[int, ...]:
        return self.runtimes or tuple(range(1, self.n_networks + 1))

    def arrival_dist(self) -> DeadlineDistribution:
        return DeadlineDistribution.parse(self.arrival)

    def accuracy(self, runtime: int) -> float:
        return -math.expm1(-self.lambda_ * runtime) if runtime > 0 else 0.0

    def score(self, stats: SimStats) -> float:
        """w_quality * mean utility - w_reject * reject rate + w_speed * letters per step."""
        speed = 1.0 / stats.mean_gap if stats.mean_gap > 0 else 0.0
        return (self.w_quality * stats.mean_utility - self.w_reject * stats.reject_rate
                + self.w_speed * speed)

    @classmethod
    def load(cls, path: Union[str, Path]) -> SorterConfig:
        """Read a JSON object whose keys mirror the fields (`lambda` for lambda_)."""
        p = Path(path)
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"{p}: {e}") from e
        if not isinstance(data, dict):
            raise FormatError(f"{p}: expected a JSON object")
        if "lambda" in data:
            data["lambda_"] = data.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FormatError(f"{p}: unknown config keys {sorted(unknown)}")
        if data.get("runtimes") is not None:
            data["runtimes"] = tuple(data["runtimes"])
        return cls(**data)

    def save(self, path: Union[str, Path]) -> None:
        data = dataclasses.asdict(self)
        data["lambda"] = data.pop("lambda_")
        if data["runtimes"] is not None:
            data["runtimes"] = list(data["runtimes"])
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def make_network_rules(config: SorterConfig) -> RuleSet:
    """One rule per network, q = p u1 + (1 - p) u2, plus the zero-time reject rule."""
    rules = []
    for i, t in enumerate(config.network_runtimes(), 1):
        p = config.accuracy(t)
        rules.append(Rule(f"net{i:02d}", p * config.u1 + (1 - p) * config.u2, t))
    rules.append(Rule(REJECT_ID, config.u3, 0))
    return RuleSet(tuple(rules))


# ---------------------------------------------------------------------------
# Comparison programs

@dataclasses.dataclass(frozen=True)
class Comparators:
    """BO sequence, best singleton, 50% rule and 90% rule.

    The last three start with the reject rule; the BO sequence includes it
    when it pays.
    """
    bo: Schedule
    singleton: Schedule
    fifty: Schedule
    ninety: Schedule
    ninety_fallback: bool = False

    def items(self) -> list[tuple[str, Schedule]]:
        return [("bo", self.bo), ("singleton", self.singleton),
                ("fifty", self.fifty), ("ninety", self.ninety)]


def _with_reject(rules: RuleSet, rule: Rule) -> Schedule:
    return Schedule.of(REJECT_ID, rule.id) if REJECT_ID in rules else Schedule.of(rule.id)


def build_comparators(rules: RuleSet, arrival: DeadlineDistribution) -> Comparators:
    """Build the four programs compared in the sorter experiments.

    The BO sequence and the best singleton are chosen against the arrival
    distribution the simulator actually draws from (zero gaps redrawn). The
    50% and 90% rules read the configured arrival distribution directly.
    """
    planning = arrival.excluding_zero()
    networks = [r for r in rules if r.id != REJECT_ID]
    if not networks:
        raise ParameterError("rule set has no networks")

    bo = optimize_general(rules, planning).schedule

    scored = [(_with_reject(rules, r), value_stochastic(_with_reject(rules, r), rules, planning))
              for r in networks]
    top = max(v for _, v in scored)
    singleton = prefer((s for s, v in scored if is_tied(v, top)), rules)

    mean = arrival.mean()
    fifty = min(networks, key=lambda r: (abs(r.runtime - mean), r.runtime))

    sure = [r for r in networks if 1.0 - arrival.interrupt_before(r.runtime) >= 0.9]
    fallback = not sure
    if fallback:
        ninety = min(networks, key=lambda r: (r.runtime, r.id))
        logger.warning("no network completes in 90%% of %s arrivals; using %s",
                       arrival, ninety.id)
    else:
        ninety = max(sure, key=lambda r: (r.runtime, r.quality))

    return Comparators(bo, singleton, _with_reject(rules, fifty),
                       _with_reject(rules, ninety), fallback)


# ---------------------------------------------------------------------------
# Simulation

@dataclasses.dataclass(frozen=True)
class SimStats:
    episodes_run: int = 0
    mean_utility: float = 0.0
    mean_utility_stderr: float = 0.0
    utility_per_second: float = 0.0
    utility_per_second_stderr: float = 0.0
    accuracy: float = 0.0
    accuracy_stderr: float = 0.0
    error_rate: float = 0.0
    reject_rate: float = 0.0
    reject_rate_stderr: float = 0.0
    mean_act_time: float = 0.0
    mean_act_time_stderr: float = 0.0
    mean_gap: float = 0.0


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def run_timeline_episodes(timeline: Sequence[tuple[int, str]], rules: RuleSet,
                          config: SorterConfig) -> SimStats:
    """Simulate `config.episodes` letters against a fixed execution timeline.

    `timeline` holds (completion time, rule id) in execution order; a rule
    may appear more than once. Deadlines are drawn first and correctness
    uniforms second from `config.seed`, independent of the timeline, so
    programs compared under one config face the same letters.
    """
    n = config.episodes
    if n == 0:
        return SimStats()
    rng = np.random.default_rng(config.seed)
    deadlines = config.arrival_dist().excluding_zero().sample(rng, n)
    uniforms = rng.random(n)

    times = np.array([t for t, _ in timeline], dtype=float)
    steps = [rules.get(rid) for _, rid in timeline]
    m = len(steps)
    # index m stands for "nothing finished"
    quality = np.array([r.quality for r in steps] + [0.0])
    rejecting = np.array([r.id == REJECT_ID for r in steps] + [True])
    acting_after = np.empty(m + 1, dtype=np.int64)
    acting_after[0] = m
    best = m
    for k, r in enumerate(steps, 1):
        if best == m or r.quality > quality[best]:
            best = k - 1
        acting_after[k] = best

    finished = np.searchsorted(times, deadlines, side="right")
    acting = acting_after[finished]
    rejected = rejecting[acting]
    p = (quality[acting] - config.u2) / (config.u1 - config.u2)
    correct = ~rejected & (uniforms < p)
    utility = np.where(rejected, config.u3, np.where(correct, config.u1, config.u2))
    total = times[-1] if m else 0.0
    act_time = np.minimum(deadlines, total)

    ratio = utility.sum() / deadlines.sum()
    resid = utility - ratio * deadlines
    ratio_se = (math.sqrt(float((resid ** 2).sum()) / (n * (n - 1))) / float(deadlines.mean())
                if n > 1 else 0.0)
    acc = correct.astype(float)
    rej = rejected.astype(float)
    return SimStats(
        episodes_run=n,
        mean_utility=float(utility.mean()),
        mean_utility_stderr=_stderr(utility),
        utility_per_second=float(ratio),
        utility_per_second_stderr=ratio_se,
        accuracy=float(acc.mean()),
        accuracy_stderr=_stderr(acc),
        error_rate=float(1.0 - acc.mean() - rej.mean()),
        reject_rate=float(rej.mean()),
        reject_rate_stderr=_stderr(rej),
        mean_act_time=float(act_time.mean()),
        mean_act_time_stderr=_stderr(act_time),
        mean_gap=float(deadlines.mean()),
    )


def run_episodes(schedule: Schedule, rules: RuleSet, config: SorterConfig) -> SimStats:
    timeline = list(zip(schedule.completion_times(rules), schedule.steps))
    return run_timeline_episodes(timeline, rules, config)


# ---------------------------------------------------------------------------
# Sweeps

class SweepKind(Enum):
    POISSON_MEAN = "poisson-mean"
    UNIFORM_WIDTH = "uniform-width"
    UNIVERSAL_SPEEDUP = "universal-speedup"


@dataclasses.dataclass(frozen=True)
class SweepRow:
    sweep_param: float
    program: str
    utility_per_sec: float
    stderr: float
    accuracy: float
    reject_rate: float
    score: float = 0.0


def default_config(kind: SweepKind) -> SorterConfig:
    if kind is SweepKind.UNIVERSAL_SPEEDUP:
        return SorterConfig(lambda_=UNIVERSAL_SWEEP_LAMBDA)
    return SorterConfig()


def default_grid(kind: SweepKind) -> list[float]:
    if kind is SweepKind.UNIFORM_WIDTH:
        return [float(h) for h in range(0, 19, 3)]
    return [float(mu) for mu in range(1, 21)]


def _row(param: float, program: str, stats: SimStats, config: SorterConfig) -> SweepRow:
    return SweepRow(param, program, stats.utility_per_second, stats.utility_per_second_stderr,
                    stats.accuracy, stats.reject_rate, config.score(stats))


def sweep_experiment(kind: SweepKind, base: SorterConfig,
                     grid: Optional[Sequence[float]] = None) -> list[SweepRow]:
    """Rows of (sweep point, program, utility/sec, stderr, accuracy, reject rate, score).

    poisson-mean sweeps the arrival mean and uniform-width the half-width
    of a uniform arrival window centred on 20. universal-speedup compares
    the universal program on a 4x machine with the BO sequence on the base
    machine, adding a `delta` row per point. Every program at a point
    shares the base seed.
    """
    rows: list[SweepRow] = []
    points = list(grid) if grid is not None else default_grid(kind)
    for x in points:
        if kind is SweepKind.UNIFORM_WIDTH:
            h = int(x)
            config = dataclasses.replace(base, arrival=f"uniform:{20 - h}:{20 + h}")
        else:
            config = dataclasses.replace(base, arrival=f"poisson:{x:g}")
        rules = make_network_rules(config)
        arrival = config.arrival_dist()
        logger.info("%s: point %g (%s)", kind.value, x, arrival)

        if kind is SweepKind.UNIVERSAL_SPEEDUP:
            bo = optimize_general(rules, arrival.excluding_zero()).schedule
            base_stats = run_episodes(bo, rules, config)
            prog = build_universal(rules, 1)
            fast = [(e.time, e.rule_id) for e in universal_timeline(prog, MachineSpeedup(4))]
            fast_stats = run_timeline_episodes(fast, rules, config)
            rows.append(_row(x, "bo", base_stats, config))
            rows.append(_row(x, "universal-4x", fast_stats, config))
            rows.append(SweepRow(
                x, "delta",
                fast_stats.utility_per_second - base_stats.utility_per_second,
                math.hypot(fast_stats.utility_per_second_stderr,
                           base_stats.utility_per_second_stderr),
                fast_stats.accuracy - base_stats.accuracy,
                fast_stats.reject_rate - base_stats.reject_rate,
                config.score(fast_stats) - config.score(base_stats)))
            continue

        for label, schedule in build_comparators(rules, arrival).items():
            rows.append(_row(x, label, run_episodes(schedule, rules, config), config))
    return rows


SUMMARY_METRICS = ("utility_per_sec", "score")


@dataclasses.dataclass(frozen=True)
class SweepSummary:
    """How the BO sequence fares across a comparator sweep.

    Attributes:
        point: Sweep point where the advantage is measured.
        bo_advantage: (BO - best singleton) / best singleton at `point`.
        bo_peak: Sweep point where the BO sequence scores highest.
    """
    point: float
    bo_advantage: float
    bo_peak: float


def summarize_sweep(rows: Sequence[SweepRow], point: float,
                    metric: str = "utility_per_sec") -> SweepSummary:
    if metric not in SUMMARY_METRICS:
        raise ParameterError(f"metric must be one of {SUMMARY_METRICS}, got {metric!r}")
    bo = {r.sweep_param: getattr(r, metric) for r in rows if r.program == "bo"}
    single = {r.sweep_param: getattr(r, metric) for r in rows if r.program == "singleton"}
    if not bo or not single:
        raise ParameterError("summary needs bo and singleton rows")
    if point not in bo or point not in single:
        raise ParameterError(f"no sweep point at {point:g}")
    base = single[point]
    advantage = (bo[point] - base) / abs(base) if base else math.nan
    # ties go to the earlier point
    peak = max(bo, key=lambda x: (bo[x], -x))
    return SweepSummary(point, advantage, peak)


# ---------------------------------------------------------------------------
# Environment curves

def accuracy_curve(config: SorterConfig,
                   horizon: Optional[int] = None) -> list[tuple[int, float]]:
    """(t, 1 - exp(-lambda t)) for t = 0..horizon, by default the longest network."""
    if horizon is None:
        horizon = max(config.network_runtimes())
    if horizon < 0:
        raise ParameterError(f"horizon must be >= 0, got {horizon}")
    return [(t, config.accuracy(t)) for t in range(horizon + 1)]


def arrival_pmfs(means: Sequence[float],
                 horizon: Optional[int] = None) -> list[tuple[float, ...]]:
    """(t, P(D = t) for each Poisson mean) for t = 0..horizon."""
    if not means:
        raise ParameterError("need at least one arrival mean")
    dists = [poisson(mu) for mu in means]
    if horizon is None:
        horizon = math.ceil(3 * max(means))
    if horizon < 0:
        raise ParameterError(f"horizon must be >= 0, got {horizon}")
    return [(t, *(d.pmf(t) for d in dists)) for t in range(horizon + 1)]
