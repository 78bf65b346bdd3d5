"""Expected value of a schedule under each real-time regime.

Q_i is always the running maximum of the first i qualities, so unsorted
schedules evaluate correctly; the optimizers only ever produce sorted ones.
"""
from __future__ import annotations

import math
from itertools import accumulate

from delibsched.deadlines import (DeadlineDistribution, DeadlineModel, ExponentialDeadline,
                                  FixedDeadline, FixedTimeCost, Stochastic, UniformDeadline)
from delibsched.errors import ParameterError, RegimeError
from delibsched.profiles import profile_of
from delibsched.rules import RuleSet, Schedule


def _running_max(qualities: list[float]) -> list[float]:
    return list(accumulate(qualities, max))


def value_fixed_deadline(schedule: Schedule, rules: RuleSet, t_d: int) -> float:
    """Quality of the longest prefix completing by t_d."""
    if t_d < 0:
        raise ParameterError(f"deadline must be >= 0, got {t_d}")
    return profile_of(schedule, rules)(t_d)


def value_fixed_cost(schedule: Schedule, rules: RuleSet, c: float) -> float:
    """Best quality in the schedule less c per time step of total runtime."""
    if c < 0:
        raise ParameterError(f"time cost must be >= 0, got {c}")
    steps = schedule.resolve(rules)
    if not steps:
        return 0.0
    return max(r.quality for r in steps) - c * sum(r.runtime for r in steps)


def value_stochastic(schedule: Schedule, rules: RuleSet, dist: DeadlineDistribution) -> float:
    """Sum over i of P(T_i <= D < T_{i+1}) * Q_i, with the tail after T_m all mass."""
    steps = schedule.resolve(rules)
    if not steps:
        return 0.0
    best = _running_max([r.quality for r in steps])
    cut = [dist.interrupt_before(t) for t in schedule.completion_times(rules)] + [1.0]
    return math.fsum((cut[i + 1] - cut[i]) * best[i] for i in range(len(steps)))


def value_long_uniform(schedule: Schedule, rules: RuleSet, width: int) -> float:
    """Start-time independent form for a uniform(0, W) deadline with W >= total runtime.

    The chance of interruption during a step is its interval mass t_i / W.
    """
    if width <= 0:
        raise ParameterError(f"uniform width must be positive, got {width}")
    steps = schedule.resolve(rules)
    if not steps:
        return 0.0
    total = sum(r.runtime for r in steps)
    if total > width:
        raise RegimeError(f"long-uniform form needs W >= total runtime ({width} < {total})")
    best = _running_max([r.quality for r in steps])
    window = UniformDeadline(0.0, float(width))
    mass = [window.interval_mass(r.runtime) for r in steps]
    head = math.fsum(mass[i + 1] * best[i] for i in range(len(steps) - 1))
    return head + best[-1] * (1.0 - math.fsum(mass))


def value_exponential(schedule: Schedule, rules: RuleSet, beta: float) -> float:
    """Closed form for P_d(t) = 1 - exp(-beta t) with p_i = P_d(t_i)."""
    dist = ExponentialDeadline(beta)
    steps = schedule.resolve(rules)
    if not steps:
        return 0.0
    best = _running_max([r.quality for r in steps])
    p = [dist.interrupt_probability(r.runtime) for r in steps]
    survive = list(accumulate((1.0 - x for x in p), lambda a, b: a * b))
    head = math.fsum(survive[i] * p[i + 1] * best[i] for i in range(len(steps) - 1))
    return head + survive[-1] * best[-1]


def evaluate(schedule: Schedule, rules: RuleSet, model: DeadlineModel) -> float:
    """Exact value of `schedule` under any of the three regimes."""
    if isinstance(model, FixedDeadline):
        return value_fixed_deadline(schedule, rules, model.t_d)
    if isinstance(model, FixedTimeCost):
        return value_fixed_cost(schedule, rules, model.c)
    if isinstance(model, Stochastic):
        return value_stochastic(schedule, rules, model.dist)
    raise RegimeError(f"unsupported deadline model {model!r}")


def uniform_width(dist: DeadlineDistribution) -> int:
    """W for a uniform(0, W) distribution, or a RegimeError."""
    if not isinstance(dist, UniformDeadline) or dist.a != 0 or dist.width <= 0:
        raise RegimeError(f"{dist} is not a uniform(0, W) distribution")
    if dist.width != int(dist.width):
        raise RegimeError(f"uniform width must be an integer, got {dist.width:g}")
    return int(dist.width)
