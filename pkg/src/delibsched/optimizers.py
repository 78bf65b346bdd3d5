"""Bounded-optimal schedule construction for each real-time regime.

Fixed deadline and fixed time cost are solved by a single best rule. Stochastic
deadlines use dynamic programming over rules sorted by quality:

    general        S(i, t): best value of a sequence ending with rule i at time t
    long uniform   S(i, n): best value of a sequence from rule i to the top rule
    short uniform  the general table restricted to completion times <= W
    exponential    S(i, n) with the product-form recursion

The DP tables gather candidates within VALUE_TOLERANCE of the best entry.
Among those, schedules whose exact values agree up to rounding (`is_tied`)
are settled by `prefer`: drop trailing steps that add nothing, then take the
profile that is higher earliest, then the shorter, then the fewer steps,
then by ids.
"""
from __future__ import annotations

import dataclasses
import functools
import logging
import math
from typing import Callable, Iterable, Optional

import numpy as np

from delibsched.deadlines import (DeadlineDistribution, DeadlineModel, ExponentialDeadline,
                                  FixedDeadline, FixedTimeCost, Stochastic, UniformDeadline,
                                  is_long_uniform)
from delibsched.errors import ParameterError, RegimeError
from delibsched.profiles import earliest_difference, profile_of
from delibsched.rules import NULL_SCHEDULE, Rule, RuleSet, Schedule
from delibsched.values import (evaluate, value_exponential, value_fixed_cost,
                               value_fixed_deadline, value_long_uniform, value_stochastic)

logger = logging.getLogger(__name__)

VALUE_TOLERANCE = 1e-12
TIE_RTOL = 1e-14
TIE_ATOL = 1e-15


@dataclasses.dataclass(frozen=True)
class TableStats:
    """DP table diagnostics: dimensions, reachable cells, and L = sum of runtimes."""
    rows: int = 0
    cols: int = 0
    filled: int = 0
    total_runtime: int = 0


@dataclasses.dataclass(frozen=True)
class OptimizationResult:
    schedule: Schedule
    value: float
    regime: DeadlineModel
    method: str
    table_stats: TableStats = TableStats()


# ---------------------------------------------------------------------------
# Schedule clean-up and tie-breaking

def normalize(schedule: Schedule, rules: RuleSet) -> Schedule:
    """Sort by (quality, runtime) and drop dominated steps.

    A step is dropped when an earlier step is at least as good, or when a
    later step is at least as good and no slower. The result has strictly
    increasing quality and runtime.
    """
    steps = sorted(schedule.resolve(rules), key=lambda r: (r.quality, r.runtime))
    improving: list[Rule] = []
    for r in steps:
        if not improving or r.quality > improving[-1].quality:
            improving.append(r)
    kept: list[Rule] = []
    fastest_later = math.inf
    for r in reversed(improving):
        if r.runtime < fastest_later:
            kept.append(r)
            fastest_later = r.runtime
    return Schedule(tuple(r.id for r in reversed(kept)))


def truncate(schedule: Schedule, rules: RuleSet, dist: DeadlineDistribution) -> Schedule:
    """Drop trailing steps whose contribution to the expected value is negligible.

    The last step adds (Q_m - Q_{m-1}) * (1 - P(D < T_m)), so steps that can
    only finish after the last possible deadline disappear.
    """
    steps = schedule.resolve(rules)
    times = schedule.completion_times(rules)
    best = []
    q = 0.0
    for r in steps:
        q = max(q, r.quality)
        best.append(q)
    m = len(steps)
    while m > 0:
        prev = best[m - 2] if m > 1 else 0.0
        if (best[m - 1] - prev) * (1.0 - dist.interrupt_before(times[m - 1])) > VALUE_TOLERANCE:
            break
        m -= 1
    return schedule.prefix(m)


def _compare(rules: RuleSet, a: Schedule, b: Schedule) -> int:
    d = earliest_difference(profile_of(a, rules), profile_of(b, rules))
    if d:
        return -d
    ka = (a.total_runtime(rules), len(a), a.steps)
    kb = (b.total_runtime(rules), len(b), b.steps)
    return (ka > kb) - (ka < kb)


def is_tied(value: float, top: float) -> bool:
    """Does `value` reach `top` up to floating-point rounding?"""
    return value >= top or math.isclose(value, top, rel_tol=TIE_RTOL, abs_tol=TIE_ATOL)


def prefer(candidates: Iterable[Schedule], rules: RuleSet) -> Schedule:
    """Pick one schedule among value-tied candidates, deterministically."""
    pool = sorted(set(candidates), key=lambda s: s.steps)
    if not pool:
        return NULL_SCHEDULE
    return min(pool, key=functools.cmp_to_key(functools.partial(_compare, rules)))


def _settle(candidates: Iterable[Schedule], rules: RuleSet,
            value: Callable[[Schedule], float],
            dist: Optional[DeadlineDistribution] = None,
            floor: float = VALUE_TOLERANCE) -> tuple[Schedule, float]:
    """Normalize, truncate, re-evaluate and tie-break candidate schedules.

    Returns Λ with value 0 when no candidate reaches `floor`.
    """
    cleaned = set()
    for s in candidates:
        s = normalize(s, rules)
        if dist is not None:
            s = truncate(s, rules, dist)
        cleaned.add(s)
    scored = [(s, value(s)) for s in cleaned]
    if not scored:
        return NULL_SCHEDULE, 0.0
    top = max(v for _, v in scored)
    if top < floor:
        return NULL_SCHEDULE, 0.0
    chosen = prefer((s for s, v in scored if is_tied(v, top)), rules)
    return chosen, value(chosen)


# ---------------------------------------------------------------------------
# Singleton regimes

def optimize_fixed_deadline(rules: RuleSet, t_d: int) -> OptimizationResult:
    """Best-quality rule that completes by t_d, or Λ if none does."""
    model = FixedDeadline(t_d)
    fitting = [r for r in rules if r.runtime <= t_d]
    schedule, value = _settle(
        (Schedule.of(r.id) for r in fitting), rules,
        lambda s: value_fixed_deadline(s, rules, t_d))
    return OptimizationResult(schedule, value, model, "singleton-deadline",
                              TableStats(len(rules), 1, len(fitting), rules.total_runtime))


def optimize_fixed_cost(rules: RuleSet, c: float) -> OptimizationResult:
    """Rule maximizing q - c t; Λ only when every net value is negative."""
    model = FixedTimeCost(c)
    schedule, value = _settle(
        (Schedule.of(r.id) for r in rules), rules,
        lambda s: value_fixed_cost(s, rules, c), floor=-VALUE_TOLERANCE)
    return OptimizationResult(schedule, value, model, "singleton-cost",
                              TableStats(len(rules), 1, len(rules), rules.total_runtime))


# ---------------------------------------------------------------------------
# General distributions

def _fill_time_table(order: list[Rule], gain: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fill S(i, t) and backpointers over columns 0..len(gain)-1.

    gain[t] = 1 - P(D < t). Row 0 is the empty sequence (0 everywhere, as
    printed, so a rule may start after idle time; such entries never beat
    the same rule started at once). Cells with t < t_i are unreachable.
    """
    n, cols = len(order), len(gain)
    q = [0.0] + [r.quality for r in order]
    table = np.full((n + 1, cols), -np.inf)
    table[0, :] = 0.0
    back = np.full((n + 1, cols), -1, dtype=np.int64)
    for i in range(1, n + 1):
        ti = order[i - 1].runtime
        if ti >= cols:
            continue
        row = table[i, ti:]
        row_back = back[i, ti:]
        for k in range(i):
            cand = table[k, :cols - ti] + (q[i] - q[k]) * gain[ti:]
            better = cand > row + VALUE_TOLERANCE
            row[better] = cand[better]
            row_back[better] = k
    return table, back


def _walk_back(order: list[Rule], back: np.ndarray, i: int, t: int) -> Schedule:
    steps = []
    while i > 0:
        rule = order[i - 1]
        steps.append(rule.id)
        k = int(back[i, t])
        t -= rule.runtime
        i = k
    return Schedule(tuple(reversed(steps)))


def _tied_cells(table: np.ndarray, rows: Iterable[int]) -> list[tuple[int, int]]:
    picked = list(rows)
    block = table[picked, :]
    top = block.max() if block.size else -np.inf
    if not np.isfinite(top):
        return []
    hits = np.argwhere(block >= top - VALUE_TOLERANCE)
    return [(picked[int(r)], int(t)) for r, t in hits]


def optimize_general(rules: RuleSet, dist: DeadlineDistribution) -> OptimizationResult:
    """Pseudo-polynomial DP over (rule, completion time), O(n^2 L)."""
    model = Stochastic(dist)
    order = rules.sorted_by_quality()
    n, total = len(order), rules.total_runtime
    if n == 0:
        return OptimizationResult(NULL_SCHEDULE, 0.0, model, "dp-general", TableStats())
    gain = 1.0 - dist.interrupt_before_array(np.arange(total + 1))
    table, back = _fill_time_table(order, gain)
    filled = int(np.isfinite(table[1:]).sum())
    logger.debug("general DP: %d x %d table, %d cells filled", n, total + 1, filled)

    # an optimal sequence ends with the top-quality rule, so row n suffices
    candidates = [_walk_back(order, back, i, t) for i, t in _tied_cells(table, [n])]
    schedule, value = _settle(candidates, rules,
                              lambda s: value_stochastic(s, rules, dist), dist)
    return OptimizationResult(schedule, value, model, "dp-general",
                              TableStats(n, total + 1, filled, total))


# ---------------------------------------------------------------------------
# Uniform distributions

def _uniform_width(width: int) -> UniformDeadline:
    if width <= 0:
        raise ParameterError(f"uniform width must be positive, got {width}")
    return UniformDeadline(0.0, float(width))


def _chain_table(order: list[Rule],
                 boundary: Callable[[int], float],
                 step: Callable[[int, int, float], float]) -> tuple[list[float], list[int]]:
    """S(i, n) for i = n..1 where S(n, n) = boundary(n) and
    S(i, n) = max over k > i of step(i, k, S(k, n))."""
    n = len(order)
    best = [-math.inf] * (n + 1)
    nxt = [0] * (n + 1)
    best[n] = boundary(n)
    for i in range(n - 1, 0, -1):
        for k in range(i + 1, n + 1):
            cand = step(i, k, best[k])
            if cand > best[i] + VALUE_TOLERANCE:
                best[i], nxt[i] = cand, k
    return best, nxt


def _chain_candidates(order: list[Rule], best: list[float], nxt: list[int]) -> list[Schedule]:
    n = len(order)
    top = max(best[1:])
    out = []
    for i in range(1, n + 1):
        if best[i] >= top - VALUE_TOLERANCE:
            steps = [order[i - 1].id]
            j = i
            while j != n:
                j = nxt[j]
                steps.append(order[j - 1].id)
            out.append(Schedule(tuple(steps)))
    return out


def optimize_long_uniform(rules: RuleSet, width: int) -> OptimizationResult:
    """O(n^2) DP for uniform(0, W) with W >= the sum of all runtimes."""
    dist = _uniform_width(width)
    model = Stochastic(dist)
    total = rules.total_runtime
    if width < total:
        raise RegimeError(
            f"long-uniform optimizer needs W >= sum of runtimes ({width} < {total})")
    order = rules.sorted_by_quality()
    n = len(order)
    if n == 0:
        return OptimizationResult(NULL_SCHEDULE, 0.0, model, "dp-long-uniform", TableStats())
    q = [0.0] + [r.quality for r in order]
    mass = [0.0] + [dist.interval_mass(r.runtime) for r in order]

    best, nxt = _chain_table(
        order,
        lambda i: (1.0 - mass[i]) * q[i],
        lambda i, k, s_k: s_k + mass[k] * q[i] - mass[i] * q[n])
    candidates = _chain_candidates(order, best, nxt)
    schedule, value = _settle(candidates, rules,
                              lambda s: value_long_uniform(s, rules, width), dist)
    logger.debug("long-uniform DP: %d entries S(i, n)", n)
    return OptimizationResult(schedule, value, model, "dp-long-uniform",
                              TableStats(n, 1, n, total))


def optimize_short_uniform(rules: RuleSet, width: int) -> OptimizationResult:
    """Uniform(0, W) where the runtimes overrun the window (sum t_i / W > 1).

    Runs the (rule, completion time) table restricted to completion times
    <= W, so only truncated sequences are built, and reads the best entry
    from every row since the last rule of an optimum is not known.
    """
    dist = _uniform_width(width)
    model = Stochastic(dist)
    total = rules.total_runtime
    if total <= width:
        raise RegimeError(
            f"short-uniform optimizer needs sum of runtimes > W ({total} <= {width}); "
            "use the long-uniform optimizer")
    order = rules.sorted_by_quality()
    n = len(order)
    gain = 1.0 - dist.interrupt_before_array(np.arange(width + 1))
    table, back = _fill_time_table(order, gain)
    filled = int(np.isfinite(table[1:]).sum())
    candidates = [_walk_back(order, back, i, t)
                  for i, t in _tied_cells(table, range(1, n + 1))]
    schedule, value = _settle(candidates, rules,
                              lambda s: value_stochastic(s, rules, dist), dist)
    return OptimizationResult(schedule, value, model, "dp-short-uniform",
                              TableStats(n, width + 1, filled, total))


# ---------------------------------------------------------------------------
# Exponential distributions

def optimize_exponential(rules: RuleSet, beta: float) -> OptimizationResult:
    """O(n^2) DP for P_d(t) = 1 - exp(-beta t)."""
    dist = ExponentialDeadline(beta)
    model = Stochastic(dist)
    order = rules.sorted_by_quality()
    n = len(order)
    if n == 0:
        return OptimizationResult(NULL_SCHEDULE, 0.0, model, "dp-exponential", TableStats())
    q = [0.0] + [r.quality for r in order]
    p = [0.0] + [dist.interrupt_probability(r.runtime) for r in order]

    best, nxt = _chain_table(
        order,
        lambda i: q[i] * (1.0 - p[i]),
        lambda i, k, s_k: (1.0 - p[i]) * p[k] * q[i] + (1.0 - p[i]) * s_k)
    candidates = _chain_candidates(order, best, nxt)
    schedule, value = _settle(candidates, rules,
                              lambda s: value_exponential(s, rules, beta), dist)
    return OptimizationResult(schedule, value, model, "dp-exponential",
                              TableStats(n, 1, n, rules.total_runtime))


# ---------------------------------------------------------------------------

def optimize(rules: RuleSet, model: DeadlineModel) -> OptimizationResult:
    """Pick the optimizer matching the regime and distribution."""
    if isinstance(model, FixedDeadline):
        return optimize_fixed_deadline(rules, model.t_d)
    if isinstance(model, FixedTimeCost):
        return optimize_fixed_cost(rules, model.c)
    dist = model.dist
    if isinstance(dist, UniformDeadline) and dist.a == 0 and dist.width > 0 \
            and dist.width == int(dist.width):
        if is_long_uniform(dist, rules.total_runtime):
            return optimize_long_uniform(rules, int(dist.width))
        return optimize_short_uniform(rules, int(dist.width))
    if isinstance(dist, ExponentialDeadline):
        return optimize_exponential(rules, dist.beta)
    return optimize_general(rules, dist)


def check_result(result: OptimizationResult, rules: RuleSet) -> float:
    """Re-evaluate a result with the exact core value function."""
    return evaluate(result.schedule, rules, result.regime)
