"""Learning rule qualities from sampled episode rewards.

Rewards lie in [0, 1], so a sample mean of N rewards is within epsilon_q of
the true quality with probability 1 - delta_q once N reaches the two-sided
Hoeffding bound. A schedule optimized on estimated qualities then loses at
most 2 epsilon_q against the true optimum, with probability 1 - m delta_q
over m rules; `verify_deficit` measures how often that holds.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from typing import Callable, Union

import numpy as np

from delibsched.deadlines import DeadlineDistribution
from delibsched.errors import ParameterError
from delibsched.optimizers import optimize_general
from delibsched.rules import Rule, RuleSet
from delibsched.values import value_stochastic

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]
EpisodeSampler = Callable[[Rule, int, np.random.Generator], np.ndarray]


def hoeffding_sample_size(epsilon_q: float, delta_q: float) -> int:
    """Smallest N with N >= ln(2 / delta_q) / (2 epsilon_q^2)."""
    if not 0 < epsilon_q < 1:
        raise ParameterError(f"epsilon_q must be in (0, 1), got {epsilon_q}")
    if not 0 < delta_q < 1:
        raise ParameterError(f"delta_q must be in (0, 1), got {delta_q}")
    bound = math.log(2 / delta_q) / (2 * epsilon_q ** 2)
    # slack absorbs rounding when the bound is an exact integer
    return max(1, math.ceil(bound - 1e-9))


class DeterministicSampler:
    """Every episode pays exactly the rule's quality."""

    def __call__(self, rule: Rule, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, rule.quality)


class BernoulliSampler:
    """Episodes succeed (reward 1) with probability equal to the rule's quality."""

    def __call__(self, rule: Rule, n: int, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(n) < min(rule.quality, 1.0)).astype(float)


@dataclasses.dataclass(frozen=True)
class EstimatedRuleSet:
    rules: RuleSet
    sample_count: int
    epsilon_q: float
    delta_q: float


def _seed_sequence(seed: Seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def estimate_with_count(sampler: EpisodeSampler, rules: RuleSet, n: int, seed: Seed) -> RuleSet:
    """Replace each quality by the mean of n sampled rewards, clamped to [0, 1].

    Each rule draws from its own stream spawned from `seed`, so estimates
    are independent across rules and reproducible.
    """
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    streams = _seed_sequence(seed).spawn(len(rules))
    estimates = {}
    for rule, stream in zip(rules, streams):
        rewards = np.asarray(sampler(rule, n, np.random.default_rng(stream)), dtype=float)
        estimates[rule.id] = float(np.clip(rewards.mean(), 0.0, 1.0))
    return rules.with_qualities(estimates)


def estimate_qualities(sampler: EpisodeSampler, rules: RuleSet, epsilon_q: float,
                       delta_q: float, seed: Seed) -> EstimatedRuleSet:
    n = hoeffding_sample_size(epsilon_q, delta_q)
    return EstimatedRuleSet(estimate_with_count(sampler, rules, n, seed), n, epsilon_q, delta_q)


@dataclasses.dataclass(frozen=True)
class DeficitRow:
    trial: int
    sample_count: int
    deficit: float
    bound: float
    exceeded: bool


@dataclasses.dataclass(frozen=True)
class DeficitReport:
    rows: tuple[DeficitRow, ...]
    optimum_value: float
    allowed_rate: float

    @property
    def exceedances(self) -> int:
        return sum(r.exceeded for r in self.rows)

    @property
    def exceedance_rate(self) -> float:
        return self.exceedances / len(self.rows) if self.rows else 0.0

    @property
    def worst(self) -> float:
        return max((r.deficit for r in self.rows), default=0.0)


def verify_deficit(true_rules: RuleSet, dist: DeadlineDistribution, epsilon_q: float,
                   delta_q: float, trials: int, seed: Seed,
                   sampler: EpisodeSampler = BernoulliSampler()) -> DeficitReport:
    """Per trial: learn qualities, optimize on them, score the result with the true ones."""
    if trials < 0:
        raise ParameterError(f"trials must be >= 0, got {trials}")
    best = optimize_general(true_rules, dist).value
    bound = 2 * epsilon_q
    rows = []
    for trial, stream in enumerate(_seed_sequence(seed).spawn(trials)):
        learned = estimate_qualities(sampler, true_rules, epsilon_q, delta_q, stream)
        chosen = optimize_general(learned.rules, dist).schedule
        deficit = best - value_stochastic(chosen, true_rules, dist)
        if -1e-12 < deficit < 0:
            deficit = 0.0
        rows.append(DeficitRow(trial, learned.sample_count, deficit, bound, deficit > bound))
    report = DeficitReport(tuple(rows), best, len(true_rules) * delta_q)
    logger.info("deficit check: %d/%d trials above %.3f (allowed rate %.3f)",
                report.exceedances, trials, bound, report.allowed_rate)
    return report
