"""Exhaustive reference optimizer for small rule sets.

No pruning: every candidate schedule is evaluated with the exact value
function for the model so the result is obviously correct.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
from enum import Enum
from typing import Iterator, Optional

from delibsched.deadlines import (DeadlineDistribution, DeadlineModel, FixedDeadline,
                                  as_stochastic, point_mass)
from delibsched.errors import OracleCapError
from delibsched.optimizers import is_tied, prefer, truncate
from delibsched.rules import NULL_SCHEDULE, RuleSet, Schedule
from delibsched.values import evaluate

logger = logging.getLogger(__name__)

SORTED_CAP = 12
PERMUTATION_CAP = 7


class SearchSpace(Enum):
    SORTED_ONLY = "sorted-only"
    ALL_PERMUTATIONS = "all-permutations"


@dataclasses.dataclass(frozen=True)
class OracleReport:
    best_value: float
    best_schedules: tuple[Schedule, ...]
    candidates_evaluated: int
    preferred: Schedule = NULL_SCHEDULE
    table: Optional[tuple[tuple[Schedule, float], ...]] = None


def candidates(rules: RuleSet, space: SearchSpace) -> Iterator[Schedule]:
    """Λ first, then every subset (sorted) or every ordered subset, in id order."""
    if space is SearchSpace.SORTED_ONLY:
        order = [r.id for r in rules.sorted_by_quality()]
        if len(order) > SORTED_CAP:
            raise OracleCapError(
                f"sorted-only oracle is capped at n <= {SORTED_CAP} rules, got {len(order)}")
        yield NULL_SCHEDULE
        for size in range(1, len(order) + 1):
            for combo in itertools.combinations(order, size):
                yield Schedule(combo)
    else:
        ids = sorted(rules.ids)
        if len(ids) > PERMUTATION_CAP:
            raise OracleCapError(
                f"all-permutations oracle is capped at n <= {PERMUTATION_CAP} rules, got {len(ids)}")
        yield NULL_SCHEDULE
        for size in range(1, len(ids) + 1):
            for perm in itertools.permutations(ids, size):
                yield Schedule(perm)


def _truncation_dist(model: DeadlineModel) -> Optional[DeadlineDistribution]:
    """Distribution against which trailing no-op steps are dropped, if any."""
    if isinstance(model, FixedDeadline):
        return point_mass(model.t_d)
    return as_stochastic(model)


def oracle_optimize(rules: RuleSet, model: DeadlineModel,
                    search_space: SearchSpace = SearchSpace.SORTED_ONLY,
                    include_table: bool = False) -> OracleReport:
    """Evaluate every candidate schedule and return all maximizers."""
    table = [(s, evaluate(s, rules, model)) for s in candidates(rules, search_space)]
    best = max(v for _, v in table)
    winners = tuple(s for s, v in table if is_tied(v, best))
    logger.debug("oracle: %d candidates, %d co-optimal at %.9f",
                 len(table), len(winners), best)
    dist = _truncation_dist(model)
    pool = [truncate(s, rules, dist) for s in winners] if dist is not None else list(winners)
    return OracleReport(
        best_value=best,
        best_schedules=winners,
        candidates_evaluated=len(table),
        preferred=prefer(pool, rules),
        table=tuple(table) if include_table else None,
    )
