from __future__ import annotations

import dataclasses
from bisect import bisect_right
from typing import Iterable

from delibsched.errors import ParameterError
from delibsched.rules import RuleSet, Schedule

DOMINANCE_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class PerformanceProfile:
    """Right-open step function Q(t): quality on hand if interrupted at t.

    `breakpoints` holds (time, quality) pairs with both coordinates strictly
    increasing; Q(t) is 0 before the first breakpoint.
    """
    breakpoints: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        bps = tuple((int(t), float(q)) for t, q in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        for (t0, q0), (t1, q1) in zip(bps, bps[1:]):
            if t1 <= t0 or q1 <= q0:
                raise ParameterError(f"profile breakpoints not strictly increasing: {bps}")

    @classmethod
    def from_completions(cls, completions: Iterable[tuple[int, float]]) -> PerformanceProfile:
        """Build from (completion time, quality) events, keeping only improvements."""
        bps: list[tuple[int, float]] = []
        best = 0.0
        for t, q in sorted(completions, key=lambda e: e[0]):
            if q <= best:
                continue
            best = q
            if bps and bps[-1][0] == t:
                bps[-1] = (t, q)
            else:
                bps.append((t, q))
        return cls(tuple(bps))

    @property
    def times(self) -> list[int]:
        return [t for t, _ in self.breakpoints]

    def __call__(self, t: float) -> float:
        i = bisect_right(self.times, t)
        return self.breakpoints[i - 1][1] if i else 0.0

    def rows(self, horizon: int) -> list[tuple[int, float]]:
        """Q(t) at every integer t in 0..horizon, for plotting."""
        return [(t, self(t)) for t in range(horizon + 1)]


def profile_of(schedule: Schedule, rules: RuleSet) -> PerformanceProfile:
    """Q_s(t) = max{q_i : T_i <= t} for the steps of `schedule`."""
    steps = schedule.resolve(rules)
    times = schedule.completion_times(rules)
    return PerformanceProfile.from_completions(
        (t, r.quality) for t, r in zip(times, steps))


def dominates(p1: PerformanceProfile, p2: PerformanceProfile) -> bool:
    """True iff p1(t) >= p2(t) for every t >= 0."""
    checkpoints = sorted({0, *p1.times, *p2.times})
    return all(p1(t) >= p2(t) - DOMINANCE_TOLERANCE for t in checkpoints)


def earliest_difference(p1: PerformanceProfile, p2: PerformanceProfile) -> int:
    """+1 if p1 is higher where the two first differ, -1 if p2 is, 0 if equal."""
    for t in sorted({0, *p1.times, *p2.times}):
        a, b = p1(t), p2(t)
        if abs(a - b) > DOMINANCE_TOLERANCE:
            return 1 if a > b else -1
    return 0
