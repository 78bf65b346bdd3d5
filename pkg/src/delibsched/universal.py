"""The universal program: fixed-deadline optima for doubling deadlines, run back to back.

Stage j is the best single rule for a known deadline of epsilon * 2**j. Run on
a machine k times faster, the concatenation does at least as well at every
deadline as each stage does on the base machine, so one program serves every
deadline distribution. It stops either when the herald announces the
deadline or, for deterministic time dependence, when a stage reaches an
aspiration level.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from enum import Enum
from typing import Iterable, Optional, Union

from delibsched.errors import ParameterError
from delibsched.optimizers import optimize_fixed_deadline
from delibsched.profiles import PerformanceProfile, dominates, profile_of
from delibsched.rules import RuleSet, Schedule

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class MachineSpeedup:
    """kM: every runtime t becomes ceil(t / k)."""
    k: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.k) or self.k < 1:
            raise ParameterError(f"speedup must be >= 1, got {self.k}")

    def effective(self, runtime: int) -> int:
        return math.ceil(runtime / self.k)

    def __str__(self) -> str:
        return f"{self.k:g}M"


@dataclasses.dataclass(frozen=True)
class Herald:
    """Act as soon as the deadline is announced."""


@dataclasses.dataclass(frozen=True)
class Aspiration:
    """Stop after the first stage whose quality reaches `threshold`.

    `act_time` is the time by which the reference program would have acted.
    """
    threshold: float
    act_time: int

    def __post_init__(self) -> None:
        if self.act_time < 0:
            raise ParameterError(f"act time must be >= 0, got {self.act_time}")


Termination = Union[Herald, Aspiration]


@dataclasses.dataclass(frozen=True)
class Stage:
    schedule: Schedule
    deadline: int


@dataclasses.dataclass(frozen=True)
class UniversalProgram:
    rules: RuleSet
    stages: tuple[Stage, ...]
    epsilon: int
    termination: Termination = Herald()

    def stage_quality(self, stage: Stage) -> float:
        return max((r.quality for r in stage.schedule.resolve(self.rules)), default=0.0)

    def with_termination(self, termination: Termination) -> UniversalProgram:
        return dataclasses.replace(self, termination=termination)


@dataclasses.dataclass(frozen=True)
class TimelineEvent:
    time: int
    rule_id: str
    quality: float
    stage: int


class RunStatus(Enum):
    HERALD = "herald"
    ASPIRATION = "aspiration"
    LATE = "late"
    EXHAUSTED = "exhausted"


@dataclasses.dataclass(frozen=True)
class RunOutcome:
    delivered_quality: float
    act_time: int
    status: RunStatus


@dataclasses.dataclass(frozen=True)
class DominanceCheck:
    dominates: bool
    universal: PerformanceProfile
    reference: PerformanceProfile


def build_universal(rules: RuleSet, epsilon: int,
                    termination: Termination = Herald()) -> UniversalProgram:
    """Stages for deadlines epsilon, 2 epsilon, 4 epsilon, ... up to the longest runtime."""
    shortest = rules.min_positive_runtime()
    if epsilon < 1:
        raise ParameterError(f"epsilon must be >= 1, got {epsilon}")
    if shortest is not None and epsilon > shortest:
        raise ParameterError(
            f"epsilon must not exceed the shortest runtime ({epsilon} > {shortest})")
    longest = max((r.runtime for r in rules), default=0)

    stages = []
    deadline = epsilon
    while True:
        stages.append(Stage(optimize_fixed_deadline(rules, deadline).schedule, deadline))
        if deadline >= longest:
            break
        deadline *= 2
    logger.debug("universal program: %d stages, epsilon=%d", len(stages), epsilon)
    return UniversalProgram(rules, tuple(stages), epsilon, termination)


def universal_timeline(prog: UniversalProgram,
                       speedup: MachineSpeedup = MachineSpeedup()) -> list[TimelineEvent]:
    """Completion time of every rule of every stage on kM. Λ stages take no time."""
    events = []
    t = 0
    for j, stage in enumerate(prog.stages):
        for rule in stage.schedule.resolve(prog.rules):
            t += speedup.effective(rule.runtime)
            events.append(TimelineEvent(t, rule.id, rule.quality, j))
    return events


def universal_profile(prog: UniversalProgram,
                      speedup: MachineSpeedup = MachineSpeedup()) -> PerformanceProfile:
    return PerformanceProfile.from_completions(
        (e.time, e.quality) for e in universal_timeline(prog, speedup))


def _herald_time(realization: Union[int, Iterable[bool], None]) -> Optional[int]:
    if realization is None or isinstance(realization, int):
        return realization
    for t, heard in enumerate(realization):
        if heard:
            return t
    return None


def run_universal(prog: UniversalProgram, speedup: MachineSpeedup = MachineSpeedup(),
                  deadline_realization: Union[int, Iterable[bool], None] = None) -> RunOutcome:
    """Execute the stages on kM and report what the agent acts on, and when.

    The deadline may be given as a time or as a herald stream (one boolean
    per time step, True once the deadline is announced).
    """
    events = universal_timeline(prog, speedup)
    end = events[-1].time if events else 0
    final = max((e.quality for e in events), default=0.0)
    term = prog.termination

    if isinstance(term, Aspiration):
        for e in events:
            if e.quality >= term.threshold:
                if e.time <= term.act_time:
                    return RunOutcome(e.quality, e.time, RunStatus.ASPIRATION)
                logger.warning("aspiration %.3f reached at %d, after act time %d",
                               term.threshold, e.time, term.act_time)
                on_hand = max((x.quality for x in events if x.time <= term.act_time),
                              default=0.0)
                return RunOutcome(on_hand, term.act_time, RunStatus.LATE)
        logger.warning("no stage reaches aspiration %.3f; best is %.3f", term.threshold, final)
        return RunOutcome(final, end, RunStatus.EXHAUSTED)

    t_d = _herald_time(deadline_realization)
    if t_d is None:
        return RunOutcome(final, end, RunStatus.EXHAUSTED)
    if t_d < 0:
        raise ParameterError(f"deadline must be >= 0, got {t_d}")
    # a rule finishing at the deadline instant still counts
    delivered = max((e.quality for e in events if e.time <= t_d), default=0.0)
    return RunOutcome(delivered, t_d, RunStatus.HERALD)


def check_dominance(prog: UniversalProgram, speedup: MachineSpeedup,
                    reference: Schedule) -> DominanceCheck:
    """Does the universal program on kM dominate `reference` on the base machine at every t?"""
    ours = universal_profile(prog, speedup)
    theirs = profile_of(reference, prog.rules)
    return DominanceCheck(dominates(ours, theirs), ours, theirs)


def stage_rows(prog: UniversalProgram,
               speedup: MachineSpeedup = MachineSpeedup()) -> list[tuple[int, int, str, float, int]]:
    """(stage, nominal deadline, schedule, quality, completion on kM) per stage."""
    done = {}
    for e in universal_timeline(prog, speedup):
        done[e.stage] = e.time
    rows = []
    last = 0
    for j, stage in enumerate(prog.stages):
        last = done.get(j, last)
        rows.append((j, stage.deadline, str(stage.schedule), prog.stage_quality(stage), last))
    return rows
