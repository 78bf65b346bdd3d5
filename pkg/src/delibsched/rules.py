from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from delibsched.errors import FormatError, ParameterError, ResolutionError

logger = logging.getLogger(__name__)

NULL_PROGRAM = "Λ"


@dataclasses.dataclass(frozen=True)
class Rule:
    """A decision procedure reduced to its quality and runtime.

    Attributes:
        id: Identifier, unique within a rule set.
        quality: Expected episode reward of the recommended action.
        runtime: Time steps needed to produce the recommendation.
    """
    id: str
    quality: float
    runtime: int

    def __post_init__(self) -> None:
        if not self.id or any(c.isspace() or c == "," for c in self.id):
            raise ParameterError(f"bad rule id {self.id!r}")
        if not math.isfinite(self.quality) or self.quality < 0:
            raise ParameterError(
                f"rule {self.id}: quality must be finite and >= 0, got {self.quality}")
        if isinstance(self.runtime, bool) or int(self.runtime) != self.runtime or self.runtime < 0:
            raise ParameterError(
                f"rule {self.id}: runtime must be a non-negative integer, got {self.runtime}")
        object.__setattr__(self, "quality", float(self.quality))
        object.__setattr__(self, "runtime", int(self.runtime))


@dataclasses.dataclass(frozen=True)
class RuleSet:
    """Finite ordered collection of rules fitting a machine.

    Attributes:
        rules: The rules, in file order.
        max_runtime: Capacity bound t_M; defaults to the longest runtime.
    """
    rules: tuple[Rule, ...] = ()
    max_runtime: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        seen: set[str] = set()
        for r in self.rules:
            if r.id in seen:
                raise ParameterError(f"duplicate rule id {r.id}")
            seen.add(r.id)
        if self.max_runtime is None:
            object.__setattr__(
                self, "max_runtime", max((r.runtime for r in self.rules), default=1) or 1)
        assert self.max_runtime is not None
        if self.max_runtime < 1:
            raise ParameterError(f"max_runtime must be positive, got {self.max_runtime}")
        for r in self.rules:
            if r.runtime > self.max_runtime:
                raise ParameterError(
                    f"rule {r.id} runtime {r.runtime} exceeds t_M={self.max_runtime}")

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __contains__(self, rule_id: object) -> bool:
        return any(r.id == rule_id for r in self.rules)

    def get(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise ResolutionError(f"unknown rule id {rule_id!r}")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.rules)

    @property
    def total_runtime(self) -> int:
        return sum(r.runtime for r in self.rules)

    def sorted_by_quality(self) -> list[Rule]:
        """Rules in increasing quality, then runtime, then id (stable)."""
        return sorted(self.rules, key=lambda r: (r.quality, r.runtime, r.id))

    def min_positive_runtime(self) -> Optional[int]:
        positive = [r.runtime for r in self.rules if r.runtime > 0]
        return min(positive) if positive else None

    def with_rule(self, rule: Rule) -> RuleSet:
        return RuleSet(self.rules + (rule,), max(self.max_runtime or 1, rule.runtime))

    def with_qualities(self, qualities: dict[str, float]) -> RuleSet:
        """Copy with some qualities replaced (used for learned estimates)."""
        return RuleSet(
            tuple(dataclasses.replace(r, quality=qualities.get(r.id, r.quality))
                  for r in self.rules),
            self.max_runtime,
        )

    def scaled(self, factor: float) -> RuleSet:
        return RuleSet(
            tuple(dataclasses.replace(r, quality=r.quality * factor) for r in self.rules),
            self.max_runtime,
        )


@dataclasses.dataclass(frozen=True)
class Schedule:
    """An agent program: rule ids run in order. The empty schedule is Λ."""
    steps: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(set(self.steps)) != len(self.steps):
            raise ParameterError(f"schedule repeats a rule: {' '.join(self.steps)}")

    @classmethod
    def of(cls, *ids: str) -> Schedule:
        return cls(tuple(ids))

    @classmethod
    def parse(cls, text: str) -> Schedule:
        """Parse `r1,r2`, `r1 r2`, or `Λ`/empty for the null program."""
        text = text.strip()
        if text in ("", NULL_PROGRAM, "-"):
            return cls()
        return cls(tuple(p for p in re.split(r"[,\s]+", text) if p))

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[str]:
        return iter(self.steps)

    def __str__(self) -> str:
        return " ".join(self.steps) if self.steps else NULL_PROGRAM

    def resolve(self, rules: RuleSet) -> list[Rule]:
        return [rules.get(s) for s in self.steps]

    def total_runtime(self, rules: RuleSet) -> int:
        return sum(r.runtime for r in self.resolve(rules))

    def completion_times(self, rules: RuleSet) -> list[int]:
        """Cumulative completion times T_i of each step."""
        out = []
        t = 0
        for r in self.resolve(rules):
            t += r.runtime
            out.append(t)
        return out

    def prefix(self, n: int) -> Schedule:
        return Schedule(self.steps[:n])

    def then(self, rule_id: str) -> Schedule:
        return Schedule(self.steps + (rule_id,))


NULL_SCHEDULE = Schedule()


# ---------------------------------------------------------------------------
# Rule files

def _parse_text_rules(text: str, source: str) -> list[Rule]:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in re.split(r"[,\s]+", line) if f]
        if fields[:3] == ["id", "quality", "runtime"]:
            continue  # header
        if len(fields) != 3:
            raise FormatError(f"{source}:{lineno}: expected 'id quality runtime', got {raw!r}")
        try:
            rules.append(Rule(fields[0], float(fields[1]), int(fields[2])))
        except ValueError as e:
            raise FormatError(f"{source}:{lineno}: {e}") from e
    return rules


def _parse_json_rules(text: str, source: str) -> list[Rule]:
    try:
        data = json.loads(text)
        return [Rule(str(d["id"]), float(d["quality"]), int(d["runtime"])) for d in data]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{source}: {e}") from e


def load_rules(path: Union[str, Path], max_runtime: Optional[int] = None) -> RuleSet:
    """Load a rule set from a text or JSON file.

    Text files carry one `id quality runtime` record per line (commas or
    whitespace, `#` comments). Files ending in `.json` hold a list of
    objects with the same three keys. A `preset:NAME` path resolves to a
    registered preset instead.
    """
    spec = str(path)
    if spec.startswith("preset:"):
        from delibsched.presets import RulePreset

        return RulePreset.load(spec.split(":", 1)[1])

    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".json":
        rules = _parse_json_rules(text, str(p))
    else:
        rules = _parse_text_rules(text, str(p))
    logger.debug("loaded %d rules from %s", len(rules), p)
    try:
        return RuleSet(tuple(rules), max_runtime)
    except ParameterError as e:
        raise FormatError(f"{p}: {e}") from e


def dump_rules(rules: Iterable[Rule]) -> str:
    lines = ["# id quality runtime"]
    lines.extend(f"{r.id} {r.quality!r} {r.runtime}" for r in rules)
    return "\n".join(lines) + "\n"


def save_rules(rules: RuleSet, path: Union[str, Path]) -> None:
    p = Path(path)
    if p.suffix == ".json":
        data = [{"id": r.id, "quality": r.quality, "runtime": r.runtime} for r in rules]
        p.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    else:
        p.write_text(dump_rules(rules), encoding="utf-8")
