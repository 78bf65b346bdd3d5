"""Deadline distributions and the three real-time regimes.

Time is the non-negative integers. Every distribution answers three
questions about the deadline D at an integer time t:

    cdf(t)               P(D <= t)
    interrupt_before(t)  P(D < t), the chance a step completing at t is cut off
    pmf(t)               P(t <= D < t + 1)

A step that completes exactly when the deadline arrives still counts, which
is why the value functions consume `interrupt_before` rather than `cdf`. For
the continuous kinds (uniform, exponential) the two coincide at integers.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from delibsched.errors import FormatError, ParameterError

logger = logging.getLogger(__name__)

PMF_TOLERANCE = 1e-9
TAIL_MASS = 1e-12


class DistKind(Enum):
    UNIFORM = "uniform"
    EXPONENTIAL = "exp"
    POISSON = "poisson"
    EXPLICIT = "pmf"


class DeadlineDistribution:
    """Base class for stochastic deadline distributions on integer time."""

    kind: DistKind

    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def interrupt_before(self, t: float) -> float:
        raise NotImplementedError

    def interrupt_before_array(self, times: np.ndarray) -> np.ndarray:
        return np.array([self.interrupt_before(float(t)) for t in times], dtype=float)

    def pmf(self, t: int) -> float:
        return self.interrupt_before(t + 1) - self.interrupt_before(t)

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def excluding_zero(self) -> DeadlineDistribution:
        """Condition on D >= 1, matching a simulator that redraws zeros."""
        return self

    def to_spec(self) -> str:
        raise NotImplementedError

    def discretized(self, tail: float = TAIL_MASS) -> TabulatedDeadline:
        """Tabulate pmf(0), pmf(1), ... until the remaining mass is below `tail`."""
        probs = []
        t = 0
        while 1.0 - self.interrupt_before(t) >= tail:
            probs.append(self.pmf(t))
            t += 1
            if t > 10_000_000:
                raise ParameterError(f"{self.to_spec()}: tail does not vanish")
        total = sum(probs)
        return TabulatedDeadline(
            tuple(p / total for p in probs), label=f"{self.to_spec()}|discrete")

    def __str__(self) -> str:
        return self.to_spec()

    @staticmethod
    def parse(spec: str) -> DeadlineDistribution:
        """Parse `uniform:a:b`, `exp:beta`, `poisson:mu`, `pmf:path` or `point:t`."""
        name, _, rest = spec.strip().partition(":")
        try:
            if name == "uniform":
                a, b = rest.split(":")
                return UniformDeadline(float(a), float(b))
            if name in ("exp", "exponential"):
                return ExponentialDeadline(float(rest))
            if name == "poisson":
                return poisson(float(rest))
            if name == "pmf":
                return load_pmf(rest)
            if name == "point":
                return point_mass(int(rest))
        except ValueError as e:
            raise ParameterError(f"bad distribution spec {spec!r}: {e}") from e
        raise ParameterError(
            f"unknown distribution {spec!r} "
            "(expected uniform:a:b, exp:beta, poisson:mu, pmf:path or point:t)")


@dataclasses.dataclass(frozen=True)
class UniformDeadline(DeadlineDistribution):
    """Continuous uniform deadline on [a, b]; a == b is a point mass."""
    a: float
    b: float
    kind: DistKind = dataclasses.field(default=DistKind.UNIFORM, init=False, repr=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a < 0 or self.b < self.a:
            raise ParameterError(f"uniform needs 0 <= a <= b, got a={self.a}, b={self.b}")

    @property
    def width(self) -> float:
        return self.b - self.a

    def cdf(self, t: float) -> float:
        if self.b == self.a:
            return 1.0 if t >= self.a else 0.0
        return min(1.0, max(0.0, (t - self.a) / (self.b - self.a)))

    def interrupt_before(self, t: float) -> float:
        if self.b == self.a:
            return 1.0 if t > self.a else 0.0
        return min(1.0, max(0.0, (t - self.a) / (self.b - self.a)))

    def interrupt_before_array(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.b == self.a:
            return (times > self.a).astype(float)
        return np.clip((times - self.a) / (self.b - self.a), 0.0, 1.0)

    def interval_mass(self, t: float) -> float:
        """Mass t / W of an interval of length t, the P_d(t_i) of the long-uniform form."""
        if self.width == 0:
            raise ParameterError("interval mass undefined for a zero-width uniform")
        return t / self.width

    def mean(self) -> float:
        return (self.a + self.b) / 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.b == self.a:
            return np.full(size, self.a, dtype=float)
        return rng.uniform(self.a, self.b, size)

    def excluding_zero(self) -> DeadlineDistribution:
        if self.b == 0:
            raise ParameterError("uniform:0:0 has no mass above zero")
        return self

    def to_spec(self) -> str:
        return f"uniform:{self.a:g}:{self.b:g}"


@dataclasses.dataclass(frozen=True)
class ExponentialDeadline(DeadlineDistribution):
    """Exponential deadline, P_d(t) = 1 - exp(-beta t)."""
    beta: float
    kind: DistKind = dataclasses.field(default=DistKind.EXPONENTIAL, init=False, repr=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta) or self.beta <= 0:
            raise ParameterError(f"exponential needs beta > 0, got {self.beta}")

    def cdf(self, t: float) -> float:
        return 0.0 if t <= 0 else -math.expm1(-self.beta * t)

    def interrupt_before(self, t: float) -> float:
        return self.cdf(t)

    def interrupt_before_array(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return np.where(times <= 0, 0.0, -np.expm1(-self.beta * np.maximum(times, 0.0)))

    def interrupt_probability(self, runtime: int) -> float:
        """p_i = 1 - exp(-beta t_i), the chance a step of this length is cut off."""
        return self.cdf(runtime)

    def mean(self) -> float:
        return 1.0 / self.beta

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.beta, size)

    def to_spec(self) -> str:
        return f"exp:{self.beta:g}"


@dataclasses.dataclass(frozen=True)
class TabulatedDeadline(DeadlineDistribution):
    """Deadline on integer times 0..len(probs)-1 with explicit probabilities."""
    probs: tuple[float, ...]
    label: str = "pmf"
    kind: DistKind = DistKind.EXPLICIT
    _cum: tuple[float, ...] = dataclasses.field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise ParameterError(f"{self.label}: empty pmf")
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ParameterError(f"{self.label}: negative or non-finite probability")
        total = math.fsum(probs)
        if abs(total - 1.0) > PMF_TOLERANCE:
            raise ParameterError(f"{self.label}: pmf sums to {total}, not 1")
        object.__setattr__(self, "_cum", tuple(np.cumsum(probs).tolist()))

    @property
    def last(self) -> int:
        return len(self.probs) - 1

    def cdf(self, t: float) -> float:
        if t < 0:
            return 0.0
        i = int(math.floor(t))
        return 1.0 if i >= self.last else self._cum[i]

    def interrupt_before(self, t: float) -> float:
        # integer support: D < t  <=>  D <= ceil(t) - 1
        return self.cdf(math.ceil(t) - 1)

    def interrupt_before_array(self, times: np.ndarray) -> np.ndarray:
        idx = np.ceil(np.asarray(times, dtype=float)).astype(int) - 1
        cum = np.append(np.asarray(self._cum), 1.0)
        out = cum[np.clip(idx, 0, self.last)]
        out = np.where(idx >= self.last, 1.0, out)
        return np.where(idx < 0, 0.0, out)

    def pmf(self, t: int) -> float:
        return self.probs[t] if 0 <= t <= self.last else 0.0

    def mean(self) -> float:
        return math.fsum(t * p for t, p in enumerate(self.probs))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p = np.asarray(self.probs)
        return rng.choice(len(p), size=size, p=p / p.sum()).astype(float)

    def excluding_zero(self) -> DeadlineDistribution:
        if self.probs[0] == 0.0:
            return self
        rest = 1.0 - self.probs[0]
        if rest <= 0:
            raise ParameterError(f"{self.label}: all mass at time 0")
        return TabulatedDeadline(
            (0.0,) + tuple(p / rest for p in self.probs[1:]),
            label=f"{self.label}|nonzero", kind=self.kind)

    def to_spec(self) -> str:
        return self.label


def poisson(mu: float) -> TabulatedDeadline:
    """Poisson(mu) deadline, tabulated until the tail mass drops below 1e-12."""
    if not math.isfinite(mu) or mu <= 0:
        raise ParameterError(f"poisson needs mu > 0, got {mu}")
    upper = int(stats.poisson.isf(TAIL_MASS, mu)) + 1
    probs = stats.poisson.pmf(np.arange(upper + 1), mu)
    return TabulatedDeadline(
        tuple((probs / probs.sum()).tolist()), label=f"poisson:{mu:g}", kind=DistKind.POISSON)


def point_mass(t: int) -> TabulatedDeadline:
    if t < 0:
        raise ParameterError(f"point mass needs t >= 0, got {t}")
    return TabulatedDeadline((0.0,) * t + (1.0,), label=f"point:{t}")


def load_pmf(path: Union[str, Path]) -> TabulatedDeadline:
    """Read a two-column `time probability` table; missing times have mass 0."""
    p = Path(path)
    table: dict[int, float] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"{p}:{lineno}: expected 'time probability', got {raw!r}")
        try:
            t, prob = int(fields[0]), float(fields[1])
        except ValueError as e:
            raise FormatError(f"{p}:{lineno}: {e}") from e
        if t < 0:
            raise FormatError(f"{p}:{lineno}: negative time {t}")
        table[t] = table.get(t, 0.0) + prob
    if not table:
        raise FormatError(f"{p}: no entries")
    probs = [0.0] * (max(table) + 1)
    for t, prob in table.items():
        probs[t] = prob
    return TabulatedDeadline(tuple(probs), label=f"pmf:{p}")


# ---------------------------------------------------------------------------
# Regimes

@dataclasses.dataclass(frozen=True)
class FixedDeadline:
    """Known deadline t_d; the agent acts with whatever has completed by then."""
    t_d: int

    def __post_init__(self) -> None:
        if self.t_d < 0:
            raise ParameterError(f"deadline must be >= 0, got {self.t_d}")

    def __str__(self) -> str:
        return f"deadline:{self.t_d}"


@dataclasses.dataclass(frozen=True)
class FixedTimeCost:
    """No deadline; every time step costs c utility."""
    c: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.c) or self.c < 0:
            raise ParameterError(f"time cost must be >= 0, got {self.c}")

    def __str__(self) -> str:
        return f"cost:{self.c:g}"


@dataclasses.dataclass(frozen=True)
class Stochastic:
    """Deadline drawn from `dist`, announced by a herald."""
    dist: DeadlineDistribution
    heralded: bool = True

    def __post_init__(self) -> None:
        if not self.heralded:
            raise ParameterError("non-heralded stochastic deadlines are not supported")

    def __str__(self) -> str:
        return f"stochastic:{self.dist.to_spec()}"


DeadlineModel = Union[FixedDeadline, FixedTimeCost, Stochastic]


def is_long_uniform(dist: DeadlineDistribution, total_runtime: int) -> bool:
    """A uniform window at least as long as the summed runtimes (Sum P_d(t_i) <= 1)."""
    return (isinstance(dist, UniformDeadline) and dist.a == 0 and dist.width > 0
            and total_runtime <= dist.width)


def as_stochastic(model: DeadlineModel) -> Optional[DeadlineDistribution]:
    return model.dist if isinstance(model, Stochastic) else None


def parse_model(regime: str, deadline: Optional[int] = None, cost: Optional[float] = None,
                dist: Optional[str] = None) -> DeadlineModel:
    """Build a regime from `deadline`, `cost` or `stochastic` plus its one parameter."""
    if regime == "deadline":
        if deadline is None:
            raise ParameterError("a deadline is required for the deadline regime")
        return FixedDeadline(int(deadline))
    if regime == "cost":
        if cost is None:
            raise ParameterError("a time cost is required for the cost regime")
        return FixedTimeCost(float(cost))
    if regime == "stochastic":
        if not dist:
            raise ParameterError("a distribution spec is required for the stochastic regime")
        return Stochastic(DeadlineDistribution.parse(dist))
    raise ParameterError(f"unknown regime {regime!r} (expected deadline, cost or stochastic)")
