from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from delibsched.rules import Rule, RuleSet

# `pytest --hypothesis-profile=acceptance` runs the property suites at full size
settings.register_profile("acceptance", max_examples=1000, deadline=None)


@pytest.fixture
def three_rules() -> RuleSet:
    return RuleSet((Rule("r1", 0.2, 2), Rule("r2", 0.5, 5), Rule("r3", 0.7, 7)))


def random_rules(rng: np.random.Generator, max_n: int = 7, max_t: int = 10) -> RuleSet:
    """n <= max_n rules with q uniform in [0, 1] and t uniform in {1..max_t}."""
    n = int(rng.integers(1, max_n + 1))
    return RuleSet(tuple(
        Rule(f"r{i}", float(rng.uniform(0, 1)), int(rng.integers(1, max_t + 1)))
        for i in range(1, n + 1)))
