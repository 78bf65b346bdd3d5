"""End-to-end checks at the scale of the published experiments."""
import math

import numpy as np
import pytest

from conftest import random_rules
from delibsched.deadlines import (ExponentialDeadline, FixedDeadline, FixedTimeCost, Stochastic,
                                  TabulatedDeadline, UniformDeadline)
from delibsched.learning import hoeffding_sample_size, verify_deficit
from delibsched.mailsort import (REJECT_ID, SorterConfig, SweepKind, build_comparators,
                                 default_config, make_network_rules, sweep_experiment)
from delibsched.optimizers import optimize
from delibsched.oracle import oracle_optimize
from delibsched.rules import Schedule


def regimes(rules, rng):
    total = rules.total_runtime
    yield FixedDeadline(int(rng.integers(0, total + 2)))
    yield FixedTimeCost(float(rng.uniform(0, 0.2)))
    probs = rng.dirichlet(np.ones(total + 6))
    yield Stochastic(TabulatedDeadline(tuple(probs.tolist())))
    yield Stochastic(UniformDeadline(0, total + int(rng.integers(0, 10))))
    if total >= 2:
        yield Stochastic(UniformDeadline(0, int(rng.integers(1, total))))
    yield Stochastic(ExponentialDeadline(float(rng.uniform(0.01, 1.0))))


@pytest.mark.slow
def test_optimizers_match_oracle_on_random_instances():
    methods = set()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        rules = random_rules(rng)
        for model in regimes(rules, rng):
            result = optimize(rules, model)
            best = oracle_optimize(rules, model).best_value
            assert abs(result.value - best) <= 1e-9, (seed, str(model), str(result.schedule))
            methods.add(result.method)
    assert methods == {"singleton-deadline", "singleton-cost", "dp-general", "dp-long-uniform",
                       "dp-short-uniform", "dp-exponential"}


def test_deficit_bound_slice(three_rules):
    epsilon_q, delta_q, trials = 0.05, 0.01, 200
    assert hoeffding_sample_size(epsilon_q, delta_q) == math.ceil(math.log(200) / 0.005)
    report = verify_deficit(three_rules, UniformDeadline(0, 10), epsilon_q, delta_q, trials,
                            seed=2024)
    m = len(three_rules)
    within = trials - report.exceedances
    assert within >= (1 - m * delta_q) * trials - 3 * math.sqrt(trials * m * delta_q)
    assert all(r.deficit >= 0 for r in report.rows)


def by_point(rows):
    out = {}
    for r in rows:
        out.setdefault(r.sweep_param, {})[r.program] = r
    return out


@pytest.mark.slow
def test_bo_sequence_beats_comparators_on_poisson_arrivals():
    rows = sweep_experiment(SweepKind.POISSON_MEAN, default_config(SweepKind.POISSON_MEAN))
    for mean, progs in by_point(rows).items():
        bo = progs["bo"]
        for label in ("singleton", "fifty", "ninety"):
            other = progs[label]
            slack = 2 * math.hypot(bo.stderr, other.stderr)
            assert bo.utility_per_sec >= other.utility_per_sec - slack, (mean, label)


@pytest.mark.slow
def test_bo_sequence_is_flat_across_uniform_windows():
    base = default_config(SweepKind.UNIFORM_WIDTH)
    rows = sweep_experiment(SweepKind.UNIFORM_WIDTH, base)
    points = by_point(rows)
    bo = [p["bo"].utility_per_sec for p in points.values()]
    assert (max(bo) - min(bo)) / max(bo) <= 0.10
    for h, progs in points.items():
        slack = 2 * math.hypot(progs["bo"].stderr, progs["singleton"].stderr)
        assert progs["singleton"].utility_per_sec <= progs["bo"].utility_per_sec + slack, h
    rules = make_network_rules(base)
    for h in range(0, 19, 3):
        arrival = UniformDeadline(20 - h, 20 + h)
        assert build_comparators(rules, arrival).fifty == Schedule.of(REJECT_ID, "net20")


@pytest.mark.slow
def test_universal_program_on_faster_machine_wins():
    kind = SweepKind.UNIVERSAL_SPEEDUP
    rows = sweep_experiment(kind, default_config(kind))
    for mean, progs in by_point(rows).items():
        base, fast = progs["bo"], progs["universal-4x"]
        assert fast.accuracy >= base.accuracy - 1e-12, mean
        slack = 2 * math.hypot(base.stderr, fast.stderr)
        assert fast.utility_per_sec >= base.utility_per_sec - slack, mean


def test_config_defaults_match_the_experiments():
    config = SorterConfig()
    assert (config.lambda_, config.n_networks, config.u3, config.episodes) == \
        (0.9, 40, 0.25, 100_000)
    assert default_config(SweepKind.UNIVERSAL_SPEEDUP).lambda_ == 0.2
