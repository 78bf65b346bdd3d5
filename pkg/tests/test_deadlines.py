import math

import numpy as np
import pytest
from scipy import stats

from delibsched.deadlines import (DeadlineDistribution, ExponentialDeadline, FixedDeadline,
                                  FixedTimeCost, Stochastic, TabulatedDeadline, UniformDeadline,
                                  is_long_uniform, load_pmf, parse_model, point_mass, poisson)
from delibsched.errors import FormatError, ParameterError


def test_uniform_cdf_matches_worked_example():
    d = UniformDeadline(0, 10)
    assert d.cdf(2) == pytest.approx(0.2)
    assert d.cdf(7) == pytest.approx(0.7)
    assert d.cdf(14) == 1.0
    assert d.cdf(-1) == 0.0
    assert d.interrupt_before(7) == d.cdf(7)
    assert d.mean() == 5


def test_zero_width_uniform_is_a_point_mass():
    d = UniformDeadline(20, 20)
    assert d.interrupt_before(20) == 0.0
    assert d.interrupt_before(21) == 1.0
    assert d.cdf(20) == 1.0


def test_uniform_validation():
    with pytest.raises(ParameterError):
        UniformDeadline(5, 2)
    with pytest.raises(ParameterError):
        UniformDeadline(-1, 2)


def test_exponential():
    d = ExponentialDeadline(0.1)
    assert d.cdf(2) == pytest.approx(1 - math.exp(-0.2))
    assert d.cdf(0) == 0.0
    assert d.mean() == pytest.approx(10)
    with pytest.raises(ParameterError):
        ExponentialDeadline(0)


def test_exponential_discretization_keeps_integer_interrupt_probabilities():
    d = ExponentialDeadline(0.3)
    tab = d.discretized()
    for t in range(0, 30):
        assert tab.interrupt_before(t) == pytest.approx(d.interrupt_before(t), abs=1e-9)


def test_tabulated_completion_beats_deadline():
    d = TabulatedDeadline((0.0, 0.5, 0.5))
    # D is 1 or 2; a step finishing at 1 is never cut off
    assert d.interrupt_before(1) == 0.0
    assert d.interrupt_before(2) == 0.5
    assert d.interrupt_before(3) == 1.0
    assert d.cdf(1) == 0.5
    assert d.pmf(2) == 0.5
    assert d.mean() == pytest.approx(1.5)


def test_tabulated_array_matches_scalar():
    d = poisson(4)
    times = np.arange(-1, 30)
    expected = [d.interrupt_before(float(t)) for t in times]
    assert np.allclose(d.interrupt_before_array(times), expected)


def test_tabulated_validation():
    with pytest.raises(ParameterError):
        TabulatedDeadline((0.5, 0.4))
    with pytest.raises(ParameterError):
        TabulatedDeadline((1.2, -0.2))
    with pytest.raises(ParameterError):
        TabulatedDeadline(())


def test_poisson_table():
    d = poisson(9)
    assert d.cdf(4) == pytest.approx(stats.poisson.cdf(4, 9), abs=1e-9)
    assert d.mean() == pytest.approx(9, abs=1e-6)
    assert 1 - d.cdf(d.last - 1) < 1e-9


def test_excluding_zero():
    d = poisson(1).excluding_zero()
    assert d.pmf(0) == 0.0
    assert sum(d.probs) == pytest.approx(1.0)
    assert d.pmf(1) == pytest.approx(math.exp(-1) / (1 - math.exp(-1)))
    assert point_mass(3).excluding_zero() == point_mass(3)
    with pytest.raises(ParameterError):
        point_mass(0).excluding_zero()


def test_sampling_is_seeded():
    d = poisson(9)
    a = d.sample(np.random.default_rng(3), 100)
    b = d.sample(np.random.default_rng(3), 100)
    assert np.array_equal(a, b)
    assert UniformDeadline(2, 4).sample(np.random.default_rng(0), 50).min() >= 2


@pytest.mark.parametrize("spec, kind", [
    ("uniform:0:10", UniformDeadline),
    ("exp:0.1", ExponentialDeadline),
    ("poisson:9", TabulatedDeadline),
    ("point:5", TabulatedDeadline),
])
def test_parse(spec, kind):
    d = DeadlineDistribution.parse(spec)
    assert isinstance(d, kind)
    assert d.to_spec() == spec


@pytest.mark.parametrize("spec", ["weibull:2", "uniform:1", "exp:x", "poisson:-1"])
def test_parse_errors(spec):
    with pytest.raises(ParameterError):
        DeadlineDistribution.parse(spec)


def test_load_pmf(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("# time probability\n1 0.25\n3 0.75\n")
    d = load_pmf(path)
    assert d.probs == (0.0, 0.25, 0.0, 0.75)
    assert DeadlineDistribution.parse(f"pmf:{path}").probs == d.probs
    path.write_text("1 0.25 9\n")
    with pytest.raises(FormatError):
        load_pmf(path)


def test_regimes():
    assert parse_model("deadline", deadline=8) == FixedDeadline(8)
    assert parse_model("cost", cost=0.1) == FixedTimeCost(0.1)
    assert parse_model("stochastic", dist="uniform:0:10") == Stochastic(UniformDeadline(0, 10))
    with pytest.raises(ParameterError):
        parse_model("deadline")
    with pytest.raises(ParameterError):
        parse_model("sometime")
    with pytest.raises(ParameterError):
        FixedDeadline(-1)
    with pytest.raises(ParameterError):
        Stochastic(UniformDeadline(0, 10), heralded=False)


def test_is_long_uniform():
    assert is_long_uniform(UniformDeadline(0, 14), 14)
    assert not is_long_uniform(UniformDeadline(0, 10), 14)
    assert not is_long_uniform(UniformDeadline(1, 20), 14)


def test_interval_mass():
    assert UniformDeadline(0, 14).interval_mass(7) == 0.5
    assert UniformDeadline(2, 6).interval_mass(1) == 0.25
    with pytest.raises(ParameterError):
        UniformDeadline(3, 3).interval_mass(1)
