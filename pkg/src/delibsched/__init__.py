"""Bounded-optimal deliberation scheduling for episodic real-time agents."""
from delibsched.deadlines import (DeadlineDistribution, ExponentialDeadline, FixedDeadline,
                                  FixedTimeCost, Stochastic, TabulatedDeadline, UniformDeadline,
                                  parse_model, point_mass, poisson)
from delibsched.errors import (DelibError, FormatError, OracleCapError, ParameterError,
                               RegimeError, ResolutionError)
from delibsched.optimizers import (OptimizationResult, normalize, optimize, optimize_exponential,
                                   optimize_fixed_cost, optimize_fixed_deadline, optimize_general,
                                   optimize_long_uniform, optimize_short_uniform, truncate)
from delibsched.oracle import OracleReport, SearchSpace, oracle_optimize
from delibsched.profiles import PerformanceProfile, dominates, profile_of
from delibsched.rules import NULL_SCHEDULE, Rule, RuleSet, Schedule, load_rules, save_rules
from delibsched.universal import (Aspiration, Herald, MachineSpeedup, UniversalProgram,
                                  build_universal, check_dominance, run_universal)
from delibsched.values import (evaluate, value_exponential, value_fixed_cost,
                               value_fixed_deadline, value_long_uniform, value_stochastic)

__version__ = "0.1.0"
