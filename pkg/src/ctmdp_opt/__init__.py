"""Time-bounded reachability for continuous-time Markov decision processes and games."""

from .greedy import GreedBound, GreedyAnalysis, check_greed_bound, greed_bound, greedy_analysis, step_vector, sup_step_vectors
from .model import (
    MAX,
    MIN,
    CtmdpModel,
    Location,
    ModelError,
    TimeAbstractPath,
    Transition,
    absorb_goal,
    example_model,
    load_model,
    make_model,
    parse_model,
    serialize_model,
    validate,
)
from .reachability import PoissonWeights, ValueInterval, evaluate, evaluate_general, evaluate_uniform, poisson_weights, step_bounded
from .schedulers import (
    Counting,
    HistoryDependent,
    Positional,
    RandomizedCounting,
    Scheduler,
    SchedulerError,
    StrategyPair,
    load_scheduler,
    parse_scheduler,
    serialize_scheduler,
)
from .simulate import Estimate, estimate, sample_run
from .synthesis import BudgetExceeded, SynthesisResult, check_saddle, determinise, greedy_tail, synth_enumerate, synth_uniform_dp
from .uniformise import UniformisationResult, is_uniform, lift_scheduler, uniformise, vis_project

__version__ = "0.1.0"
