"""Bermudan option pricing by least-squares Monte Carlo.

Backward policy iteration over simulated paths with the continuation value
regressed either by a small feed-forward network or by multivariate
polynomial least squares, plus the binomial-tree and closed-form oracles used
to verify the prices.
"""

from .engine import (
    BackwardResult,
    NeuralRegressorFactory,
    PolynomialRegressorFactory,
    PriceEstimate,
    RegressorHandle,
    backward_induction,
    cascade_cash_flows,
    cascade_payoff,
    lemma_flip_gap,
    price_at_zero,
    price_out_of_sample,
)
from .harness import ExperimentConfig, RunStats, emit_table, run_experiment, run_suite
from .models import (
    BlackScholesSpec,
    ExerciseGrid,
    HestonSpec,
    PathSet,
    PayoffSpec,
    build_correlation_root,
    dump_paths,
    evaluate_payoffs,
    load_paths,
    reduce_geometric_to_1d,
    simulate_black_scholes,
    simulate_heston,
)
from .neural import (
    FitReport,
    NetworkParams,
    NetworkShape,
    TrainConfig,
    adam_step,
    fit,
    forward,
    init_params,
    loss_and_gradient,
)
from .oracles import TreeSpec, bs_european_call, bs_european_put, crr_bermudan_price
from .polynomial import LinearModel, PolynomialBasis, expand_features, fit_least_squares, predict

__all__ = [name for name in dir() if not name.startswith("_")]
