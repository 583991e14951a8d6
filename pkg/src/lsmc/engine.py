"""Backward policy iteration over a simulated path set.

The engine walks the exercise dates from N-1 down to 1. At each date it fits
a continuation-value regressor on the in-the-money paths (targets are the
pathwise discounted cash flows realised under the policy already built for
later dates), then exercises every in-the-money path whose payoff is at least
the prediction. Out-of-the-money paths always continue; so do all paths at a
date whose in-the-money set is empty. The time-0 price is
``max(Z_0, mean_m cash_flow_m)``.

The same stopping rule, unrolled forward with a frozen stack of regressors,
is exposed as the cascade (:func:`cascade_payoff`, :func:`cascade_cash_flows`)
and reproduces the engine's cash flows exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import neural, polynomial
from .rng import derived_seed

#: Prediction stood in for dates without a fitted regressor: larger than any
#: payoff, so the comparison Z >= prediction never exercises there.
_NEVER_EXERCISE = 1e300


@dataclass
class RegressorHandle:
    """A fitted continuation-value approximator for one exercise date."""

    kind: str
    model: object
    fit_report: object = None

    def predict(self, x):
        if self.kind == "neural":
            return neural.forward(self.model, x)
        if self.kind == "polynomial":
            return polynomial.predict(self.model, x)
        raise ValueError(f"unknown regressor kind {self.kind!r}")


class NeuralRegressorFactory:
    """Per-date network fits chained by warm starts.

    The first fitted date (N-1) starts from fresh Glorot parameters; every
    earlier date starts from the previous date's fitted parameters.
    ``first_fit_epochs`` optionally gives the first date its own epoch count
    while all later dates keep ``train_config.epochs``.
    """

    kind = "neural"

    def __init__(self, hidden_width, depth, train_config, negative_slope=neural.NEGATIVE_SLOPE,
                 first_fit_epochs=None):
        self.hidden_width = hidden_width
        self.depth = depth
        self.train_config = train_config
        self.negative_slope = negative_slope
        self.first_fit_epochs = first_fit_epochs
        self._params = None

    def fit_date(self, date_index, inputs, targets):
        inputs = np.atleast_2d(inputs)
        config = replace(self.train_config, seed=derived_seed(self.train_config.seed, date_index))
        if self._params is None:
            # Tag 0 is free for the fresh initialization; dates are >= 1.
            shape = neural.NetworkShape.mlp(inputs.shape[1], self.hidden_width, self.depth)
            start = neural.init_params(shape, derived_seed(self.train_config.seed, 0),
                                       self.negative_slope)
            if self.first_fit_epochs is not None:
                config = replace(config, epochs=self.first_fit_epochs)
        else:
            start = self._params
        params, report = neural.fit(start, inputs, targets, config)
        self._params = params
        return RegressorHandle("neural", params, report)


class PolynomialRegressorFactory:
    """Fresh least-squares fit at every date (no warm start needed)."""

    kind = "polynomial"

    def __init__(self, degree, ridge=1e-10):
        self.degree = degree
        self.ridge = ridge

    def fit_date(self, date_index, inputs, targets):
        inputs = np.atleast_2d(inputs)
        basis = polynomial.PolynomialBasis.create(inputs.shape[1], self.degree)
        model = polynomial.fit_least_squares(basis, inputs, targets, self.ridge)
        residual = polynomial.predict(model, inputs) - targets
        mse = float(residual @ residual) / len(targets)
        return RegressorHandle("polynomial", model, mse)


@dataclass
class BackwardResult:
    """Fitted regressors and the pathwise stopping policy they induce.

    ``regressors[n]`` is the handle for date n (1..N-1), ``None`` where the
    in-the-money set was empty; entries 0 and N are always ``None``.
    ``stop_index[m]`` lies in 1..N and ``cash_flows[m]`` equals the discounted
    payoff at that date.
    """

    regressors: list
    stop_index: np.ndarray
    cash_flows: np.ndarray
    itm_counts: np.ndarray
    train_mse: np.ndarray


@dataclass
class PriceEstimate:
    """Time-0 estimate: max(immediate, continuation mean).

    ``standard_error`` is the plain Monte Carlo SE of the continuation mean,
    a diagnostic only; repetition spread is what the tables report.
    """

    price: float
    continuation_mean: float
    immediate_value: float
    standard_error: float


def backward_induction(paths, factory, min_itm_paths=1):
    """Fit the per-date regressors and the induced stopping policy.

    ``factory.fit_date(n, inputs, targets)`` is called once per date in
    descending date order and must return a :class:`RegressorHandle`.
    Exercise uses ``Z >= prediction`` (ties exercise); the in-the-money test
    is a strictly positive payoff.
    """
    if paths.payoffs is None:
        raise ValueError("paths need evaluated payoffs")
    z = paths.payoffs
    x = paths.states
    n_dates = paths.grid.dates_count
    n_paths = paths.paths_count

    cash_flows = z[:, n_dates].copy()
    stop_index = np.full(n_paths, n_dates, dtype=np.int64)
    regressors = [None] * (n_dates + 1)
    itm_counts = np.zeros(n_dates + 1, dtype=np.int64)
    train_mse = np.full(n_dates + 1, np.nan)

    for n in range(n_dates - 1, 0, -1):
        itm = z[:, n] > 0.0
        itm_counts[n] = int(itm.sum())
        if itm_counts[n] < min_itm_paths:
            continue
        handle = factory.fit_date(n, x[itm, n, :], cash_flows[itm])
        regressors[n] = handle
        if handle.fit_report is not None:
            final = getattr(handle.fit_report, "final_mse", handle.fit_report)
            train_mse[n] = float(final)
        # Predict on every path so re-running the cascade sees byte-identical
        # values; only the in-the-money ones can exercise.
        prediction = handle.predict(x[:, n, :])
        exercise = itm & (z[:, n] >= prediction)
        stop_index[exercise] = n
        cash_flows[exercise] = z[exercise, n]

    return BackwardResult(regressors, stop_index, cash_flows, itm_counts, train_mse)


def price_at_zero(result, immediate_value):
    """Monte Carlo price max(Z_0, mean of pathwise cash flows)."""
    cf = result.cash_flows
    m = cf.size
    continuation = float(cf.mean())
    se = float(cf.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return PriceEstimate(max(float(immediate_value), continuation), continuation,
                         float(immediate_value), se)


def _predictions(regressor, x_dates):
    if regressor is None:
        return np.full(x_dates.shape[0], _NEVER_EXERCISE)
    return regressor.predict(x_dates)


def cascade_cash_flows(regressors, z, x):
    """Unroll the stopping rule forward for a frozen regressor stack.

    Vectorized over paths; predictions are taken on all paths at each date
    exactly as in :func:`backward_induction`, so on the training path set the
    returned ``(cash_flows, stop_index)`` match it bit for bit. Used as-is
    for out-of-sample pricing on fresh paths.
    """
    return _cascade_from(regressors, z, x, 1)


def cascade_payoff(regressors, z_path, x_path, start):
    """Cash flow of one path when stopping is frozen to ``regressors``.

    Recursion from date ``start`` (1..N): exercise at the first date n with a
    strictly positive payoff satisfying ``z_n >= prediction``; dates with no
    regressor never exercise; date N pays ``z_N``. Depends only on dates
    >= ``start``.
    """
    n_dates = len(z_path) - 1
    if not 1 <= start <= n_dates:
        raise ValueError("start must lie in 1..N")
    for n in range(start, n_dates):
        if z_path[n] <= 0.0:
            continue
        regressor = regressors[n] if n < len(regressors) else None
        if regressor is None:
            continue
        if z_path[n] >= regressor.predict(np.asarray(x_path[n], dtype=np.float64)):
            return float(z_path[n])
    return float(z_path[n_dates])


def price_out_of_sample(result, fresh_paths):
    """Price fresh paths with the frozen regressors (bias diagnostic mode)."""
    if fresh_paths.payoffs is None:
        raise ValueError("paths need evaluated payoffs")
    cf, _ = cascade_cash_flows(result.regressors, fresh_paths.payoffs, fresh_paths.states)
    proxy = BackwardResult(result.regressors, None, cf, None, None)
    return price_at_zero(proxy, fresh_paths.payoffs[0, 0])


def lemma_flip_gap(regressors_a, regressors_b, paths, start):
    """Pathwise sides of the stopping-flip bound for two regressor stacks.

    Left side: |F_start(a) - F_start(b)|. Right side:
    ``(sum_{i>=start} |Z_i|) * sum_{i=start}^{N-1} 1{|Z_i - pred_b| <=
    |pred_a - pred_b|}``. Missing regressors predict the never-exercise
    constant on both sides.
    """
    if paths.payoffs is None:
        raise ValueError("paths need evaluated payoffs")
    z = paths.payoffs
    x = paths.states
    n_dates = z.shape[1] - 1
    cf_a, _ = _cascade_from(regressors_a, z, x, start)
    cf_b, _ = _cascade_from(regressors_b, z, x, start)
    lhs = np.abs(cf_a - cf_b)

    flips = np.zeros(z.shape[0])
    for n in range(start, n_dates):
        pred_a = _predictions(regressors_a[n] if n < len(regressors_a) else None, x[:, n, :])
        pred_b = _predictions(regressors_b[n] if n < len(regressors_b) else None, x[:, n, :])
        flips += (np.abs(z[:, n] - pred_b) <= np.abs(pred_a - pred_b)).astype(np.float64)
    rhs = np.abs(z[:, start:]).sum(axis=1) * flips
    return lhs, rhs


def _cascade_from(regressors, z, x, start):
    n_paths, n_dates_plus_1 = z.shape
    n_dates = n_dates_plus_1 - 1
    stop_index = np.full(n_paths, n_dates, dtype=np.int64)
    undecided = np.ones(n_paths, dtype=bool)
    for n in range(start, n_dates):
        regressor = regressors[n] if n < len(regressors) else None
        prediction = _predictions(regressor, x[:, n, :])
        exercise = undecided & (z[:, n] > 0.0) & (z[:, n] >= prediction)
        stop_index[exercise] = n
        undecided &= ~exercise
    return z[np.arange(n_paths), stop_index], stop_index
