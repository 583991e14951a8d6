"""Feed-forward network with leaky-ReLU activation, trained by ADAM.

The network is a composition of L affine maps with the activation applied
between them but not after the last one. Everything runs in float64 numpy;
gradients are exact backpropagation of the mean-squared error, which the test
suite checks against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import derived_seed

#: Default negative slope of the leaky ReLU: x for x >= 0, 0.3 x for x < 0.
#: Slope 1.0 turns the activation into the identity (test hook).
NEGATIVE_SLOPE = 0.3


def leaky_relu(x, negative_slope=NEGATIVE_SLOPE):
    # max(x, a*x) equals the leaky ReLU whenever 0 <= a <= 1.
    return np.maximum(x, negative_slope * x)


def leaky_relu_grad(x, negative_slope=NEGATIVE_SLOPE):
    # The subgradient at exactly 0 is fixed to 1.
    return np.where(x >= 0, 1.0, negative_slope)


@dataclass(frozen=True)
class NetworkShape:
    """Layer widths d_0, ..., d_L with d_L = 1; depth L = number of affine maps."""

    widths: tuple

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 3:
            raise ValueError("need depth >= 2 (at least one hidden layer)")
        if widths[-1] != 1:
            raise ValueError("output width must be 1")
        if any(w < 1 for w in widths):
            raise ValueError("all widths must be >= 1")

    @property
    def depth(self):
        return len(self.widths) - 1

    @property
    def input_dim(self):
        return self.widths[0]

    @property
    def parameter_count(self):
        """N_d = sum_l d_l (1 + d_{l-1})."""
        w = self.widths
        return sum(w[i + 1] * (1 + w[i]) for i in range(len(w) - 1))

    @classmethod
    def mlp(cls, input_dim, hidden_width, depth):
        """Uniform-width network: ``depth`` affine maps, scalar output."""
        if depth < 2:
            raise ValueError("depth must be >= 2")
        return cls((input_dim,) + (hidden_width,) * (depth - 1) + (1,))


@dataclass
class NetworkParams:
    """Weights and biases of one network, plus its activation slope."""

    weights: list
    biases: list
    negative_slope: float = NEGATIVE_SLOPE

    @property
    def shape(self):
        return NetworkShape((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))

    def copy(self):
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases], self.negative_slope)


@dataclass(frozen=True)
class TrainConfig:
    """ADAM fitting configuration.

    The optimizer defaults follow common ADAM practice (1e-3, 0.9, 0.999,
    1e-8) and a 256-sample minibatch; all are overridable. ``max_norm``
    optionally clips the global parameter norm after each step (off by
    default). With ``standardize_inputs`` the training inputs are affinely
    standardized and the map is folded back into the first layer, so the
    returned parameters always predict from raw inputs.
    """

    epochs: int
    minibatch: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    standardize_inputs: bool = True
    seed: int = 0
    max_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decays must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")


@dataclass
class FitReport:
    final_mse: float
    epoch_mse: list
    samples_used: int


@dataclass
class AdamMoments:
    """First/second moment accumulators, one pair per parameter array."""

    m_weights: list
    v_weights: list
    m_biases: list
    v_biases: list

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases],
                   [np.zeros_like(b) for b in params.biases])


def init_params(shape, seed, negative_slope=NEGATIVE_SLOPE):
    """Uniform Glorot weights on +-sqrt(6/(fan_in+fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(shape.widths[:-1], shape.widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, negative_slope)


def _as_batch(x, input_dim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise ValueError(f"input must have {input_dim} features")
    return x


def forward(params, x):
    """Evaluate the network; the output layer has no activation.

    Accepts a single input of shape (d_0,) and returns a float, or a batch of
    shape (B, d_0) and returns shape (B,).
    """
    single = np.asarray(x).ndim == 1
    h = _as_batch(x, params.weights[0].shape[1])
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = leaky_relu(h, params.negative_slope)
    out = h[:, 0]
    return float(out[0]) if single else out


def loss_and_gradient(params, inputs, targets):
    """Mean-squared error over the batch and its exact parameter gradient.

    Returns ``(mse, grad)`` where ``grad`` is NetworkParams-shaped.
    """
    x = _as_batch(inputs, params.weights[0].shape[1])
    y = np.asarray(targets, dtype=np.float64)
    if x.shape[0] != y.shape[0] or y.ndim != 1:
        raise ValueError("targets must be one scalar per input row")
    if x.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    return _loss_and_gradient_core(params, x, y)


def _loss_and_gradient_core(params, x, y):
    slope = params.negative_slope
    last = len(params.weights) - 1
    activations = [x]
    pre_acts = []
    h = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre_acts.append(z)
        h = leaky_relu(z, slope) if i < last else z
        activations.append(h)

    batch = x.shape[0]
    residual = activations[-1][:, 0] - y
    mse = float(residual @ residual) / batch

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    delta = (2.0 / batch) * residual[:, None]
    for i in range(last, -1, -1):
        grad_w[i] = delta.T @ activations[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * leaky_relu_grad(pre_acts[i - 1], slope)
    return mse, NetworkParams(grad_w, grad_b, slope)


def _batch_mse(params, x, y):
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = leaky_relu(h, params.negative_slope)
    residual = h[:, 0] - y
    return float(residual @ residual) / x.shape[0]


def adam_step(params, grad, moments, step_index, config):
    """One bias-corrected ADAM update.

    Returns new parameters; the moment accumulators are updated in place and
    returned as the new moment state.
    """
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    b1, b2 = config.beta1, config.beta2
    corr1 = 1.0 - b1**step_index
    corr2 = 1.0 - b2**step_index
    rate = config.learning_rate

    def updated(value, g, m, v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        denom = np.sqrt(v / corr2)
        denom += config.epsilon
        return value - (rate / corr1) * m / denom

    new_w = [updated(w, g, m, v) for w, g, m, v in
             zip(params.weights, grad.weights, moments.m_weights, moments.v_weights)]
    new_b = [updated(b, g, m, v) for b, g, m, v in
             zip(params.biases, grad.biases, moments.m_biases, moments.v_biases)]
    new_params = NetworkParams(new_w, new_b, params.negative_slope)
    if config.max_norm is not None:
        new_params = _clip_global_norm(new_params, config.max_norm)
    return new_params, moments


def _clip_global_norm(params, max_norm):
    total = np.sqrt(sum(float(np.sum(a * a)) for a in params.weights + params.biases))
    if total <= max_norm:
        return params
    scale = max_norm / total
    return NetworkParams([w * scale for w in params.weights],
                         [b * scale for b in params.biases], params.negative_slope)


def _fold_standardization(params, mean, std, into_standardized):
    """Re-express the first layer for standardized or raw inputs (exact)."""
    w1 = params.weights[0]
    b1 = params.biases[0]
    if into_standardized:
        new_w1 = w1 * std[None, :]
        new_b1 = b1 + w1 @ mean
    else:
        new_w1 = w1 / std[None, :]
        new_b1 = b1 - (w1 / std[None, :]) @ mean
    out = params.copy()
    out.weights[0] = new_w1
    out.biases[0] = new_b1
    return out


def fit(params_init, inputs, targets, config):
    """Minibatch-ADAM fit for ``config.epochs`` full passes over the data.

    Sample order is reshuffled every epoch with a generator seeded from
    ``config.seed``. Training starts from ``params_init`` (warm starts pass
    the previous fit's result here). The returned parameters predict from raw
    inputs regardless of the standardization flag.

    Raises if the training set is empty or the MSE turns non-finite.
    """
    x = _as_batch(inputs, params_init.weights[0].shape[1])
    y = np.asarray(targets, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets differ in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")

    if config.standardize_inputs:
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        x = (x - mean) / std
        params = _fold_standardization(params_init, mean, std, into_standardized=True)
    else:
        params = params_init.copy()

    n = x.shape[0]
    batch_size = min(config.minibatch, n)
    rng = np.random.default_rng(config.seed)
    moments = AdamMoments.zeros_like(params)
    step = 0
    epoch_mse = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grad = _loss_and_gradient_core(params, x[idx], y[idx])
            step += 1
            params, moments = adam_step(params, grad, moments, step, config)
        mse = _batch_mse(params, x, y)
        if not np.isfinite(mse):
            raise FloatingPointError("training diverged: non-finite MSE")
        epoch_mse.append(mse)

    if config.standardize_inputs:
        params = _fold_standardization(params, mean, std, into_standardized=False)
    return params, FitReport(epoch_mse[-1], epoch_mse, n)


def save_params(params, file):
    """JSON checkpoint: widths, slope, then per-layer row-major weights."""
    doc = {
        "widths": list(params.shape.widths),
        "negative_slope": params.negative_slope,
        "layers": [
            {"weights": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
    }
    with open(file, "w") as fh:
        json.dump(doc, fh)


def load_params(file):
    with open(file) as fh:
        doc = json.load(fh)
    widths = doc["widths"]
    weights, biases = [], []
    for (fan_in, fan_out), layer in zip(zip(widths[:-1], widths[1:]), doc["layers"]):
        weights.append(np.asarray(layer["weights"], dtype=np.float64).reshape(fan_out, fan_in))
        biases.append(np.asarray(layer["bias"], dtype=np.float64))
    return NetworkParams(weights, biases, doc["negative_slope"])
