"""Market models, exercise grids, payoffs and simulated path sets.

Simulation fills a :class:`PathSet` with the Markov state ``X`` observed on
the exercise grid; :func:`evaluate_payoffs` then adds the payoff tensor ``Z``
discounted to time 0. Black-Scholes paths use exact log-normal stepping
between exercise dates; Heston paths use an Euler scheme with the variance
clamped at zero before every square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import path_normals

PAYOFF_KINDS = ("put_1d", "basket_put", "max_call", "max_put", "geometric_put", "heston_put")


@dataclass(frozen=True)
class ExerciseGrid:
    """Exercise dates 0 = T_0 < T_1 < ... < T_N = maturity (in years)."""

    maturity: float
    dates: np.ndarray
    substeps_per_interval: int = 1

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype=np.float64)
        object.__setattr__(self, "dates", dates)
        if dates.ndim != 1 or dates.size < 2:
            raise ValueError("grid needs at least dates [0, maturity]")
        if dates[0] != 0.0:
            raise ValueError("first grid date must be 0")
        if np.any(np.diff(dates) <= 0):
            raise ValueError("grid dates must be strictly increasing")
        if abs(dates[-1] - self.maturity) > 1e-12 * max(1.0, self.maturity):
            raise ValueError("last grid date must equal the maturity")
        if self.substeps_per_interval < 1:
            raise ValueError("substeps_per_interval must be >= 1")

    @property
    def dates_count(self):
        """Number of exercise dates N (date 0 not counted)."""
        return self.dates.size - 1

    @classmethod
    def equally_spaced(cls, maturity, dates_count, substeps_per_interval=1):
        if dates_count < 1:
            raise ValueError("dates_count must be >= 1")
        dates = np.linspace(0.0, maturity, dates_count + 1)
        return cls(maturity, dates, substeps_per_interval)


@dataclass(frozen=True)
class BlackScholesSpec:
    """d-dimensional Black-Scholes model with equicorrelated drivers.

    ``spot``, ``vol`` and ``dividend`` broadcast from scalars to dimension
    ``dim``. The correlation matrix has ones on the diagonal and
    ``correlation`` elsewhere, admissible on (-1/(d-1), 1].
    """

    dim: int
    spot: np.ndarray
    vol: np.ndarray
    dividend: np.ndarray
    rate: float
    correlation: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name in ("spot", "vol", "dividend"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=np.float64), (self.dim,)).copy()
            object.__setattr__(self, name, arr)
        if np.any(self.vol < 0):
            raise ValueError("volatilities must be >= 0")
        if np.any(self.spot <= 0):
            raise ValueError("spots must be > 0")
        if self.dim > 1:
            lo = -1.0 / (self.dim - 1)
            if not (lo < self.correlation <= 1.0):
                raise ValueError(f"correlation must lie in ({lo}, 1] for dim={self.dim}")

    def correlation_matrix(self):
        gamma = np.full((self.dim, self.dim), self.correlation)
        np.fill_diagonal(gamma, 1.0)
        return gamma


@dataclass(frozen=True)
class HestonSpec:
    """Heston model; ``variance0`` and ``theta`` are variances, not vols."""

    spot: float
    variance0: float
    kappa: float
    theta: float
    xi: float
    correlation: float
    rate: float

    def __post_init__(self):
        if self.spot <= 0:
            raise ValueError("spot must be > 0")
        if self.variance0 < 0 or self.theta < 0 or self.kappa < 0 or self.xi < 0:
            raise ValueError("variance0, theta, kappa and xi must be >= 0")
        if abs(self.correlation) > 1:
            raise ValueError("|correlation| must be <= 1")


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff family, strike, and weights for the basket kind.

    Kinds: ``put_1d`` (K - S)+, ``basket_put`` (K - sum_i w_i S_i)+,
    ``max_call`` (max_i S_i - K)+, ``max_put`` (K - max_i S_i)+,
    ``geometric_put`` (K - (prod_j S_j)^(1/d))+, ``heston_put`` (K - S)+ on
    the price component of the (S, variance) state.
    """

    kind: str
    strike: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if not (self.strike > 0):
            raise ValueError("strike must be > 0")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite")
            object.__setattr__(self, "weights", w)


@dataclass
class PathSet:
    """Simulated states and discounted payoffs on the exercise grid.

    ``states`` has shape (M, N+1, r_dim): path, date index (0..N), state
    component. ``payoffs`` has shape (M, N+1) and holds e^{-r T_n} * payoff,
    i.e. cash amounts already discounted to time 0; it is ``None`` until
    :func:`evaluate_payoffs` fills it.
    """

    grid: ExerciseGrid
    states: np.ndarray
    payoffs: np.ndarray | None = None

    @property
    def paths_count(self):
        return self.states.shape[0]

    @property
    def state_dim(self):
        return self.states.shape[2]


def build_correlation_root(spec):
    """Lower-triangular L with L @ L.T equal to the equicorrelation matrix.

    For ``correlation == 1`` the matrix is only positive semidefinite and the
    rank-1 Cholesky limit (a column of ones) is returned.
    """
    d = spec.dim
    if d == 1:
        return np.ones((1, 1))
    if spec.correlation == 1.0:
        root = np.zeros((d, d))
        root[:, 0] = 1.0
        return root
    return np.linalg.cholesky(spec.correlation_matrix())


def simulate_black_scholes(spec, grid, n_paths, seed):
    """Simulate risk-neutral Black-Scholes states on the exercise grid.

    Stepping is exact between consecutive grid dates:
    ``S_{n+1} = S_n * exp((r - delta - vol^2/2) dt + vol * (L G)_j sqrt(dt))``
    so no sub-stepping is required. Bit-identical for identical
    (spec, grid, n_paths, seed).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    d = spec.dim
    n_dates = grid.dates_count
    root = build_correlation_root(spec)
    normals = path_normals(seed, n_paths, n_dates * d).reshape(n_paths, n_dates, d)
    correlated = normals @ root.T

    dt = np.diff(grid.dates)
    drift = (spec.rate - spec.dividend - 0.5 * spec.vol**2)[None, :] * dt[:, None]
    diffusion = spec.vol[None, None, :] * np.sqrt(dt)[None, :, None] * correlated

    log_steps = drift[None, :, :] + diffusion
    states = np.empty((n_paths, n_dates + 1, d))
    states[:, 0, :] = spec.spot
    states[:, 1:, :] = spec.spot[None, None, :] * np.exp(np.cumsum(log_steps, axis=1))
    return PathSet(grid, states)


def simulate_heston(spec, grid, n_paths, seed):
    """Simulate Heston states (S, variance) with a clamped Euler scheme.

    Each grid interval is split into ``grid.substeps_per_interval`` Euler
    steps. The variance recursion is
    ``v_{k+1} = v_k + kappa (theta - v_k) h + xi sqrt(max(v_k, 0) h) G1`` and
    log-S uses the same clamped variance, so a square root of a negative
    number is never evaluated. Only exercise-date states are recorded.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n_dates = grid.dates_count
    sub = grid.substeps_per_interval
    normals = path_normals(seed, n_paths, n_dates * sub * 2).reshape(n_paths, n_dates * sub, 2)

    rho = spec.correlation
    rho_perp = np.sqrt(1.0 - rho * rho)
    states = np.empty((n_paths, n_dates + 1, 2))
    states[:, 0, 0] = spec.spot
    states[:, 0, 1] = spec.variance0

    log_s = np.full(n_paths, np.log(spec.spot))
    v = np.full(n_paths, spec.variance0)
    k = 0
    for n in range(n_dates):
        h = (grid.dates[n + 1] - grid.dates[n]) / sub
        sqrt_h = np.sqrt(h)
        for _ in range(sub):
            g1 = normals[:, k, 0]
            g2 = normals[:, k, 1]
            v_plus = np.maximum(v, 0.0)
            vol = np.sqrt(v_plus)
            dw_price = (rho * g1 + rho_perp * g2) * sqrt_h
            log_s = log_s + (spec.rate - 0.5 * v_plus) * h + vol * dw_price
            v = v + spec.kappa * (spec.theta - v) * h + spec.xi * vol * sqrt_h * g1
            k += 1
        states[:, n + 1, 0] = np.exp(log_s)
        states[:, n + 1, 1] = v
    return PathSet(grid, states)


def _immediate_payoffs(states, payoff):
    """Undiscounted payoff at every path/date, shape (M, N+1)."""
    kind = payoff.kind
    strike = payoff.strike
    d = states.shape[2]
    if kind == "put_1d":
        if d != 1:
            raise ValueError("put_1d needs a 1-dimensional state")
        return np.maximum(strike - states[:, :, 0], 0.0)
    if kind == "heston_put":
        if d != 2:
            raise ValueError("heston_put needs the (S, variance) state")
        return np.maximum(strike - states[:, :, 0], 0.0)
    if kind == "basket_put":
        w = payoff.weights if payoff.weights is not None else np.full(d, 1.0 / d)
        if w.shape != (d,):
            raise ValueError("basket weights must match the state dimension")
        return np.maximum(strike - states @ w, 0.0)
    if kind == "max_call":
        return np.maximum(states.max(axis=2) - strike, 0.0)
    if kind == "max_put":
        return np.maximum(strike - states.max(axis=2), 0.0)
    if kind == "geometric_put":
        geo = np.exp(np.log(states).mean(axis=2))
        return np.maximum(strike - geo, 0.0)
    raise ValueError(f"unknown payoff kind {kind!r}")


def evaluate_payoffs(paths, payoff, rate):
    """Return a copy of ``paths`` with Z[m][n] = e^{-r T_n} payoff(X[m][n])."""
    immediate = _immediate_payoffs(paths.states, payoff)
    discount = np.exp(-rate * paths.grid.dates)
    return replace(paths, payoffs=immediate * discount[None, :])


def reduce_geometric_to_1d(spec):
    """Equivalent 1-d parameters (spot, vol, dividend) of a geometric basket.

    The d-dimensional geometric put equals a 1-d put with
    ``S0 = (prod_j S0_j)^(1/d)``, ``vol = sqrt(v' Gamma v) / d`` and
    ``dividend = mean_j(delta_j + vol_j^2 / 2) - vol^2 / 2``.
    """
    d = spec.dim
    spot_eq = float(np.exp(np.log(spec.spot).mean()))
    gamma = spec.correlation_matrix()
    vol_eq = float(np.sqrt(spec.vol @ gamma @ spec.vol) / d)
    div_eq = float(np.mean(spec.dividend + 0.5 * spec.vol**2) - 0.5 * vol_eq**2)
    return spot_eq, vol_eq, div_eq


def dump_paths(paths, file):
    """Write a PathSet as little-endian float64: header {M, N+1, r_dim}, X, Z."""
    if paths.payoffs is None:
        raise ValueError("evaluate payoffs before dumping")
    m, n_plus_1, r_dim = paths.states.shape
    header = np.array([m, n_plus_1, r_dim], dtype="<f8")
    with open(file, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(paths.states, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(paths.payoffs, dtype="<f8").tobytes())


def load_paths(file, grid):
    """Read a PathSet written by :func:`dump_paths`; grid supplies the dates."""
    with open(file, "rb") as fh:
        header = np.frombuffer(fh.read(24), dtype="<f8")
        m, n_plus_1, r_dim = (int(v) for v in header)
        if n_plus_1 != grid.dates_count + 1:
            raise ValueError("grid does not match the dumped date count")
        states = np.frombuffer(fh.read(8 * m * n_plus_1 * r_dim), dtype="<f8")
        payoffs = np.frombuffer(fh.read(8 * m * n_plus_1), dtype="<f8")
    return PathSet(grid, states.reshape(m, n_plus_1, r_dim).copy(),
                   payoffs.reshape(m, n_plus_1).copy())
