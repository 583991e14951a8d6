"""Ground-truth 1-d pricers: CRR binomial tree and Black-Scholes closed forms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class TreeSpec:
    """CRR lattice for a Bermudan put with continuous dividend yield.

    ``exercise_dates`` are the early/terminal exercise times within [0, T];
    each is snapped to the nearest tree level (exact when ``steps`` is a
    multiple of the number of equally spaced dates).
    """

    steps: int
    spot: float
    vol: float
    dividend: float
    rate: float
    strike: float
    maturity: float
    exercise_dates: np.ndarray

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        dates = np.atleast_1d(np.asarray(self.exercise_dates, dtype=np.float64))
        if dates.size < 1 or dates.min() < 0 or dates.max() > self.maturity + 1e-12:
            raise ValueError("exercise dates must lie in [0, maturity]")
        object.__setattr__(self, "exercise_dates", dates)


def crr_bermudan_price(spec):
    """Backward induction on the CRR lattice, exercising at the given dates.

    ``u = exp(vol sqrt(dt))``, ``d = 1/u``, risk-neutral up-probability
    ``(exp((r - dividend) dt) - d) / (u - d)``. Uses a single reusable level
    array, O(steps) memory.
    """
    if spec.vol <= 0:
        raise ValueError("the lattice needs vol > 0")
    steps = spec.steps
    dt = spec.maturity / steps
    up = np.exp(spec.vol * np.sqrt(dt))
    down = 1.0 / up
    prob = (np.exp((spec.rate - spec.dividend) * dt) - down) / (up - down)
    if not 0.0 <= prob <= 1.0:
        raise ValueError("risk-neutral probability outside [0, 1]; use more steps")
    disc = np.exp(-spec.rate * dt)

    exercise_level = np.zeros(steps + 1, dtype=bool)
    exercise_level[np.rint(spec.exercise_dates / dt).astype(np.int64)] = True

    j = np.arange(steps + 1, dtype=np.float64)
    prices = spec.spot * up ** (2.0 * j - steps)
    values = np.maximum(spec.strike - prices, 0.0)
    if not exercise_level[steps]:
        values[:] = 0.0  # maturity is not an exercise date

    buf = np.empty(steps + 1)
    for level in range(steps, 0, -1):
        np.multiply(values[1:level + 1], prob, out=buf[:level])
        buf[:level] += (1.0 - prob) * values[:level]
        buf[:level] *= disc
        values[:level] = buf[:level]
        if exercise_level[level - 1]:
            nodes = spec.spot * up ** (2.0 * np.arange(level, dtype=np.float64) - (level - 1))
            np.maximum(values[:level], spec.strike - nodes, out=values[:level])
    return float(values[0])


def _d1_d2(spot, strike, vol, dividend, rate, maturity):
    v = vol * np.sqrt(maturity)
    d1 = (np.log(spot / strike) + (rate - dividend + 0.5 * vol * vol) * maturity) / v
    return d1, d1 - v


def bs_european_put(spot, strike, vol, dividend, rate, maturity):
    """Black-Scholes European put with continuous dividend yield."""
    if vol < 0 or maturity < 0:
        raise ValueError("vol and maturity must be >= 0")
    if vol == 0 or maturity == 0:
        forward = spot * np.exp((rate - dividend) * maturity)
        return float(np.exp(-rate * maturity) * max(strike - forward, 0.0))
    d1, d2 = _d1_d2(spot, strike, vol, dividend, rate, maturity)
    return float(strike * np.exp(-rate * maturity) * ndtr(-d2)
                 - spot * np.exp(-dividend * maturity) * ndtr(-d1))


def bs_european_call(spot, strike, vol, dividend, rate, maturity):
    """Black-Scholes European call with continuous dividend yield."""
    if vol < 0 or maturity < 0:
        raise ValueError("vol and maturity must be >= 0")
    if vol == 0 or maturity == 0:
        forward = spot * np.exp((rate - dividend) * maturity)
        return float(np.exp(-rate * maturity) * max(forward - strike, 0.0))
    d1, d2 = _d1_d2(spot, strike, vol, dividend, rate, maturity)
    return float(spot * np.exp(-dividend * maturity) * ndtr(d1)
                 - strike * np.exp(-rate * maturity) * ndtr(d2))
