"""Prediction of ``Y_{t+1}`` under an intervention ``do(X_t := x)``.

The predictor combines a causal coefficient ``beta`` for the intervened
regressor with least-squares coefficients on the lagged history, fit to the
residual process ``Y_{s+1} - beta X_s``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .estimators import ols_fit
from .exceptions import DimensionError
from .var_model import TimeSeriesSample


@dataclass(frozen=True, eq=False)
class InterventionPredictor:
    """``beta x + sum_k alpha_yx[k] X_{t-k} + sum_j alpha_yy[j] Y_{t-j}``.

    ``alpha_yx`` has shape ``(m, d_Y, d_X)`` for lags ``1..m``;
    ``alpha_yy`` has shape ``(l + 1, d_Y, d_Y)`` for lags ``0..l``.
    """

    beta: np.ndarray
    m: int
    l: int  # noqa: E741
    alpha_yx: np.ndarray
    alpha_yy: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        d_Y, d_X = beta.shape
        ayx = np.asarray(self.alpha_yx, dtype=float).reshape(self.m, d_Y, d_X)
        ayy = np.asarray(self.alpha_yy, dtype=float).reshape(self.l + 1, d_Y, d_Y)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_yx", ayx)
        object.__setattr__(self, "alpha_yy", ayy)

    @property
    def n_coefficients(self) -> int:
        d_Y, d_X = self.beta.shape
        return self.m * d_X + (self.l + 1) * d_Y

    def to_json(self) -> str:
        return json.dumps({"beta": self.beta.tolist(), "m": self.m, "l": self.l,
                           "alpha_yx": self.alpha_yx.tolist(), "alpha_yy": self.alpha_yy.tolist()})


def _lag_design(sample, x_lags, y_lags, K):
    """Rows ``X_{s-k}`` for ``k`` in ``x_lags`` then ``Y_{s-j}`` for ``j`` in ``y_lags``, ``s = K..T-2``."""
    T = sample.T
    X, Y = sample.X, sample.Y
    parts = [X[:, K - k: T - 1 - k] for k in x_lags] + [Y[:, K - j: T - 1 - j] for j in y_lags]
    return np.vstack(parts)


def fit_intervention_predictor(beta, sample: TimeSeriesSample, m: int = 2, l: int = 1) -> InterventionPredictor:  # noqa: E741
    """Regress ``Y_{s+1} - beta X_s`` on ``X_{s-1..s-m}`` and ``Y_{s..s-l}``.

    Time points whose lags would reach before the sample start are dropped.
    """
    if m < 0 or l < 0:
        raise ValueError("lag orders must be nonnegative")
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    lay = sample.layout
    if beta.shape != (lay.d_Y, lay.d_X):
        raise DimensionError(f"beta must be {lay.d_Y} x {lay.d_X}")
    K = max(m, l)
    T = sample.T
    if T <= K + 1:
        raise DimensionError(f"T={T} too small for lag orders m={m}, l={l}")
    r = sample.Y[:, K + 1:] - beta @ sample.X[:, K:T - 1]
    D = _lag_design(sample, range(1, m + 1), range(0, l + 1), K)
    fit = ols_fit(r, D)
    d_X, d_Y = lay.d_X, lay.d_Y
    C = fit.coef
    ayx = np.stack([C[:, k * d_X:(k + 1) * d_X] for k in range(m)]) if m else np.zeros((0, d_Y, d_X))
    off = m * d_X
    ayy = np.stack([C[:, off + j * d_Y: off + (j + 1) * d_Y] for j in range(l + 1)])
    return InterventionPredictor(beta, m, l, ayx, ayy,
                                 {"n_used": fit.diagnostics["n_used"],
                                  "rank_deficient": fit.diagnostics["rank_deficient"]})


def history_at(sample: TimeSeriesSample, t: int, m: int, l: int):  # noqa: E741
    """``(X_{t-1..t-m}, Y_{t..t-l})`` as ``(d_X, m)`` and ``(d_Y, l+1)`` matrices; ``t`` is 0-based."""
    if t - max(m, l) < 0 or t >= sample.T:
        raise DimensionError(f"time {t} lacks the required history")
    xl = np.stack([sample.X[:, t - k] for k in range(1, m + 1)], axis=1) if m else np.zeros((sample.layout.d_X, 0))
    yl = np.stack([sample.Y[:, t - j] for j in range(l + 1)], axis=1)
    return xl, yl


def predict_under_intervention(p: InterventionPredictor, x_lags, y_lags, x) -> np.ndarray:
    """Predicted ``Y_{t+1}`` under ``do(X_t := x)``.

    ``x_lags[:, k-1] = X_{t-k}`` for ``k = 1..m`` and ``y_lags[:, j] = Y_{t-j}``
    for ``j = 0..l``.
    """
    d_Y, d_X = p.beta.shape
    x_lags = np.asarray(x_lags, dtype=float).reshape(d_X, -1)
    y_lags = np.asarray(y_lags, dtype=float).reshape(d_Y, -1)
    if x_lags.shape[1] != p.m or y_lags.shape[1] != p.l + 1:
        raise DimensionError(f"history must hold {p.m} X lags and {p.l + 1} Y lags")
    out = p.beta @ np.atleast_1d(np.asarray(x, dtype=float))
    for k in range(p.m):
        out = out + p.alpha_yx[k] @ x_lags[:, k]
    for j in range(p.l + 1):
        out = out + p.alpha_yy[j] @ y_lags[:, j]
    return out


@dataclass(frozen=True, eq=False)
class OlsPredictor:
    """Regression of ``Y_{t+1}`` on ``X_t, ..., X_{t-m}`` and ``Y_t, ..., Y_{t-l}``.

    Under ``do(X_t := x)`` the fitted coefficient of ``X_t`` is applied to ``x``.
    """

    coef_x: np.ndarray  # (m + 1, d_Y, d_X), lags 0..m
    coef_y: np.ndarray  # (l + 1, d_Y, d_Y), lags 0..l
    m: int
    l: int  # noqa: E741

    def as_intervention_predictor(self) -> InterventionPredictor:
        return InterventionPredictor(self.coef_x[0], self.m, self.l, self.coef_x[1:], self.coef_y)


def fit_ols_predictor(sample: TimeSeriesSample, m: int = 2, l: int = 1) -> OlsPredictor:  # noqa: E741
    """Baseline ``Y_{t+1} ~ X_t + ... + X_{t-m} + Y_t + ... + Y_{t-l}``."""
    K = max(m, l)
    T = sample.T
    if T <= K + 1:
        raise DimensionError(f"T={T} too small for lag orders m={m}, l={l}")
    D = _lag_design(sample, range(0, m + 1), range(0, l + 1), K)
    fit = ols_fit(sample.Y[:, K + 1:], D)
    d_X, d_Y = sample.layout.d_X, sample.layout.d_Y
    C = fit.coef
    cx = np.stack([C[:, k * d_X:(k + 1) * d_X] for k in range(m + 1)])
    off = (m + 1) * d_X
    cy = np.stack([C[:, off + j * d_Y: off + (j + 1) * d_Y] for j in range(l + 1)])
    return OlsPredictor(cx, cy, m, l)


def predict_ols(p: OlsPredictor, x_lags, y_lags, x) -> np.ndarray:
    """OLS prediction with ``X_t`` replaced by the intervention value ``x``."""
    return predict_under_intervention(p.as_intervention_predictor(), x_lags, y_lags, x)
