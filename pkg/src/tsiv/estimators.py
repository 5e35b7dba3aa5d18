"""Conditional and nuisance IV estimators, OLS, and time-series alignment.

All data matrices are ``(rows, n)``: one column per (aligned) observation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .exceptions import DimensionError, RankDeficientError, SingularWeightError
from .var_model import InstrumentalVar1, TimeSeriesSample, cross_covariance

RANK_TOL = 1e-10
COND_MAX = 1e12
RIDGE = 1e-10
WEIGHTS = ("tsls", "identity", "efficient")


def _rows(a, n=None):
    if a is None:
        return np.zeros((0, n if n is not None else 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DimensionError("data blocks must be 1-d or 2-d")
    return a


@dataclass(frozen=True, eq=False)
class IvProblem:
    """Aligned data for ``Y = beta X + alpha Z + error`` with instruments ``I`` given ``B``.

    Parameters
    ----------
    Y, X, I : array_like
        Response, regressors and instruments, each ``(rows, n)``.
    Z, B : array_like, optional
        Nuisance regressors and conditioning variables; empty if omitted.
    weight : {"tsls", "identity", "efficient"} or ndarray
        Weight matrix choice.  ``"efficient"`` runs a second step with the
        inverse Bartlett long-run covariance of the first-step moments.
    bandwidth : int, optional
        Bartlett bandwidth for ``"efficient"``; default ``floor(4 (n/100)^(2/9))``.
    """

    Y: np.ndarray
    X: np.ndarray
    I: np.ndarray  # noqa: E741
    Z: np.ndarray = None
    B: np.ndarray = None
    weight: object = "tsls"
    bandwidth: int | None = None

    def __post_init__(self):
        Y = _rows(self.Y)
        n = Y.shape[1]
        X, I = _rows(self.X), _rows(self.I)
        Z, B = _rows(self.Z, n), _rows(self.B, n)
        for name, a in (("X", X), ("I", I), ("Z", Z), ("B", B)):
            if a.shape[1] != n:
                raise DimensionError(f"{name} has {a.shape[1]} columns, Y has {n}")
        if X.shape[0] < 1 or I.shape[0] < 1:
            raise DimensionError("X and I need at least one row")
        w = self.weight
        if isinstance(w, str):
            if w not in WEIGHTS:
                raise ValueError(f"unknown weight {w!r}")
        else:
            w = np.asarray(w, dtype=float)
            if w.shape != (I.shape[0], I.shape[0]):
                raise DimensionError("custom weight must be d_I x d_I")
        for name, a in (("Y", Y), ("X", X), ("I", I), ("Z", Z), ("B", B), ("weight", w)):
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.Y.shape[1]

    @property
    def d_X(self) -> int:
        return self.X.shape[0]

    @property
    def d_Z(self) -> int:
        return self.Z.shape[0]

    @property
    def X_tilde(self) -> np.ndarray:
        return np.vstack([self.X, self.Z])

    def replace(self, **kw) -> "IvProblem":
        base = dict(Y=self.Y, X=self.X, I=self.I, Z=self.Z, B=self.B, weight=self.weight,
                    bandwidth=self.bandwidth)
        base.update(kw)
        return IvProblem(**base)


@dataclass
class Estimate:
    """Fitted effect ``beta_hat`` (``d_Y x d_X``) and nuisance coefficients ``alpha_hat``."""

    beta_hat: np.ndarray
    alpha_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    asymptotic_cov: np.ndarray | None = None

    def to_json(self, spec=None, seed=None) -> str:
        diag = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()}
        obj = {"beta_hat": self.beta_hat.tolist(), "alpha_hat": self.alpha_hat.tolist(),
               "diagnostics": diag, "spec": spec, "seed": seed, "version": __version__}
        if self.asymptotic_cov is not None:
            obj["asymptotic_cov"] = self.asymptotic_cov.tolist()
        return json.dumps(obj)


def residualize(target, B=None) -> np.ndarray:
    """Residuals of ``target`` after least-squares regression on ``B`` and a constant.

    With ``B`` empty the target is just centered.  Rank-deficient ``B`` is
    handled by the pseudo-inverse.
    """
    target = _rows(target)
    r = target - target.mean(axis=1, keepdims=True)
    if B is None:
        return r
    B = _rows(B, target.shape[1])
    if B.shape[0] == 0:
        return r
    if B.shape[1] != target.shape[1]:
        raise DimensionError("B and target must have the same number of columns")
    Bc = B - B.mean(axis=1, keepdims=True)
    coef = r @ np.linalg.pinv(Bc)
    return r - coef @ Bc


def default_bandwidth(n: int) -> int:
    return int(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def longrun_covariance(g, L: int | None = None) -> np.ndarray:
    """Bartlett-kernel long-run covariance of a ``(k, n)`` moment sequence.

    ``sum_{|h| <= L} (1 - |h|/(L+1)) Gamma_h`` with ``Gamma_h = (1/n) sum_t g_t g_{t-h}'``
    on the demeaned sequence.
    """
    g = _rows(g)
    n = g.shape[1]
    L = default_bandwidth(n) if L is None else int(L)
    if L < 0:
        raise ValueError("bandwidth must be nonnegative")
    if L >= n:
        raise ValueError(f"bandwidth {L} must be smaller than the sample size {n}")
    u = g - g.mean(axis=1, keepdims=True)
    S = u @ u.T / n
    for h in range(1, L + 1):
        G = u[:, h:] @ u[:, :-h].T / n
        S += (1.0 - h / (L + 1.0)) * (G + G.T)
    return 0.5 * (S + S.T)


def _tsls_weight(Cii, diag):
    cond = np.linalg.cond(Cii)
    if not np.isfinite(cond) or cond > COND_MAX:
        d = Cii.shape[0]
        Cii = Cii + RIDGE * np.trace(Cii) / d * np.eye(d)
        diag["ridge"] = True
        if np.linalg.cond(Cii) > 1.0 / np.finfo(float).eps:
            raise SingularWeightError("instrument covariance is singular")
    return np.linalg.inv(Cii)


def _solve(Cyi, Cxi, W):
    M = Cxi @ W @ Cxi.T
    try:
        return np.linalg.solve(M.T, (Cyi @ W @ Cxi.T).T).T
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError("weighted normal equations are singular") from exc


def civ_fit(p: IvProblem, cov: str | None = None) -> Estimate:
    """GMM instrumental-variable fit on residualized data.

    ``b = E[r_Y r_I'] W E[r_I r_X'] (E[r_X r_I'] W E[r_I r_X'])^{-1}`` with
    ``X`` the stack of regressors and nuisance regressors; the first ``d_X``
    columns of ``b`` form ``beta_hat``.

    Parameters
    ----------
    cov : {None, "iid", "hac"}
        Plug-in asymptotic covariance of ``sqrt(n) (b_hat - b)``.
    """
    n = p.n
    dxt = p.d_X + p.d_Z
    if n < 2 or n <= dxt:
        raise DimensionError(f"need n > d_X + d_Z and n >= 2, got n={n}")
    if p.I.shape[0] < dxt:
        raise RankDeficientError(f"{p.I.shape[0]} instruments cannot identify {dxt} coefficients")
    rI = residualize(p.I, p.B)
    rX = residualize(p.X_tilde, p.B)
    rY = residualize(p.Y, p.B)
    Cyi = rY @ rI.T / n
    Cxi = rX @ rI.T / n
    Cii = rI @ rI.T / n
    sv = np.linalg.svd(Cxi, compute_uv=False)
    diag = {"n_used": n, "singular_values": sv, "weight": p.weight if isinstance(p.weight, str) else "custom",
            "ridge": False}
    if sv[0] == 0 or sv[-1] < RANK_TOL * sv[0]:
        raise RankDeficientError("instrument-regressor covariance lacks full row rank")
    diag["condition_number"] = float(sv[0] / sv[-1])
    if isinstance(p.weight, np.ndarray):
        W = p.weight
    elif p.weight == "identity":
        W = np.eye(Cii.shape[0])
    else:
        W = _tsls_weight(Cii, diag)
    b = _solve(Cyi, Cxi, W)
    if isinstance(p.weight, str) and p.weight == "efficient":
        u = rY - b @ rX
        g = (u[:, None, :] * rI[None, :, :]).reshape(-1, n)
        S = longrun_covariance(g, p.bandwidth)
        W = _tsls_weight(S, diag)
        b = _solve(Cyi, Cxi, W)
    if not np.all(np.isfinite(b)):
        raise RankDeficientError("non-finite estimate")
    acov = None
    if cov is not None:
        u = rY - b @ rX
        if cov == "iid":
            S = float(np.mean(u ** 2)) * Cii
        elif cov == "hac":
            S = longrun_covariance(u * rI, p.bandwidth)
        else:
            raise ValueError(f"unknown covariance type {cov!r}")
        G = Cxi
        bread = np.linalg.inv(G @ W @ G.T)
        acov = bread @ G @ W @ S @ W @ G.T @ bread
    return Estimate(b[:, :p.d_X].copy(), b[:, p.d_X:].copy(), diag, acov)


# ---------------------------------------------------------------------------
# Time-series alignment


@dataclass(frozen=True)
class Term:
    """Block ``block`` at lag ``lag``, restricted to ``components`` (all if None)."""

    block: str
    lag: int
    components: tuple | None = None

    def __post_init__(self):
        if self.lag < 0:
            raise ValueError("lags must be nonnegative")
        if self.components is not None:
            object.__setattr__(self, "components", tuple(int(c) for c in self.components))


def _terms(items):
    return tuple(t if isinstance(t, Term) else Term(*t) for t in items)


@dataclass(frozen=True)
class AlignmentSpec:
    """Which lagged blocks form the response, regressors, nuisance, instruments and conditioning set."""

    mode: str
    response: tuple = (Term("Y", 0),)
    regressors: tuple = (Term("X", 1),)
    nuisance: tuple = ()
    instruments: tuple = (Term("I", 2),)
    conditioning: tuple = ()

    def __post_init__(self):
        if self.mode not in ("CIV", "NIV", "naive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("response", "regressors", "nuisance", "instruments", "conditioning"):
            object.__setattr__(self, name, _terms(getattr(self, name)))
        for t in self.regressors + self.nuisance + self.instruments + self.conditioning:
            if t.lag < 1:
                raise ValueError("regressor, instrument and conditioning lags must be >= 1")

    @property
    def max_lag(self) -> int:
        return max(t.lag for t in self.response + self.regressors + self.nuisance
                   + self.instruments + self.conditioning)

    @classmethod
    def civ(cls, conditioning: str = "I") -> "AlignmentSpec":
        """Response ``Y_t``, regressor ``X_{t-1}``, instrument ``I_{t-2}``.

        ``conditioning="I"`` uses ``{I_{t-3}}``; ``"IXY"`` uses
        ``{I_{t-3}, X_{t-2}, Y_{t-1}}``.
        """
        if conditioning == "I":
            cond = (Term("I", 3),)
        elif conditioning == "IXY":
            cond = (Term("I", 3), Term("X", 2), Term("Y", 1))
        else:
            raise ValueError("conditioning must be 'I' or 'IXY'")
        return cls("CIV", conditioning=cond)

    @classmethod
    def niv(cls, m: int = 1, instruments: Sequence | None = None) -> "AlignmentSpec":
        """Instruments ``I_{t-2}, ..., I_{t-m-1}`` and nuisance regressor ``Y_{t-1}``."""
        if instruments is None:
            if m < 1:
                raise ValueError("m must be >= 1")
            instruments = tuple(Term("I", k) for k in range(2, m + 2))
        return cls("NIV", nuisance=(Term("Y", 1),), instruments=instruments)

    @classmethod
    def naive(cls) -> "AlignmentSpec":
        """``Y_t`` on ``X_{t-1}`` instrumented by ``I_{t-2}`` with no adjustment."""
        return cls("naive")

    def to_dict(self) -> dict:
        enc = lambda ts: [[t.block, t.lag, list(t.components) if t.components else None] for t in ts]
        return {"mode": self.mode, "response": enc(self.response), "regressors": enc(self.regressors),
                "nuisance": enc(self.nuisance), "instruments": enc(self.instruments),
                "conditioning": enc(self.conditioning)}


def _stack(sample, terms, L, T):
    if not terms:
        return np.zeros((0, T - L))
    parts = []
    for t in terms:
        blk = sample.block(t.block)
        if t.components is not None:
            blk = blk[list(t.components)]
        parts.append(blk[:, L - t.lag: T - t.lag])
    return np.vstack(parts)


def ts_align(sample: TimeSeriesSample, spec: AlignmentSpec, weight="tsls",
             bandwidth: int | None = None) -> IvProblem:
    """Build an :class:`IvProblem` whose columns are ``t = s..T`` with ``s = 1 + max lag``."""
    T = sample.T
    L = spec.max_lag
    if T <= L:
        raise DimensionError(f"T={T} is too small for lag {L}")
    g = lambda terms: _stack(sample, terms, L, T)
    return IvProblem(Y=g(spec.response), X=g(spec.regressors), I=g(spec.instruments),
                     Z=g(spec.nuisance), B=g(spec.conditioning), weight=weight, bandwidth=bandwidth)


def fit_time_series(sample: TimeSeriesSample, spec: AlignmentSpec, weight="tsls", cov=None) -> Estimate:
    """Align and fit; ``beta_hat`` holds only the coefficients of the regressors."""
    est = civ_fit(ts_align(sample, spec, weight), cov=cov)
    est.diagnostics["spec"] = spec.to_dict()
    return est


def naive_iv_plim(params: InstrumentalVar1) -> float:
    """Probability limit ``beta / (1 - alpha_II alpha_YY)`` of naive IV in the scalar model."""
    lay = params.layout
    if (lay.d_I, lay.d_X, lay.d_H, lay.d_Y) != (1, 1, 1, 1):
        raise DimensionError("the naive-IV limit is available for scalar blocks only")
    aii, ayy, beta = float(params.alpha_II[0, 0]), float(params.alpha_YY[0, 0]), float(params.beta[0, 0])
    if np.isclose(aii * ayy, 1.0, rtol=0, atol=1e-14):
        raise ValueError("alpha_II * alpha_YY equals 1")
    c = cross_covariance(params.params, 1)[lay.X, lay.I]
    if abs(float(c[0, 0])) < 1e-14:
        raise RankDeficientError("cov(X_{t-1}, I_{t-2}) is zero")
    return beta / (1.0 - aii * ayy)


@dataclass
class OlsResult:
    coef: np.ndarray
    residuals: np.ndarray
    diagnostics: dict


def ols_fit(Y, R, intercept: bool = False) -> OlsResult:
    """Least squares of ``Y`` (``d_Y x n``) on regressor rows ``R`` (``k x n``).

    Rank-deficient designs fall back to the pseudo-inverse and set
    ``diagnostics["rank_deficient"]``.
    """
    Y, R = _rows(Y), _rows(R)
    n = Y.shape[1]
    if R.shape[1] != n:
        raise DimensionError("Y and R must have the same number of columns")
    D = np.vstack([np.ones((1, n)), R]) if intercept else R
    if n <= D.shape[0]:
        raise DimensionError(f"need more observations ({n}) than regressors ({D.shape[0]})")
    sv = np.linalg.svd(D, compute_uv=False)
    deficient = bool(sv[-1] <= RANK_TOL * sv[0])
    coef = Y @ np.linalg.pinv(D)
    resid = Y - coef @ D
    diag = {"n_used": n, "rank_deficient": deficient, "singular_values": sv}
    if intercept:
        diag["intercept"] = coef[:, 0].copy()
        coef = coef[:, 1:]
    return OlsResult(coef, resid, diag)
