"""Linear Gaussian SCMs for the i.i.d. instrumental-variable setting.

Population moments are computed exactly from the joint covariance
``(I - A)^{-1} Gamma (I - A)^{-T}``; conditional covariances use Schur
complements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, RankDeficientError

ROLE_NAMES = ("I", "X", "Z", "B", "Y", "H")


@dataclass(frozen=True, eq=False)
class LinearScm:
    """Structural equations ``S = A S + eps`` with ``eps ~ N(0, diag(gamma_diag))``.

    ``A[i, j]`` is the coefficient of variable ``j`` in the equation of
    variable ``i``.  ``roles`` maps role names (I, X, Z, B, H) to index lists
    and ``"Y"`` to a single index.
    """

    A: np.ndarray
    gamma_diag: np.ndarray
    roles: dict = field(default_factory=dict)
    names: tuple = ()

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        g = np.array(self.gamma_diag, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("A must be square")
        if g.shape != (A.shape[0],):
            raise DimensionError("gamma_diag must have one entry per variable")
        if np.any(g <= 0):
            raise ValueError("noise variances must be strictly positive")
        if topological_order(A) is None:
            raise ValueError("coefficient matrix does not define an acyclic graph")
        roles = {}
        for k, v in dict(self.roles).items():
            if k not in ROLE_NAMES:
                raise ValueError(f"unknown role {k!r}")
            roles[k] = int(v) if k == "Y" else [int(i) for i in np.atleast_1d(v)]
        A.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "gamma_diag", g)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "names", tuple(self.names) or tuple(f"V{i}" for i in range(A.shape[0])))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def role(self, name: str):
        if name == "Y":
            return self.roles["Y"]
        return list(self.roles.get(name, []))

    def with_gamma(self, gamma_diag) -> "LinearScm":
        return LinearScm(self.A, gamma_diag, self.roles, self.names)

    def sample(self, n: int, rng) -> np.ndarray:
        """Draw ``n`` i.i.d. observations as an ``(vars, n)`` matrix."""
        eps = rng.standard_normal((self.n, n)) * np.sqrt(self.gamma_diag)[:, None]
        return np.linalg.solve(np.eye(self.n) - self.A, eps)

    def to_json(self) -> str:
        return json.dumps({"A": self.A.tolist(), "Gamma_diag": self.gamma_diag.tolist(),
                           "roles": self.roles, "names": list(self.names)})

    @classmethod
    def from_json(cls, text: str) -> "LinearScm":
        obj = json.loads(text)
        return cls(obj["A"], obj["Gamma_diag"], obj.get("roles", {}), tuple(obj.get("names", ())))


def topological_order(A: np.ndarray):
    """A causal order of the nonzero pattern of ``A``, or None if it has a cycle."""
    adj = np.asarray(A) != 0
    n = adj.shape[0]
    indeg = adj.sum(axis=1).astype(int)  # number of parents
    order, ready = [], [i for i in range(n) if indeg[i] == 0]
    while ready:
        j = ready.pop()
        order.append(j)
        for i in np.nonzero(adj[:, j])[0]:
            indeg[i] -= 1
            if indeg[i] == 0:
                ready.append(int(i))
    return order if len(order) == n else None


def scm_covariance(m: LinearScm) -> np.ndarray:
    """Exact ``(I - A)^{-1} Gamma (I - A)^{-T}``."""
    M = np.eye(m.n) - m.A
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError("I - A is singular") from exc
    S = inv @ np.diag(m.gamma_diag) @ inv.T
    return 0.5 * (S + S.T)


def conditional_covariance(S: np.ndarray, rows, cols, given) -> np.ndarray:
    """``cov(S_rows, S_cols | S_given)`` for a Gaussian with covariance ``S``."""
    rows, cols, given = list(rows), list(cols), list(given)
    out = S[np.ix_(rows, cols)]
    if not given:
        return out.copy()
    Sgg = S[np.ix_(given, given)]
    if np.linalg.cond(Sgg) > 1e12:
        raise RankDeficientError("covariance of the conditioning set is singular")
    return out - S[np.ix_(rows, given)] @ np.linalg.solve(Sgg, S[np.ix_(given, cols)])


def _linear_cov(S, w_left, w_right, given):
    """``cov(w_left' S, w_right' S | S_given)`` for weight vectors/matrices over all variables."""
    if given:
        Sgg = S[np.ix_(given, given)]
        if np.linalg.cond(Sgg) > 1e12:
            raise RankDeficientError("covariance of the conditioning set is singular")
        C = S - S[:, given] @ np.linalg.solve(Sgg, S[given, :])
    else:
        C = S
    return w_left.T @ C @ w_right


def _weights(n, idx, coef=None):
    W = np.zeros((n, len(idx)))
    for k, i in enumerate(idx):
        W[i, k] = 1.0
    if coef is not None:
        return W @ np.atleast_1d(coef)
    return W


def civ_population_moment(m: LinearScm, beta, I=None, X=None, B=None, Z=None, alpha=None,
                          S=None) -> np.ndarray:
    """``E[cov(Y - beta X - alpha Z, I | B)]`` as a ``1 x d_I`` row.

    Role arguments default to the model's roles.  In a linear Gaussian model
    the conditional covariance does not depend on the value of ``B``.
    """
    I = m.role("I") if I is None else list(I)
    X = m.role("X") if X is None else list(X)
    B = m.role("B") if B is None else list(B)
    Z = [] if Z is None else list(Z)
    S = scm_covariance(m) if S is None else S
    y = m.role("Y")
    w = np.zeros(m.n)
    w[y] = 1.0
    w -= _weights(m.n, X, np.atleast_1d(np.asarray(beta, dtype=float)).ravel())
    if Z:
        w -= _weights(m.n, Z, np.atleast_1d(np.asarray(alpha, dtype=float)).ravel())
    return (_linear_cov(S, w[:, None], _weights(m.n, I), B)).reshape(1, -1)


def population_iv_solution(m: LinearScm, I=None, X=None, B=None, Z=None, S=None):
    """Coefficients ``(beta, alpha)`` solving the population moment equation.

    Uses the weight ``E[var(I | B)]^{-1}``; for an identified model the result
    does not depend on the weight.
    """
    I = m.role("I") if I is None else list(I)
    X = m.role("X") if X is None else list(X)
    B = m.role("B") if B is None else list(B)
    Z = [] if Z is None else list(Z)
    S = scm_covariance(m) if S is None else S
    Xt = X + Z
    y = m.role("Y")
    c_xi = conditional_covariance(S, Xt, I, B)
    c_yi = conditional_covariance(S, [y], I, B)
    c_ii = conditional_covariance(S, I, I, B)
    _require_rank(c_xi)
    W = np.linalg.inv(c_ii)
    b = c_yi @ W @ c_xi.T @ np.linalg.inv(c_xi @ W @ c_xi.T)
    return b[:, : len(X)], b[:, len(X):]


def _require_rank(C, tol=1e-10):
    s = np.linalg.svd(C, compute_uv=False)
    if C.shape[0] > C.shape[1] or s[-1] <= tol * s[0]:
        raise RankDeficientError("instrument-regressor covariance lacks full row rank")


def asymptotic_variance_niv(m: LinearScm, I=None, X=None, Z=None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (b_hat - b)`` for nuisance IV.

    ``(E[X~ I'] K^{-1} E[X~ I']')^{-1}`` with ``X~ = (X, Z)`` and
    ``K = E[(Y - beta X - alpha Z)^2] E[I I']``.  The top-left ``d_X`` block
    is the variance of the effect estimate.
    """
    I = m.role("I") + m.role("B") if I is None else list(I)
    X = m.role("X") if X is None else list(X)
    Z = m.role("Z") if Z is None else list(Z)
    S = scm_covariance(m)
    beta, alpha = population_iv_solution(m, I, X, [], Z, S)
    y = m.role("Y")
    w = np.zeros(m.n)
    w[y] = 1.0
    w -= _weights(m.n, X, beta.ravel())
    if Z:
        w -= _weights(m.n, Z, alpha.ravel())
    sigma2 = float(w @ S @ w)
    K = sigma2 * S[np.ix_(I, I)]
    G = S[np.ix_(X + Z, I)]
    return np.linalg.inv(G @ np.linalg.solve(K, G.T))


def asymptotic_variance_civ(m: LinearScm, I=None, X=None, B=None) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (b_hat - b)`` for conditional IV.

    As :func:`asymptotic_variance_niv` with covariances conditional on ``B``
    and ``K = E[var(Y - beta X | B)] E[var(I | B)]``.
    """
    I = m.role("I") if I is None else list(I)
    X = m.role("X") if X is None else list(X)
    B = m.role("B") if B is None else list(B)
    S = scm_covariance(m)
    beta, _ = population_iv_solution(m, I, X, B, [], S)
    y = m.role("Y")
    w = np.zeros(m.n)
    w[y] = 1.0
    w -= _weights(m.n, X, beta.ravel())
    sigma2 = float(_linear_cov(S, w[:, None], w[:, None], B)[0, 0])
    K = sigma2 * conditional_covariance(S, I, I, B)
    G = conditional_covariance(S, X, I, B)
    return np.linalg.inv(G @ np.linalg.solve(K, G.T))
