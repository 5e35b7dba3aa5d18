"""VAR(p) processes with an instrument / confounder block structure.

The state vector is ordered ``(I, H, X, Y)``: instruments, latent confounders,
regressors and response.  All arrays follow the convention that column ``t``
of a sample matrix is the observation at time ``t`` (a ``d x T`` matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ._kernels import run_recursion
from .exceptions import DimensionError, RejectionBudgetExceeded, UnstableProcessError

BLOCK_ORDER = ("I", "H", "X", "Y")

# Nonzero blocks of the instrumental VAR(1) coefficient matrix, as (row, column).
NONZERO_BLOCKS = ("II", "HH", "XI", "XH", "XX", "XY", "YH", "YX", "YY")

LYAPUNOV_DIRECT_MAX = 60


@dataclass(frozen=True)
class BlockLayout:
    """Dimensions of the instrument, confounder, regressor and response blocks."""

    d_I: int = 1
    d_X: int = 1
    d_H: int = 1
    d_Y: int = 1

    def __post_init__(self):
        for name in ("d_I", "d_X", "d_H", "d_Y"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DimensionError(f"{name} must be a nonnegative integer, got {v!r}")
        if self.d == 0:
            raise DimensionError("layout has no components")

    @property
    def d(self) -> int:
        return self.d_I + self.d_H + self.d_X + self.d_Y

    def dim(self, block: str) -> int:
        return getattr(self, f"d_{block}")

    def slice(self, block: str) -> slice:
        start = 0
        for b in BLOCK_ORDER:
            if b == block:
                return slice(start, start + self.dim(b))
            start += self.dim(b)
        raise KeyError(f"unknown block {block!r}")

    def indices(self, block: str) -> np.ndarray:
        s = self.slice(block)
        return np.arange(s.start, s.stop)

    @property
    def I(self) -> slice:  # noqa: E743
        return self.slice("I")

    @property
    def H(self) -> slice:
        return self.slice("H")

    @property
    def X(self) -> slice:
        return self.slice("X")

    @property
    def Y(self) -> slice:
        return self.slice("Y")

    def labels(self) -> list[str]:
        """Component labels ``I1, I2, ..., H1, ..., X1, ..., Y1``."""
        return [f"{b}{k + 1}" for b in BLOCK_ORDER for k in range(self.dim(b))]

    def to_dict(self) -> dict:
        return {"d_I": self.d_I, "d_X": self.d_X, "d_H": self.d_H, "d_Y": self.d_Y}


@dataclass(frozen=True, eq=False)
class VarParameters:
    """Coefficients ``A_1..A_p`` and diagonal innovation variances of a VAR(p).

    Parameters
    ----------
    coefs : array_like
        Either a single ``d x d`` matrix (VAR(1)) or an array of shape
        ``(p, d, d)``.
    gamma_diag : array_like, optional
        Diagonal of the innovation covariance; defaults to ones.
    layout : BlockLayout, optional
        Block structure of the state vector.
    """

    coefs: np.ndarray
    gamma_diag: np.ndarray = None
    layout: BlockLayout | None = None

    def __post_init__(self):
        A = np.array(self.coefs, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] < 1:
            raise DimensionError(f"coefficients must be (p, d, d), got shape {A.shape}")
        d = A.shape[1]
        g = np.ones(d) if self.gamma_diag is None else np.array(self.gamma_diag, dtype=float)
        if g.ndim == 2:
            if not np.allclose(g, np.diag(np.diag(g))):
                raise DimensionError("innovation covariance must be diagonal")
            g = np.diag(g).copy()
        if g.shape != (d,):
            raise DimensionError(f"gamma_diag must have length {d}, got shape {g.shape}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(g)):
            raise ValueError("parameters must be finite")
        if np.any(g <= 0):
            raise ValueError("innovation variances must be strictly positive")
        if self.layout is not None and self.layout.d != d:
            raise DimensionError(f"layout has {self.layout.d} components, coefficients have {d}")
        A.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "coefs", A)
        object.__setattr__(self, "gamma_diag", g)

    @property
    def p(self) -> int:
        return self.coefs.shape[0]

    @property
    def d(self) -> int:
        return self.coefs.shape[1]

    @property
    def gamma(self) -> np.ndarray:
        return np.diag(self.gamma_diag)

    def A(self, k: int) -> np.ndarray:
        """Coefficient matrix of lag ``k`` (1-based)."""
        return self.coefs[k - 1]

    def companion(self) -> np.ndarray:
        return companion_matrix(self)

    def require_layout(self) -> BlockLayout:
        if self.layout is None:
            raise ValueError("these parameters carry no block layout")
        return self.layout


class InstrumentalVar1:
    """A VAR(1) whose coefficient matrix has the instrumental zero pattern.

    Rows of the instrument and confounder blocks only load on their own
    block, and the response does not load on the instruments.
    """

    def __init__(self, params: VarParameters):
        if params.p != 1:
            raise ValueError("an instrumental VAR must have order 1")
        layout = params.require_layout()
        mask = nonzero_mask(layout)
        offending = np.abs(params.coefs[0][~mask]) > 0
        if offending.any():
            raise ValueError("coefficient matrix violates the instrumental zero pattern")
        self.params = params
        self.layout = layout

    @classmethod
    def from_blocks(cls, layout: BlockLayout, blocks: Mapping[str, np.ndarray],
                    gamma_diag=None) -> "InstrumentalVar1":
        """Assemble from named blocks such as ``{"XI": ..., "YX": ...}``; missing blocks are zero."""
        A = np.zeros((layout.d, layout.d))
        for name, value in blocks.items():
            if name not in NONZERO_BLOCKS:
                raise ValueError(f"block {name!r} must be zero in an instrumental VAR")
            r, c = layout.slice(name[0]), layout.slice(name[1])
            shape = (r.stop - r.start, c.stop - c.start)
            A[r, c] = np.broadcast_to(np.asarray(value, dtype=float), shape)
        return cls(VarParameters(A, gamma_diag, layout))

    @property
    def A1(self) -> np.ndarray:
        return self.params.coefs[0]

    def block(self, name: str) -> np.ndarray:
        return self.A1[self.layout.slice(name[0]), self.layout.slice(name[1])]

    alpha_II = property(lambda self: self.block("II"))
    alpha_HH = property(lambda self: self.block("HH"))
    alpha_XI = property(lambda self: self.block("XI"))
    alpha_XH = property(lambda self: self.block("XH"))
    alpha_XX = property(lambda self: self.block("XX"))
    alpha_XY = property(lambda self: self.block("XY"))
    alpha_YH = property(lambda self: self.block("YH"))
    beta = property(lambda self: self.block("YX"))
    alpha_YY = property(lambda self: self.block("YY"))

    def __repr__(self):
        return f"InstrumentalVar1(layout={self.layout}, A1=\n{self.A1})"


def nonzero_mask(layout: BlockLayout) -> np.ndarray:
    """Boolean ``d x d`` mask of entries allowed to be nonzero."""
    mask = np.zeros((layout.d, layout.d), dtype=bool)
    for name in NONZERO_BLOCKS:
        mask[layout.slice(name[0]), layout.slice(name[1])] = True
    return mask


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    """Observations ``S_1..S_T`` stored as a ``d x T`` matrix."""

    data: np.ndarray
    layout: BlockLayout

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] < 1:
            raise DimensionError("sample must be a d x T matrix with T >= 1")
        if data.shape[0] != self.layout.d:
            raise DimensionError(f"sample has {data.shape[0]} rows, layout expects {self.layout.d}")
        object.__setattr__(self, "data", data)

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def block(self, name: str) -> np.ndarray:
        return self.data[self.layout.slice(name)]

    I = property(lambda self: self.block("I"))  # noqa: E741
    H = property(lambda self: self.block("H"))
    X = property(lambda self: self.block("X"))
    Y = property(lambda self: self.block("Y"))

    def head(self, T: int) -> "TimeSeriesSample":
        """The first ``T`` time points."""
        return TimeSeriesSample(self.data[:, :T], self.layout)


@dataclass(frozen=True)
class InterventionSpec:
    """``do(X_{t0} := value)``; ``t0`` is 1-based."""

    t0: int
    value: Sequence[float]
    target: str = "X"

    def __post_init__(self):
        if self.target != "X":
            raise ValueError("only interventions on the X block are supported")
        if self.t0 < 1:
            raise ValueError("t0 must be >= 1")
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=float)))


class StationaryCovariance(NamedTuple):
    lag0: np.ndarray
    companion: np.ndarray


def companion_matrix(params: VarParameters) -> np.ndarray:
    p, d = params.p, params.d
    C = np.zeros((p * d, p * d))
    C[:d, :] = np.hstack(list(params.coefs))
    if p > 1:
        C[d:, :-d] = np.eye((p - 1) * d)
    return C


def spectral_radius(params: VarParameters) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(params)))))


def validate_stability(params: VarParameters, margin: float = 0.0) -> bool:
    """True iff all companion eigenvalues lie strictly inside radius ``1 - margin``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return spectral_radius(params) < 1.0 - margin


def _require_stable(params):
    if not validate_stability(params, 0.0):
        raise UnstableProcessError(
            f"spectral radius {spectral_radius(params):.6g} is not below 1")


def _companion_noise(params):
    pd_ = params.p * params.d
    G = np.zeros((pd_, pd_))
    G[: params.d, : params.d] = params.gamma
    return G


def solve_lyapunov(A: np.ndarray, Q: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Solve ``S = A S A^T + Q`` for a stable ``A``.

    Uses the vectorised linear system for small problems and a truncated,
    squaring-accelerated series otherwise.
    """
    n = A.shape[0]
    if n <= LYAPUNOV_DIRECT_MAX:
        vec = np.linalg.solve(np.eye(n * n) - np.kron(A, A), Q.reshape(-1))
        S = vec.reshape(n, n)
    else:
        S = Q.copy()
        Ak = A.copy()
        for _ in range(200):
            incr = Ak @ S @ Ak.T
            S = S + incr
            Ak = Ak @ Ak
            if np.max(np.abs(incr)) < tol * max(1.0, np.max(np.abs(S))):
                break
    return 0.5 * (S + S.T)


def stationary_covariance(params: VarParameters) -> StationaryCovariance:
    """Stationary covariance of the companion state ``(S_t, ..., S_{t-p+1})``."""
    _require_stable(params)
    Sig = solve_lyapunov(companion_matrix(params), _companion_noise(params))
    d = params.d
    return StationaryCovariance(Sig[:d, :d].copy(), Sig)


def cross_covariance(params: VarParameters, h: int) -> np.ndarray:
    """``E[S_t S_{t-h}^T]`` for ``h >= 0``."""
    if h < 0:
        raise ValueError("lag must be nonnegative")
    cov = stationary_covariance(params)
    C = companion_matrix(params)
    M = np.linalg.matrix_power(C, h) @ cov.companion
    d = params.d
    return M[:d, :d]


def _stationary_draw(rng, Sig):
    try:
        L = np.linalg.cholesky(Sig)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(Sig)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    return L @ rng.standard_normal(Sig.shape[0])


def _generate(params, T, rng, t0=-1, x_value=None):
    if T < 1:
        raise ValueError("T must be >= 1")
    cov = stationary_covariance(params)
    p, d = params.p, params.d
    # companion state is (S_p, S_{p-1}, ..., S_1)
    z = _stationary_draw(rng, cov.companion)
    noise = rng.standard_normal((T, d)) * np.sqrt(params.gamma_diag)
    state = np.zeros((max(T, p), d))
    for k in range(p):
        state[p - 1 - k] = z[k * d:(k + 1) * d]
    x_slice = None
    if t0 >= 0:
        x_slice = params.require_layout().X
    state = run_recursion(params.coefs, noise if T >= p else np.zeros((p, d)),
                          state, t0, x_slice, x_value)
    return state[:T].T.copy()


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; accepts an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


RNG_FAMILY = "numpy.random.PCG64 via SeedSequence"


def simulate(params: VarParameters, T: int, seed=None) -> TimeSeriesSample:
    """Draw ``S_1..S_T`` with ``S_1`` (and the first ``p`` states) from the stationary law."""
    layout = params.layout or BlockLayout(d_I=0, d_X=0, d_H=params.d, d_Y=0)
    data = _generate(params, T, make_rng(seed))
    return TimeSeriesSample(data, layout)


def simulate_with_intervention(params: VarParameters, T: int, spec: InterventionSpec,
                               seed=None) -> TimeSeriesSample:
    """As :func:`simulate`, but ``X_{t0}`` is set to ``spec.value`` before it propagates.

    Uses the same random draws as :func:`simulate` with the same seed, so the
    columns before ``t0`` coincide with the unintervened run.
    """
    layout = params.require_layout()
    if spec.t0 > T:
        raise ValueError(f"t0={spec.t0} outside 1..{T}")
    if spec.t0 < params.p:
        raise ValueError("intervention time must be >= p so that later states are generated structurally")
    if spec.value.shape != (layout.d_X,):
        raise DimensionError(f"intervention value must have length {layout.d_X}")
    data = _generate(params, T, make_rng(seed), t0=spec.t0 - 1, x_value=spec.value)
    return TimeSeriesSample(data, layout)


def _uniform_signed(rng, shape, low, high):
    mag = rng.uniform(low, high, size=shape)
    sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
    return sign * mag


def random_instrumental_var1(layout: BlockLayout, margin: float = 0.1, low: float = 0.1,
                             high: float = 0.9, seed=None, *,
                             block_bounds: Mapping[str, tuple[float, float]] | None = None,
                             fixed: Mapping[str, np.ndarray] | None = None,
                             diagonal: Iterable[str] = (),
                             gamma_diag=None,
                             max_tries: int = 10_000) -> InstrumentalVar1:
    """Random coefficient matrix with the instrumental zero pattern.

    Every free nonzero entry is drawn uniformly from ``(-high, -low) U (low, high)``;
    draws are rejected until the companion spectral radius is below ``1 - margin``.

    Parameters
    ----------
    block_bounds : mapping, optional
        Per-block ``(low, high)`` overrides, e.g. ``{"XH": (0.5, 0.9)}``.
    fixed : mapping, optional
        Blocks held at a given value instead of being drawn (``{"XY": 0}``).
    diagonal : iterable of str
        Square blocks whose off-diagonal entries are forced to zero.
    """
    rng = make_rng(seed)
    block_bounds = dict(block_bounds or {})
    fixed = dict(fixed or {})
    diagonal = set(diagonal)
    for _ in range(max_tries):
        blocks = {}
        for name in NONZERO_BLOCKS:
            shape = (layout.dim(name[0]), layout.dim(name[1]))
            if 0 in shape:
                continue
            if name in fixed:
                blocks[name] = np.broadcast_to(np.asarray(fixed[name], dtype=float), shape)
                continue
            lo, hi = block_bounds.get(name, (low, high))
            vals = _uniform_signed(rng, shape, lo, hi)
            if name in diagonal:
                vals = np.diag(np.diag(vals))
            blocks[name] = vals
        model = InstrumentalVar1.from_blocks(layout, blocks, gamma_diag)
        if validate_stability(model.params, margin):
            return model
    raise RejectionBudgetExceeded(f"no stable draw within {max_tries} attempts")


def total_causal_effect(params: VarParameters, source, target, lag: int) -> np.ndarray:
    """Total causal effect of ``S^source_{t-lag}`` on ``S^target_t``.

    Sums ``A_{l_1} ... A_{l_m}`` over all compositions of ``lag`` into parts
    between 1 and ``p`` and restricts the result to ``target`` rows and
    ``source`` columns (each an int, slice or index sequence).
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    d, p = params.d, params.p
    psi = [np.eye(d)]
    for ell in range(1, lag + 1):
        acc = np.zeros((d, d))
        for k in range(1, min(p, ell) + 1):
            acc += params.A(k) @ psi[ell - k]
        psi.append(acc)
    rows = np.atleast_1d(np.arange(d)[target])
    cols = np.atleast_1d(np.arange(d)[source])
    return psi[lag][np.ix_(rows, cols)]


def path_coefficient_tce(params: VarParameters, source: int, target: int, lag: int) -> float:
    """Brute-force total causal effect by enumerating lag compositions.

    Independent of :func:`total_causal_effect`; only practical for small lags.
    """
    total = 0.0
    p = params.p
    for m in range(1, lag + 1):
        for parts in product(range(1, p + 1), repeat=m):
            if sum(parts) != lag:
                continue
            M = np.eye(params.d)
            for k in parts:
                M = M @ params.A(k)
            total += M[target, source]
    return total
