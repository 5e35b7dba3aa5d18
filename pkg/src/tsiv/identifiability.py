"""Identifiability of the nuisance-IV estimand from VAR(1) parameters.

For a scalar instrument, the effect is identified iff the controllability
matrix ``[A_I, A_XY A_I, ..., A_XY^{d_X} A_I]`` has full row rank ``d_X + 1``.
Two equivalent checks are provided alongside: an eigen-decomposition
criterion and the rank of the population instrument covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError
from .var_model import BlockLayout, InstrumentalVar1, cross_covariance, stationary_covariance

RANK_TOL = 1e-10
GAP_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class ReducedBlocks:
    """``A_I = [alpha_XI; 0]``, ``A_XY = [[alpha_XX, alpha_XY], [beta, alpha_YY]]`` and ``alpha_II``."""

    A_I: np.ndarray
    A_XY: np.ndarray
    alpha_II: np.ndarray

    def __post_init__(self):
        A_I = np.atleast_2d(np.asarray(self.A_I, dtype=float))
        A_XY = np.atleast_2d(np.asarray(self.A_XY, dtype=float))
        aII = np.atleast_2d(np.asarray(self.alpha_II, dtype=float))
        k = A_XY.shape[0]
        if A_XY.shape != (k, k) or A_I.shape[0] != k:
            raise DimensionError("A_XY must be square with as many rows as A_I")
        if aII.shape != (A_I.shape[1], A_I.shape[1]):
            raise DimensionError("alpha_II must be d_I x d_I")
        object.__setattr__(self, "A_I", A_I)
        object.__setattr__(self, "A_XY", A_XY)
        object.__setattr__(self, "alpha_II", aII)

    @property
    def d_X(self) -> int:
        return self.A_XY.shape[0] - 1

    @property
    def d_I(self) -> int:
        return self.A_I.shape[1]

    @classmethod
    def from_params(cls, params: InstrumentalVar1) -> "ReducedBlocks":
        lay = params.layout
        if lay.d_Y != 1:
            raise DimensionError("identifiability checks assume a scalar response")
        A_I = np.vstack([params.alpha_XI, np.zeros((1, lay.d_I))])
        A_XY = np.block([[params.alpha_XX, params.alpha_XY], [params.beta, params.alpha_YY]])
        return cls(A_I, A_XY, params.alpha_II)


def controllability_matrix(blocks: ReducedBlocks) -> np.ndarray:
    """``[A_I, A_XY A_I, ..., A_XY^{d_X} A_I]`` built by repeated left multiplication."""
    cols = [blocks.A_I]
    for _ in range(blocks.d_X):
        cols.append(blocks.A_XY @ cols[-1])
    return np.hstack(cols)


def _rank(M, tol):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def _clusters(eigs, gap):
    """Group eigenvalues closer than ``gap``; returns lists of indices."""
    groups = []
    for i, lam in enumerate(eigs):
        for g in groups:
            if np.min(np.abs(eigs[g] - lam)) < gap:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


@dataclass
class JordanResult:
    distinct_block_eigenvalues: bool
    w_nonzero: bool | None
    eigenvalues: np.ndarray
    multiplicities: list
    w: np.ndarray | None = None
    delegated: bool = False

    @property
    def identifiable(self) -> bool:
        return bool(self.distinct_block_eigenvalues and self.w_nonzero)


def jordan_criterion(blocks: ReducedBlocks, tol: float = 1e-8, gap: float = GAP_TOL) -> JordanResult:
    """Eigen-structure classification for a scalar instrument.

    With a simple spectrum, the effect is identified iff every coordinate of
    ``w = Q^{-1} A_I`` is nonzero, ``Q`` holding unit eigenvectors.  If an
    eigenvalue has two or more independent eigenvectors, two Jordan blocks
    share it and the effect is not identified.  Defective eigenvalues (one
    block, size > 1) are not decomposed; ``w_nonzero`` then comes from the
    controllability rank and ``delegated`` is set.
    """
    if blocks.d_I != 1:
        raise DimensionError("the eigen-structure criterion needs a scalar instrument")
    A = blocks.A_XY
    k = A.shape[0]
    eigs, Q = np.linalg.eig(A)
    groups = _clusters(eigs, gap)
    scale = max(1.0, np.linalg.norm(A, 2))
    mult = []
    shared = False
    for g in groups:
        lam = np.mean(eigs[g])
        s = np.linalg.svd(A - lam * np.eye(k), compute_uv=False)
        geo = int(np.sum(s <= 1e3 * gap * scale))
        geo = max(geo, 1)
        mult.append({"eigenvalue": complex(lam), "algebraic": len(g), "geometric": geo})
        if geo > 1:
            shared = True
    if shared:
        return JordanResult(False, None, eigs, mult)
    if all(len(g) == 1 for g in groups):
        Q = Q / np.linalg.norm(Q, axis=0)
        w = np.linalg.solve(Q, blocks.A_I[:, 0].astype(complex))
        ref = max(np.linalg.norm(blocks.A_I), np.finfo(float).tiny)
        return JordanResult(True, bool(np.all(np.abs(w) > tol * ref)), eigs, mult, w)
    rank, _ = _rank(controllability_matrix(blocks), tol)
    return JordanResult(True, rank == k, eigs, mult, None, delegated=True)


def population_instrument_cov(params: InstrumentalVar1, m: int, method: str = "auto") -> np.ndarray:
    """``E[(X_{t-1}, Y_{t-1}) I_{t-1-j}']`` for ``j = 1..m``, columns grouped by ``j``.

    ``method="formula"`` (scalar instrument) uses the closed form
    ``v_I [A_XY^{j-1} B^{-1} + sum_{k<j-1} alpha_II^{j-1-k} A_XY^k] A_I``
    with ``B = I - alpha_II A_XY``; ``"companion"`` reads the lagged
    covariances off the stationary companion solution.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    lay = params.layout
    if method == "auto":
        method = "formula" if lay.d_I == 1 else "companion"
    rows = np.r_[lay.indices("X"), lay.indices("Y")]
    if method == "companion":
        cols = [cross_covariance(params.params, j)[np.ix_(rows, lay.indices("I"))] for j in range(1, m + 1)]
        return np.hstack(cols)
    if method != "formula":
        raise ValueError(f"unknown method {method!r}")
    if lay.d_I != 1:
        raise DimensionError("the closed form needs a scalar instrument")
    blocks = ReducedBlocks.from_params(params)
    a = float(blocks.alpha_II[0, 0])
    A, A_I = blocks.A_XY, blocks.A_I
    k = A.shape[0]
    v_I = stationary_covariance(params.params).lag0[lay.I, lay.I][0, 0]
    B_inv = np.linalg.inv(np.eye(k) - a * A)
    powers = [np.eye(k)]
    for _ in range(m):
        powers.append(A @ powers[-1])
    out = []
    for j in range(1, m + 1):
        M = powers[j - 1] @ B_inv
        for q in range(j - 1):
            M = M + a ** (j - 1 - q) * powers[q]
        out.append(v_I * M @ A_I)
    return np.hstack(out)


@dataclass
class IdentifiabilityReport:
    identifiable: bool
    method: str
    smallest_singular_value: float
    singular_values: np.ndarray
    eigenvalues: np.ndarray
    multiplicities: list = field(default_factory=list)
    w: np.ndarray | None = None
    methods: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def methods_agree(self) -> bool:
        vals = [v for v in self.methods.values() if v is not None]
        return all(v == vals[0] for v in vals)

    def to_json(self) -> str:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]
        return json.dumps({
            "identifiable": self.identifiable,
            "method": self.method,
            "smallest_singular_value": self.smallest_singular_value,
            "singular_values": [float(s) for s in self.singular_values],
            "eigenvalues": [c(z) for z in self.eigenvalues],
            "multiplicities": [{**m, "eigenvalue": c(m["eigenvalue"])} for m in self.multiplicities],
            "w": None if self.w is None else [c(z) for z in self.w],
            "methods": self.methods,
            "flags": self.flags,
        })


def is_identifiable_niv(params: InstrumentalVar1, tol: float = RANK_TOL) -> IdentifiabilityReport:
    """Decide whether nuisance IV identifies ``beta``.

    A scalar instrument is classified by the controllability rank, with the
    eigen-structure and population-covariance checks recorded alongside.
    Several instruments are classified by the rank of the population
    covariance between ``(X_{t-1}, Y_{t-1})`` and ``d_X + 1`` instrument lags;
    the sufficient single-instrument check is recorded as well.
    """
    blocks = ReducedBlocks.from_params(params)
    k = blocks.d_X + 1
    eigs = np.linalg.eigvals(blocks.A_XY)
    P = population_instrument_cov(params, k)
    p_rank, p_sv = _rank(P, tol)
    if blocks.d_I == 1:
        C = controllability_matrix(blocks)
        c_rank, sv = _rank(C, tol)
        jr = jordan_criterion(blocks, tol=max(tol, 1e-8))
        # the eigen-structure check only counts as independent when it did not delegate
        methods = {"controllability_rank": c_rank == k,
                   "jordan_criterion": None if jr.delegated else jr.identifiable,
                   "population_rank": p_rank == k}
        return IdentifiabilityReport(c_rank == k, "controllability_rank", float(sv[-1]), sv, eigs,
                                     jr.multiplicities, jr.w, methods,
                                     {"jordan_delegated": jr.delegated})
    mi = multi_instrument_check(params, tol)
    methods = {"population_rank": p_rank == k}
    return IdentifiabilityReport(p_rank == k, "population_rank", float(p_sv[-1]), p_sv, eigs,
                                 methods=methods,
                                 flags={"multi_instrument": mi.holds, "multi_instrument_reason": mi.reason})


@dataclass
class MultiInstrumentResult:
    holds: bool
    reason: str | None = None
    instrument: int | None = None

    def __bool__(self):
        return self.holds


def reduce_to_instrument(params: InstrumentalVar1, j: int) -> InstrumentalVar1:
    """The ``(I^(j), H, X, Y)`` system obtained by dropping the other instruments."""
    lay = params.layout
    sub = BlockLayout(1, lay.d_X, lay.d_H, lay.d_Y)
    blocks = {
        "II": params.alpha_II[j, j], "HH": params.alpha_HH, "XI": params.alpha_XI[:, [j]],
        "XH": params.alpha_XH, "XX": params.alpha_XX, "XY": params.alpha_XY,
        "YH": params.alpha_YH, "YX": params.beta, "YY": params.alpha_YY,
    }
    keep = np.r_[lay.indices("I")[j], lay.indices("H"), lay.indices("X"), lay.indices("Y")]
    return InstrumentalVar1.from_blocks(sub, {k: v for k, v in blocks.items() if np.size(v)},
                                        params.params.gamma_diag[keep])


def multi_instrument_check(params: InstrumentalVar1, tol: float = RANK_TOL) -> MultiInstrumentResult:
    """Sufficient condition for several instruments.

    Holds if some coordinate instrument neither drives nor is driven by the
    others and the reduced single-instrument system is identified.  A false
    result does not imply non-identifiability; ``reason`` is ``"premise"``
    when no instrument is decoupled and ``"rank"`` when none of the decoupled
    ones identifies the effect.
    """
    aII = params.alpha_II
    d_I = aII.shape[0]
    decoupled = [j for j in range(d_I)
                 if not np.any(np.delete(aII[j], j)) and not np.any(np.delete(aII[:, j], j))]
    if not decoupled:
        return MultiInstrumentResult(False, "premise")
    for j in decoupled:
        reduced = reduce_to_instrument(params, j)
        if not np.any(reduced.alpha_XI):
            continue
        if is_identifiable_niv(reduced, tol).identifiable:
            return MultiInstrumentResult(True, None, j)
    return MultiInstrumentResult(False, "rank")
