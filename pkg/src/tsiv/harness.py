"""Monte-Carlo experiments on random instrumental VAR(1) processes.

Every experiment is a pure function of its :class:`ExperimentConfig`.  Work
is split into per-matrix tasks; each replicate draws from its own PCG64
stream keyed by ``(seed, stream tag, matrix id, replicate id)``, and results
are sorted by key before being returned, so output does not depend on the
number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .estimators import AlignmentSpec, Term, civ_fit, ts_align
from .exceptions import ConfigError, TsivError
from .identifiability import is_identifiable_niv
from .prediction import (fit_intervention_predictor, fit_ols_predictor, history_at, predict_ols,
                         predict_under_intervention)
from .var_model import (RNG_FAMILY, BlockLayout, InterventionSpec, VarParameters, cross_covariance,
                        random_instrumental_var1, simulate, simulate_with_intervention,
                        total_causal_effect)

EXPERIMENTS = ("consistency", "lags_vs_instruments", "delta_sweep", "predict_under_intervention",
               "obs_equivalence", "identifiability_census")

# stream tags keep matrix draws and replicate draws apart
MATRIX_STREAM, SAMPLE_STREAM, ESTIMATION_STREAM = 0, 1, 2

DEFAULT_T = {
    "consistency": [300, 1000, 3000, 10000],
    "lags_vs_instruments": [2000],
    "delta_sweep": [100, 1000, 10000, 50000],
    "predict_under_intervention": [3000],
    "obs_equivalence": [1],
    "identifiability_census": [1],
}

DEFAULT_DIMS = {
    "consistency": (3, 2, 1, 1),
    "lags_vs_instruments": (3, 2, 1, 1),
    "delta_sweep": (1, 2, 1, 1),
    "predict_under_intervention": (1, 1, 1, 1),
    "obs_equivalence": (0, 1, 2, 1),
    "identifiability_census": (1, 2, 1, 1),
}

DEFAULT_ESTIMATORS = {
    "consistency": ["CIV_I", "CIV_IXY", "NIV_1lag", "NIV_3lag"],
    "lags_vs_instruments": ["NIV_I1_6lags", "NIV_I123_2lags"],
    "delta_sweep": ["NIV_3lag"],
    "predict_under_intervention": ["OLS", "CIV_IXY", "NIV_3lag", "true"],
    "obs_equivalence": [],
    "identifiability_census": [],
}

FULL_SCALE = {"n_matrices": 1000, "replicates": 10}


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment.

    ``params`` carries experiment-specific options: ``deltas`` for the
    delta sweep, ``n_sigma`` and lag orders for prediction, ``a, b, c`` and
    ``max_lag`` for observational equivalence, ``family`` for the census.
    """

    experiment: str
    dims: tuple = None
    n_matrices: int = 100
    replicates: int = 5
    T: tuple = None
    seed: int = 0
    estimators: tuple = None
    out: str | None = None
    margin: float = 0.1
    gamma_diag: tuple | None = None
    params: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        dims = tuple(self.dims) if self.dims is not None else DEFAULT_DIMS[self.experiment]
        T = tuple(int(t) for t in (self.T if self.T is not None else DEFAULT_T[self.experiment]))
        est = tuple(self.estimators if self.estimators is not None else DEFAULT_ESTIMATORS[self.experiment])
        if len(dims) != 4 or any(int(d) != d or d < 0 for d in dims):
            raise ConfigError("dims must be four nonnegative integers (d_I, d_X, d_H, d_Y)")
        if self.n_matrices < 1 or self.replicates < 1 or not T or min(T) < 1:
            raise ConfigError("n_matrices, replicates and every T must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(est) - set(ESTIMATOR_SPECS) - {"OLS", "true"}
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        object.__setattr__(self, "dims", tuple(int(d) for d in dims))
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "estimators", est)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def layout(self) -> BlockLayout:
        d_I, d_X, d_H, d_Y = self.dims
        return BlockLayout(d_I=d_I, d_X=d_X, d_H=d_H, d_Y=d_Y)

    def gamma(self):
        return None if self.gamma_diag is None else np.asarray(self.gamma_diag, dtype=float)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["T"] = list(self.T)
        d["estimators"] = list(self.estimators)
        return d

    def config_hash(self) -> str:
        """Digest of everything that determines the results (not the output path or worker count)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def full_scale(self) -> "ExperimentConfig":
        return replace(self, **FULL_SCALE)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


ESTIMATOR_SPECS = {
    "CIV_I": AlignmentSpec.civ("I"),
    "CIV_IXY": AlignmentSpec.civ("IXY"),
    "NIV_1lag": AlignmentSpec.niv(1),
    "NIV_3lag": AlignmentSpec.niv(3),
    "NIV_I1_6lags": AlignmentSpec.niv(instruments=[Term("I", k, (0,)) for k in range(2, 8)]),
    "NIV_I123_2lags": AlignmentSpec.niv(instruments=[Term("I", 2), Term("I", 3)]),
    "naive": AlignmentSpec.naive(),
}


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def draw_matrix(cfg: ExperimentConfig, matrix_id: int, **kw):
    return random_instrumental_var1(cfg.layout, margin=cfg.margin, seed=stream(cfg.seed, MATRIX_STREAM, matrix_id),
                                    gamma_diag=cfg.gamma(), **kw)


def _sq_error(model, sample, name):
    """``||beta_hat - beta||^2`` or NaN when the fit fails numerically."""
    try:
        est = civ_fit(ts_align(sample, ESTIMATOR_SPECS[name]))
    except TsivError:
        return math.nan
    return float(np.sum((est.beta_hat - model.beta) ** 2))


def _error_records(cfg, model, matrix_id, extra=None, identifiable=None):
    """Mean squared error per (estimator, T) over replicates.

    Each replicate is one simulation of length ``max(T)``; smaller sample
    sizes use its leading columns.
    """
    T_max = max(cfg.T)
    errs = {(e, T): [] for e in cfg.estimators for T in cfg.T}
    for r in range(cfg.replicates):
        full = simulate(model.params, T_max, stream(cfg.seed, SAMPLE_STREAM, matrix_id, r))
        for T in cfg.T:
            sample = full.head(T)
            for e in cfg.estimators:
                errs[(e, T)].append(_sq_error(model, sample, e))
    rows = []
    for (e, T), v in errs.items():
        v = np.asarray(v)
        ok = v[np.isfinite(v)]
        row = {"matrix_id": matrix_id, "estimator": e, "T": T,
               "error": float(ok.mean()) if ok.size else math.nan,
               "n_failed": int(v.size - ok.size)}
        if identifiable is not None:
            row["identifiable"] = identifiable
        if extra:
            row.update(extra)
        rows.append(row)
    return rows


def _task_consistency(cfg, matrix_id):
    model = draw_matrix(cfg, matrix_id)
    ident = _safe_identifiable(model)
    return _error_records(cfg, model, matrix_id, identifiable=ident)


def _safe_identifiable(model):
    try:
        return bool(is_identifiable_niv(model).identifiable)
    except TsivError:
        return False


def _task_lags(cfg, matrix_id):
    model = draw_matrix(cfg, matrix_id, diagonal=("II",))
    return _error_records(cfg, model, matrix_id, identifiable=_safe_identifiable(model))


def _task_delta(cfg, matrix_id):
    deltas = cfg.params.get("deltas", [0.0, 0.01, 0.1, 0.5, 1.0])
    base = cfg.params.get("alpha_xx", -0.6)
    rows = []
    d_X = cfg.layout.d_X
    for k, delta in enumerate(deltas):
        diag = np.full(d_X, base)
        diag[-1] = base + delta
        model = draw_matrix(cfg, matrix_id, fixed={"XX": np.diag(diag), "XY": 0.0})
        rows += _error_records(cfg, model, matrix_id, extra={"delta": float(delta)},
                               identifiable=_safe_identifiable(model))
    return rows


def _task_predict(cfg, matrix_id):
    lo, hi = cfg.params.get("confounding_bounds", (0.5, 0.9))
    bounds = {"XH": (lo, hi), "HH": (lo, hi), "YH": (lo, hi)}
    model = draw_matrix(cfg, matrix_id, block_bounds=bounds)
    n_sigma = cfg.params.get("n_sigma", [1, 5])
    m, l = cfg.params.get("m", 2), cfg.params.get("l", 1)
    ols_m, ols_l = cfg.params.get("ols_m", 2), cfg.params.get("ols_l", 1)
    T = cfg.T[0]
    lay = model.layout
    methods = list(cfg.estimators)
    sq = {(n, e): [] for n in n_sigma for e in methods}
    for r in range(cfg.replicates):
        # causal coefficients from an independent sample
        est_sample = simulate(model.params, T, stream(cfg.seed, ESTIMATION_STREAM, matrix_id, r))
        betas = {"true": model.beta}
        for e in methods:
            if e in ESTIMATOR_SPECS:
                try:
                    betas[e] = civ_fit(ts_align(est_sample, ESTIMATOR_SPECS[e])).beta_hat
                except TsivError:
                    betas[e] = None
        seed_r = (cfg.seed, SAMPLE_STREAM, matrix_id, r)
        base = simulate(model.params, T + 1, stream(*seed_r))
        sigma = base.X[:, : T - 1].std(axis=1, ddof=1)
        for n in n_sigma:
            x = n * sigma
            s = simulate_with_intervention(model.params, T + 1, InterventionSpec(T, x), stream(*seed_r))
            obs = s.head(T)
            truth = s.Y[:, T]
            for e in methods:
                if e == "OLS":
                    p = fit_ols_predictor(obs, ols_m, ols_l)
                    xl, yl = history_at(obs, T - 1, ols_m, ols_l)
                    pred = predict_ols(p, xl, yl, x)
                else:
                    if betas.get(e) is None:
                        sq[(n, e)].append(math.nan)
                        continue
                    p = fit_intervention_predictor(betas[e], obs, m, l)
                    xl, yl = history_at(obs, T - 1, m, l)
                    pred = predict_under_intervention(p, xl, yl, x)
                sq[(n, e)].append(float(np.sum((pred - truth) ** 2)))
    rows = []
    for n in n_sigma:
        row = {"matrix_id": matrix_id, "n_sigma": n, "T": T}
        for e in methods:
            v = np.asarray(sq[(n, e)])
            ok = v[np.isfinite(v)]
            row[f"mspe_{e}"] = float(ok.mean()) if ok.size else math.nan
        rows.append(row)
    return rows


TASKS = {
    "consistency": _task_consistency,
    "lags_vs_instruments": _task_lags,
    "delta_sweep": _task_delta,
    "predict_under_intervention": _task_predict,
}


def _run_one(args):
    cfg, matrix_id = args
    return TASKS[cfg.experiment](cfg, matrix_id)


def _map_tasks(cfg: ExperimentConfig):
    tasks = [(cfg, i) for i in range(cfg.n_matrices)]
    if cfg.workers == 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    rows = [row for chunk in results for row in chunk]
    return _stamp(cfg, rows)


def _sort_key(row):
    return tuple((k, row[k]) for k in ("matrix_id", "delta", "n_sigma", "estimator", "T") if k in row)


def _stamp(cfg, rows):
    rows = sorted(rows, key=_sort_key)
    h = cfg.config_hash()
    for row in rows:
        row.update({"seed": cfg.seed, "config_hash": h, "version": __version__})
    return rows


def run_consistency(cfg: ExperimentConfig) -> list[dict]:
    """Per-(matrix, estimator, T) mean squared error of the effect estimate."""
    _expect(cfg, "consistency")
    return _map_tasks(cfg)


def run_lags_vs_instruments(cfg: ExperimentConfig) -> list[dict]:
    """Per-matrix ``log10 error(I^1, 6 lags) - log10 error(I^{1:3}, 2 lags)``."""
    _expect(cfg, "lags_vs_instruments")
    if cfg.layout.d_I < 3:
        raise ConfigError("this comparison needs three instrument processes")
    rows = _map_tasks(cfg)
    out = []
    by = {}
    for r in rows:
        by.setdefault((r["matrix_id"], r["T"]), {})[r["estimator"]] = r["error"]
    for (mid, T), errs in sorted(by.items()):
        a, b = errs.get("NIV_I1_6lags"), errs.get("NIV_I123_2lags")
        ratio = math.log10(a) - math.log10(b) if a and b and a > 0 and b > 0 else math.nan
        out.append({"matrix_id": mid, "T": T, "error_I1": a, "error_I123": b, "log10_ratio": ratio})
    return _stamp(cfg, out)


def run_delta_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Per-(matrix, delta, T) errors with ``alpha_XX = diag(-0.6, -0.6 + delta)``."""
    _expect(cfg, "delta_sweep")
    if cfg.layout.d_X < 2:
        raise ConfigError("the delta sweep needs d_X >= 2")
    return _map_tasks(cfg)


def median_by(rows, keys, value="error"):
    """Median of ``value`` grouped by ``keys``, ignoring NaN."""
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r[value])
    return {k: float(np.nanmedian(v)) for k, v in sorted(groups.items())}


def run_predict(cfg: ExperimentConfig) -> list[dict]:
    """Per-matrix MSPE of OLS and causal predictors under ``do(X_T := n sigma)``."""
    _expect(cfg, "predict_under_intervention")
    if cfg.layout.d_X != 1 or cfg.layout.d_I != 1:
        raise ConfigError("the prediction experiment uses scalar X and I")
    return _map_tasks(cfg)


def obs_equivalence_params(a=0.5, b=0.7, c=0.3):
    """Two VAR(1) models over ``(H1, H2, X, Y)`` with equal observed laws and different effects."""
    if abs(a) >= 1:
        raise ConfigError("|a| must be < 1")
    A1 = np.array([[a, 0, 0, 0], [c, 0, 0, 0], [c, 0, 0, 0], [0, b, 0, 0]], dtype=float)
    A2 = np.array([[a, 0, 0, 0], [0, a, 0, 0], [0, c, 0, 0], [0, 0, b, 0]], dtype=float)
    lay = BlockLayout(d_I=0, d_X=1, d_H=2, d_Y=1)
    return VarParameters(A1, layout=lay), VarParameters(A2, layout=lay)


def run_obs_equivalence(cfg: ExperimentConfig) -> dict:
    """Compare observed autocovariances and lag-1 effects of the two models."""
    _expect(cfg, "obs_equivalence")
    a, b, c = (cfg.params.get(k, v) for k, v in (("a", 0.5), ("b", 0.7), ("c", 0.3)))
    max_lag = int(cfg.params.get("max_lag", 10))
    P1, P2 = obs_equivalence_params(a, b, c)
    lay = P1.layout
    obs = np.r_[lay.indices("X"), lay.indices("Y")]
    diffs = []
    for h in range(max_lag + 1):
        C1 = cross_covariance(P1, h)[np.ix_(obs, obs)]
        C2 = cross_covariance(P2, h)[np.ix_(obs, obs)]
        diffs.append(float(np.max(np.abs(C1 - C2))))
    x, y = lay.indices("X")[0], lay.indices("Y")[0]
    return {"experiment": "obs_equivalence", "a": a, "b": b, "c": c, "max_lag": max_lag,
            "max_abs_autocov_diff": max(diffs), "per_lag_diff": diffs,
            "tce_model_1": float(total_causal_effect(P1, x, y, 1)[0, 0]),
            "tce_model_2": float(total_causal_effect(P2, x, y, 1)[0, 0]),
            "seed": cfg.seed, "config_hash": cfg.config_hash(), "version": __version__}


def run_identifiability_census(cfg: ExperimentConfig) -> dict:
    """Fraction of random draws that are identified, with cross-method agreement.

    ``params["family"]`` is ``"generic"`` (default) or ``"repeated_eigenvalue"``,
    which fixes ``alpha_XX = c I`` and ``alpha_XY = 0`` with ``c`` drawn per matrix.
    """
    _expect(cfg, "identifiability_census")
    family = cfg.params.get("family", "generic")
    methods = ("controllability_rank", "jordan_criterion", "population_rank")
    n_ident, n_agree, n_jordan = 0, 0, 0
    agreement = {(p, q): 0 for p in methods for q in methods}
    compared = {(p, q): 0 for p in methods for q in methods}
    for i in range(cfg.n_matrices):
        if family == "generic":
            model = draw_matrix(cfg, i)
        elif family == "repeated_eigenvalue":
            rng = stream(cfg.seed, MATRIX_STREAM, i, 1)
            cval = rng.uniform(0.1, 0.9) * rng.choice([-1.0, 1.0])
            model = draw_matrix(cfg, i, fixed={"XX": cval * np.eye(cfg.layout.d_X), "XY": 0.0})
        else:
            raise ConfigError(f"unknown family {family!r}")
        rep = is_identifiable_niv(model)
        n_ident += rep.identifiable
        n_agree += rep.methods_agree
        for p in methods:
            for q in methods:
                vp, vq = rep.methods.get(p), rep.methods.get(q)
                if vp is not None and vq is not None:
                    compared[(p, q)] += 1
                    agreement[(p, q)] += vp == vq
        n_jordan += rep.methods.get("jordan_criterion") is not None
    return {"experiment": "identifiability_census", "family": family, "dims": list(cfg.dims),
            "n_matrices": cfg.n_matrices, "fraction_identifiable": n_ident / cfg.n_matrices,
            "fraction_methods_agree": n_agree / cfg.n_matrices,
            "agreement": {f"{p}|{q}": (agreement[(p, q)] / compared[(p, q)] if compared[(p, q)] else None)
                          for p in methods for q in methods},
            "n_jordan_applicable": n_jordan,
            "seed": cfg.seed, "config_hash": cfg.config_hash(), "version": __version__}


RUNNERS = {
    "consistency": run_consistency,
    "lags_vs_instruments": run_lags_vs_instruments,
    "delta_sweep": run_delta_sweep,
    "predict_under_intervention": run_predict,
    "obs_equivalence": run_obs_equivalence,
    "identifiability_census": run_identifiability_census,
}


def _expect(cfg, name):
    if cfg.experiment != name:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {name!r}")


def run_experiment(cfg: ExperimentConfig):
    return RUNNERS[cfg.experiment](cfg)


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    """CSV text with floats at 17 significant digits; columns in first-seen order."""
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(k, "")) for k in cols])
    return buf.getvalue()


def write_result(cfg: ExperimentConfig, result, out_dir: str) -> list[str]:
    """Write the table (CSV) or report (JSON) plus a metadata file; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if isinstance(result, list):
        p = os.path.join(out_dir, f"{cfg.experiment}.csv")
        with open(p, "w", newline="") as fh:
            fh.write(rows_to_csv(result))
    else:
        p = os.path.join(out_dir, f"{cfg.experiment}.json")
        with open(p, "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
    paths.append(p)
    meta = {"config": cfg.to_dict(), "config_hash": cfg.config_hash(), "rng": RNG_FAMILY,
            "version": __version__}
    mp = os.path.join(out_dir, f"{cfg.experiment}.meta.json")
    with open(mp, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    paths.append(mp)
    return paths
