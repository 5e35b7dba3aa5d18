"""Command line entry point: ``tsiv simulate|estimate|identify|predict|experiment``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .estimators import AlignmentSpec, civ_fit, ts_align
from .exceptions import ConfigError, DimensionError, TsivError, UnstableProcessError
from .harness import ESTIMATOR_SPECS, EXPERIMENTS, ExperimentConfig, run_experiment, write_result
from .identifiability import is_identifiable_niv
from .io import read_params, read_sample, write_sample
from .prediction import fit_intervention_predictor, history_at, predict_under_intervention
from .var_model import InstrumentalVar1, InterventionSpec, simulate, simulate_with_intervention

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="tsiv", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".")
        return p

    p = common(sub.add_parser("simulate", help="draw a sample from a parameter file"))
    p.add_argument("--params", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--intervene-at", type=int, help="1-based time of do(X := value)")
    p.add_argument("--value", type=float, nargs="+")

    p = common(sub.add_parser("estimate", help="fit an IV estimator to a sample CSV"))
    p.add_argument("--sample", required=True)
    p.add_argument("--estimator", default="NIV_3lag", choices=sorted(ESTIMATOR_SPECS))
    p.add_argument("--niv-lags", type=int, help="NIV with this many instrument lags")
    p.add_argument("--weight", default="tsls", choices=["tsls", "identity", "efficient"])

    p = common(sub.add_parser("identify", help="check NIV identifiability of a parameter file"))
    p.add_argument("--params", required=True)

    p = common(sub.add_parser("predict", help="predict Y_{t+1} under do(X_t := x)"))
    p.add_argument("--sample", required=True)
    p.add_argument("--beta", type=float, nargs="+", required=True)
    p.add_argument("--x", type=float, nargs="+", required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--l", type=int, default=1)

    p = common(sub.add_parser("experiment", help="run a Monte-Carlo experiment"))
    p.add_argument("id", choices=EXPERIMENTS)
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--full-scale", action="store_true")
    p.set_defaults(seed=None, out=None)
    return ap


def _emit(obj, out, name):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        fh.write(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    print(path)


def _simulate(a):
    params = read_params(a.params)
    if a.intervene_at is not None:
        spec = InterventionSpec(a.intervene_at, a.value or [0.0])
        sample = simulate_with_intervention(params, a.T, spec, a.seed)
    else:
        sample = simulate(params, a.T, a.seed)
    os.makedirs(a.out, exist_ok=True)
    path = os.path.join(a.out, "sample.csv")
    write_sample(sample, path)
    print(path)


def _estimate(a):
    sample = read_sample(a.sample)
    spec = AlignmentSpec.niv(a.niv_lags) if a.niv_lags else ESTIMATOR_SPECS[a.estimator]
    est = civ_fit(ts_align(sample, spec, weight=a.weight), cov="hac")
    _emit(est.to_json(spec=spec.to_dict(), seed=a.seed), a.out, "estimate.json")


def _identify(a):
    params = read_params(a.params)
    rep = is_identifiable_niv(InstrumentalVar1(params))
    _emit(rep.to_json(), a.out, "identifiability.json")


def _predict(a):
    sample = read_sample(a.sample)
    lay = sample.layout
    beta = np.asarray(a.beta).reshape(lay.d_Y, lay.d_X)
    p = fit_intervention_predictor(beta, sample, a.m, a.l)
    xl, yl = history_at(sample, sample.T - 1, a.m, a.l)
    pred = predict_under_intervention(p, xl, yl, np.asarray(a.x))
    obj = json.loads(p.to_json())
    obj["prediction"] = pred.tolist()
    _emit(obj, a.out, "prediction.json")


def _experiment(a):
    cfg = ExperimentConfig.from_json(a.config) if a.config else ExperimentConfig(a.id)
    if cfg.experiment != a.id:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {a.id!r}")
    if a.full_scale:
        cfg = cfg.full_scale()
    overrides = {}
    if a.seed is not None:
        overrides["seed"] = a.seed
    if a.workers is not None:
        overrides["workers"] = a.workers
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    out = a.out or cfg.out or "."
    for path in write_result(cfg, run_experiment(cfg), out):
        print(path)


COMMANDS = {"simulate": _simulate, "estimate": _estimate, "identify": _identify,
            "predict": _predict, "experiment": _experiment}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, DimensionError, UnstableProcessError, OSError) as exc:
        print(f"tsiv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TsivError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"tsiv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"tsiv: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
