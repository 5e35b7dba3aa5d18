"""Reading and writing parameter files and sample CSVs."""

from __future__ import annotations

import csv
import json
import re

import numpy as np

from .exceptions import ConfigError
from .var_model import BLOCK_ORDER, BlockLayout, TimeSeriesSample, VarParameters


def params_to_dict(params: VarParameters) -> dict:
    lay = params.layout
    return {
        "p": params.p,
        "dims": lay.to_dict() if lay is not None else None,
        "A": [params.A(k).tolist() for k in range(1, params.p + 1)],
        "Gamma_diag": params.gamma_diag.tolist(),
    }


def params_from_dict(obj: dict) -> VarParameters:
    try:
        A = np.asarray(obj["A"], dtype=float)
        dims = obj.get("dims")
        layout = BlockLayout(**dims) if dims else None
        params = VarParameters(A, obj.get("Gamma_diag"), layout)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameter file: {exc}") from exc
    if "p" in obj and int(obj["p"]) != params.p:
        raise ConfigError(f"declared order {obj['p']} does not match {params.p} coefficient matrices")
    return params


def write_params(params: VarParameters, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh, indent=2)


def read_params(path: str) -> VarParameters:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read parameters from {path}: {exc}") from exc
    return params_from_dict(obj)


def write_sample(sample: TimeSeriesSample, path: str) -> None:
    """CSV with header ``t,I1..,H1..,X1..,Y1..`` and 1-based time index."""
    labels = sample.layout.labels()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + labels)
        for t in range(sample.T):
            w.writerow([t + 1] + [format(v, ".17g") for v in sample.data[:, t]])


def layout_from_labels(labels) -> BlockLayout:
    counts = {b: 0 for b in BLOCK_ORDER}
    expected = []
    for lab in labels:
        m = re.fullmatch(r"([IHXY])(\d+)", lab)
        if not m:
            raise ConfigError(f"bad column label {lab!r}")
        counts[m.group(1)] += 1
    lay = BlockLayout(d_I=counts["I"], d_X=counts["X"], d_H=counts["H"], d_Y=counts["Y"])
    expected = lay.labels()
    if list(labels) != expected:
        raise ConfigError(f"columns must be ordered as {expected}")
    return lay


def read_sample(path: str) -> TimeSeriesSample:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read sample {path}: {exc}") from exc
    if not rows or rows[0][0] != "t":
        raise ConfigError("sample CSV must start with a 't' column")
    lay = layout_from_labels(rows[0][1:])
    try:
        data = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).T
    except ValueError as exc:
        raise ConfigError(f"non-numeric entry in {path}: {exc}") from exc
    return TimeSeriesSample(data.reshape(lay.d, -1), lay)
