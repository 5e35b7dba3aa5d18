"""Predicting Y after setting X, with and without a causal estimate.

An OLS forecaster fits Y_{t+1} on recent X and Y.  Under a strong
intervention do(X_t := x) it extrapolates the confounded X coefficient.  The
IV-based predictor plugs in an estimated causal effect and regresses the
remaining part on the history.  The gap grows with the size of the push.

Run: python3 demos/04_prediction_under_intervention.py
"""

import numpy as np

from tsiv.estimators import AlignmentSpec, fit_time_series
from tsiv.prediction import (fit_intervention_predictor, fit_ols_predictor, history_at, predict_ols,
                             predict_under_intervention)
from tsiv.var_model import BlockLayout, InstrumentalVar1, InterventionSpec, simulate, simulate_with_intervention

lay = BlockLayout(1, 1, 1, 1)
model = InstrumentalVar1.from_blocks(lay, dict(II=0.5, HH=0.8, XI=0.6, XH=0.8, XX=0.3, YH=0.8, YX=1.0, YY=0.5))
train = simulate(model.params, 5000, seed=1)
beta_hat = fit_time_series(train, AlignmentSpec.civ("IXY")).beta_hat
iv = fit_intervention_predictor(beta_hat, train)
ols = fit_ols_predictor(train)
sd = train.X.std()
print(f"beta_hat = {beta_hat[0, 0]:.3f}, OLS X coefficient = {ols.coef_x[0, 0, 0]:.3f}")

rng = np.random.default_rng(2)
T, t0 = 60, 50
for k in (1, 5):
    err_iv, err_ols = [], []
    for rep in range(300):
        x = k * sd * rng.choice([-1, 1])
        s = simulate_with_intervention(model.params, T, InterventionSpec(t0, [x]), seed=100 + rep)
        xl, yl = history_at(s, t0 - 1, iv.m, iv.l)
        y_next = s.Y[0, t0]
        err_iv.append((predict_under_intervention(iv, xl, yl, x)[0] - y_next) ** 2)
        err_ols.append((predict_ols(ols, xl, yl, x)[0] - y_next) ** 2)
    print(f"push of {k} sd: MSPE IV {np.mean(err_iv):.2f}, OLS {np.mean(err_ols):.2f}")
