"""Compiled inner loops for VAR simulation.

Falls back to plain Python when numba is unavailable; both paths produce
identical floating point results because the accumulation order is fixed.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def var_recursion(coefs, noise, state, t0, x_lo, x_hi, x_value):
    """Run ``S_t = sum_k A_k S_{t-k} + e_t`` in place on ``state``.

    ``state`` has shape (T, d) and its first ``p`` rows are already filled.
    ``noise`` has shape (T, d); rows before ``p`` are ignored.  If ``t0 >= 0``
    the X block of row ``t0`` is overwritten by ``x_value`` right after that
    row is generated.
    """
    p, d, _ = coefs.shape
    T = state.shape[0]
    if 0 <= t0 < p:
        for c in range(x_lo, x_hi):
            state[t0, c] = x_value[c - x_lo]
    for t in range(p, T):
        for i in range(d):
            acc = 0.0
            for k in range(p):
                row = state[t - k - 1]
                for j in range(d):
                    acc += coefs[k, i, j] * row[j]
            state[t, i] = acc + noise[t, i]
        if t == t0:
            for c in range(x_lo, x_hi):
                state[t, c] = x_value[c - x_lo]
    return state


def run_recursion(coefs, noise, state, t0=-1, x_slice=None, x_value=None):
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    state = np.ascontiguousarray(state, dtype=np.float64)
    if x_slice is None:
        x_lo, x_hi = 0, 0
        x_value = np.zeros(0)
    else:
        x_lo, x_hi = x_slice.start, x_slice.stop
        x_value = np.ascontiguousarray(x_value, dtype=np.float64)
    return var_recursion(coefs, noise, state, int(t0), int(x_lo), int(x_hi), x_value)
