"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS criterion N`` or ``FAIL criterion N`` line with the
measured quantities; the lines are repeated in the pytest terminal summary.
Run directly with ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, variance_example_scm
from tsiv.estimators import AlignmentSpec, fit_time_series, naive_iv_plim
from tsiv.graph import (MixedGraph, SeparationQuery, check_conditions, d_separated, d_separated_bruteforce,
                        marginalize, project_window)
from tsiv.harness import (ExperimentConfig, run_consistency, run_delta_sweep, run_identifiability_census,
                          run_obs_equivalence, run_predict)
from tsiv.identifiability import is_identifiable_niv
from tsiv.scm_iid import LinearScm, asymptotic_variance_civ, asymptotic_variance_niv, civ_population_moment
from tsiv.var_model import (BlockLayout, InstrumentalVar1, VarParameters, companion_matrix, path_coefficient_tce,
                            random_instrumental_var1, simulate, spectral_radius, stationary_covariance,
                            total_causal_effect)


def report(n, ok, detail, t0):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{time.perf_counter() - t0:.1f} s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _median(rows, **match):
    v = [r[match.pop("value", "error")] for r in rows if all(r[k] == x for k, x in match.items())]
    return float(np.nanmedian(v))


def test_criterion_1_reference_variances():
    t0 = time.perf_counter()
    targets = {"I": (524.4, 522.7), "II": (320.0, 575.4)}
    parts, ok = [], True
    for which, (civ_t, niv_t) in targets.items():
        m = variance_example_scm(which)
        civ = asymptotic_variance_civ(m)[0, 0]
        niv = asymptotic_variance_niv(m)[0, 0]
        ok &= abs(civ - civ_t) <= 0.05 and abs(niv - niv_t) <= 0.05
        parts.append(f"set {which}: CIV {civ:.4g} (target {civ_t}), NIV {niv:.4g} (target {niv_t})")
    report(1, ok, "; ".join(parts), t0)


def test_criterion_2_naive_iv_limit():
    t0 = time.perf_counter()
    lay = BlockLayout(1, 1, 1, 1)
    base = dict(HH=0.5, XI=0.6, XH=0.5, XX=0.3, YH=0.5, YX=1.0, YY=0.5)
    m = InstrumentalVar1.from_blocks(lay, {**base, "II": 0.5})
    m0 = InstrumentalVar1.from_blocks(lay, base)
    plim, plim0 = naive_iv_plim(m), naive_iv_plim(m0)
    est = fit_time_series(simulate(m.params, 200_000, 2024), AlignmentSpec.naive()).beta_hat[0, 0]
    est0 = fit_time_series(simulate(m0.params, 200_000, 2025), AlignmentSpec.naive()).beta_hat[0, 0]
    ok = abs(est / plim - 1) <= 0.02 and plim0 == m0.beta[0, 0] and abs(est0 / plim0 - 1) <= 0.02
    report(2, ok, f"plim {plim:.4f}, naive IV {est:.4f} (rel. dev {abs(est / plim - 1):.2%}); "
                  f"alpha_II=0: plim/beta {plim0 / m0.beta[0, 0]:.3f}, naive IV {est0:.4f}", t0)


@pytest.mark.slow
def test_criterion_3_consistency():
    t0 = time.perf_counter()
    cfg = ExperimentConfig("consistency", n_matrices=100, replicates=5, T=[300, 1000, 10000], seed=1)
    rows = run_consistency(cfg)
    parts, ok = [], True
    for e in cfg.estimators:
        lo, hi = _median(rows, estimator=e, T=300), _median(rows, estimator=e, T=10000)
        ok &= hi <= lo / 5
        parts.append(f"{e} {lo:.3g}->{hi:.3g}")
    q = {e: np.nanpercentile([np.log10(r["error"]) for r in rows if r["estimator"] == e and r["T"] == 1000], 95)
         for e in ("NIV_1lag", "NIV_3lag")}
    ok &= q["NIV_1lag"] >= q["NIV_3lag"]
    parts.append(f"95th pct log10 error at T=1000: NIV_1lag {q['NIV_1lag']:.2f}, NIV_3lag {q['NIV_3lag']:.2f}")
    report(3, ok, "median error T=300->10000: " + ", ".join(parts), t0)


def test_criterion_4_identifiability():
    t0 = time.perf_counter()
    n_agree, n_total, n_jordan = 0, 0, 0
    for d_X in (1, 2, 3):
        lay = BlockLayout(1, d_X, 1, 1)
        for seed in range(167):
            rep = is_identifiable_niv(random_instrumental_var1(lay, seed=10_000 * d_X + seed))
            n_agree += rep.methods_agree
            n_jordan += rep.methods["jordan_criterion"] is not None
            n_total += 1
    lay = BlockLayout(1, 2, 1, 1)
    ex1 = [is_identifiable_niv(random_instrumental_var1(lay, seed=s, fixed={"XX": c * np.eye(2), "XY": 0.0}))
           for s, c in enumerate((-0.7, -0.3, 0.2, 0.5, 0.8))]
    lay1 = BlockLayout(1, 1, 1, 1)
    ex2 = [is_identifiable_niv(InstrumentalVar1.from_blocks(lay1, dict(II=0.5, HH=0.5, XI=0.5, XH=0.5, XX=a,
                                                                         YH=0.5, YX=b, YY=a)))
           for a, b in ((0.4, 0.7), (-0.5, 0.3), (0.1, -1.2))]
    census = run_identifiability_census(ExperimentConfig("identifiability_census", n_matrices=1000, seed=4))
    ok = (n_agree == n_total and all(r.methods_agree and not r.identifiable for r in ex1)
          and all(r.methods_agree and r.identifiable for r in ex2)
          and census["fraction_identifiable"] == 1.0)
    report(4, ok, f"agreement {n_agree}/{n_total} random draws ({n_jordan} with eigen check); "
                  f"repeated-eigenvalue examples identifiable: {sum(r.identifiable for r in ex1)}/{len(ex1)}; "
                  f"equal-diagonal examples identifiable: {sum(r.identifiable for r in ex2)}/{len(ex2)}; "
                  f"generic census {census['fraction_identifiable']:.3f} of 1000", t0)


@pytest.mark.slow
def test_criterion_5_delta_sweep():
    t0 = time.perf_counter()
    cfg = ExperimentConfig("delta_sweep", n_matrices=50, replicates=5, T=[100, 1000, 50000], seed=5,
                           params={"deltas": [0.0, 0.1, 1.0]})
    rows = run_delta_sweep(cfg)
    med = {(d, T): _median(rows, delta=d, T=T) for d in (0.0, 0.1, 1.0) for T in cfg.T}
    ok = (med[(0.0, 1000)] / med[(0.0, 50000)] <= 2
          and med[(1.0, 100)] / med[(1.0, 50000)] >= 10
          and med[(1.0, 50000)] <= med[(0.1, 50000)] <= med[(0.0, 50000)])
    report(5, ok, f"delta=0: {med[(0.0, 1000)]:.3g}->{med[(0.0, 50000)]:.3g} (T=1000->50000); "
                  f"delta=1: {med[(1.0, 100)]:.3g}->{med[(1.0, 50000)]:.3g} (T=100->50000); "
                  f"T=50000 by delta 1/0.1/0: {med[(1.0, 50000)]:.3g} / {med[(0.1, 50000)]:.3g} / "
                  f"{med[(0.0, 50000)]:.3g}", t0)


@pytest.mark.slow
def test_criterion_6_prediction():
    t0 = time.perf_counter()
    cfg = ExperimentConfig("predict_under_intervention", n_matrices=100, replicates=100, seed=6,
                           params={"n_sigma": [1, 5]})
    rows = run_predict(cfg)
    parts, ok = [], True
    for e in ("CIV_IXY", "NIV_3lag", "true"):
        r5 = [r for r in rows if r["n_sigma"] == 5]
        r1 = [r for r in rows if r["n_sigma"] == 1]
        frac = np.mean([r["mspe_OLS"] > r[f"mspe_{e}"] for r in r5])
        lr = lambda rs: float(np.nanmedian([abs(np.log(r["mspe_OLS"] / r[f"mspe_{e}"])) for r in rs]))
        ok &= frac > 0.6 and lr(r1) < lr(r5)
        parts.append(f"{e}: OLS worse at 5 sigma on {frac:.0%}, median |log ratio| {lr(r1):.3f} (1 sigma) "
                     f"vs {lr(r5):.3f} (5 sigma)")
    report(6, ok, "; ".join(parts), t0)


def test_criterion_7_observational_equivalence():
    t0 = time.perf_counter()
    rep = run_obs_equivalence(ExperimentConfig("obs_equivalence"))
    worst = int(np.argmax(rep["per_lag_diff"]))
    ok = rep["max_abs_autocov_diff"] <= 1e-9 and rep["tce_model_1"] == 0.0 and rep["tce_model_2"] == rep["b"]
    report(7, ok, f"max autocovariance difference {rep['max_abs_autocov_diff']:.3g} (at lag {worst}); "
                  f"effects {rep['tce_model_1']} vs {rep['tce_model_2']}", t0)


def _random_admg(rng, n):
    order = rng.permutation(n)
    p_dir, p_bi = rng.uniform(0.1, 0.5), rng.uniform(0.0, 0.3)
    directed = [(int(order[i]), int(order[j])) for i in range(n) for j in range(i + 1, n) if rng.random() < p_dir]
    bidirected = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p_bi]
    return MixedGraph(frozenset(range(n)), frozenset(directed), frozenset(bidirected))


def _labelled(g):
    lab = g.node_label
    return ({(lab(u), lab(v)) for u, v in g.directed}, {frozenset((lab(u), lab(v))) for u, v in g.bidirected})


def _bi(*pairs):
    return {frozenset(p) for p in pairs}


# reference edge sets for the projected windows; labels are component_t-lag
CIV_WINDOW_EDGES = ({("I1_t-2", "X1_t-1"), ("X1_t-1", "Y1_t"), ("I1_t-3", "I1_t-2"), ("I1_t-3", "X1_t-2"),
             ("X1_t-2", "Y1_t-1"), ("Y1_t-1", "Y1_t"), ("X1_t-2", "X1_t-1")},
            _bi(("I1_t-3", "Y1_t-1"), ("I1_t-3", "X1_t-2"), ("Y1_t-1", "Y1_t"), ("X1_t-2", "Y1_t-1"),
                ("X1_t-1", "Y1_t"), ("X1_t-2", "X1_t-1"), ("X1_t-2", "Y1_t"), ("Y1_t-1", "X1_t-1")))
NIV1_WINDOW_EDGES = ({("I1_t-2", "X1_t-1"), ("X1_t-1", "Y1_t"), ("Y1_t-1", "Y1_t")},
              _bi(("I1_t-2", "X1_t-1"), ("I1_t-2", "Y1_t-1"), ("Y1_t-1", "Y1_t"), ("X1_t-1", "Y1_t"),
                  ("Y1_t-1", "X1_t-1")))


def niv_window_edges(m):
    last = f"I1_t-{m + 1}"
    directed = {("I1_t-2", "X1_t-1"), ("X1_t-1", "Y1_t"), ("Y1_t-1", "Y1_t")}
    directed |= {(f"I1_t-{k + 1}", f"I1_t-{k}") for k in range(2, m + 1)}
    directed |= {(f"I1_t-{k}", v) for k in range(3, m + 2) for v in ("X1_t-1", "Y1_t-1")}
    return directed, _bi(("Y1_t-1", "Y1_t"), ("X1_t-1", "Y1_t"), ("Y1_t-1", "X1_t-1"), (last, "X1_t-1"),
                         (last, "Y1_t-1"))


def test_criterion_8_graphs():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    n_cases, n_agree = 0, 0
    while n_cases < 500:
        n = int(rng.integers(2, 13))
        g = _random_admg(rng, n)
        lab = rng.integers(0, 4, n)
        A = [i for i in range(n) if lab[i] == 0]
        C = [i for i in range(n) if lab[i] == 1]
        if not A or not C:
            continue
        q = SeparationQuery(A, C, [i for i in range(n) if lab[i] == 2])
        n_cases += 1
        n_agree += d_separated(g, q) == d_separated_bruteforce(g, q)

    lay = BlockLayout(1, 1, 1, 1)
    full = dict(II=0.5, HH=0.5, XI=0.5, XH=0.5, XX=0.3, XY=0.2, YH=0.5, YX=0.4, YY=0.3)
    proc = InstrumentalVar1.from_blocks(lay, full).params
    no_feedback = InstrumentalVar1.from_blocks(lay, {k: v for k, v in full.items() if k != "XY"}).params
    M_left = [("I1", -3), ("I1", -2), ("X1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
    M_mid = [("I1", -2), ("X1", -1), ("Y1", -1), ("Y1", 0)]
    left = _labelled(project_window(proc, M_left, 30))
    left_nf = _labelled(project_window(no_feedback, M_left, 30))
    mid = _labelled(project_window(proc, M_mid, 30))
    right_ok = all(_labelled(project_window(proc, [("I1", -k) for k in range(2, m + 2)]
                                            + [("X1", -1), ("Y1", -1), ("Y1", 0)], 30)) == niv_window_edges(m)
                   for m in (1, 2, 3, 4))
    extra = sorted(tuple(sorted(e)) for e in left[1] - CIV_WINDOW_EDGES[1])
    missing = sorted(tuple(sorted(e)) for e in CIV_WINDOW_EDGES[1] - left[1])

    def small_graph(edges, keep):
        nodes = set(keep) | {"H"}
        return marginalize(MixedGraph(frozenset(nodes), frozenset(edges)), keep)
    g_left = small_graph({("I", "X"), ("X", "Y"), ("H", "X"), ("H", "Y"), ("H", "B"), ("B", "I"), ("B", "Y")}, "IXYB")
    g_mid = small_graph({("I", "X"), ("I", "Z"), ("X", "Y"), ("H", "X"), ("H", "Y"), ("H", "Z"), ("Z", "Y")}, "IXYZ")
    g_right = small_graph({("I", "X"), ("B", "I"), ("B", "Z"), ("B", "X"), ("H", "X"), ("H", "Y"), ("H", "Z"),
                    ("Z", "Y"), ("X", "Y")}, "IXYZB")
    civ = lambda g: check_conditions(g, {"I"}, {"X"}, {"B"} if "B" in g.nodes else ({"Z"} if "Z" in g.nodes
                                                                                   else set()), "Y").holds
    niv = lambda g, inst, z: check_conditions(g, inst, {"X"} | z, set(), "Y").holds
    small_ok = (civ(g_left) and not niv(g_left, {"I"}, {"B"})
               and not civ(g_mid) and niv(g_mid, {"I"}, {"Z"})
               and civ(g_right) and niv(g_right, {"I", "B"}, {"Z"}))

    ok = (n_agree == n_cases and left == CIV_WINDOW_EDGES and mid == NIV1_WINDOW_EDGES and right_ok and small_ok)
    report(8, ok, f"separation vs brute force {n_agree}/{n_cases}; "
                  f"left marginalization equals reference: {left == CIV_WINDOW_EDGES} (extra {extra}, missing {missing}; "
                  f"without Y->X feedback equal: {left_nf == CIV_WINDOW_EDGES}); middle equal: {mid == NIV1_WINDOW_EDGES}; "
                  f"right equal for m=1..4: {right_ok}; instrument-graph classifications: {small_ok}", t0)


def _random_scm_civ(rng):
    # [H, I, X, Y, B, W]: B blocks I <- B <- H, W is an extra cause of X
    A = np.zeros((6, 6))
    c = lambda: rng.choice([-1, 1]) * rng.uniform(0.2, 2.0)
    A[4, 0], A[1, 4], A[5, 1] = c(), c(), c() if rng.random() < 0.5 else 0.0
    A[2, [0, 1, 5]] = [c(), c(), c()]
    A[3, [0, 2, 4]] = [c(), c(), c()]
    return LinearScm(A, rng.uniform(0.2, 3, 6), {"H": [0], "I": [1], "X": [2], "Y": 3, "B": [4]})


def _random_scm_niv(rng):
    # [H, I, X, Y, Z]
    A = np.zeros((5, 5))
    c = lambda: rng.choice([-1, 1]) * rng.uniform(0.2, 2.0)
    A[2, [0, 1]] = [c(), c()]
    A[4, [0, 1]] = [c(), c()]
    A[3, [0, 2, 4]] = [c(), c(), c()]
    return LinearScm(A, rng.uniform(0.2, 3, 5), {"H": [0], "I": [1], "X": [2], "Y": 3, "Z": [4]})


def test_criterion_9_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_moment = 0.0
    for _ in range(300):
        m = _random_scm_civ(rng)
        worst_moment = max(worst_moment, np.max(np.abs(civ_population_moment(m, m.A[3, 2]))))
        m = _random_scm_niv(rng)
        mom = civ_population_moment(m, m.A[3, 2], B=[], Z=[4], alpha=m.A[3, 4])
        worst_moment = max(worst_moment, np.max(np.abs(mom)))

    worst_lyap = 0.0
    for k in range(300):
        if k % 2:
            lay = BlockLayout(int(rng.integers(1, 4)), int(rng.integers(1, 4)), 1, 1)
            params = random_instrumental_var1(lay, seed=int(rng.integers(2 ** 32))).params
        else:
            p, d = int(rng.integers(1, 4)), int(rng.integers(1, 6))
            A = rng.normal(size=(p, d, d))
            r = spectral_radius(VarParameters(A))
            s = rng.uniform(0.1, 0.95) / r
            params = VarParameters(A * np.array([s ** (j + 1) for j in range(p)])[:, None, None],
                                   rng.uniform(0.1, 3, d))
        S = stationary_covariance(params).companion
        C = companion_matrix(params)
        G = np.zeros_like(C)
        G[:params.d, :params.d] = params.gamma
        worst_lyap = max(worst_lyap, np.max(np.abs(S - C @ S @ C.T - G)) / np.max(np.abs(S)))

    worst_tce = 0.0
    for _ in range(300):
        p, d, lag = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        params = VarParameters(rng.normal(size=(p, d, d)) * (rng.random((p, d, d)) < 0.6))
        i, j = (int(v) for v in rng.integers(0, d, 2))
        a = total_causal_effect(params, i, j, lag)[0, 0]
        b = path_coefficient_tce(params, i, j, lag)
        worst_tce = max(worst_tce, abs(a - b) / max(1.0, abs(b)))
    ok = worst_moment <= 1e-10 and worst_lyap <= 1e-10 and worst_tce <= 1e-10
    report(9, ok, f"max population moment {worst_moment:.2g}; max relative Lyapunov residual {worst_lyap:.2g}; "
                  f"max effect vs path-sum difference {worst_tce:.2g}", t0)


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
