"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

Tolerances and runtime limits are fixed constants below.  Run with
``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import json
import math
import sys
import time

import numpy as np
import pytest
from scipy.special import ndtr

from collinear.bounds import corollary_bound, prop1_bound, residual_from_accuracies, residual_from_triplets
from collinear.cli import main as cli_main
from collinear.closeness import ClosenessParams, check_closeness
from collinear.corrdata import AccuracyPairSet, CorrectnessMatrix
from collinear.events import (
    CELL_NAMES,
    PATTERNS,
    TripletPoint,
    dominance_table,
    enumerate_triplet_points,
    triplet_events,
)
from collinear.gridbound import GridSearchConfig, max_residual_grid
from collinear.synth import (
    exact_matrix,
    example1,
    example2,
    random_ordered_triplet,
    random_triplet,
    random_wedge_q,
    sample_matrix,
)
from collinear.trends import inverse_normal_cdf, ols_fit, piecewise_fit, probit_fit

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

EXACT_TOL = 1e-12
PROP1_TARGET, PROP1_TOL = 0.0545, 5e-4
GRID_WIDE_WINDOW = (0.074, 0.094)
GRID_NARROW_WINDOW = (0.037, 0.053)
GRID_STEPS = (0.02, 0.01, 0.005)
PROBIT_TOL = 1e-9
LINE_SLOPE_TOL = 0.05
PROBIT_RECOVERY_TOL = 1e-6
HINGE_SLOPE_TOL = 0.05

LIMIT_S = {1: 1, 2: 1, 3: 1, 4: 300, 5: 10, 6: 60, 7: 30, 8: 10, 9: 10, 10: 120}

WIDE = ClosenessParams(0.31, 0.38, 0.005, 0.008)
NARROW = ClosenessParams(0.0, 0.25, 0.005, 0.005)
MU = (0.6, 0.7, 0.8)


def record(cid: str, ok: bool, detail: str, elapsed: float, limit: float) -> None:
    within = elapsed < limit
    verdict = "PASS" if ok and within else "FAIL"
    line = f"[{verdict}] AC-{cid}: {detail} (runtime {elapsed:.2f}s, limit {limit}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, detail
    assert within, f"runtime {elapsed:.2f}s exceeds {limit}s"


def test_ac1_example1_oracle():
    t0 = time.perf_counter()
    sc = example1()
    mu_p, mu_q = sc.P.accuracies, sc.Q.accuracies
    r = residual_from_triplets(sc.P, sc.Q)
    errs = [abs(a - b) for a, b in zip(mu_p, (0.6, 0.7, 0.8))]
    errs += [abs(a - b) for a, b in zip(mu_q, (0.5, 0.9, 0.9))]
    errs.append(abs(r - 0.2))
    ok = max(errs) <= EXACT_TOL
    record("1", ok, f"mu_p={tuple(round(v, 12) for v in mu_p)} mu_q={tuple(round(v, 12) for v in mu_q)} "
                    f"residual={r:.12f}; max error {max(errs):.1e} <= {EXACT_TOL}",
           time.perf_counter() - t0, LIMIT_S[1])


def test_ac2_example2_oracle():
    t0 = time.perf_counter()
    sc = example2()
    mu_q = sc.Q.accuracies
    r = residual_from_triplets(sc.P, sc.Q)
    dom = dominance_table(exact_matrix(sc.P, 1000, seed=0))
    doms = [float(e.dominance) for e in dom.entries]
    pts = [TripletPoint(0, 1, 2, PATTERNS[0], getattr(sc.P, c), getattr(sc.Q, c)) for c in CELL_NAMES[:-1]]
    violations = check_closeness(pts, WIDE).violating
    errs = [abs(a - b) for a, b in zip(mu_q, (0.646, 0.573, 0.826))]
    errs.append(abs(r - 0.163))
    errs += [abs(a - b) for a, b in zip(doms, (0.18, 0.12, 0.14))]
    errs += [abs(a - b) for a, b in zip(sc.P.dominances, (0.18, 0.12, 0.14))]
    ok = max(errs) <= EXACT_TOL and violations == 0
    record("2", ok, f"mu_q={tuple(round(v, 12) for v in mu_q)} residual={r:.12f} "
                    f"dominance={tuple(round(v, 12) for v in doms)} violations={violations}; "
                    f"max error {max(errs):.1e} <= {EXACT_TOL}",
           time.perf_counter() - t0, LIMIT_S[2])


def test_ac3_prop1_value():
    t0 = time.perf_counter()
    v = prop1_bound(*MU, WIDE).bound_value
    ok = abs(v - PROP1_TARGET) <= PROP1_TOL and v <= 0.055
    record("3", ok, f"prop1_bound={v:.6f}, target {PROP1_TARGET} +/- {PROP1_TOL}, <= 0.055",
           time.perf_counter() - t0, LIMIT_S[3])


def test_ac4a_grid_bound_wide_wedge():
    t0 = time.perf_counter()
    v = max_residual_grid(GridSearchConfig(0.05, MU, WIDE)).max_value
    lo, hi = GRID_WIDE_WINDOW
    record("4a", lo <= v <= hi, f"grid max at (0.31, 0.38, 0.005, 0.008) = {v:.6f}, window [{lo}, {hi}]",
           time.perf_counter() - t0, LIMIT_S[4])


def test_ac4b_grid_bound_narrow_wedge():
    t0 = time.perf_counter()
    v = max_residual_grid(GridSearchConfig(0.05, MU, NARROW)).max_value
    lo, hi = GRID_NARROW_WINDOW
    record("4b", lo <= v <= hi, f"grid max at (0, 0.25, 0.005, 0.005) = {v:.6f}, window [{lo}, {hi}]",
           time.perf_counter() - t0, LIMIT_S[4])


def test_ac4c_grid_refinement_monotone():
    t0 = time.perf_counter()
    seqs = {}
    for name, params in (("wide", WIDE), ("narrow", NARROW)):
        seqs[name] = [max_residual_grid(GridSearchConfig(0.05, MU, params, s)).max_value for s in GRID_STEPS]
    ok = all(all(b >= a for a, b in zip(v, v[1:])) for v in seqs.values())
    detail = "; ".join(f"{k}: " + " <= ".join(f"{x:.6f}" for x in v) for k, v in seqs.items())
    record("4c", ok, f"steps {GRID_STEPS}: {detail}", time.perf_counter() - t0, LIMIT_S[4])


def test_ac5_corollary_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_gap = math.inf
    for _ in range(20):
        params = ClosenessParams(*rng.uniform(0, 0.6, 2), *rng.uniform(0, 0.03, 2))
        lo, hi = np.sort(rng.uniform(0, 1, 2))
        sweep = np.linspace(lo, hi, 100)
        halved = max(prop1_bound(lo, m, hi, params).halved_value for m in sweep)
        worst_gap = min(worst_gap, corollary_bound(lo, hi, params) - halved)
    record("5", worst_gap >= 0, f"20 configs x 100 mu_j: min(corollary - max halved prop1) = {worst_gap:.3e} >= 0",
           time.perf_counter() - t0, LIMIT_S[5])


def test_ac6_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    max_err, n_pairs = 0.0, 0
    while n_pairs < 1000:
        P, Q = random_triplet(rng), random_triplet(rng)
        a, b = P.accuracies, Q.accuracies
        if not (a[0] <= a[1] <= a[2] and a[0] < a[2]):
            continue
        acc = residual_from_accuracies((a[0], b[0]), (a[1], b[1]), (a[2], b[2]))
        max_err = max(max_err, abs(residual_from_triplets(P, Q) - acc))
        n_pairs += 1
    n = 1_000_000
    tol = 3 / math.sqrt(n)
    max_dev = 0.0
    for s in range(10):
        T = random_triplet(rng)
        got = triplet_events(sample_matrix(T, n, 1000 + s), 0, 1, 2)
        max_dev = max(max_dev, max(abs(getattr(got, c) - getattr(T, c)) for c in CELL_NAMES))
    ok = max_err <= EXACT_TOL and max_dev <= tol
    record("6", ok, f"1000 pairs max |triplet - accuracy residual| = {max_err:.1e} <= {EXACT_TOL}; "
                    f"10 sampled distributions max cell deviation {max_dev:.2e} <= 3/sqrt(n) = {tol:.1e}",
           time.perf_counter() - t0, LIMIT_S[6])


def test_ac7_ordered_set_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        params = ClosenessParams(*rng.uniform(0, 0.5, 2), *rng.uniform(0, 0.02, 2))
        P = random_ordered_triplet(rng)
        Q = random_wedge_q(P, params, rng)
        if residual_from_triplets(P, Q) > prop1_bound(*P.accuracies, params).bound_value + EXACT_TOL:
            bad += 1
    record("7", bad == 0, f"1000 wedge-satisfying Q against ordered P: {bad} counterexamples",
           time.perf_counter() - t0, LIMIT_S[7])


def _bisect_quantile(p):
    lo, hi = np.full_like(p, -12.0), np.full_like(p, 12.0)
    for _ in range(200):
        mid = (lo + hi) / 2
        below = ndtr(mid) < p
        lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
    return (lo + hi) / 2


def _pairs(x, y):
    return AccuracyPairSet.from_lists([f"m{i:02d}" for i in range(len(x))], list(x), list(y))


def test_ac8_trend_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    x = np.sort(rng.uniform(0.3, 0.95, 50))
    line = ols_fit(_pairs(x, 0.9 * x - 0.05 + rng.uniform(-0.01, 0.01, 50)))
    line_err = abs(line.slope - 0.9)

    xp = np.linspace(0.2, 0.95, 50)
    pr = probit_fit(_pairs(xp, ndtr(0.9 * _bisect_quantile(xp) - 0.3)))
    probit_err = max(abs(pr.slope - 0.9), abs(pr.intercept + 0.3))

    xh = np.sort(rng.uniform(0.2, 0.9, 66))
    knot = xh[5]
    yh = np.where(xh <= knot, 0.5 * xh, 0.5 * knot + 1.1 * (xh - knot)) + rng.uniform(-0.005, 0.005, 66)
    hinge = piecewise_fit(_pairs(xh, yh), 6)
    hinge_err = max(abs(hinge.segments[0][0] - 0.5), abs(hinge.segments[1][0] - 1.1))

    grid = np.linspace(1e-7, 1 - 1e-7, 10_000)
    z = inverse_normal_cdf(grid)
    inv_err = float(max(np.max(np.abs(z - _bisect_quantile(grid))), np.max(np.abs(ndtr(z) - grid))))

    ok = (line_err <= LINE_SLOPE_TOL and probit_err <= PROBIT_RECOVERY_TOL
          and hinge_err <= HINGE_SLOPE_TOL and inv_err <= PROBIT_TOL)
    record("8", ok, f"line slope err {line_err:.4f} <= {LINE_SLOPE_TOL}; probit param err {probit_err:.1e} "
                    f"<= {PROBIT_RECOVERY_TOL}; hinge slope err {hinge_err:.4f} <= {HINGE_SLOPE_TOL}; "
                    f"inverse CDF vs bisection and round trip {inv_err:.1e} <= {PROBIT_TOL} on 10^4 points",
           time.perf_counter() - t0, LIMIT_S[8])


def test_ac9_event_counts():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    mismatches = []
    for h in range(3, 11):
        bp, bq = rng.integers(0, 2, (h, 40)), rng.integers(0, 2, (h, 40))
        names = [f"m{i}" for i in range(h)]
        got = list(enumerate_triplet_points(CorrectnessMatrix.from_bits(bp, names),
                                            CorrectnessMatrix.from_bits(bq, names)))
        brute = []
        for i, j, k in itertools.combinations(range(h), 3):
            for pat in PATTERNS:
                want = np.array([s == "+" for s in pat])
                sel_p = np.all(bp[[i, j, k]].T.astype(bool) == want, axis=1).mean()
                sel_q = np.all(bq[[i, j, k]].T.astype(bool) == want, axis=1).mean()
                brute.append((i, j, k, pat, sel_p, sel_q))
        same = len(got) == len(brute) == 6 * math.comb(h, 3) and all(
            (g.i, g.j, g.k, g.pattern) == b[:4] and abs(g.p - b[4]) <= EXACT_TOL and abs(g.q - b[5]) <= EXACT_TOL
            for g, b in zip(got, brute)
        )
        if not same:
            mismatches.append(h)
    record("9", not mismatches, f"6*C(h,3) points match brute force for h in 3..10; mismatches: {mismatches}",
           time.perf_counter() - t0, LIMIT_S[9])


def test_ac10_report_determinism(tmp_path):
    t0 = time.perf_counter()
    fixtures = tmp_path / "fx"
    assert cli_main(["scenario", "planted", "--n", "5000", "--seed", "10", "--models", "10",
                     "--out", str(fixtures)]) == 0
    docs = []
    for run in ("a", "b"):
        out = tmp_path / run
        cli_main(["report", str(fixtures / "P.csv"), str(fixtures / "Q.csv"), "--out", str(out),
                  "--zeta", "0.05", "--switch", "6"])
        doc = json.loads((out / "report.json").read_text())
        doc.pop("metadata")
        docs.append(json.dumps(doc, sort_keys=True))
    record("10", docs[0] == docs[1], f"two report runs identical outside metadata: {docs[0] == docs[1]}",
           time.perf_counter() - t0, LIMIT_S[10])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider", "-s"]))
