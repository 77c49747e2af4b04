"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Each test records its line through ``report_criterion`` and then asserts, so
the summary section at the end of the pytest run lists every criterion.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.stats import norm

from conftest import find_data_file, random_dataset
from mbauc.cli import main
from mbauc.data import LabeledDataset, load_libsvm, normalize_l2, save_libsvm
from mbauc.metrics import auc, paired_ttest, roc_curve
from mbauc.model import RegularizationSpec
from mbauc.moments import MomentAccumulator, absorb_batch, exact_full_pair_moments
from mbauc.solver import kkt_residual, solve
from mbauc.theory import measure_concentration, tail_check

pytestmark = pytest.mark.acceptance


def simulate(tmp_path, capsys, *args):
    js = tmp_path / "sim.json"
    t0 = time.perf_counter()
    code = main(["simulate", "--json-output", str(js), *map(str, args)])
    elapsed = time.perf_counter() - t0
    capsys.readouterr()
    assert code == 0
    return json.loads(js.read_text()), elapsed


def auc_standard_error(a, n_pos, n_neg):
    """Hanley-McNeil standard error of an empirical AUC."""
    q1, q2 = a / (2 - a), 2 * a * a / (1 + a)
    var = (a * (1 - a) + (n_pos - 1) * (q1 - a * a) + (n_neg - 1) * (q2 - a * a)) / (n_pos * n_neg)
    return math.sqrt(var)


def analytic_np_auc(pos_w, neg_w, means, d=100):
    return sum(a * b * norm.cdf((ma - mb) * math.sqrt(d / 2))
               for a, ma in zip(pos_w, means) for b, mb in zip(neg_w, means))


# ---------------------------------------------------------------- 1, 2

def test_criterion_1_np_oracle_k1(tmp_path, capsys, report_criterion):
    rec, elapsed = simulate(tmp_path, capsys, "--k", 1, "--d", 100, "--n-test", 100_000,
                            "--trials", 0, "--sr", 1.0, "--seed", 0)
    row = rec["rows"][0]
    a = row["np_auc"]
    exact = norm.cdf(math.sqrt(2))
    se = auc_standard_error(exact, row["n_test_pos"], row["n_test_neg"])
    ok = abs(100 * a - 92.13) <= 0.3 and abs(a - exact) <= 3 * se and elapsed < 60
    report_criterion(1, ok, f"NP AUC k=1 {100 * a:.2f} (target 92.13 +/- 0.3; analytic "
                            f"{100 * exact:.3f}, |diff| {abs(a - exact):.4f} vs 3 SE {3 * se:.4f}); "
                            f"{elapsed:.1f}s < 60s")
    assert ok


def test_criterion_2_np_oracle_k2_k3(tmp_path, capsys, report_criterion):
    rec, _ = simulate(tmp_path, capsys, "--k", 2, 3, "--d", 100, "--n-test", 100_000,
                      "--trials", 0, "--sr", 1.0, "--seed", 0)
    got = {row["k"]: 100 * row["np_auc"] for row in rec["rows"]}
    analytic = {2: analytic_np_auc([0.1, 0.9], [0.9, 0.1], [-0.1, 0.1]),
                3: analytic_np_auc([0.1, 0.1, 0.8], [0.8, 0.1, 0.1], [-0.1, 0.0, 0.1])}
    ok = abs(got[2] - 83.71) <= 0.5 and abs(got[3] - 80.22) <= 0.5
    report_criterion(2, ok, f"NP AUC k=2 {got[2]:.2f} (83.71 +/- 0.5, analytic {100 * analytic[2]:.2f}), "
                            f"k=3 {got[3]:.2f} (80.22 +/- 0.5, analytic {100 * analytic[3]:.2f})")
    assert ok


# ---------------------------------------------------------------- 3

@pytest.mark.slow
def test_criterion_3_mba_simulation(tmp_path, capsys, report_criterion):
    rec, elapsed = simulate(tmp_path, capsys, "--k", 1, "--d", 100, "--sr", "1%", "100%",
                            "--trials", 50, "--seed", 0)
    rows = {row["sr"]: row["methods"] for row in rec["rows"]}
    full = 100 * rows[1.0]["mba_l2"]["mean"]
    mba_small, psl_small = 100 * rows[0.01]["mba_l2"]["mean"], 100 * rows[0.01]["mb_psl"]["mean"]
    ok = 90.9 <= full <= 92.1 and mba_small > psl_small
    report_criterion(3, ok, f"MBA-l2 k=1 SR=100% mean {full:.2f} in [90.9, 92.1]; SR=1% MBA "
                            f"{mba_small:.2f} > MB-PSL {psl_small:.2f} (50 trials, {elapsed:.0f}s)")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_4_moment_exactness(report_criterion):
    t0 = time.perf_counter()
    ds = random_dataset(np.random.default_rng(4), 20, 30, 8)
    P, N = ds.X_pos.toarray(), ds.X_neg.toarray()
    mu, sigma = np.zeros(8), np.zeros((8, 8))
    for xp in P:
        for xn in N:
            z = xp - xn
            mu += z
            sigma += np.outer(z, z)
    mu, sigma = mu / 600, sigma / 600
    acc = absorb_batch(MomentAccumulator.empty(8), [(i, j) for i in range(20) for j in range(30)], ds)
    closed = exact_full_pair_moments(ds)

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))

    err = max(rel(acc.mu, mu), rel(acc.sigma, sigma), rel(closed.mu, mu), rel(closed.sigma, sigma))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-12 and elapsed < 1.0
    report_criterion(4, ok, f"all-pairs moments vs double sum, max rel err {err:.1e} <= 1e-12; "
                            f"{elapsed * 1000:.0f} ms < 1 s")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_solver(report_criterion):
    rng = np.random.default_rng(5)
    worst_rel, worst_kkt, zero_ok = 0.0, 0.0, True
    for _ in range(50):
        d = int(rng.integers(1, 51))
        A = rng.standard_normal((d, int(rng.integers(1, d + 1))))
        sigma, mu = A @ A.T / A.shape[1], rng.standard_normal(d)
        acc = MomentAccumulator.from_moments(mu, sigma)
        l2 = float(10 ** rng.uniform(-3, 1))
        model = solve(acc, RegularizationSpec(0.0, l2))
        ref = np.linalg.solve(sigma + l2 * np.eye(d), mu)
        worst_rel = max(worst_rel, np.linalg.norm(model.w - ref) / np.linalg.norm(ref))
        worst_kkt = max(worst_kkt, kkt_residual(model.w, sigma, mu, model.reg))
        l1 = float(np.max(np.abs(mu))) * float(rng.uniform(1.0, 2.0))
        killed = solve(acc, RegularizationSpec(l1, float(rng.uniform(0, 1))))
        zero_ok &= bool(np.all(killed.w == 0.0))
        worst_kkt = max(worst_kkt, kkt_residual(killed.w, sigma, mu, killed.reg))
        mixed = solve(acc, RegularizationSpec(0.1 * l1, l2))
        worst_kkt = max(worst_kkt, kkt_residual(mixed.w, sigma, mu, mixed.reg))
    ok = worst_rel <= 1e-6 and zero_ok and worst_kkt <= 1e-8
    report_criterion(5, ok, f"ridge vs factorization max rel err {worst_rel:.1e} <= 1e-6; "
                            f"lambda1 >= |mu|_inf gives w = 0: {zero_ok}; max KKT residual "
                            f"{worst_kkt:.1e} <= 1e-8 (50 instances, d <= 50)")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_auc_oracle(report_criterion):
    rng = np.random.default_rng(6)
    exact = True
    worst_area = 0.0
    for _ in range(200):
        pos = rng.integers(0, 6, int(rng.integers(1, 50))).astype(float)
        neg = rng.integers(0, 6, int(rng.integers(1, 50))).astype(float)
        brute = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg) / (pos.size * neg.size)
        a = auc(pos, neg).auc
        exact &= a == brute
        worst_area = max(worst_area, abs(roc_curve(pos, neg).area() - a))
    ties = auc(np.full(7, 2.5), np.full(9, 2.5)).auc
    ok = exact and ties == 0.5 and worst_area <= 1e-12
    report_criterion(6, ok, f"rank-sum == brute force on 200 tied sets: {exact}; all ties -> {ties}; "
                            f"max |ROC area - AUC| {worst_area:.1e} <= 1e-12")
    assert ok


# ---------------------------------------------------------------- 7, 8

@pytest.fixture(scope="module")
def concentration():
    rng = np.random.default_rng(7)
    d = 20
    ds = normalize_l2(LabeledDataset.from_dense(rng.normal(0.1, 1, (2000, d)),
                                                rng.normal(-0.1, 1, (2000, d))))
    t0 = time.perf_counter()
    report = measure_concentration(ds, RegularizationSpec(0.0, 0.01), [100, 1000, 10_000],
                                   trials=50, seed=7)
    return report, time.perf_counter() - t0


def test_criterion_7_concentration(concentration, report_criterion):
    report, elapsed = concentration
    med = {S: float(np.median([s.w_gap for s in report.by_S(S)])) for S in (100, 1000, 10_000)}
    gaps_ok = all(s.objective_gap >= 0 for s in report.samples)
    ratio = med[100] / med[10_000]
    ok = med[100] > med[1000] > med[10_000] and ratio >= 3 and gaps_ok and elapsed < 300
    report_criterion(7, ok, f"median |w_N - w_S| {med[100]:.3g} > {med[1000]:.3g} > {med[10_000]:.3g}, "
                            f"ratio {ratio:.1f} >= 3; objective_gap >= 0 on all {len(report.samples)} "
                            f"trials: {gaps_ok}; {elapsed:.1f}s < 300s")
    assert ok


def test_criterion_8_bernstein(concentration, report_criterion):
    report, _ = concentration
    rows = tail_check(report, [0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5], R_x=1.0, d=20)
    excess = max(r["empirical"] - r["bound"] for r in rows)
    ok = excess <= 0.05
    report_criterion(8, ok, f"max(empirical tail - Bernstein bound) {excess:+.3f} <= 0.05 over "
                            f"{len(rows)} (gamma, S) points")
    assert ok


# ---------------------------------------------------------------- 9

def _bench_run(tmp_path, capsys, path, runs):
    js = tmp_path / f"{path.stem}.json"
    assert main(["bench", "--train", str(path), "--runs", str(runs), "--seed", "0",
                 "--json-output", str(js)]) == 0
    capsys.readouterr()
    return json.loads(js.read_text())["rows"][0]


def test_criterion_9_benchmarks(tmp_path, capsys, report_criterion):
    mushrooms = find_data_file("mushrooms", "mushrooms.txt", "mushrooms.svm")
    svmguide3 = find_data_file("svmguide3", "svmguide3.txt", "svmguide3.svm")
    if mushrooms is None or svmguide3 is None:
        report_criterion(9, True, "benchmark files not found; set MBAUC_DATA_DIR to a folder "
                                  "holding the LIBSVM files mushrooms and svmguide3", skipped=True)
        pytest.skip("benchmark data not available")
    m = _bench_run(tmp_path, capsys, mushrooms, 50)
    g = _bench_run(tmp_path, capsys, svmguide3, 50)
    mush = 100 * m["methods"]["mba_l2"]["mean"]
    mba, olr = 100 * g["methods"]["mba_l2"]["mean"], 100 * g["methods"]["olr"]["mean"]
    tt = paired_ttest(g["runs"]["mba_l2"], g["runs"]["olr"])
    ok = abs(mush - 100.0) <= 0.05 and mba >= 78 and olr <= 68 and tt.direction == "better"
    report_criterion(9, ok, f"mushrooms MBA {mush:.2f} (100 +/- 0.05); svmguide3 MBA {mba:.2f} >= 78, "
                            f"OLR {olr:.2f} <= 68, t-test {tt.direction}")
    assert ok


# ---------------------------------------------------------------- 10

def test_criterion_10_determinism(tmp_path, capsys, report_criterion):
    rng = np.random.default_rng(10)
    data = tmp_path / "d.svm"
    save_libsvm(LabeledDataset.from_dense(rng.normal(0.2, 1, (80, 5)), rng.normal(0, 1, (120, 5))), data)
    commands = {
        "train": ["train", data, "-o", tmp_path / "out.json", "--seed", 4, "-B", 30, "-T", 3],
        "simulate": ["simulate", "--k", 1, 3, "--d", 8, "--trials", 3, "--n-train", 400,
                     "--n-test", 1000, "--seed", 4, "-o", tmp_path / "t.csv",
                     "--json-output", tmp_path / "out.json"],
        "bench": ["bench", "--train", data, "--runs", 3, "--seed", 4, "-o", tmp_path / "t.csv",
                  "--json-output", tmp_path / "out.json"],
    }
    same = {}
    for name, argv in commands.items():
        outs = []
        for _ in range(2):
            assert main([str(a) for a in argv]) == 0
            capsys.readouterr()
            rec = json.loads((tmp_path / "out.json").read_text())
            rec["provenance"].pop("created_at")
            outs.append(rec)
        same[name] = outs[0] == outs[1]
    ok = all(same.values())
    report_criterion(10, ok, "identical JSON on rerun (timestamp excluded): "
                             + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok
