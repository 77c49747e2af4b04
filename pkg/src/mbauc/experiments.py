"""Drivers for the simulation sweep and the benchmark suite.

Every random quantity is seeded from the run seed plus a fixed key path, so
results do not depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import BenchConfig, SimulateConfig
from .data import LabeledDataset, SplitSpec, load_libsvm, normalize_l2, stratified_split
from .metrics import auc, evaluate, paired_ttest
from .simulation import HypothesisPair, np_scores, preset, sample, sample_arrays, subsample

WORKERS_ENV = "MBAUC_WORKERS"

# Key-path tags for seed derivation.
_TEST, _TRAIN, _SUBSAMPLE, _FIT, _SPLIT = 1, 2, 3, 4, 5


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0])


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """``map`` over a bounded thread pool; output order follows input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def summarize_runs(runs: dict[str, list[float]], reference: str) -> dict:
    """Mean/std per method plus a paired t-test of the reference against each."""
    out = {}
    ref = runs.get(reference)
    for name, vals in runs.items():
        arr = np.asarray(vals)
        row = {
            "mean": float(arr.mean()),
            "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "n": int(arr.size),
            "marker": "",
            "t_stat": None,
        }
        if ref is not None and name != reference and arr.size >= 2:
            tt = paired_ttest(ref, vals)
            # filled: reference significantly better; empty: significantly worse
            row["marker"] = tt.marker
            row["t_stat"] = None if tt.infinite else tt.t_stat
            row["direction"] = tt.direction
        out[name] = row
    return out


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


# ---------------------------------------------------------------------------
# simulation

def _hypotheses(cfg: SimulateConfig, k: int) -> HypothesisPair:
    if cfg.mixture is not None:
        return HypothesisPair.load(cfg.mixture)
    return preset(k, cfg.d, cfg.imbalance)


def run_simulation(cfg: SimulateConfig, workers: int | None = None) -> dict:
    rows = []
    ks = [0] if cfg.mixture is not None else cfg.k
    for k in ks:
        pair = _hypotheses(cfg, k)
        Xp, Xn = sample_arrays(pair, cfg.n_test, derive_seed(cfg.seed, k, _TEST))
        test = LabeledDataset.from_dense(Xp, Xn, name="test")
        np_report = auc(np_scores(pair, Xp), np_scores(pair, Xn))

        def one_trial(t: int, pair=pair, k=k, test=test):
            full = sample(pair, cfg.n_train, derive_seed(cfg.seed, k, _TRAIN, t))
            per_sr = []
            for s_idx, sr in enumerate(cfg.sr):
                train = subsample(full, sr, derive_seed(cfg.seed, k, _SUBSAMPLE, t, s_idx))
                fit_seed = derive_seed(cfg.seed, k, _FIT, t, s_idx)
                per_sr.append({m.name: evaluate(m.train(train, fit_seed), test).auc
                               for m in cfg.methods})
            return per_sr

        trials = ordered_map(one_trial, range(cfg.trials), workers) if cfg.methods else []
        for s_idx, sr in enumerate(cfg.sr):
            runs = {m.name: [tr[s_idx][m.name] for tr in trials] for m in cfg.methods}
            rows.append({
                "k": k, "sr": sr, "np_auc": np_report.auc,
                "n_test_pos": np_report.n_pos, "n_test_neg": np_report.n_neg,
                "methods": summarize_runs(runs, cfg.reference) if trials else {},
                "runs": runs,
            })
    return {"rows": rows, "method_names": [m.name for m in cfg.methods]}


def simulation_csv(result: dict) -> str:
    buf = io.StringIO()
    names = result["method_names"]
    header = ["k", "SR", "NP"]
    for n in names:
        header += [f"{n}_mean", f"{n}_std", f"{n}_marker"]
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in result["rows"]:
        line = [row["k"], f"{100 * row['sr']:g}%", _pct(row["np_auc"])]
        for n in names:
            m = row["methods"].get(n)
            line += [_pct(m["mean"]), _pct(m["std"]), m["marker"]] if m else ["", "", ""]
        wr.writerow(line)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# benchmark

def _load_pair(entry, max_d: int):
    train = load_libsvm(entry.train, d=entry.d, max_d=max_d)
    test = None
    if entry.test is not None:
        test = load_libsvm(entry.test, d=entry.d, max_d=max_d)
        d = max(train.d, test.d)
        train, test = train.with_dimension(d), test.with_dimension(d)
    name = entry.name or train.name
    return train, test, name


def run_bench(cfg: BenchConfig, workers: int | None = None,
              datasets: Sequence[tuple[LabeledDataset, LabeledDataset | None, str]] | None = None) -> dict:
    if datasets is None:
        datasets = [_load_pair(e, cfg.max_d) for e in cfg.datasets]
    rows = []
    for ds_idx, (full, fixed_test, name) in enumerate(datasets):

        def one_run(r: int, full=full, fixed_test=fixed_test, ds_idx=ds_idx):
            run_seed = derive_seed(cfg.seed, ds_idx, r)
            if fixed_test is None:
                train, test = stratified_split(
                    full, SplitSpec(cfg.test_fraction, True, derive_seed(run_seed, _SPLIT)))
            else:
                train, test = full, fixed_test
            if cfg.normalize:
                train, test = normalize_l2(train), normalize_l2(test)
            return {m.name: evaluate(m.train(train, derive_seed(run_seed, _FIT, m_idx)), test).auc
                    for m_idx, m in enumerate(cfg.methods)}

        results = ordered_map(one_run, range(cfg.runs), workers)
        runs = {m.name: [res[m.name] for res in results] for m in cfg.methods}
        rows.append({"dataset": name, "n_pos": full.n_pos, "n_neg": full.n_neg, "d": full.d,
                     "methods": summarize_runs(runs, cfg.reference), "runs": runs})
    return {"rows": rows, "method_names": [m.name for m in cfg.methods]}


def bench_csv(result: dict) -> str:
    buf = io.StringIO()
    names = result["method_names"]
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["dataset"] + names)
    for row in result["rows"]:
        cells = []
        for n in names:
            m = row["methods"][n]
            cell = f"{_pct(m['mean'])} ± {_pct(m['std'])}"
            cells.append(f"{m['marker']} {cell}" if m["marker"] else cell)
        wr.writerow([row["dataset"]] + cells)
    return buf.getvalue()
