"""``mbauc`` command line: train, eval, roc, simulate, bench, bound.

Each subcommand takes ``--config file.json`` and/or flags; flags win.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .config import (BenchConfig, BoundConfig, EvalConfig, RocConfig, SimulateConfig,
                     TrainConfig)
from .data import load_libsvm, normalize_l2
from .errors import ConfigError, DataError, MBAError
from .experiments import bench_csv, run_bench, run_simulation, simulation_csv
from .mba import MBAConfig, estimate_moments, fit_moments
from .metrics import evaluate, roc_curve, score
from .model import RankerModel
from .theory import BoundInputs, bernstein_tail, required_samples, sample_bound_terms

log = logging.getLogger("mbauc")

SEED_DEFAULT = {"seed": 0}


# ---------------------------------------------------------------------------
# config plumbing

def _load_config(cls, config_path, overrides: dict, defaults: dict | None = None):
    """Merge defaults < config file < flags, then validate."""
    raw = dict(defaults or {})
    if config_path:
        try:
            from_file = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
        raw.update(from_file)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid {cls.__name__}:\n{exc}") from None


def _file_digest(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def provenance(cfg, inputs=()) -> dict:
    """Config echo plus a content hash over the config and input file bytes."""
    echo = cfg.model_dump(mode="json")
    payload = {"config": echo, "inputs": {str(p): _file_digest(p) for p in inputs if p}}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return {
        "tool_version": __version__,
        "config": echo,
        "content_hash": digest,
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_text(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_eval_data(path, model: RankerModel, normalize: bool, max_d: int):
    data = load_libsvm(path, max_d=max(max_d, model.d))
    if data.d > model.d:
        raise DataError(f"data has {data.d} features but the model only {model.d}")
    data = data.with_dimension(model.d)
    return normalize_l2(data) if normalize else data


# ---------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    cfg = _load_config(TrainConfig, args.config, {
        "data": args.data, "output": args.output, "seed": args.seed, "B": args.B, "T": args.T,
        "lambda1": args.lambda1, "lambda2": args.lambda2, "exact": args.exact or None,
        "solver": args.solver, "normalize": args.normalize, "d": args.d,
        "allow_singular": args.allow_singular or None,
    }, defaults=SEED_DEFAULT)
    t0 = time.perf_counter()
    data = load_libsvm(cfg.data, d=cfg.d, max_d=cfg.max_d)
    data.require_both_classes()
    if cfg.normalize:
        data = normalize_l2(data)
    mcfg = MBAConfig(B=cfg.B, T=cfg.T, lambda1=cfg.lambda1, lambda2=cfg.lambda2, seed=cfg.seed,
                     moments="exact" if cfg.exact else "sample", solver=cfg.solver,
                     allow_singular=cfg.allow_singular)
    acc = estimate_moments(data, mcfg)
    model = fit_moments(acc, mcfg)
    elapsed = time.perf_counter() - t0
    rec = model.to_dict()
    rec["provenance"] = provenance(cfg, [cfg.data])
    _write_json(rec, cfg.output)
    pairs = f"all {acc.count} pairs (exact)" if cfg.exact else f"S = B*T = {cfg.B}*{cfg.T} = {acc.count}"
    print(f"{pairs}; solver {model.solver['method']} iterations {model.solver['iters']}, "
          f"KKT residual {model.solver['residual']:.2e}; wall time {elapsed:.3f}s",
          file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(EvalConfig, args.config, {
        "model": args.model, "data": args.data, "output": args.output,
        "roc_output": args.roc_output, "normalize": args.normalize,
    })
    model = RankerModel.load(cfg.model)
    data = _load_eval_data(cfg.data, model, cfg.normalize, cfg.max_d)
    rep = evaluate(model, data)
    out = {"auc": rep.auc, "auc_pct": rep.percent, "n_pos": rep.n_pos, "n_neg": rep.n_neg,
           "tie_mass": rep.tie_mass, "provenance": provenance(cfg, [cfg.model, cfg.data])}
    if cfg.roc_output is not None:
        _write_text(roc_curve(*score(model, data)).to_csv(), cfg.roc_output)
    if cfg.output is None:
        print(f"AUC {rep.percent}")
    else:
        _write_json(out, cfg.output)
        print(f"AUC {rep.percent}", file=sys.stderr)
    return 0


def cmd_roc(args) -> int:
    cfg = _load_config(RocConfig, args.config, {
        "model": args.model, "data": args.data, "output": args.output,
        "normalize": args.normalize,
    })
    model = RankerModel.load(cfg.model)
    data = _load_eval_data(cfg.data, model, cfg.normalize, cfg.max_d)
    _write_text(roc_curve(*score(model, data)).to_csv(), cfg.output)
    return 0


def _parse_ratio(s: str) -> float:
    s = s.strip()
    if s.endswith("%"):
        return float(s[:-1]) / 100.0
    return float(s)


def cmd_simulate(args) -> int:
    cfg = _load_config(SimulateConfig, args.config, {
        "seed": args.seed, "k": args.k, "d": args.d,
        "sr": [_parse_ratio(s) for s in args.sr] if args.sr else None,
        "trials": args.trials, "n_train": args.n_train, "n_test": args.n_test,
        "mixture": args.mixture, "output": args.output, "json_output": args.json_output,
    }, defaults=SEED_DEFAULT)
    result = run_simulation(cfg)
    _write_text(simulation_csv(result), cfg.output)
    if cfg.json_output is not None:
        _write_json({**result, "provenance": provenance(cfg, [cfg.mixture])}, cfg.json_output)
    return 0


def cmd_bench(args) -> int:
    overrides = {"seed": args.seed, "runs": args.runs, "output": args.output,
                 "json_output": args.json_output, "normalize": args.normalize}
    if args.train:
        overrides["datasets"] = [{"train": args.train, "test": args.test}]
    cfg = _load_config(BenchConfig, args.config, overrides, defaults=SEED_DEFAULT)
    result = run_bench(cfg)
    _write_text(bench_csv(result), cfg.output)
    if cfg.json_output is not None:
        inputs = [p for e in cfg.datasets for p in (e.train, e.test)]
        _write_json({**result, "provenance": provenance(cfg, inputs)}, cfg.json_output)
    return 0


def cmd_bound(args) -> int:
    cfg = _load_config(BoundConfig, args.config, {
        "d": args.d, "R_x": args.R_x, "R_w": args.R_w, "mu_norm": args.mu_norm,
        "lambda2": args.lambda2, "sigma_norm": args.sigma_norm, "epsilon": args.epsilon,
        "p": args.p, "gammas": args.gamma, "S": args.S, "output": args.output,
    })
    b = BoundInputs(d=cfg.d, R_x=cfg.R_x, R_w=cfg.weight_bound, sigma_norm=cfg.sigma_norm,
                    epsilon=cfg.epsilon, p=cfg.p)
    quad, lin = sample_bound_terms(b)
    tails = [
        {"gamma": g, "S": s, "matrix": bernstein_tail(g, s, b, "matrix"),
         "scalar": bernstein_tail(g, s, b, "scalar")}
        for g in cfg.gammas for s in cfg.S
    ]
    out = {"required_samples": required_samples(b), "quadratic_term": quad, "linear_term": lin,
           "R_w": b.R_w, "tails": tails, "provenance": provenance(cfg)}
    _write_json(out, cfg.output)
    return 0


# ---------------------------------------------------------------------------
# parser

def _bool_flag(p, name, help_):
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action=argparse.BooleanOptionalAction,
                   default=None, help=help_)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mbauc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit an MBA ranker on a LIBSVM file")
    p.add_argument("--config")
    p.add_argument("data", nargs="?")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("-B", "--B", dest="B", type=int, help="pairs per round")
    p.add_argument("-T", "--T", dest="T", type=int, help="number of rounds")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--exact", action="store_true", help="use all-pairs moments instead of sampling")
    p.add_argument("--solver", choices=["cd", "direct"])
    p.add_argument("--allow-singular", action="store_true")
    p.add_argument("--d", type=int, help="feature dimension override")
    _bool_flag(p, "normalize", "L2-normalize every example (default on)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="AUC of a model on a LIBSVM file")
    p.add_argument("--config")
    p.add_argument("model", nargs="?")
    p.add_argument("data", nargs="?")
    p.add_argument("-o", "--output", help="metrics JSON path (default: print AUC)")
    p.add_argument("--roc-output")
    _bool_flag(p, "normalize", "L2-normalize every example (default on)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="ROC curve CSV (false_alarm, detection)")
    p.add_argument("--config")
    p.add_argument("model", nargs="?")
    p.add_argument("data", nargs="?")
    p.add_argument("-o", "--output")
    _bool_flag(p, "normalize", "L2-normalize every example (default on)")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("simulate", help="Gaussian-mixture study with the NP oracle")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--d", type=int)
    p.add_argument("--sr", nargs="+", help="sample ratios, e.g. 1%% 10%% 100%% or 0.01")
    p.add_argument("--trials", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--mixture", help="custom HypothesisPair JSON")
    p.add_argument("-o", "--output")
    p.add_argument("--json-output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="benchmark MBA against gradient baselines")
    p.add_argument("--config")
    p.add_argument("--train", help="LIBSVM file (overrides config datasets)")
    p.add_argument("--test", help="optional test file; otherwise a stratified 50/50 split")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--runs", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--json-output")
    _bool_flag(p, "normalize", "L2-normalize every example (default on)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bound", help="sample-size bound and Bernstein tails")
    p.add_argument("--config")
    p.add_argument("--d", type=int)
    p.add_argument("--R-x", dest="R_x", type=float)
    p.add_argument("--R-w", dest="R_w", type=float)
    p.add_argument("--mu-norm", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--sigma-norm", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--S", type=int, nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bound)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MBAError as exc:
        print(f"mbauc {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"mbauc {args.command}: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
