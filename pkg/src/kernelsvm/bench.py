"""Command line harness: ``train``, ``predict`` and ``bench`` subcommands.

Training time is wall clock around the solver call only; loading, scaling,
prediction and file output are never inside the timed region. Multiclass
problems are trained one-versus-one and the pair times are summed.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset, Scaling, apply_scale, fit_scale, load_libsvm
from .exceptions import ParseError, SolverError
from .kernel import KernelSpec
from .metrics import EvalReport, OvoModel, OvoPair, error_rate, one_minus_auc, ovo_decisions, ovo_predict, ovo_train
from .smo import DualModel
from .solvers import CONFIGS, make_config
from .spsvm import SparsePrimalModel

__all__ = [
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "REPORT_VERSION",
    "CSV_HEADER",
    "BenchReport",
    "save_model",
    "load_model",
    "model_to_json",
    "model_from_json",
    "cli_train",
    "cli_predict",
    "cli_bench",
    "main",
]

MODEL_FORMAT = "kernelsvm-model"
MODEL_VERSION = 1
REPORT_VERSION = 1
CSV_HEADER = (
    "dataset,n,d,solver,C,gamma,seed,threads,train_seconds,"
    "error_pct,one_minus_auc_pct,basis_or_sv_count,speedup"
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class UsageError(Exception):
    pass


@dataclass
class BenchReport:
    dataset: str
    n: int
    d: int
    solver: str
    C: float
    gamma: float
    seed: int
    threads: int
    train_seconds: float
    error_pct: float | None
    one_minus_auc_pct: float | None
    basis_or_sv_count: int
    speedup: float | None = None
    version: int = REPORT_VERSION

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        return [self.to_dict()[k] for k in CSV_HEADER.split(",")]


# --------------------------------------------------------------------------
# model files

def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=np.float64).reshape(-1)]


def _pair_payload(model):
    if isinstance(model, DualModel):
        return {
            "kind": "dual",
            "indices": [int(i) for i in model.support_indices],
            "vectors": [_floats(v) for v in model.support_vectors],
            "coef": _floats(model.dual_coef),
            "b": float(model.b),
        }
    if isinstance(model, SparsePrimalModel):
        return {
            "kind": "sparse_primal",
            "indices": [int(i) for i in model.basis],
            "vectors": [_floats(v) for v in model.basis_vectors],
            "coef": _floats(model.beta),
            "b": float(model.b),
        }
    raise TypeError(f"cannot serialise model of type {type(model).__name__}")


def _pair_model(payload, spec: KernelSpec, C: float, d: int):
    vectors = np.asarray(payload["vectors"], dtype=np.float64).reshape(-1, d)
    coef = np.asarray(payload["coef"], dtype=np.float64)
    idx = np.asarray(payload["indices"], dtype=np.intp)
    b = float(payload["b"])
    if payload["kind"] == "dual":
        # alpha is only known on the support once the training set is gone
        return DualModel(alpha=np.abs(coef), b=b, support_indices=idx, spec=spec,
                         C=C, support_vectors=vectors, dual_coef=coef)
    if payload["kind"] == "sparse_primal":
        return SparsePrimalModel(basis=idx, basis_vectors=vectors, beta=coef,
                                 b=b, spec=spec, C=C)
    raise ValueError(f"unknown model kind {payload['kind']!r}")


def _config_echo(cfg) -> dict:
    # thread count is excluded so files do not depend on it
    return {k: v for k, v in asdict(cfg).items() if k != "threads"}


def model_to_json(model: OvoModel, spec: KernelSpec, cfg, n_features: int,
                  scaling: Scaling | None = None) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kernel": spec.to_dict(),
        "solver": model.solver,
        "class_ids": [int(c) for c in model.class_ids],
        "n_features": int(n_features),
        "scaling": None if scaling is None else {
            "mins": _floats(scaling.mins), "maxs": _floats(scaling.maxs)},
        "config": _config_echo(cfg),
        "pairs": [
            {"positive": int(p.positive), "negative": int(p.negative),
             **_pair_payload(p.model)}
            for p in model.pairs
        ],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


@dataclass
class LoadedModel:
    ovo: OvoModel
    spec: KernelSpec
    n_features: int
    scaling: Scaling | None
    config: dict


def model_from_json(text: str) -> LoadedModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a kernelsvm model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    spec = KernelSpec(doc["kernel"]["gamma"], doc["kernel"]["family"])
    d = int(doc["n_features"])
    C = float(doc["config"].get("C", 1.0))
    pairs = [
        OvoPair(int(p["positive"]), int(p["negative"]), _pair_model(p, spec, C, d))
        for p in doc["pairs"]
    ]
    ovo = OvoModel(np.asarray(doc["class_ids"], dtype=np.int64), pairs, doc["solver"])
    sc = doc.get("scaling")
    scaling = None if sc is None else Scaling(sc["mins"], sc["maxs"])
    return LoadedModel(ovo, spec, d, scaling, doc["config"])


def save_model(path, model: OvoModel, spec: KernelSpec, cfg, n_features: int,
               scaling: Scaling | None = None):
    _write_atomic(path, model_to_json(model, spec, cfg, n_features, scaling))


def load_model(path) -> LoadedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())


# --------------------------------------------------------------------------
# helpers

def _write_atomic(path, text: str):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Outputs:
    """Writes files atomically and deletes all of them if a later step fails."""

    def __init__(self):
        self.written: list[str] = []

    def write(self, path, text):
        if path is None:
            return
        _write_atomic(path, text)
        self.written.append(os.fspath(path))

    def rollback(self):
        for p in self.written:
            if os.path.exists(p):
                os.unlink(p)
        self.written.clear()


def _load(path, n_features=None) -> Dataset:
    try:
        return load_libsvm(path, n_features=n_features)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except ParseError as exc:
        raise DataError(f"{path}: {exc}") from exc


class DataError(Exception):
    pass


def _evaluate(model: OvoModel, ds: Dataset, threads: int, with_auc: bool):
    """Return (EvalReport, predicted ids, binary decision values or None)."""
    D = ovo_decisions(model, ds.X, threads)
    pred = ovo_predict(model, ds.X, threads)
    auc = None
    scores = None
    if model.is_binary:
        pair = model.pairs[0]
        scores = D[:, 0]
        truth = np.where(ds.labels == pair.positive, 1, -1)
        if with_auc and (truth > 0).any() and (truth < 0).any():
            auc = one_minus_auc(scores, truth)
    report = EvalReport(error_pct=error_rate(pred, ds.labels), n_test=ds.n,
                        one_minus_auc_pct=auc)
    return report, pred, scores


def _config(solver, args, seed=None):
    try:
        return make_config(solver, **_solver_options(args, seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _solver_options(args, seed=None):
    return dict(
        C=args.c,
        epsilon=args.epsilon,
        candidate_size=args.candidate_size,
        batch_size=args.batch,
        max_basis=args.max_basis,
        threads=args.threads,
        seed=args.seed if seed is None else seed,
    )


def _train(train: Dataset, solver: str, spec: KernelSpec, cfg, parallel: bool):
    try:
        return ovo_train(train, solver, spec, cfg, parallel=parallel)
    except SolverError as exc:
        raise _SolverFailure(str(exc)) from exc
    except np.linalg.LinAlgError as exc:
        raise _SolverFailure(str(exc)) from exc


class _SolverFailure(Exception):
    pass


def _report(ds_name, train: Dataset, solver, cfg, spec, seed, threads, model,
            evaluation: EvalReport | None) -> BenchReport:
    return BenchReport(
        dataset=ds_name,
        n=train.n,
        d=train.d,
        solver=solver,
        C=float(cfg.C),
        gamma=spec.gamma,
        seed=int(seed),
        threads=int(threads),
        train_seconds=round(model.train_seconds, 3),
        error_pct=None if evaluation is None else evaluation.error_pct,
        one_minus_auc_pct=None if evaluation is None else evaluation.one_minus_auc_pct,
        basis_or_sv_count=int(model.size),
    )


# --------------------------------------------------------------------------
# subcommands

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _add_hyper(p, require_c=True):
    p.add_argument("--c", type=_positive_float, required=require_c, help="box constraint C")
    p.add_argument("--gamma", type=_positive_float, required=True, help="RBF width")
    p.add_argument("--epsilon", type=float, default=None, help="SP-SVM stopping threshold")
    p.add_argument("--candidate-size", type=_positive_int, default=None)
    p.add_argument("--batch", type=_positive_int, default=None,
                   help="basis vectors added between Newton solves")
    p.add_argument("--max-basis", type=_positive_int, default=None)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", action="store_true",
                   help="scale features to [0, 1] using training minima and maxima")
    p.add_argument("--ovo-parallel", action="store_true",
                   help="train one-versus-one pairs concurrently")
    p.add_argument("--n-features", type=_positive_int, default=None,
                   help="dimensionality; default is the largest index in the data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernelsvm", description="Kernel SVM training toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", required=True, help="LibSVM training file")
    p.add_argument("--solver", required=True, choices=sorted(CONFIGS))
    _add_hyper(p)
    p.add_argument("--model-out", help="model file to write")
    p.add_argument("--report-out", help="JSON report to write")

    p = sub.add_parser("predict", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metric", choices=("error", "auc"), default="error")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--report-out")
    p.add_argument("--predictions-out",
                   help="write one line per test point: predicted label, then decision value for binary models")

    p = sub.add_parser("bench", help="compare solvers on a train/test split")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--solvers", required=True, help="comma list; the first is the speedup baseline")
    _add_hyper(p)
    p.add_argument("--repeats", type=_positive_int, default=5,
                   help="seeds per SP-SVM setting")
    p.add_argument("--report-out", help="JSON report to write")
    p.add_argument("--csv-out", help="CSV report to write")
    return parser


def cli_train(args) -> BenchReport:
    train = _load(args.train, args.n_features)
    scaling = None
    if args.scale:
        train = fit_scale(train)
        scaling = train.scaling
    spec = KernelSpec(args.gamma)
    cfg = _config(args.solver, args)
    model = _train(train, args.solver, spec, cfg, args.ovo_parallel)
    report = _report(os.path.basename(args.train), train, args.solver, cfg, spec,
                     args.seed, args.threads, model, None)
    out = _Outputs()
    try:
        out.write(args.model_out, model_to_json(model, spec, cfg, train.d, scaling))
        out.write(args.report_out, json.dumps(report.to_dict(), indent=2) + "\n")
    except BaseException:
        out.rollback()
        raise
    return report


def cli_predict(args) -> EvalReport:
    try:
        loaded = load_model(args.model)
    except OSError as exc:
        raise DataError(f"cannot read {args.model}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{args.model}: invalid model file ({exc})") from exc
    if args.metric == "auc" and not loaded.ovo.is_binary:
        raise UsageError("--metric auc needs a binary model")
    test = _load(args.test)
    if test.d > loaded.n_features:
        raise DataError(
            f"test data has {test.d} features, model expects {loaded.n_features}")
    if test.d < loaded.n_features:
        X = np.zeros((test.n, loaded.n_features))
        X[:, : test.d] = test.X
        test = Dataset(X, test.labels, name=test.name)
    if loaded.scaling is not None:
        test = apply_scale(test, loaded.scaling)
    report, pred, scores = _evaluate(loaded.ovo, test, args.threads, args.metric == "auc")
    if args.metric == "auc" and report.one_minus_auc_pct is None:
        raise DataError("AUC needs both classes in the test data")
    out = _Outputs()
    try:
        if args.predictions_out:
            buf = io.StringIO()
            for i, label in enumerate(pred):
                if scores is None:
                    buf.write(f"{int(label)}\n")
                else:
                    buf.write(f"{int(label)} {float(scores[i])!r}\n")
            out.write(args.predictions_out, buf.getvalue())
        out.write(args.report_out, json.dumps(report.to_dict(), indent=2) + "\n")
    except BaseException:
        out.rollback()
        raise
    return report


def _aggregate(rows: list[BenchReport]):
    out = []
    for solver in dict.fromkeys(r.solver for r in rows):
        mine = [r for r in rows if r.solver == solver]
        errs = [r.error_pct for r in mine]
        secs = [r.train_seconds for r in mine]
        out.append({
            "solver": solver,
            "runs": len(mine),
            "error_pct_mean": statistics.fmean(errs),
            "error_pct_std": statistics.stdev(errs) if len(errs) > 1 else 0.0,
            "train_seconds_mean": statistics.fmean(secs),
            "train_seconds_std": statistics.stdev(secs) if len(secs) > 1 else 0.0,
            "speedup_mean": statistics.fmean(r.speedup for r in mine),
        })
    return out


def cli_bench(args) -> dict:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in CONFIGS]
    if not solvers or unknown:
        raise UsageError(f"unknown solver(s) {unknown}; choose from {sorted(CONFIGS)}")
    train = _load(args.train, args.n_features)
    test = _load(args.test, args.n_features)
    d = max(train.d, test.d)
    if train.d != d:
        train = Dataset(np.pad(train.X, ((0, 0), (0, d - train.d))), train.labels, name=train.name)
    if test.d != d:
        test = Dataset(np.pad(test.X, ((0, 0), (0, d - test.d))), test.labels, name=test.name)
    if args.scale:
        train = fit_scale(train)
        test = apply_scale(test, train.scaling)
    spec = KernelSpec(args.gamma)
    name = os.path.basename(args.train)
    rows: list[BenchReport] = []
    for solver in solvers:
        seeds = [args.seed + r for r in range(args.repeats)] if solver == "spsvm" else [args.seed]
        for seed in seeds:
            cfg = _config(solver, args, seed)
            model = _train(train, solver, spec, cfg, args.ovo_parallel)
            evaluation, _, _ = _evaluate(model, test, args.threads, model.is_binary)
            rows.append(_report(name, train, solver, cfg, spec, seed, args.threads,
                                model, evaluation))
    base = statistics.fmean(r.train_seconds for r in rows if r.solver == solvers[0])
    for r in rows:
        # millisecond resolution can round a tiny run to zero
        r.speedup = base / r.train_seconds if r.train_seconds > 0 else None
        if r.solver == solvers[0] and r.speedup is None:
            r.speedup = 1.0
    result = {
        "version": REPORT_VERSION,
        "baseline": solvers[0],
        "runs": [r.to_dict() for r in rows],
        "aggregates": _aggregate(rows) if all(r.speedup is not None for r in rows) else [],
    }
    out = _Outputs()
    try:
        out.write(args.report_out, json.dumps(result, indent=2) + "\n")
        if args.csv_out:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(CSV_HEADER.split(","))
            for r in rows:
                writer.writerow(["" if v is None else v for v in r.csv_row()])
            out.write(args.csv_out, buf.getvalue())
    except BaseException:
        out.rollback()
        raise
    return result


COMMANDS = {"train": cli_train, "predict": cli_predict, "bench": cli_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"kernelsvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"kernelsvm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _SolverFailure as exc:
        print(f"kernelsvm: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # single-class data, bad hyperparameter combinations and the like
        print(f"kernelsvm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if isinstance(result, (BenchReport, EvalReport)):
        print(json.dumps(result.to_dict()))
    else:
        print(json.dumps(result["aggregates"] or result["runs"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
