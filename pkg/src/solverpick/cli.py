"""Command-line entry point: extract, train, predict, prove, eval, calibrate.

Exit codes: 0 success, 1 usage error, 2 data error. All randomness flows
from --seed; primary output files are written atomically and are
byte-identical for identical flags and inputs, whatever --jobs is set to.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

from . import costs as costs_mod
from . import evaluation as ev
from .costs import (
    CostConfig,
    DataError,
    SolverId,
    aggregate_report,
    choose_single,
    cost_vector,
    load_results,
    static_solver_ranking,
)
from .features import FEATURE_NAMES, extract_document_features, to_array
from .forest import (
    Hyperparameters,
    ModelFormatError,
    kfold_splits,
    load_model,
    make_training_set,
    sample_weight,
    save_model,
    train_forest,
)
from .lang import LangError, parse_document
from .scheduler import (
    ConfigurationError,
    ProcessBackend,
    ReplayBackend,
    SchedulerConfig,
    document_tasks,
    load_backend_config,
    prove,
)

FEATURES_CSV_HEADER = ("task_id",) + FEATURE_NAMES


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for data
    # errors and uses 1 for usage problems.
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Small I/O helpers
# ---------------------------------------------------------------------------

def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(text, out_path):
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        _write_atomic(out_path, text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fnum(x):
    """Full-precision float text that round-trips."""
    return repr(float(x))


def _parse_documents(paths):
    docs = []
    for path in paths:
        try:
            with open(path) as fh:
                source = fh.read()
        except OSError as e:
            raise DataError(f"cannot read input {path}: {e}") from None
        try:
            # The id's file component is the basename so recorded results
            # stay joinable wherever the corpus is checked out.
            docs.append((path, parse_document(source,
                                              path=os.path.basename(path))))
        except LangError as e:
            raise DataError(f"{path}:{e}") from None
    return docs


def _load_features_csv(path):
    """Returns (task ids in file order, {task id -> feature list})."""
    ids, rows = [], {}
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise DataError(f"cannot read features {path}: {e}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(FEATURES_CSV_HEADER):
            raise DataError(f"{path}: bad features header; expected"
                            f" {','.join(FEATURES_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FEATURES_CSV_HEADER):
                raise DataError(f"{path}:{lineno}: expected"
                                f" {len(FEATURES_CSV_HEADER)} fields")
            tid = row[0]
            if tid in rows:
                raise DataError(f"{path}:{lineno}: duplicate task id {tid!r}")
            try:
                values = [float(x) for x in row[1:]]
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
            ids.append(tid)
            rows[tid] = values
    return ids, rows


def _check_same_tasks(features_path, feature_ids, results_path, table):
    fset, rset = set(feature_ids), set(table.task_ids)
    if fset == rset:
        return
    only_f = sorted(fset - rset)
    only_r = sorted(rset - fset)
    parts = []
    if only_f:
        parts.append(f"only in {features_path}: {only_f[:10]}")
    if only_r:
        parts.append(f"only in {results_path}: {only_r[:10]}")
    raise DataError("feature and results task ids differ; " + "; ".join(parts))


def _training_set(feature_ids, feature_rows, table, cfg, use_weights):
    rows = []
    for tid in feature_ids:
        key = table.task(tid)
        costs = cost_vector(table, tid, cfg)
        weight = sample_weight(costs) if use_weights else 1.0
        rows.append((tid, key.file, feature_rows[tid], costs, weight))
    return make_training_set(rows, table.roster)


def _hyperparameters(args):
    return Hyperparameters(
        trees=args.trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        max_features=args.max_features,
        bootstrap=not args.no_bootstrap,
    )


def _map_jobs(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_extract(args):
    docs = _parse_documents(args.inputs)
    pairs = []
    for chunk in _map_jobs(lambda d: extract_document_features(d[1]), docs,
                           args.jobs):
        pairs.extend(chunk)
    pairs.sort(key=lambda p: p[0])
    if args.format == "json":
        payload = [{"task_id": tid,
                    **dict(zip(FEATURE_NAMES, to_array(vec)))}
                   for tid, vec in pairs]
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0
    rows = [[tid] + [str(x) for x in to_array(vec)] for tid, vec in pairs]
    _emit(_csv_text(FEATURES_CSV_HEADER, rows), args.out)
    return 0


def cmd_train(args):
    feature_ids, feature_rows = _load_features_csv(args.features)
    table = load_results(args.results, recording_timeout=args.timeout)
    _check_same_tasks(args.features, feature_ids, args.results, table)
    cfg = CostConfig(timeout=args.timeout)
    ts = _training_set(feature_ids, feature_rows, table, cfg,
                       use_weights=not args.no_weights)
    model = train_forest(ts, _hyperparameters(args), seed=args.seed,
                         jobs=args.jobs)
    save_model(model, args.out)
    print(f"trained {args.trees} trees on {len(ts)} tasks"
          f" ({len(set(ts.files))} files) -> {args.out}", file=sys.stderr)
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    docs = _parse_documents(args.inputs)
    rows = []
    for _, doc in docs:
        for tid, vec in extract_document_features(doc):
            ranking = ev.LearnedStrategy.from_model(
                model, {tid: to_array(vec)}).ranking(tid)
            rows.append((tid, [s.key for s in ranking]))
    rows.sort(key=lambda r: r[0])
    if args.format == "json":
        payload = [{"task_id": tid, "ranking": keys} for tid, keys in rows]
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0
    p = len(model.roster)
    header = ["task_id"] + [f"rank_{i}" for i in range(1, p + 1)]
    _emit(_csv_text(header, [[tid] + keys for tid, keys in rows]), args.out)
    return 0


def _build_backend(args):
    selector = args.backend
    if selector.startswith("replay:"):
        path = selector[len("replay:"):]
        table = load_results(path, recording_timeout=args.recording_timeout)
        return ReplayBackend(table,
                             recording_timeout=args.recording_timeout), table
    if selector.startswith("process:") or selector == "process":
        path = selector[len("process:"):] if ":" in selector else ""
        path = os.environ.get("PORTFOLIO_CONFIG", path)
        if not path:
            raise _UsageError("process backend needs a config path"
                              " (process:<config.ini> or PORTFOLIO_CONFIG)")
        return ProcessBackend(load_backend_config(path)), None
    raise _UsageError(f"unknown backend selector {selector!r};"
                      " use replay:<results.csv> or process:<config.ini>")


def _static_ranking(args, table):
    if args.static_ranking:
        return tuple(SolverId.from_key(k.strip())
                     for k in args.static_ranking.split(","))
    if table is None:
        raise _UsageError("--static-ranking is required with a process"
                          " backend")
    return tuple(static_solver_ranking(table))


def cmd_prove(args):
    model = load_model(args.model)
    backend, table = _build_backend(args)
    cfg = SchedulerConfig(
        model=model,
        static_ranking=_static_ranking(args, table),
        timeout=args.timeout,
        pre_solve_timeout=args.pre_solve_timeout,
        cost_threshold=args.threshold,
        skip_presolver_in_ranking=args.skip_presolver_in_ranking,
    )
    tasks = []
    for path, doc in _parse_documents(args.inputs):
        tasks.extend(document_tasks(doc, source_path=path))
    results = _map_jobs(lambda t: (t.id, prove(t, cfg, backend)), tasks,
                        args.jobs)
    results.sort(key=lambda r: r[0])
    overhead = sum(r.overhead_s for _, r in results)
    print(f"prediction overhead: {overhead:.6f}s over {len(results)} goals",
          file=sys.stderr)
    if args.format == "json":
        payload = [{"task_id": tid, "answer": r.answer.value,
                    "time_s": r.cumulative_time,
                    "calls": [s.key for s in r.solvers_called]}
                   for tid, r in results]
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return 0
    rows = [[tid, r.answer.value, _fnum(r.cumulative_time),
             ";".join(s.key for s in r.solvers_called)]
            for tid, r in results]
    _emit(_csv_text(["task_id", "answer", "time_s", "calls"], rows), args.out)
    return 0


def _cv_costs(feature_ids, feature_rows, table, cfg, args):
    """Out-of-sample predicted costs via per-file k-fold training."""
    ts = _training_set(feature_ids, feature_rows, table, cfg,
                       use_weights=not args.no_weights)
    costs_by_task = {}
    for fold, (train, val) in enumerate(kfold_splits(ts, k=args.folds,
                                                     seed=args.seed)):
        model = train_forest(train, _hyperparameters(args),
                             seed=args.seed + 1000 * (fold + 1),
                             jobs=args.jobs)
        for i, tid in enumerate(val.task_ids):
            strategy = ev.LearnedStrategy.from_model(
                model, {tid: val.features[i]})
            costs_by_task[tid] = strategy.costs(tid)
    return costs_by_task


def _format_report_cell(x):
    if x is None:
        return ""
    return f"{x:.4f}"


def _replay_task(task_id, features):
    from .scheduler import ProofTask
    return ProofTask(id=task_id, features=features)


def cmd_eval(args):
    table = load_results(args.results, recording_timeout=args.timeout)
    cfg = CostConfig(timeout=args.timeout)
    os.makedirs(args.out_dir, exist_ok=True)

    strategies = [
        ev.BestStrategy(table, cfg),
        ev.RandomStrategy(table.roster, seed=args.seed),
        ev.WorstStrategy(table, cfg),
    ]
    features_by_task = None
    if args.features:
        feature_ids, feature_rows = _load_features_csv(args.features)
        _check_same_tasks(args.features, feature_ids, args.results, table)
        features_by_task = feature_rows
        if args.cv:
            costs_by_task = _cv_costs(feature_ids, feature_rows, table, cfg,
                                      args)
            strategies.append(ev.LearnedStrategy(costs_by_task, table.roster))
        elif args.model:
            model = load_model(args.model)
            strategies.append(ev.LearnedStrategy.from_model(
                model, features_by_task))

    # Table of per-strategy ranking quality and replay times.
    report_rows = []
    for strategy in strategies:
        row = ev.strategy_report_row(strategy, table, cfg,
                                     relevance=args.relevance)
        report_rows.append([
            row.strategy,
            _format_report_cell(row.mean_time_s),
            _format_report_cell(row.mean_time_conclusive_s),
            _format_report_cell(row.ndcg),
            _format_report_cell(row.r2),
            _format_report_cell(row.mae),
            _format_report_cell(row.reg_error),
        ])
    _write_atomic(os.path.join(args.out_dir, "strategy_report.csv"),
                  _csv_text(["strategy", "mean_time_s",
                             "mean_time_conclusive_s", "ndcg", "r2", "mae",
                             "reg_error"], report_rows))

    # File/theory/goal aggregation for strategies, the per-unit oracle and
    # every individual solver.
    level_rows = []

    def _add_level_rows(name, reports):
        for level in costs_mod.LEVELS:
            r = reports[level]
            level_rows.append([name, level, str(r.proved), str(r.total),
                               f"{r.pct:.1f}", f"{r.avg_time:.4f}"])

    for strategy in strategies:
        _add_level_rows(strategy.name, ev.level_report(strategy, table, cfg))
    _add_level_rows("choose_single",
                    {level: choose_single(table, level, cfg)
                     for level in costs_mod.LEVELS})
    for solver in table.roster:
        outcomes = {t.id: (table.outcomes[(t.id, solver)].answer,
                           table.outcomes[(t.id, solver)].cpu_time)
                    for t in table.tasks}
        _add_level_rows(solver.key, aggregate_report(table, outcomes, cfg))
    _write_atomic(os.path.join(args.out_dir, "level_report.csv"),
                  _csv_text(["strategy", "level", "proved", "total", "pct",
                             "avg_time_s"], level_rows))

    # Cumulative conclusive-answer curves.
    for strategy in strategies:
        if isinstance(strategy, ev.RandomStrategy):
            outcomes_for_curve = {
                tid: ev.StrategyOutcome(answer=a, cumulative_time=t,
                                        solvers_called=())
                for tid, (a, t) in
                ev.strategy_goal_outcomes(strategy, table).items()}
        else:
            outcomes_for_curve = ev.replay_strategy(strategy, table)
        curve = ev.cumulative_curve(outcomes_for_curve)
        rows = [[_fnum(t), str(n)] for t, n in curve]
        _write_atomic(
            os.path.join(args.out_dir, f"curve_{strategy.name}.csv"),
            _csv_text(["time_s", "cumulative_conclusive"], rows))

    # Cost-threshold sweep, replayed through the full scheduling loop.
    if args.sweep:
        if not args.model:
            raise _UsageError("--sweep needs --model")
        if features_by_task is None:
            raise _UsageError("--sweep needs --features")
        model = load_model(args.model)
        thresholds = [float(x) for x in args.sweep.split(",")]
        backend = ReplayBackend(table, recording_timeout=args.timeout)
        sweep_rows = []
        for threshold in thresholds:
            sched = SchedulerConfig(
                model=model,
                static_ranking=tuple(static_solver_ranking(table)),
                timeout=args.timeout,
                pre_solve_timeout=args.pre_solve_timeout,
                cost_threshold=threshold,
            )
            proved = 0
            times = []
            for t in table.tasks:
                result = prove(_replay_task(t.id, features_by_task[t.id]),
                               sched, backend)
                proved += result.answer.conclusive
                times.append(result.cumulative_time)
            sweep_rows.append([_fnum(threshold), str(proved),
                               _fnum(sum(times) / len(times))])
        _write_atomic(os.path.join(args.out_dir, "sweep_report.csv"),
                      _csv_text(["threshold", "proved", "mean_time_s"],
                                sweep_rows))

    print(f"reports written to {args.out_dir}", file=sys.stderr)
    return 0


def cmd_calibrate(args):
    table = load_results(args.results,
                         recording_timeout=args.recording_timeout)
    thresholds = costs_mod.calibrate_timeout(table, coverage=args.coverage)
    pairs = [(s.key, thresholds[s]) for s in table.roster]
    if args.format == "json":
        _emit(json.dumps({k: v for k, v in pairs}, indent=2) + "\n",
              args.out)
        return 0
    rows = [[k, _fnum(v)] for k, v in pairs]
    _emit(_csv_text(["solver", "threshold_s"], rows), args.out)
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def _add_common_output(p):
    p.add_argument("--out", "-o", default=None,
                   help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_training_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--max-features", type=int, default=None)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--no-weights", action="store_true",
                   help="train with uniform sample weights")


def build_parser():
    parser = _Parser(prog="solverpick",
                     description="Predict and schedule solver rankings for"
                                 " proof goals.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[], help="feature vectors per goal")
    p.add_argument("inputs", nargs="+", metavar="FILE")
    p.add_argument("--jobs", type=int, default=1)
    _add_common_output(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit a forest from features + results")
    p.add_argument("--features", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="per-goal rankings, no solver calls")
    p.add_argument("inputs", nargs="+", metavar="FILE")
    p.add_argument("--model", required=True)
    _add_common_output(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("prove", help="run the scheduling loop per goal")
    p.add_argument("inputs", nargs="+", metavar="FILE")
    p.add_argument("--model", required=True)
    p.add_argument("--backend", required=True,
                   help="replay:<results.csv> or process:<config.ini>")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--pre-solve-timeout", type=float, default=1.0)
    p.add_argument("--recording-timeout", type=float, default=10.0)
    p.add_argument("--threshold", type=float, default=None,
                   help="skip solvers predicted to cost more than this")
    p.add_argument("--static-ranking", default=None,
                   help="comma-separated solver keys for pre-solving")
    p.add_argument("--skip-presolver-in-ranking", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    _add_common_output(p)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("eval", help="strategy and level reports + curves")
    p.add_argument("--results", required=True)
    p.add_argument("--features", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--cv", action="store_true",
                   help="learned row from per-file k-fold models instead of"
                        " --model")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--pre-solve-timeout", type=float, default=1.0)
    p.add_argument("--relevance", choices=ev.RELEVANCE_MAPS,
                   default=ev.DEFAULT_RELEVANCE)
    p.add_argument("--sweep", default=None,
                   help="comma-separated cost thresholds to replay")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_training_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="per-solver coverage thresholds")
    p.add_argument("--results", required=True)
    p.add_argument("--coverage", type=float, default=0.99)
    p.add_argument("--recording-timeout", type=float, default=60.0)
    _add_common_output(p)
    p.set_defaults(func=cmd_calibrate)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (DataError, LangError, ModelFormatError, ConfigurationError,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
