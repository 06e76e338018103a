"""Ranked solver scheduling over pluggable backends.

The driver first gives one statically chosen pre-solver a short time
budget to skim easy goals. If that is inconclusive it predicts a solver
ranking from the goal's syntactic features and calls solvers in rank order
until one returns a conclusive answer or the ranking is exhausted,
accumulating each call's runtime. The pre-solver stays in the predicted
ranking and may legitimately be called a second time with the full budget.

Backends either replay a recorded results table (deterministic, no solver
installations needed) or run real solver processes.
"""

from __future__ import annotations

import re
import shlex
import shutil
import subprocess
import time
from configparser import ConfigParser
from dataclasses import dataclass
from statistics import NormalDist, fmean, stdev

from .costs import Answer, ResultsTable, SolverId, SolverOutcome
from .features import TaskScope, extract_task_features, to_array
from .forest import ForestModel, predict
from .lang import Document


class ConfigurationError(Exception):
    pass


@dataclass(frozen=True)
class ProofTask:
    """One goal to prove: an id plus whatever a backend needs to see it."""

    id: str
    scope: TaskScope | None = None
    features: tuple[float, ...] | None = None
    source_path: str | None = None


@dataclass(frozen=True)
class SchedulerConfig:
    model: ForestModel
    static_ranking: tuple[SolverId, ...]
    timeout: float = 10.0
    pre_solve_timeout: float = 1.0
    cost_threshold: float | None = None
    skip_presolver_in_ranking: bool = False

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigurationError("timeout must be positive")
        if self.pre_solve_timeout <= 0:
            raise ConfigurationError("pre_solve_timeout must be positive")
        if not self.static_ranking:
            raise ConfigurationError("static ranking must not be empty")


@dataclass(frozen=True)
class ProveResult:
    answer: Answer
    cumulative_time: float
    trace: tuple[tuple[SolverId, SolverOutcome], ...]
    overhead_s: float = 0.0  # feature extraction + prediction, reported apart

    @property
    def solvers_called(self):
        return [s for s, _ in self.trace]


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

@dataclass
class ReplayBackend:
    """Answers calls from a recorded results table.

    A call with a budget below the recorded time is clipped to
    (Timeout, budget). Budgets above the recording timeout still return the
    recorded outcome; the table cannot say what more time would have found.
    """

    table: ResultsTable
    recording_timeout: float = 10.0
    installed_solvers: frozenset | None = None  # None: whole roster

    @property
    def roster(self):
        return list(self.table.roster)

    def installed(self, solver):
        if solver not in self.table.roster:
            return False
        return (self.installed_solvers is None
                or solver in self.installed_solvers)

    def call(self, task, solver, timeout):
        outcome = self.table.outcome(task.id, solver)
        if outcome.cpu_time > timeout:
            return SolverOutcome(Answer.TIMEOUT, timeout)
        return outcome


@dataclass(frozen=True)
class SolverCommand:
    solver: SolverId
    command: str  # template with {file} and {timeout} placeholders
    valid_pattern: str = ""
    invalid_pattern: str = ""
    unknown_pattern: str = ""


class ProcessBackend:
    """Runs one child process per call and parses its standard output.

    The invalid pattern is tried before the valid one so that literal
    word patterns ("unsat" vs "sat") cannot shadow each other. Output with
    no matching pattern counts as Failure, whatever the exit status.
    """

    def __init__(self, commands, workdir=None):
        self.commands = {c.solver: c for c in commands}
        self.workdir = workdir

    @property
    def roster(self):
        return list(self.commands)

    def installed(self, solver):
        cmd = self.commands.get(solver)
        if cmd is None:
            return False
        argv = shlex.split(cmd.command.format(file="x", timeout=1))
        return bool(argv) and shutil.which(argv[0]) is not None

    def call(self, task, solver, timeout):
        cmd = self.commands.get(solver)
        if cmd is None:
            raise ConfigurationError(f"no command configured for"
                                     f" {solver.key}")
        if task.source_path is None:
            raise ConfigurationError(f"task {task.id} has no source file")
        argv = shlex.split(cmd.command.format(file=task.source_path,
                                              timeout=timeout))
        start = time.perf_counter()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True,
                                  timeout=timeout, cwd=self.workdir)
        except subprocess.TimeoutExpired:
            return SolverOutcome(Answer.TIMEOUT, timeout)
        except OSError:
            return SolverOutcome(Answer.FAILURE,
                                 time.perf_counter() - start)
        elapsed = time.perf_counter() - start
        for pattern, answer in ((cmd.invalid_pattern, Answer.INVALID),
                                (cmd.valid_pattern, Answer.VALID),
                                (cmd.unknown_pattern, Answer.UNKNOWN)):
            if pattern and re.search(pattern, proc.stdout, re.MULTILINE):
                return SolverOutcome(answer, elapsed)
        return SolverOutcome(Answer.FAILURE, elapsed)


def load_backend_config(path):
    """Parse an INI file with one section per solver command."""
    parser = ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read backend config {path}")
    commands = []
    for section in parser.sections():
        entries = parser[section]
        for required in ("name", "command"):
            if required not in entries:
                raise ConfigurationError(
                    f"{path}: section [{section}] is missing {required!r}")
        commands.append(SolverCommand(
            solver=SolverId(name=entries["name"],
                            version=entries.get("version", "")),
            command=entries["command"],
            valid_pattern=entries.get("valid_pattern", ""),
            invalid_pattern=entries.get("invalid_pattern", ""),
            unknown_pattern=entries.get("unknown_pattern", ""),
        ))
    if not commands:
        raise ConfigurationError(f"{path}: no solver sections found")
    return commands


# ---------------------------------------------------------------------------
# The scheduling loop
# ---------------------------------------------------------------------------

def best_installed(ranking, backend):
    """First solver of the ranking the backend can actually run."""
    for solver in ranking:
        if backend.installed(solver):
            return solver
    raise ConfigurationError("no solver from the ranking is installed")


def _safe_call(backend, task, solver, timeout):
    # A crashing backend counts as a solver Failure; it must not abort the
    # scheduling loop.
    try:
        return backend.call(task, solver, timeout)
    except ConfigurationError:
        raise
    except Exception:
        return SolverOutcome(Answer.FAILURE, 0.0)


def _task_features(task):
    if task.features is not None:
        return task.features
    if task.scope is None:
        raise ConfigurationError(f"task {task.id} carries neither features"
                                 " nor a goal to extract them from")
    return to_array(extract_task_features(task.scope))


def _check_roster(cfg, backend):
    backend_roster = getattr(backend, "roster", None)
    if backend_roster is not None \
            and set(backend_roster) != set(cfg.model.roster):
        raise ConfigurationError(
            "model roster does not match backend roster: model has"
            f" {sorted(s.key for s in cfg.model.roster)}, backend has"
            f" {sorted(s.key for s in backend_roster)}")


def prove(task, cfg: SchedulerConfig, backend) -> ProveResult:
    """Pre-solve, then call solvers in predicted rank order.

    Cumulative time is exactly the sum of the trace's call times, the
    pre-solve call included. The returned answer is the best-utility answer
    seen; earlier answers win utility ties. With cost_threshold set, solvers
    whose predicted cost exceeds it are skipped after pre-solving, and if
    none remains the pre-solver's result stands.
    """
    _check_roster(cfg, backend)
    pre_solver = best_installed(cfg.static_ranking, backend)
    outcome = _safe_call(backend, task, pre_solver, cfg.pre_solve_timeout)
    answer = outcome.answer
    total = outcome.cpu_time
    trace = [(pre_solver, outcome)]
    if answer.conclusive:
        return ProveResult(answer, total, tuple(trace))

    start = time.perf_counter()
    features = _task_features(task)
    costs = predict(cfg.model, features)
    order = sorted(range(len(cfg.model.roster)),
                   key=lambda i: (costs[i], i))
    remaining = [cfg.model.roster[i] for i in order]
    overhead = time.perf_counter() - start

    if cfg.cost_threshold is not None:
        by_solver = dict(zip(cfg.model.roster, costs))
        remaining = [s for s in remaining
                     if by_solver[s] <= cfg.cost_threshold]
        if not remaining:
            return ProveResult(answer, total, tuple(trace), overhead)
    if cfg.skip_presolver_in_ranking:
        remaining = [s for s in remaining if s != pre_solver]

    while not answer.conclusive \
            and any(backend.installed(s) for s in remaining):
        solver = best_installed(remaining, backend)
        outcome = _safe_call(backend, task, solver, cfg.timeout)
        total += outcome.cpu_time
        trace.append((solver, outcome))
        if outcome.answer.utility > answer.utility:
            answer = outcome.answer
        remaining.remove(solver)
    return ProveResult(answer, total, tuple(trace), overhead)


def prove_with_threshold(task, cfg: SchedulerConfig, backend) -> ProveResult:
    """prove(), requiring the cost-threshold filter to be configured."""
    if cfg.cost_threshold is None:
        raise ConfigurationError("cost_threshold is not set")
    return prove(task, cfg, backend)


def document_tasks(doc: Document, source_path=None):
    """ProofTasks for every goal of a document, in declaration order."""
    from .features import document_tasks as _feature_tasks
    return [ProofTask(id=tid, scope=scope, source_path=source_path)
            for tid, scope in _feature_tasks(doc)]


def predict_only(doc: Document, model: ForestModel):
    """Predicted ranking per goal, calling no solver."""
    from .features import extract_document_features
    from .forest import predict_ranking
    return [(tid, predict_ranking(model, to_array(vector)))
            for tid, vector in extract_document_features(doc)]


# ---------------------------------------------------------------------------
# Repeated timing with a confidence-interval stop rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Measurement:
    mean_s: float
    runs: int
    half_width: float
    converged: bool  # False: max_runs hit before the interval was narrow


class MeasurementError(Exception):
    def __init__(self, message, times):
        super().__init__(message)
        self.times = times


def measure_mean_time(run, confidence=0.90, allowed_error=0.035,
                      max_runs=100, min_runs=3):
    """Repeat run() until the CI half-width is within the allowed error.

    Uses the normal approximation with the sample standard deviation: stop
    once z * s / sqrt(n) <= allowed_error * mean, after at least min_runs
    runs. Hitting max_runs first yields converged=False.
    """
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    if min_runs < 2:
        raise ValueError("need at least 2 runs for a deviation estimate")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    times = []
    for _ in range(max_runs):
        try:
            times.append(float(run()))
        except Exception as e:
            raise MeasurementError(
                f"command failed after {len(times)} completed runs: {e}",
                times) from e
        if len(times) < min_runs:
            continue
        mean = fmean(times)
        half_width = z * stdev(times) / len(times) ** 0.5
        if half_width <= allowed_error * mean:
            return Measurement(mean_s=mean, runs=len(times),
                               half_width=half_width, converged=True)
    mean = fmean(times)
    half_width = z * stdev(times) / len(times) ** 0.5
    return Measurement(mean_s=mean, runs=len(times), half_width=half_width,
                       converged=False)
