"""Solver answers, the timeout-penalised cost function, and ground truth.

A recorded results table maps (task, solver) to an (answer, cpu time)
outcome. Cost folds answer quality and runtime into one scalar: conclusive
answers cost their runtime, Unknown adds one timeout, Timeout/Failure add
two. Sorting solvers by ascending cost yields the per-task ground-truth
ranking the learner is trained against.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

# Reported cpu_time of a Timeout answer may undershoot the limit by this
# relative slack (scheduler overshoot absorbed on the other side).
TIMEOUT_SLACK = 0.05


class Answer(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    FAILURE = "failure"

    @property
    def utility(self):
        """Coarse preorder: conclusive > unknown > timeout/failure."""
        if self in (Answer.VALID, Answer.INVALID):
            return 2
        if self is Answer.UNKNOWN:
            return 1
        return 0

    @property
    def conclusive(self):
        return self.utility == 2

    @property
    def useful(self):
        """Valid/Invalid/Unknown, the responses worth waiting for."""
        return self.utility >= 1


@dataclass(frozen=True, order=True)
class SolverId:
    name: str
    version: str = ""

    @property
    def key(self):
        return f"{self.name}-{self.version}" if self.version else self.name

    @classmethod
    def from_key(cls, key):
        """Split a "name-version" key on its last dash-digit boundary."""
        head, sep, tail = key.rpartition("-")
        if sep and tail and tail[0].isdigit():
            return cls(name=head, version=tail)
        return cls(name=key, version="")


@dataclass(frozen=True)
class SolverOutcome:
    answer: Answer
    cpu_time: float

    def __post_init__(self):
        if self.cpu_time < 0:
            raise ValueError(f"negative cpu_time {self.cpu_time}")


@dataclass(frozen=True)
class CostConfig:
    timeout: float = 10.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class TaskKey:
    file: str
    theory: str
    goal: str

    @property
    def id(self):
        return f"{self.file}:{self.theory}:{self.goal}"


class DataError(Exception):
    """Malformed or incomplete recorded-results data."""


@dataclass
class ResultsTable:
    """Complete (task x solver) outcome table.

    roster keeps solver order as first seen; tasks keep row order as first
    seen. Immutable by convention after load.
    """

    roster: list[SolverId] = field(default_factory=list)
    tasks: list[TaskKey] = field(default_factory=list)
    outcomes: dict[tuple[str, SolverId], SolverOutcome] = field(default_factory=dict)

    @property
    def task_ids(self):
        return [t.id for t in self.tasks]

    def outcome(self, task_id, solver):
        try:
            return self.outcomes[(task_id, solver)]
        except KeyError:
            raise DataError(f"no outcome recorded for task {task_id!r},"
                            f" solver {solver.key!r}") from None

    def task(self, task_id):
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise DataError(f"unknown task id {task_id!r}")

    def check_complete(self):
        missing = [(t.id, s.key) for t in self.tasks for s in self.roster
                   if (t.id, s) not in self.outcomes]
        if missing:
            raise DataError(f"incomplete results table, missing"
                            f" {len(missing)} cells, first: {missing[:5]}")


CSV_HEADER = ["file", "theory", "goal", "solver", "answer", "time_s"]


def load_results(path, recording_timeout=None):
    """Load a results CSV (file,theory,goal,solver,answer,time_s).

    The table must be complete over its roster x task grid. When
    recording_timeout is given, Timeout rows are checked against it
    (within TIMEOUT_SLACK).
    """
    table = ResultsTable()
    seen_tasks = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(CSV_HEADER)},"
                            f" got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields,"
                                f" got {len(row)}")
            file, theory, goal, solver_key, answer_text, time_text = row
            try:
                answer = Answer(answer_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: unknown answer"
                                f" {answer_text!r}") from None
            try:
                time_s = float(time_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad time_s"
                                f" {time_text!r}") from None
            if time_s < 0:
                raise DataError(f"{path}:{lineno}: negative time_s {time_s}")
            if (recording_timeout is not None and answer is Answer.TIMEOUT
                    and time_s < recording_timeout * (1 - TIMEOUT_SLACK)):
                raise DataError(
                    f"{path}:{lineno}: Timeout at {time_s}s is below the"
                    f" {recording_timeout}s recording limit")
            solver = SolverId.from_key(solver_key)
            if solver not in table.roster:
                table.roster.append(solver)
            key = TaskKey(file, theory, goal)
            if key.id not in seen_tasks:
                seen_tasks.add(key.id)
                table.tasks.append(key)
            cell = (key.id, solver)
            if cell in table.outcomes:
                raise DataError(f"{path}:{lineno}: duplicate row for task"
                                f" {key.id!r}, solver {solver_key!r}")
            table.outcomes[cell] = SolverOutcome(answer, time_s)
    table.check_complete()
    return table


def save_results(table, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t in table.tasks:
            for s in table.roster:
                o = table.outcomes[(t.id, s)]
                writer.writerow([t.file, t.theory, t.goal, s.key,
                                 o.answer.value, f"{o.cpu_time:.6f}"])


# ---------------------------------------------------------------------------
# Cost and rankings
# ---------------------------------------------------------------------------

def cost(outcome: SolverOutcome, cfg: CostConfig) -> float:
    """Timeout-penalised scalar cost of one outcome (lower is better)."""
    if outcome.answer.conclusive:
        return outcome.cpu_time
    if outcome.answer is Answer.UNKNOWN:
        return outcome.cpu_time + cfg.timeout
    return outcome.cpu_time + 2 * cfg.timeout


def cost_vector(table, task_id, cfg):
    """Per-solver costs for one task, in roster order."""
    return [cost(table.outcome(task_id, s), cfg) for s in table.roster]


def ground_truth_ranking(task_id, table, cfg):
    """Roster sorted by ascending cost; ties keep roster order."""
    table.task(task_id)
    costs = cost_vector(table, task_id, cfg)
    order = sorted(range(len(table.roster)), key=lambda i: (costs[i], i))
    return [table.roster[i] for i in order]


def static_solver_ranking(table):
    """Roster sorted by descending count of conclusive answers."""
    counts = {s: 0 for s in table.roster}
    for t in table.tasks:
        for s in table.roster:
            if table.outcomes[(t.id, s)].answer.conclusive:
                counts[s] += 1
    order = sorted(range(len(table.roster)),
                   key=lambda i: (-counts[table.roster[i]], i))
    return [table.roster[i] for i in order]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

LEVELS = ("file", "theory", "goal")


@dataclass(frozen=True)
class LevelReport:
    level: str
    proved: int
    total: int
    avg_time: float  # mean over proved units of their goals' summed times

    @property
    def pct(self):
        return 100.0 * self.proved / self.total if self.total else 0.0


def _units(table, level):
    """Unit key -> list of task ids, insertion-ordered."""
    units = {}
    for t in table.tasks:
        if level == "goal":
            key = t.id
        elif level == "theory":
            key = (t.file, t.theory)
        elif level == "file":
            key = t.file
        else:
            raise ValueError(f"unknown level {level!r}")
        units.setdefault(key, []).append(t.id)
    return units


def choose_single(table, level, cfg=None):
    """Per unit, the single fastest solver that proves the whole unit.

    A solver proves a unit when it is conclusive on every goal of the unit;
    its unit time is the sum of its times over those goals.
    """
    units = _units(table, level)
    proved = 0
    times = []
    for goal_ids in units.values():
        best = None
        for s in table.roster:
            outs = [table.outcomes[(gid, s)] for gid in goal_ids]
            if all(o.answer.conclusive for o in outs):
                total = sum(o.cpu_time for o in outs)
                if best is None or total < best:
                    best = total
        if best is not None:
            proved += 1
            times.append(best)
    avg = sum(times) / len(times) if times else 0.0
    return LevelReport(level=level, proved=proved, total=len(units), avg_time=avg)


def aggregate_report(table, goal_outcomes, cfg=None):
    """Roll per-goal strategy outcomes up to goal/theory/file reports.

    goal_outcomes maps task id -> (Answer, cumulative seconds). A goal is
    proved when its answer is conclusive; a theory when all its goals are;
    a file when all its theories are. Unit time is the sum of its goals'
    times, averaged over proved units.
    """
    missing = [t.id for t in table.tasks if t.id not in goal_outcomes]
    if missing:
        raise DataError(f"missing strategy outcomes for {missing[:5]}")
    reports = {}
    for level in LEVELS:
        units = _units(table, level)
        proved = 0
        times = []
        for goal_ids in units.values():
            if all(goal_outcomes[gid][0].conclusive for gid in goal_ids):
                proved += 1
                times.append(sum(goal_outcomes[gid][1] for gid in goal_ids))
        avg = sum(times) / len(times) if times else 0.0
        reports[level] = LevelReport(level=level, proved=proved,
                                     total=len(units), avg_time=avg)
    return reports


# ---------------------------------------------------------------------------
# Timeout calibration
# ---------------------------------------------------------------------------

def calibrate_timeout(table, coverage=0.99):
    """Per-solver time threshold capturing `coverage` of useful responses.

    For each solver: the smallest recorded time tau such that the number of
    useful (Valid/Invalid/Unknown) responses with cpu_time <= tau reaches
    coverage times their total count. Solvers without useful responses get 0.
    """
    if not 0 < coverage <= 1:
        raise ValueError(f"coverage must be in (0, 1], got {coverage}")
    thresholds = {}
    for s in table.roster:
        useful = sorted(table.outcomes[(t.id, s)].cpu_time
                        for t in table.tasks
                        if table.outcomes[(t.id, s)].answer.useful)
        if not useful:
            thresholds[s] = 0.0
            continue
        need = coverage * len(useful)
        covered = 0
        for tau in useful:
            covered += 1
            if covered >= need:
                thresholds[s] = tau
                break
    return thresholds
