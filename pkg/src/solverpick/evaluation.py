"""Ranking metrics, theoretical strategies, and replay-based reports.

Rankings are scored against the per-task ground truth with a position-
discounted gain (nDCG), rank-distance MAE, and cost-regression errors.
Because every ranking here is a permutation of the ground truth, raw nDCG
never reaches 0; scores are re-normalised to [0, 1] using the minimum raw
nDCG achievable for the roster size, found by enumerating permutations.

The theoretical strategies bound what any predictor can do: Best replays
the ground-truth ranking, Worst its reverse, and Random averages over all
permutations (exactly, when the roster is small enough to enumerate).
"""

from __future__ import annotations

import itertools
import math
import warnings
import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .costs import (
    Answer,
    CostConfig,
    ResultsTable,
    aggregate_report,
    cost_vector,
    ground_truth_ranking,
)
from .forest import ForestModel, predict

RELEVANCE_MAPS = ("linear", "reciprocal")
DEFAULT_RELEVANCE = "linear"

# Beyond this many permutations, Random-strategy expectations are sampled.
ENUMERATION_LIMIT = 50_000
SAMPLE_COUNT = 10_000


def _relevance(truth_position, p, relevance):
    """Gain of the solver sitting at 1-based truth_position."""
    if relevance == "linear":
        return p - truth_position + 1
    if relevance == "reciprocal":
        return 1.0 / truth_position
    raise ValueError(f"unknown relevance map {relevance!r},"
                     f" choose from {RELEVANCE_MAPS}")


def _check_permutations(ranking, truth):
    if len(ranking) != len(truth) or set(ranking) != set(truth) \
            or len(set(ranking)) != len(ranking):
        raise ValueError("ranking and truth must be permutations of the"
                         " same roster")


def dcg(ranking, truth, relevance=DEFAULT_RELEVANCE):
    """Discounted cumulative gain of ranking against truth."""
    _check_permutations(ranking, truth)
    p = len(truth)
    position = {s: j for j, s in enumerate(truth, start=1)}
    total = 0.0
    for i, s in enumerate(ranking, start=1):
        rel = _relevance(position[s], p, relevance)
        total += (2.0 ** rel - 1.0) / math.log2(i + 1)
    return total


def _dcg_of_perm(perm, gains, discounts):
    return sum(gains[j] * discounts[i] for i, j in enumerate(perm))


def _gains_and_discounts(p, relevance):
    gains = [2.0 ** _relevance(j, p, relevance) - 1.0
             for j in range(1, p + 1)]
    discounts = [1.0 / math.log2(i + 1) for i in range(1, p + 1)]
    return gains, discounts


@lru_cache(maxsize=None)
def ndcg_lower_bound(p, relevance=DEFAULT_RELEVANCE):
    """Minimum raw nDCG over all permutations of a length-p roster.

    Enumerated exhaustively for p <= 8. For larger p the reverse
    permutation is used: gains strictly decrease with truth position and
    discounts strictly decrease with rank, so the opposite pairing is the
    rearrangement-inequality minimum.
    """
    gains, discounts = _gains_and_discounts(p, relevance)
    ideal = _dcg_of_perm(range(p), gains, discounts)
    if p <= 8:
        worst = min(_dcg_of_perm(perm, gains, discounts)
                    for perm in itertools.permutations(range(p)))
    else:
        worst = _dcg_of_perm(range(p - 1, -1, -1), gains, discounts)
    return worst / ideal


def ndcg_raw(ranking, truth, relevance=DEFAULT_RELEVANCE):
    return dcg(ranking, truth, relevance) / dcg(truth, truth, relevance)


def ndcg_normalized(ranking, truth, relevance=DEFAULT_RELEVANCE):
    """Raw nDCG rescaled so the worst permutation scores 0, the truth 1."""
    _check_permutations(ranking, truth)
    p = len(truth)
    if p == 1:
        return 1.0
    raw = ndcg_raw(ranking, truth, relevance)
    low = ndcg_lower_bound(p, relevance)
    return (raw - low) / (1.0 - low)


def mae_rank(ranking, truth):
    """Mean absolute distance between predicted and truth rank positions."""
    _check_permutations(ranking, truth)
    pos_r = {s: i for i, s in enumerate(ranking)}
    pos_t = {s: i for i, s in enumerate(truth)}
    return sum(abs(pos_r[s] - pos_t[s]) for s in truth) / len(truth)


def r2_score(predicted, actual):
    """Coefficient of determination, averaged uniformly over outputs.

    Zero-variance output columns are scored 0 when predicted exactly and
    otherwise dropped with a warning (their score would be -inf).
    """
    pred = np.asarray(predicted, dtype=float)
    act = np.asarray(actual, dtype=float)
    if pred.shape != act.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {act.shape}")
    if pred.ndim != 2 or pred.shape[0] < 2:
        raise ValueError("need a matrix with at least 2 rows")
    scores = []
    for j in range(act.shape[1]):
        y = act[:, j]
        yhat = pred[:, j]
        ss_res = float(np.sum((y - yhat) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        if ss_tot == 0.0:
            if ss_res == 0.0:
                scores.append(0.0)
            else:
                warnings.warn(f"output column {j} has zero variance and"
                              " imperfect predictions; excluded from r2")
            continue
        scores.append(1.0 - ss_res / ss_tot)
    if not scores:
        warnings.warn("no output column had usable variance; r2 undefined")
        return float("nan")
    return float(np.mean(scores))


def regression_error(predicted, actual):
    """Mean absolute difference over all cells."""
    pred = np.asarray(predicted, dtype=float)
    act = np.asarray(actual, dtype=float)
    if pred.shape != act.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {act.shape}")
    return float(np.mean(np.abs(pred - act)))


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

class Strategy:
    """Produces a solver ranking per task."""

    name = "strategy"

    def ranking(self, task_id):
        raise NotImplementedError


class BestStrategy(Strategy):
    name = "best"

    def __init__(self, table: ResultsTable, cfg: CostConfig):
        self.table = table
        self.cfg = cfg

    def ranking(self, task_id):
        return ground_truth_ranking(task_id, self.table, self.cfg)


class WorstStrategy(Strategy):
    name = "worst"

    def __init__(self, table: ResultsTable, cfg: CostConfig):
        self.table = table
        self.cfg = cfg

    def ranking(self, task_id):
        return list(reversed(ground_truth_ranking(task_id, self.table,
                                                  self.cfg)))


class RandomStrategy(Strategy):
    """One uniformly random permutation per task, derived from the seed and
    the task id so the draw does not depend on evaluation order."""

    name = "random"

    def __init__(self, roster, seed=0):
        self.roster = list(roster)
        self.seed = seed

    def ranking(self, task_id):
        rng = np.random.default_rng((self.seed,
                                     zlib.crc32(task_id.encode())))
        return [self.roster[i] for i in rng.permutation(len(self.roster))]


class FixedStrategy(Strategy):
    name = "fixed"

    def __init__(self, ranking):
        self._ranking = list(ranking)

    def ranking(self, task_id):
        return list(self._ranking)


class LearnedStrategy(Strategy):
    """Ranks by predicted costs, one cost vector per task.

    Cost vectors may come from a single model over all tasks or be
    assembled from per-fold models during cross-validation; the reports do
    not care which.
    """

    name = "learned"

    def __init__(self, costs_by_task, roster):
        self.costs_by_task = {tid: np.asarray(c, dtype=float)
                              for tid, c in costs_by_task.items()}
        self.roster = list(roster)

    @classmethod
    def from_model(cls, model: ForestModel, features_by_task):
        return cls({tid: predict(model, f)
                    for tid, f in features_by_task.items()}, model.roster)

    def costs(self, task_id):
        try:
            return self.costs_by_task[task_id]
        except KeyError:
            raise ValueError(f"no prediction for task {task_id!r}") from None

    def ranking(self, task_id):
        costs = self.costs(task_id)
        order = sorted(range(len(self.roster)), key=lambda i: (costs[i], i))
        return [self.roster[i] for i in order]


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyOutcome:
    answer: Answer
    cumulative_time: float
    solvers_called: tuple

    @property
    def conclusive(self):
        return self.answer.conclusive


def replay_ranking(ranking, task_id, table):
    """Walk a ranking over recorded outcomes until a conclusive answer.

    Each solver's recorded time accrues whether or not it helps; the answer
    kept is the best-utility answer seen, first seen winning ties.
    """
    answer = None
    total = 0.0
    called = []
    for solver in ranking:
        outcome = table.outcome(task_id, solver)
        total += outcome.cpu_time
        called.append(solver)
        if answer is None or outcome.answer.utility > answer.utility:
            answer = outcome.answer
        if outcome.answer.conclusive:
            break
    return StrategyOutcome(answer=answer, cumulative_time=total,
                           solvers_called=tuple(called))


def replay_strategy(strategy: Strategy, table: ResultsTable):
    """Per-task replay outcomes for a strategy, keyed by task id."""
    return {t.id: replay_ranking(strategy.ranking(t.id), t.id, table)
            for t in table.tasks}


def cumulative_curve(outcomes):
    """(time, conclusive-so-far) step points, sorted by cumulative time."""
    times = sorted(o.cumulative_time for o in outcomes.values()
                   if o.conclusive)
    return [(t, i) for i, t in enumerate(times, start=1)]


# ---------------------------------------------------------------------------
# Random-strategy expectations (exact where the roster permits)
# ---------------------------------------------------------------------------

def expected_random_time(table, task_id):
    """Expected replay time of a uniform random ranking, in closed form.

    A conclusive solver is called iff it comes first among the conclusive
    ones; a non-conclusive solver iff it precedes all of them.
    """
    outcomes = [table.outcome(task_id, s) for s in table.roster]
    conclusive = [o.cpu_time for o in outcomes if o.answer.conclusive]
    rest = [o.cpu_time for o in outcomes if not o.answer.conclusive]
    c = len(conclusive)
    if c == 0:
        return sum(rest)
    return sum(conclusive) / c + sum(rest) / (c + 1)


def _permutation_space(p, seed):
    if math.factorial(p) <= ENUMERATION_LIMIT:
        return itertools.permutations(range(p)), math.factorial(p), True
    rng = np.random.default_rng(seed)
    perms = (tuple(rng.permutation(p)) for _ in range(SAMPLE_COUNT))
    return perms, SAMPLE_COUNT, False


@lru_cache(maxsize=None)
def expected_random_ndcg(p, relevance=DEFAULT_RELEVANCE, seed=0):
    """Expectation of normalized nDCG over uniform permutations.

    By symmetry the value does not depend on the ground truth, so it is
    computed once per roster size against the identity.
    """
    if p == 1:
        return 1.0
    gains, discounts = _gains_and_discounts(p, relevance)
    ideal = _dcg_of_perm(range(p), gains, discounts)
    low = ndcg_lower_bound(p, relevance)
    perms, count, _ = _permutation_space(p, seed)
    total = sum(_dcg_of_perm(perm, gains, discounts) for perm in perms)
    raw_mean = total / count / ideal
    return (raw_mean - low) / (1.0 - low)


@lru_cache(maxsize=None)
def expected_random_mae(p, seed=0):
    """Expectation of rank MAE over uniform permutations."""
    perms, count, _ = _permutation_space(p, seed)
    total = sum(sum(abs(i - j) for i, j in enumerate(perm)) / p
                for perm in perms)
    return total / count


def expected_random_regression_error(costs):
    """E[mean_s |c_sigma(s) - c_s|] for a uniform random permutation sigma.

    sigma(s) is uniform over the roster, so the expectation collapses to
    the mean over all ordered pairs of absolute cost differences.
    """
    c = np.asarray(costs, dtype=float)
    return float(np.mean(np.abs(c[:, None] - c[None, :])))


def implied_costs(ranking, true_costs, roster):
    """Cost vector a pure-ranking strategy implicitly predicts.

    The solver ranked at position i is assigned the i-th smallest true
    cost, preserving the roster's component order.
    """
    sorted_costs = sorted(true_costs)
    position = {s: i for i, s in enumerate(ranking)}
    return [sorted_costs[position[s]] for s in roster]


# ---------------------------------------------------------------------------
# Table-style reports
# ---------------------------------------------------------------------------

@dataclass
class StrategyReportRow:
    strategy: str
    mean_time_s: float
    mean_time_conclusive_s: float | None
    ndcg: float
    r2: float | None
    mae: float
    reg_error: float


def _mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def strategy_report_row(strategy, table, cfg, relevance=DEFAULT_RELEVANCE):
    """Table-row metrics for one ranking strategy over a results table."""
    task_ids = table.task_ids
    truths = {tid: ground_truth_ranking(tid, table, cfg) for tid in task_ids}
    true_costs = {tid: cost_vector(table, tid, cfg) for tid in task_ids}
    p = len(table.roster)

    if isinstance(strategy, RandomStrategy):
        times = {tid: expected_random_time(table, tid) for tid in task_ids}
        conclusive = {tid: any(table.outcome(tid, s).answer.conclusive
                               for s in table.roster) for tid in task_ids}
        ndcg_mean = expected_random_ndcg(p, relevance)
        mae_mean = expected_random_mae(p)
        reg = _mean(expected_random_regression_error(true_costs[tid])
                    for tid in task_ids)
        r2 = None
    else:
        outcomes = replay_strategy(strategy, table)
        times = {tid: outcomes[tid].cumulative_time for tid in task_ids}
        conclusive = {tid: outcomes[tid].conclusive for tid in task_ids}
        rankings = {tid: strategy.ranking(tid) for tid in task_ids}
        ndcg_mean = _mean(ndcg_normalized(rankings[tid], truths[tid],
                                          relevance) for tid in task_ids)
        mae_mean = _mean(mae_rank(rankings[tid], truths[tid])
                         for tid in task_ids)
        if isinstance(strategy, LearnedStrategy):
            pred = np.array([strategy.costs(tid) for tid in task_ids])
            act = np.array([true_costs[tid] for tid in task_ids])
            reg = regression_error(pred, act)
            r2 = r2_score(pred, act) if len(task_ids) >= 2 else None
        else:
            pred = np.array([implied_costs(rankings[tid], true_costs[tid],
                                           table.roster)
                             for tid in task_ids])
            act = np.array([true_costs[tid] for tid in task_ids])
            reg = regression_error(pred, act)
            r2 = None

    conclusive_times = [times[tid] for tid in task_ids if conclusive[tid]]
    return StrategyReportRow(
        strategy=strategy.name,
        mean_time_s=_mean(times.values()),
        mean_time_conclusive_s=(_mean(conclusive_times)
                                if conclusive_times else None),
        ndcg=ndcg_mean,
        r2=r2,
        mae=mae_mean,
        reg_error=reg,
    )


def strategy_goal_outcomes(strategy, table):
    """Per-goal (answer, time) pairs for level aggregation.

    Random uses its exact expected time; its answer quality does not depend
    on the permutation (the walk only stops early on conclusive answers),
    so the best-utility recorded answer stands in.
    """
    if isinstance(strategy, RandomStrategy):
        result = {}
        for t in table.tasks:
            best = max((table.outcome(t.id, s).answer for s in table.roster),
                       key=lambda a: a.utility)
            result[t.id] = (best, expected_random_time(table, t.id))
        return result
    outcomes = replay_strategy(strategy, table)
    return {tid: (o.answer, o.cumulative_time) for tid, o in outcomes.items()}


def level_report(strategy, table, cfg=None):
    """File/theory/goal aggregation of one strategy's replay outcomes."""
    return aggregate_report(table, strategy_goal_outcomes(strategy, table),
                            cfg)
