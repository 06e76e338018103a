"""Syntactic feature extraction for proof tasks.

A task is one goal plus the lemmas declared before it in the same theory.
Each AST node increments exactly one of 20 counters; depth and mean
application arity are measured alongside, and six aggregate sums complete
the 28-entry feature vector fed to the learner.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .lang import Declaration, Document


# Node kind -> counter name. Every countable AST node maps to exactly one.
KIND_TO_COUNTER = {
    "and": "and", "or": "or", "not": "not", "let": "let", "cast": "as",
    "eps": "eps", "apply": "func",
    "ite": "if", "iff": "iff", "imp": "imp", "match": "case",
    "var": "var", "true": "true", "false": "false", "wildcard": "wild",
    "const-ref": "zero_ar", "int-lit": "int", "float-lit": "float",
    "forall": "forall", "exists": "exists",
}

# Canonical feature order: the 20 individual counters, depth and avg_arity,
# then the aggregate sums.
COUNTER_NAMES = (
    "and", "or", "not", "let", "as", "eps", "func",
    "if", "iff", "imp", "case",
    "var", "true", "false", "wild", "zero_ar", "int", "float",
    "forall", "exists",
)
AGGREGATE_NAMES = ("divisor", "conds", "ops", "leaves", "quants", "size")
FEATURE_NAMES = COUNTER_NAMES + ("depth", "avg_arity") + AGGREGATE_NAMES

_DIVISOR_COUNTERS = ("and", "or", "not", "let", "as", "eps", "func")
_COND_COUNTERS = ("if", "iff", "imp", "case")
_LEAF_COUNTERS = ("var", "true", "false", "wild", "zero_ar", "int", "float")
_QUANT_COUNTERS = ("forall", "exists")


@dataclass(frozen=True)
class FeatureVector:
    """Per-task counters plus the derived aggregate sums."""

    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(COUNTER_NAMES, 0))
    depth: int = 0
    avg_arity: float = 0.0

    def __post_init__(self):
        missing = set(COUNTER_NAMES) - set(self.counts)
        extra = set(self.counts) - set(COUNTER_NAMES)
        if missing or extra:
            raise ValueError(f"bad counter names: missing={sorted(missing)}"
                             f" extra={sorted(extra)}")

    @classmethod
    def zero(cls):
        return cls()

    @property
    def divisor(self):
        return sum(self.counts[n] for n in _DIVISOR_COUNTERS)

    @property
    def conds(self):
        return sum(self.counts[n] for n in _COND_COUNTERS)

    @property
    def ops(self):
        return self.divisor + self.conds

    @property
    def leaves(self):
        return sum(self.counts[n] for n in _LEAF_COUNTERS)

    @property
    def quants(self):
        return sum(self.counts[n] for n in _QUANT_COUNTERS)

    @property
    def size(self):
        return self.ops + self.leaves + self.quants


@dataclass(frozen=True)
class TaskScope:
    """A goal and the same-theory lemmas declared before it."""

    goal: Declaration
    context: tuple[Declaration, ...] = ()

    def __post_init__(self):
        if self.goal.kind != "goal":
            raise ValueError(f"task goal must be a goal declaration,"
                             f" got {self.goal.kind!r}")
        for decl in self.context:
            if decl.kind != "lemma":
                raise ValueError(f"task context must contain lemmas only,"
                                 f" got {decl.kind!r}")

    def trees(self):
        return [d.body for d in self.context] + [self.goal.body]


def _walk(term, counts, depth, state):
    """Count one node and recurse. Binder name lists are not nodes."""
    counts[KIND_TO_COUNTER[term.kind]] += 1
    state["depth"] = max(state["depth"], depth)
    if term.kind == "apply":
        state["applies"] += 1
        state["args"] += len(term.children)
    for child in term.children:
        _walk(child, counts, depth + 1, state)


def extract_task_features(scope: TaskScope) -> FeatureVector:
    """Traverse every tree in the task scope, counting node kinds.

    Depth is the longest root-to-leaf node count over the scope's trees;
    avg_arity is total application arguments over total applications.
    """
    counts = dict.fromkeys(COUNTER_NAMES, 0)
    state = {"depth": 0, "applies": 0, "args": 0}
    for tree in scope.trees():
        _walk(tree, counts, 1, state)
    avg_arity = state["args"] / state["applies"] if state["applies"] else 0.0
    return FeatureVector(counts=counts, depth=state["depth"],
                         avg_arity=avg_arity)


def task_id(file, theory, goal):
    return f"{file}:{theory}:{goal}"


def document_tasks(doc: Document):
    """All (task id, TaskScope) pairs of a document, in declaration order."""
    tasks = []
    for theory in doc.theories:
        lemmas = []
        for decl in theory.decls:
            if decl.kind == "goal":
                tasks.append((task_id(doc.path, theory.name, decl.name),
                              TaskScope(goal=decl, context=tuple(lemmas))))
            elif decl.kind == "lemma":
                lemmas.append(decl)
    return tasks


def extract_document_features(doc: Document):
    """One (task id, FeatureVector) per goal, in declaration order."""
    return [(tid, extract_task_features(scope))
            for tid, scope in document_tasks(doc)]


def to_array(v: FeatureVector):
    """Feature vector as a plain list in canonical FEATURE_NAMES order."""
    row = [v.counts[n] for n in COUNTER_NAMES]
    row.append(v.depth)
    row.append(v.avg_arity)
    row.extend([v.divisor, v.conds, v.ops, v.leaves, v.quants, v.size])
    return row


def from_array(row):
    """Inverse of to_array; the aggregate entries are checked, not stored."""
    if len(row) != len(FEATURE_NAMES):
        raise ValueError(f"expected {len(FEATURE_NAMES)} features,"
                         f" got {len(row)}")
    counts = {n: int(row[i]) for i, n in enumerate(COUNTER_NAMES)}
    v = FeatureVector(counts=counts, depth=int(row[20]),
                      avg_arity=float(row[21]))
    expected = [v.divisor, v.conds, v.ops, v.leaves, v.quants, v.size]
    got = [int(x) for x in row[22:]]
    if got != expected:
        raise ValueError(f"aggregate sums {got} do not match counters"
                         f" (expected {expected})")
    return v
