"""Frozen expectations for the bundled fixture corpus.

Derived independently of the package: a standalone sexp reader counted the
features, and a literal transcription of the scheduling pseudocode produced
the traces. Values here are literals on purpose; tests compare the package
against them, not the other way round.
"""

# Solver keys in results.csv roster order.
ROSTER = ["ares-1.0", "boreas-2.1", "castor-0.9", "delphi-3.2",
          "erebus-1.1", "fortuna-2.0", "glaucus-0.5", "hermes-4.0"]

# Conclusive-answer counts per solver, descending, ties by roster order.
STATIC_RANKING = ["castor-0.9", "ares-1.0", "hermes-4.0", "delphi-3.2",
                  "erebus-1.1", "boreas-2.1", "fortuna-2.0", "glaucus-0.5"]

TASK_IDS = [
    "alpha.lang:Arith:g_zero",
    "alpha.lang:Arith:g_chain",
    "alpha.lang:Logic:g_case",
    "beta.lang:Order:g_refl",
    "beta.lang:Order:g_max",
    "beta.lang:Order:g_let",
    "beta.lang:Order:g_eps",
    "beta.lang:Order:g_cast",
    "beta.lang:Order:g_lit",
    "gamma.lang:Deep:g_nest",
    "gamma.lang:Deep:g_wide",
    "delta.lang:Tiny:g_true",
]

# Rankings encoded by the two leaves of the fixture model (goal size <= 10
# routes left, otherwise right).
MODEL_LEFT_RANKING = ["castor-0.9", "hermes-4.0", "ares-1.0", "erebus-1.1",
                      "delphi-3.2", "glaucus-0.5", "boreas-2.1",
                      "fortuna-2.0"]
MODEL_RIGHT_RANKING = ["ares-1.0", "hermes-4.0", "delphi-3.2", "fortuna-2.0",
                       "castor-0.9", "boreas-2.1", "erebus-1.1",
                       "glaucus-0.5"]
RIGHT_LEAF_TASKS = {"alpha.lang:Arith:g_chain", "alpha.lang:Logic:g_case",
                    "gamma.lang:Deep:g_nest"}

# Scheduling-loop traces at timeout 10, pre-solve 1, fixture model and the
# static ranking above: task -> (answer, cumulative time, called solvers).
EXPECTED_TRACES = {
    "alpha.lang:Arith:g_zero": ("valid", 0.5, ["castor-0.9"]),
    "alpha.lang:Arith:g_chain": ("valid", 1.5, ["castor-0.9", "ares-1.0"]),
    "alpha.lang:Logic:g_case": ("unknown", 29.25,
                                ["castor-0.9", "ares-1.0", "hermes-4.0",
                                 "delphi-3.2", "fortuna-2.0", "castor-0.9",
                                 "boreas-2.1", "erebus-1.1", "glaucus-0.5"]),
    "beta.lang:Order:g_refl": ("valid", 4.0, ["castor-0.9", "castor-0.9"]),
    "beta.lang:Order:g_max": ("valid", 3.5, ["castor-0.9", "castor-0.9"]),
    "beta.lang:Order:g_let": ("valid", 4.5, ["castor-0.9", "castor-0.9"]),
    "beta.lang:Order:g_eps": ("valid", 3.0, ["castor-0.9", "castor-0.9"]),
    "beta.lang:Order:g_cast": ("valid", 20.75,
                               ["castor-0.9", "castor-0.9", "hermes-4.0",
                                "ares-1.0"]),
    "beta.lang:Order:g_lit": ("invalid", 3.0, ["castor-0.9", "castor-0.9"]),
    "gamma.lang:Deep:g_nest": ("valid", 2.5, ["castor-0.9", "ares-1.0"]),
    "gamma.lang:Deep:g_wide": ("timeout", 81.0,
                               ["castor-0.9", "castor-0.9", "hermes-4.0",
                                "ares-1.0", "erebus-1.1", "delphi-3.2",
                                "glaucus-0.5", "boreas-2.1", "fortuna-2.0"]),
    "delta.lang:Tiny:g_true": ("valid", 0.5, ["castor-0.9"]),
}

# Replay (no pre-solver) per strategy: task -> (answer, cumulative time).
BEST_REPLAY = {
    "alpha.lang:Arith:g_zero": ("valid", 0.25),
    "alpha.lang:Arith:g_chain": ("valid", 0.5),
    "alpha.lang:Logic:g_case": ("unknown", 28.25),
    "beta.lang:Order:g_refl": ("valid", 3.0),
    "beta.lang:Order:g_max": ("valid", 2.5),
    "beta.lang:Order:g_let": ("valid", 0.25),
    "beta.lang:Order:g_eps": ("valid", 0.5),
    "beta.lang:Order:g_cast": ("valid", 9.5),
    "beta.lang:Order:g_lit": ("invalid", 2.0),
    "gamma.lang:Deep:g_nest": ("valid", 1.5),
    "gamma.lang:Deep:g_wide": ("timeout", 80.0),
    "delta.lang:Tiny:g_true": ("valid", 0.25),
}
WORST_REPLAY = {
    "alpha.lang:Arith:g_zero": ("valid", 13.75),
    "alpha.lang:Arith:g_chain": ("valid", 24.5),
    "alpha.lang:Logic:g_case": ("unknown", 28.25),
    "beta.lang:Order:g_refl": ("valid", 33.5),
    "beta.lang:Order:g_max": ("valid", 33.0),
    "beta.lang:Order:g_let": ("valid", 5.0),
    "beta.lang:Order:g_eps": ("valid", 25.25),
    "beta.lang:Order:g_cast": ("valid", 34.5),
    "beta.lang:Order:g_lit": ("invalid", 26.75),
    "gamma.lang:Deep:g_nest": ("valid", 25.5),
    "gamma.lang:Deep:g_wide": ("timeout", 80.0),
    "delta.lang:Tiny:g_true": ("valid", 1.0),
}
LEARNED_REPLAY = {
    "alpha.lang:Arith:g_zero": ("valid", 0.5),
    "alpha.lang:Arith:g_chain": ("valid", 0.75),
    "alpha.lang:Logic:g_case": ("unknown", 28.25),
    "beta.lang:Order:g_refl": ("valid", 3.0),
    "beta.lang:Order:g_max": ("valid", 2.5),
    "beta.lang:Order:g_let": ("valid", 3.5),
    "beta.lang:Order:g_eps": ("valid", 2.0),
    "beta.lang:Order:g_cast": ("valid", 20.25),
    "beta.lang:Order:g_lit": ("invalid", 2.0),
    "gamma.lang:Deep:g_nest": ("valid", 1.5),
    "gamma.lang:Deep:g_wide": ("timeout", 80.0),
    "delta.lang:Tiny:g_true": ("valid", 0.5),
}

# Ground-truth ranking of one mixed-answer task (ascending cost at
# timeout 10; erebus valid@0.5 first, then valid ties at 2.0 broken by
# roster order, unknowns pay +10, failure@10 pays +20).
G_EPS_TRUTH = ["erebus-1.1", "ares-1.0", "castor-0.9", "hermes-4.0",
               "delphi-3.2", "fortuna-2.0", "boreas-2.1", "glaucus-0.5"]

# The one fixture goal proved by exactly one solver.
SINGLE_PROVER_TASK = "beta.lang:Order:g_max"

BEST_MEAN_TIME_ALL = 10.708333333333334
BEST_MEAN_TIME_CONCLUSIVE = 2.025
CONCLUSIVE_TASK_COUNT = 10

# choose_single at goal level: (proved, total, mean time over proved).
CHOOSE_SINGLE_GOAL = (10, 12, 2.025)
