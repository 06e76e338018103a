"""Portfolio solver toolkit: predict per-goal solver rankings from static
syntactic features and schedule solver calls in rank order."""

from .costs import (
    Answer,
    CostConfig,
    DataError,
    ResultsTable,
    SolverId,
    SolverOutcome,
    TaskKey,
    aggregate_report,
    calibrate_timeout,
    choose_single,
    cost,
    cost_vector,
    ground_truth_ranking,
    load_results,
    save_results,
    static_solver_ranking,
)
from .evaluation import (
    BestStrategy,
    FixedStrategy,
    LearnedStrategy,
    RandomStrategy,
    StrategyOutcome,
    WorstStrategy,
    cumulative_curve,
    dcg,
    mae_rank,
    ndcg_lower_bound,
    ndcg_normalized,
    r2_score,
    regression_error,
    replay_ranking,
    replay_strategy,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    TaskScope,
    extract_document_features,
    extract_task_features,
    from_array,
    to_array,
)
from .forest import (
    ForestModel,
    Hyperparameters,
    ModelFormatError,
    TrainingSet,
    TreeNode,
    deserialize,
    kfold_splits,
    load_model,
    make_training_set,
    predict,
    predict_ranking,
    sample_weight,
    save_model,
    serialize,
    train_forest,
    train_tree,
)
from .lang import (
    Declaration,
    Document,
    LangError,
    ParseError,
    Term,
    Theory,
    ValidationError,
    parse_document,
    parse_term,
    print_document,
    print_term,
    validate_document,
)
from .scheduler import (
    ConfigurationError,
    Measurement,
    MeasurementError,
    ProcessBackend,
    ProofTask,
    ProveResult,
    ReplayBackend,
    SchedulerConfig,
    SolverCommand,
    best_installed,
    document_tasks,
    load_backend_config,
    measure_mean_time,
    predict_only,
    prove,
    prove_with_threshold,
)

__version__ = "0.1.0"
