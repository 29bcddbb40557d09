"""Budget-constrained extraction of graph-convolutional node classifiers."""

from .datagen import NodePartition, SbmConfig, generate_sbm, split_partition
from .dataio import load_dataset, save_dataset
from .errors import (
    BudgetExceededError,
    ConfigError,
    DatasetFormatError,
    GraphExtractError,
    NumericalError,
    StructuralError,
    TrainingDivergedError,
    UsageError,
)
from .experiment import (
    ExperimentSpec,
    parse_spec,
    report,
    run_ablate,
    run_experiment,
    serialize_spec,
    spec_digest,
    sweep_gap,
)
from .extraction import (
    CycleRecord,
    EvalReport,
    ExtractionConfig,
    ExtractionState,
    QueryOracle,
    evaluate,
    init_query_set,
    performance_gap,
    run_ablation,
    run_extraction,
    stability_statistic,
    stability_sweep,
    train_final,
    train_target,
)
from .gcn import (
    GcnParams,
    TrainConfig,
    cross_entropy_loss,
    forward,
    init_params,
    load_params,
    loss_and_gradients,
    predict_embed,
    save_params,
    train,
)
from .graph import (
    FeatureMatrix,
    LabelVector,
    SparseGraph,
    audit_csr,
    build_csr,
    induced_subgraph,
    normalized_adjacency,
)
from .scoring import (
    DiversityConfig,
    PageRankConfig,
    PerturbationConfig,
    ScoreVector,
    diversity_scores,
    entropy_scores,
    kmeans_fit,
    load_scores,
    minmax_scale,
    pagerank,
    perturbation_scores,
    save_scores,
)
from .selection import (
    AgeConfig,
    RankTable,
    WeightSchedule,
    adaptive_weights,
    age_density_scores,
    age_select,
    percentile_transform,
    random_select,
    ranks_from_scores,
    select_top_k,
)

__version__ = "0.1.0"
