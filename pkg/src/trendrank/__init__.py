"""Temporal popularity prediction toolkit: windowing, similarity, contrastive
triplet training, scoring with templated explanations, and top-K evaluation."""

from .config import ConfigError, PipelineConfig, load_config
from .contrastive import (
    ProjectionHead,
    combined_loss,
    info_nce,
    init_head,
    project,
    supervised_ce,
    train_head,
)
from .evaluation import EvalRun, MetricsReport, evaluate, hit_rate_at_k, jaccard_at_k, ndcg_at_k
from .ingest import (
    DatasetSplit,
    InteractionRecord,
    ItemMetadata,
    PopularitySeries,
    Sample,
    WindowConfig,
    build_series,
    make_samples,
    parse_interactions,
    window_index,
)
from .mining import CandidatePool, Triplet, mine_triplets, similarity_matrix
from .scoring import ExplanationRecord, Prediction, ScorerSpec, explain, rank_window, score
from .similarity import (
    SimilarityWeights,
    change_rate,
    dtw_distance,
    embed_metadata,
    sim_latest,
    sim_meta,
    sim_total,
    sim_trend,
)

__version__ = "0.1.0"

__all__ = [
    "CandidatePool",
    "ConfigError",
    "DatasetSplit",
    "EvalRun",
    "ExplanationRecord",
    "InteractionRecord",
    "ItemMetadata",
    "MetricsReport",
    "PipelineConfig",
    "PopularitySeries",
    "Prediction",
    "ProjectionHead",
    "Sample",
    "ScorerSpec",
    "SimilarityWeights",
    "Triplet",
    "WindowConfig",
    "build_series",
    "change_rate",
    "combined_loss",
    "dtw_distance",
    "embed_metadata",
    "evaluate",
    "explain",
    "hit_rate_at_k",
    "info_nce",
    "init_head",
    "jaccard_at_k",
    "load_config",
    "make_samples",
    "mine_triplets",
    "ndcg_at_k",
    "parse_interactions",
    "project",
    "rank_window",
    "score",
    "sim_latest",
    "sim_meta",
    "sim_total",
    "sim_trend",
    "similarity_matrix",
    "supervised_ce",
    "train_head",
    "window_index",
]
