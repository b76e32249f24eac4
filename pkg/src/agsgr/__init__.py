"""Geo-social group recommendation.

Given a target user, pick a k-core group of friends by attention, rank
activity topics with an attention-weighted pairwise model, and return the
venues of that topic closest to the group under the max-distance
aggregate.
"""

from .attention import (
    AttentionWeights,
    AttentiveBPR,
    TrainingData,
    attention_scores,
    influence,
    make_training_data,
    select_group,
    select_topic,
    topic_preferences,
)
from .evaluation import MetricReport, ndcg_at_k, precision_at_h, precision_at_k, run_experiment
from .exceptions import (
    AGSGRError,
    ConfigError,
    EmptyGroup,
    EmptyResult,
    FormatError,
    NoTopic,
    NoTrainingData,
    UnknownTopic,
    UnknownUser,
)
from .graph import (
    CheckIn,
    GeoSocialNetwork,
    Poi,
    build_social_graph,
    connected_components,
    core_decomposition,
    is_valid_group,
    k_core_subgraph,
)
from .groups import CandidateGroup, CandidatePool, Query, get_candidate_groups, social_group_category_query
from .ingest import GroupEvent, extract_implicit_groups, load_network, split
from .recommender import GeoSocialGroupRecommender, Recommendation
from .spatial import AnnResult, Circle, SpatialIndex, adist, brute_force_ann, minimum_enclosing_circle, spa_df

__version__ = "0.1.0"

__all__ = [
    "AGSGRError",
    "AnnResult",
    "AttentionWeights",
    "AttentiveBPR",
    "CandidateGroup",
    "CandidatePool",
    "CheckIn",
    "Circle",
    "ConfigError",
    "EmptyGroup",
    "EmptyResult",
    "FormatError",
    "GeoSocialGroupRecommender",
    "GeoSocialNetwork",
    "GroupEvent",
    "MetricReport",
    "NoTopic",
    "NoTrainingData",
    "Poi",
    "Query",
    "Recommendation",
    "SpatialIndex",
    "TrainingData",
    "UnknownTopic",
    "UnknownUser",
    "adist",
    "attention_scores",
    "brute_force_ann",
    "build_social_graph",
    "connected_components",
    "core_decomposition",
    "extract_implicit_groups",
    "get_candidate_groups",
    "influence",
    "is_valid_group",
    "k_core_subgraph",
    "load_network",
    "make_training_data",
    "minimum_enclosing_circle",
    "ndcg_at_k",
    "precision_at_h",
    "precision_at_k",
    "run_experiment",
    "select_group",
    "select_topic",
    "social_group_category_query",
    "spa_df",
    "split",
    "topic_preferences",
]
