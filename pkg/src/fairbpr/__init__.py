"""Pairwise (BPR-MF) recommendation with group-weighted triplet sampling.

The package covers the full experimental loop: ingesting interaction logs and
provider-group labels, temporal splitting, sampling training triplets either
uniformly or with a cost parameter that re-weights one provider group,
training the factorization model, and measuring how utility (NDCG) and
provider-group exposure respond.
"""

from .data import (
    Catalog,
    DatasetSplit,
    GroupAssignment,
    Interaction,
    UNKNOWN_GROUP,
    catalog_stats,
    filter_min_interactions,
    load_interactions,
    load_provider_groups,
    temporal_split,
)
from .metrics import (
    MetricsReport,
    RankedList,
    fairness_report,
    group_slot_share,
    group_weighted_exposure,
    ndcg_at_k,
)
from .model import (
    FactorModel,
    TrainConfig,
    TrainResult,
    bpr_loss,
    bpr_step,
    init_model,
    load_checkpoint,
    recommend_top_k,
    save_checkpoint,
    score,
    train,
)
from .sampling import (
    ItemWeights,
    SamplerConfig,
    SamplingError,
    TargetSlot,
    Triplet,
    build_item_weights,
    generate_epoch_triplets,
    group_probability_vector,
    sample_and_audit,
    sample_triplet_cost_sensitive,
    sample_triplet_uniform,
    triplet_composition_audit,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog", "DatasetSplit", "GroupAssignment", "Interaction", "UNKNOWN_GROUP",
    "catalog_stats", "filter_min_interactions", "load_interactions",
    "load_provider_groups", "temporal_split",
    "MetricsReport", "RankedList", "fairness_report", "group_slot_share",
    "group_weighted_exposure", "ndcg_at_k",
    "FactorModel", "TrainConfig", "TrainResult", "bpr_loss", "bpr_step",
    "init_model", "load_checkpoint", "recommend_top_k", "save_checkpoint",
    "score", "train",
    "ItemWeights", "SamplerConfig", "SamplingError", "TargetSlot", "Triplet",
    "build_item_weights", "generate_epoch_triplets", "group_probability_vector",
    "sample_and_audit", "sample_triplet_cost_sensitive", "sample_triplet_uniform",
    "triplet_composition_audit",
]
