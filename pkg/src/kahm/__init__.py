"""Kernel affine hull machines for gradient-free collaborative classification."""
from .core import (
    KahmModel,
    build_kahm,
    kahm_distance,
    kahm_map,
    norm_bound,
)
from .federation import (
    GlobalModel,
    LabeledDataset,
    assumption_score,
    build_global_model,
    classify_global,
    classify_local,
    predict_global,
    predict_local,
)
from .partitioned import PartitionedKahm, build_partitioned, partitioned_distance

__all__ = [
    "GlobalModel",
    "KahmModel",
    "LabeledDataset",
    "PartitionedKahm",
    "assumption_score",
    "build_global_model",
    "build_kahm",
    "build_partitioned",
    "classify_global",
    "classify_local",
    "kahm_distance",
    "kahm_map",
    "norm_bound",
    "partitioned_distance",
    "predict_global",
    "predict_local",
]
